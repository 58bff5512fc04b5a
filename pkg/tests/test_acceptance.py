"""Quantitative acceptance suite.

Each test pins one end-to-end property of the toolkit at a stated tolerance
and sample size: exact-chain agreement for the simulators, convergence of the
rescaled-walk analytics to their stable-limit constants, the martingale
decomposition of the rescaled measure-valued process, coupling monotonicity,
and reproducibility of the experiment artifacts.  Seeds are fixed, so every
statistical verdict here is deterministic.

Two tests are expected to fail at their pinned tolerances and are kept
failing on purpose (see the repository notes outside this package): the
logarithmically slow limits behind them need horizons orders of magnitude
beyond the stated runtime budgets, and both tests print the measured values
so the discrepancy is reported rather than patched.
"""

import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from stablelv import coalescing as co
from stablelv import dynamics as dy
from stablelv import experiments as ex
from stablelv import martingale as mg
from stablelv import oracle as orc
from stablelv import walks as wk
from stablelv.kernels import make_kernel

PAR1 = make_kernel("pareto", 1, 1.0)
PAR07 = make_kernel("pareto", 1, 0.7)
NN1 = make_kernel("nearest-neighbor", 1, 2)
NN3 = make_kernel("nearest-neighbor", 3, 2)

CONFIG_DIR = Path(ex.__file__).parent / "configs"


# 1 ------------------------------------------------------------- duality


def test_pair_duality_exact_on_oracle_grid():
    """20-case exact grid: voter one-sets vs coalescing-dual hit laws, < 1e-8."""
    cases = [([1], 0.3), ([1], 1.0), ([1], 3.0), ([0, 2], 0.5), ([0, 2], 2.0)]
    worst = 0.0
    for kernel in (NN1, PAR1):
        for L in (4, 5):
            for A, t in cases:
                _, _, diff = orc.check_duality(kernel, L, A, [0, 1], t, tol=1e-11)
                worst = max(worst, diff)
    assert worst < 1e-8


# 2 ------------------------------------------------- simulator law exactness


def test_simulator_marginals_match_exact_chain():
    """Voter / biased / competition one-time marginals on the 5-torus within
    4 SE of the uniformized chain at 1e6 replicas."""
    L, t, nrep = 5, 0.8, 1_000_000
    init = [0, 2]
    mask0 = sum(1 << s for s in init)

    def max_z(counts, dist):
        z = 0.0
        for s in range(1 << L):
            p = dist[s]
            se = max(math.sqrt(p * (1 - p) / nrep), 1e-9)
            z = max(z, abs(counts[s] / nrep - p) / se)
        return z

    path = dy.run_voter(PAR1, 1.0, init, [t], nrep, 61, 1, torus_L=L)
    model = orc.TorusModel(PAR1, L, model="voter", nu=1.0)
    dist, _ = orc.exact_distribution(model, mask0, t, 1e-12)
    assert max_z(np.bincount(path.state[:, 0], minlength=1 << L), dist) < 4.0

    path = dy.run_biased_voter(PAR1, 1.0, 0.5, 1, init, [t], nrep, 63, 1, torus_L=L)
    model = orc.TorusModel(PAR1, L, model="biased", nu=1.0, b=0.5, side=1)
    dist, _ = orc.exact_distribution(model, mask0, t, 1e-12)
    assert max_z(np.bincount(path.state[:, 0], minlength=1 << L), dist) < 4.0

    params = dy.LVParams(N=4.0, theta0=2.0, theta1=-1.0, regime="recurrent-critical")
    path = dy.run_lotka_volterra(PAR1, params, init, [t], nrep, 62, 1, torus_L=L)
    model = orc.TorusModel(
        PAR1, L, model="lv", N=4.0, alpha0=params.alpha0, alpha1=params.alpha1
    )
    dist, _ = orc.exact_distribution(model, mask0, t, 1e-12)
    assert max_z(np.bincount(path.state[:, 0], minlength=1 << L), dist) < 4.0


def test_frozen_configuration_flip_intensity():
    """Birth intensity at a frozen unoccupied site within 4 SE of its rate."""
    params = dy.LVParams(N=8.0, theta0=1.5, theta1=-1.0, regime="recurrent-critical")
    audit = dy.frozen_flip_audit(
        PAR1, params, [-2, 0, 2], target=1, nevents=500_000, seed=64
    )
    assert abs(audit["z"]) < 4.0


# 3 ----------------------------------------------------- domain of attraction


def test_symbol_converges_to_stable_limit():
    """n (1 - psi(eta/b(n))) at n=1e6 within 2% of sigma2 |eta|^alpha."""
    etas = np.linspace(0.25, 2.0, 8)
    for kernel in (PAR1, PAR07):
        vals = np.asarray(kernel.da_limit(etas, 1e6))
        limits = kernel.sigma2 * etas**kernel.alpha
        assert np.max(np.abs(vals - limits) / limits) < 0.02


# 4 ----------------------------------------------------- local limit ladder


def test_transition_profile_error_ladder():
    """sup_x |b(t) p_t(0,x) - p_1(x/b(t))| strictly decreasing over the t
    ladder, with one uniform constant C bounding b(t) p_t(0,x) throughout."""
    for kernel in (PAR1, PAR07):
        sups, cs = [], []
        for t in (1e2, 1e3, 1e4):
            _, scaled, dens, cert = wk.llt_profile(kernel, t)
            sups.append(float(np.max(np.abs(scaled - dens))) + cert)
            cs.append(float(np.max(scaled)))
        assert sups[0] > sups[1] > sups[2]
        C = max(cs)
        assert all(c <= C for c in cs)
        # the single constant is tight: the ladder's maxima agree to 2%
        assert C / min(cs) < 1.02
        assert abs(C - float(np.max(dens))) < 0.01


# 5 ----------------------------------------------------- escape probability


def test_escape_probability_matches_green_oracle():
    """Horizon-extrapolated Monte Carlo vs the exact Green-function value,
    within 3 SE, horizon 1e5 with 1e5 samples, for both transient kernels."""
    for kernel, seed in ((PAR07, 41), (NN3, 42)):
        res = co.estimate_gamma_e(
            kernel, horizons=(1e3, 1e4, 1e5), nsamples=100_000, seed=seed
        )
        oracle = co.gamma_e_oracle(kernel)
        assert abs(res.estimate.value - oracle) < 3.0 * res.estimate.se, (
            f"{kernel.kernel_id}: MC {res.estimate.value} +- {res.estimate.se} "
            f"vs oracle {oracle}"
        )


# 6 --------------------------------------------- pair-meeting constant


def test_pair_meeting_constant_two_estimators():
    """(log T) q_T flatness at 2 SE over T in {1e3, 3e3, 1e4} and agreement
    with the direct potential-kernel estimator within 3 combined SE.

    Expected to fail honestly: (log T) q_T carries a ~ gamma* (1 - c / log T)
    correction with c ~ 3.4, so at T = 1e4 the curve still climbs ~8 SE per
    schedule step and sits ~27% below the direct estimator, which the
    1/log T-extrapolated curve confirms to 1%.  Flat-to-2-SE behaviour would
    need T beyond ~1e15.  The discrepancy is reported, not patched.
    """
    res = co.estimate_gamma_star(
        PAR1, schedule=(1e3, 3e3, 1e4), nsamples=200_000, seed=81
    )
    msg = (
        "plateau " + ", ".join(f"T={T:g}: {e.value:.4f}+-{e.se:.4f}" for T, e in res.plateau)
        + f"; direct {res.direct.value:.4f}+-{res.direct.se:.4f}"
    )
    for (_, ea), (_, eb) in zip(res.plateau[:-1], res.plateau[1:]):
        assert abs(eb.value - ea.value) < 2.0 * ea.combined_se(eb), msg
    last = res.plateau[-1][1]
    assert abs(last.value - res.direct.value) < 3.0 * last.combined_se(res.direct), msg


# 7 ------------------------------------------------- hitting & range ladders


def test_hitting_and_range_scaling_constants():
    """H(t) log t and R(t) log t / t: monotone toward pi sigma2 = 3, within
    15% at t = 1e5.

    The hitting clause is expected to fail honestly: H(t) log t = 3 - c/log t
    with c ~ 6, so it is 17.8% low at t = 1e5 and reaching 15% needs t ~ 1e6+
    with ~1e6 samples, far beyond the runtime budget.  The range clause
    passes.  Measured values are in the assertion message.
    """
    target = math.pi * PAR1.sigma2
    ts = [1e3, 1e4, 1e5]
    h = [
        e.value * math.log(t)
        for t, e in zip(ts, wk.hitting_tail(PAR1, 1.0, ts, 100_000, 31))
    ]
    r = [
        wk.mean_range(PAR1, t, 20_000, 32 + i).value * math.log(t) / t
        for i, t in enumerate(ts)
    ]
    assert h[0] < h[1] < h[2] <= target * 1.05
    assert r[0] < r[1] < r[2] <= target * 1.05
    assert abs(r[2] - target) / target < 0.15, f"range ladder {r}"
    assert abs(h[2] - target) / target < 0.15, f"hitting ladder {h} (target {target})"


# 8 ----------------------------------------------------------- voter survival


def test_voter_survival_asymptotics_and_conditional_law():
    """Transient kernel: p_t gamma_e t within 0.25 of 1 at t=1e3 (1e5
    replicas) and KS(p_t |xi_t| given survival, Exp(1)) < 0.1.  Critical
    kernel: p_t t / log t approaches 1/(pi sigma2) over t in {1e2, 1e3}."""
    res = dy.survival_probability(PAR07, 1.0, [100.0, 300.0, 1000.0], 100_000, 51)
    ge = co.gamma_e_oracle(PAR07)
    prods = [e.value * ge * t for t, e in zip(res.times, res.p_t)]
    assert abs(prods[-1] - 1.0) < 0.25, f"p_t gamma_e t ladder {prods}"
    scaled = res.survivor_masses[-1].astype(float) * res.p_t[-1].value
    assert scaled.size > 100
    assert stats.kstest(scaled, "expon").statistic < 0.1

    res = dy.survival_probability(PAR1, 1.0, [100.0, 1000.0], 100_000, 66)
    target = 1.0 / (math.pi * PAR1.sigma2)
    vals = [e.value * t / math.log(t) for t, e in zip(res.times, res.p_t)]
    assert abs(vals[1] - target) < abs(vals[0] - target), f"ladder {vals}"
    assert abs(vals[1] - target) / target < 0.15


# 9 -------------------------------------------------------- martingale problem


def test_martingale_mean_qv_and_drift_recurrent():
    """Critical-regime decomposition at N=1e3: ensemble mean of M within
    3 SE of 0 and quadratic variation within 25% of 2 pi sigma2 int X(phi^2)."""
    params = dy.LVParams(N=1000.0, theta0=1.0, theta1=-1.0, regime="recurrent-critical")
    init = dy.SpinConfiguration.block(20).sites
    for phi, seed in (
        (mg.TestFunction("constant"), 101),
        (mg.TestFunction("plane-wave", eta=2.0), 102),
    ):
        rep = mg.martingale_diagnostic(
            PAR1, params, phi, init, 0.3, 200, seed, 1, theta_reference=2.0
        )
        assert abs(rep.mean_M.value) < 3.0 * rep.mean_M.se
        assert abs(rep.qv_ratio - 1.0) < 0.25, (phi.phi_id, rep.qv_ratio)


def test_martingale_mean_qv_and_drift_transient():
    """Transient decomposition at N=200, theta=(1, 0): mean M within 3 SE of
    0, quadratic variation within 20% of 2 gamma_e int X(phi^2), and drift
    within 3 combined SE of (theta0 beta - theta1 delta) int X(phi)."""
    params = dy.LVParams(N=200.0, theta0=1.0, theta1=0.0, regime="transient")
    init = dy.SpinConfiguration.block(20).sites
    rep = mg.martingale_diagnostic(
        PAR07, params, mg.TestFunction("constant"), init, 0.5, 600, 201, 1,
        theta_reference=1.0,
    )
    assert abs(rep.mean_M.value) < 3.0 * rep.mean_M.se
    assert abs(rep.qv_ratio - 1.0) < 0.20, rep.qv_ratio
    assert abs(rep.b_reference - 2.0 * co.gamma_e_oracle(PAR07)) < 1e-9

    bd = co.estimate_beta_delta(
        PAR07, horizons=(300.0, 1000.0, 3000.0), nsamples=50_000, seed=205
    )
    ref = params.theta0 * bd.beta.value - params.theta1 * bd.delta.value
    iphi = rep.mean_int_phi
    pred = ref * iphi.value
    se = math.sqrt(
        rep.drift.se**2
        + ((params.theta0 * bd.beta.se) * iphi.value) ** 2
        + ((params.theta1 * bd.delta.se) * iphi.value) ** 2
        + (ref * iphi.se) ** 2
    )
    assert abs(rep.drift.value - pred) < 3.0 * se, (rep.drift, pred, se)


# 10 ------------------------------------------------------ coupling and bounds


def test_coupling_ordering_over_ten_million_events():
    """Pathwise sandwich assertion never fires across >= 1e7 coupled events
    (the engine aborts the run on any violation)."""
    params = dy.LVParams(N=100.0, theta0=0.5, theta1=-0.5, regime="recurrent-critical")
    cp = dy.run_coupled_triple(
        PAR1, params, dy.SpinConfiguration.block(10), [0.5, 1.0, 1.5], 800, 71
    )
    assert int(cp.events.sum()) >= 10_000_000
    assert np.all(cp.lower <= cp.middle) and np.all(cp.middle <= cp.upper)


def test_mass_moment_bounds_exact_and_empirical():
    """Biased-voter mass moment bounds: exact on the small-torus chain, and
    within 4 SE (one-sided) empirically on the infinite lattice."""
    for kernel in (NN1, PAR1):
        orc.check_moment_bounds(kernel, 5, [0, 2], b=0.4, t=1.0)

    b, t, m0 = 0.3, 1.0, 5
    path = dy.run_biased_voter(
        PAR1, 1.0, b, 1, dy.SpinConfiguration.block(m0), [t], 20_000, 73
    )
    mass = path.mass[:, 0].astype(float)
    bound1 = math.exp(b * t) * m0
    assert mass.mean() <= bound1 + 4.0 * mass.std(ddof=1) / math.sqrt(mass.size)
    m2 = mass**2
    bound2 = math.exp(2 * b * t) * (m0**2 + (2.0 + b) * t * m0)
    assert m2.mean() <= bound2 + 4.0 * m2.std(ddof=1) / math.sqrt(m2.size)


# 11 --------------------------------------------------------------- determinism


def test_artifacts_reproducible_across_parallelism(tmp_path):
    """Identical CSV bytes for repeated (config, seed) runs at two
    parallelism degrees."""
    blobs = []
    for tag, par in (("a", 1), ("b", 3), ("c", 1)):
        out = tmp_path / tag
        cfg = ex.load_config(CONFIG_DIR / "lv-run.cfg", out_override=out)
        cfg.parallelism = par
        ex.run_experiment(cfg)
        blobs.append((out / "mass_path.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


# 12 -------------------------------------------------------- plots (secondary)


def test_figure_rendering_smoke(tmp_path):
    """Secondary component: shipped figure specs render from fixture CSVs and
    schema mismatches exit nonzero.  Skipped when the plotting package is not
    installed; everything above runs without it."""
    pytest.importorskip("plots")
    from plots import figspec, render  # noqa: F401

    fixtures = Path(render.__file__).parent / "fixtures"
    specs = sorted(fixtures.glob("*.spec"))
    assert specs, "plotting package ships no sample figure specs"
    for spec in specs:
        proc = subprocess.run(
            [sys.executable, "-m", "plots.cli", "render", str(spec)],
            capture_output=True,
            text=True,
            cwd=tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
