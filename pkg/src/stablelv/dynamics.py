"""Event-driven interacting-particle simulators on Z and small tori.

The voter model, 1-/0-biased voter models, rate-N Lotka-Volterra models and
the monotone triple coupling all run on sparse 1-sets with exact flip rates
(see ``_dynamics`` for the proposal/thinning mechanics).  Rescaling by N only
enters observables: positions stay on the integer lattice, the measure-valued
observable is X_t(phi) = (1/N') sum_x xi_t(x) phi(x / b_N).

Rate conventions for the Lotka-Volterra family with drift parameters
(theta_0, theta_1):

* transient kernels:          N' = N,          b_N = N^{1/alpha}
* critical recurrent kernel:  N' = N / log N,  b_N = N

and alpha_i = 1 + theta_i / N'.  The coupled triple sandwiches the
Lotka-Volterra process between a 0-biased lower and 1-biased upper voter
model at rates nu_N = N - theta_bar log N, b_N^coupling = 2 theta_bar log N,
which dominate whenever theta_bar >= max(|theta_0|, |theta_1|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from stablelv import _dynamics as _dyn
from stablelv.estimates import Estimate, mc_estimate, run_chunked, spawn_seeds
from stablelv.kernels import StepKernel
from stablelv.oracle import wrapped_kernel
from stablelv.walks import _engine_pack

__all__ = [
    "SpinConfiguration",
    "LVParams",
    "EmpiricalPath",
    "CoupledPaths",
    "SurvivalResult",
    "run_voter",
    "run_biased_voter",
    "run_lotka_volterra",
    "run_coupled_triple",
    "frozen_flip_audit",
    "rescaled_observe",
    "survival_probability",
]

_PTAB_RADIUS = 4096


def _p_table(kernel: StepKernel) -> np.ndarray:
    """Step probabilities p(z) for 0 <= z <= radius (symmetric kernel)."""
    z = np.arange(_PTAB_RADIUS + 1, dtype=float)
    if kernel.family == "nearest-neighbor":
        out = np.zeros(z.size)
        out[1] = 0.5
        return out
    out = np.zeros(z.size)
    out[1:] = kernel.C * z[1:] ** (-1.0 - kernel.alpha)
    return out


class SpinConfiguration:
    """Finite set of 1-sites on Z (or a torus), the state of one replica."""

    def __init__(self, sites=()):
        arr = np.unique(np.asarray(list(sites), dtype=np.int64))
        self._sites = arr

    @classmethod
    def block(cls, n: int) -> "SpinConfiguration":
        """Contiguous block of n ones roughly centered at the origin."""
        if n < 0:
            raise ValueError("block size must be nonnegative")
        lo = -(n // 2)
        return cls(np.arange(lo, lo + n, dtype=np.int64))

    @property
    def sites(self) -> np.ndarray:
        return self._sites

    @property
    def mass(self) -> int:
        return int(self._sites.size)

    def __contains__(self, x) -> bool:
        return bool(np.isin(np.int64(x), self._sites))

    def __len__(self) -> int:
        return self.mass

    def __repr__(self) -> str:
        return f"SpinConfiguration(mass={self.mass})"


@dataclass(frozen=True)
class LVParams:
    """Lotka-Volterra rate parameters in scaling-limit (N-rescaled) form."""

    N: float
    theta0: float = 0.0
    theta1: float = 0.0
    regime: str = "transient"

    def __post_init__(self):
        if self.regime not in ("transient", "recurrent-critical"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.N <= 1:
            raise ValueError("N must exceed 1")
        if self.alpha0 < 0 or self.alpha1 < 0:
            raise ValueError("alpha_i = 1 + theta_i/N' must be nonnegative")

    @property
    def nprime(self) -> float:
        if self.regime == "transient":
            return float(self.N)
        return float(self.N) / math.log(self.N)

    @property
    def alpha0(self) -> float:
        return 1.0 + self.theta0 / self.nprime

    @property
    def alpha1(self) -> float:
        return 1.0 + self.theta1 / self.nprime

    def check_kernel(self, kernel: StepKernel) -> None:
        if self.regime == "recurrent-critical":
            if kernel.transient or kernel.d != 1 or kernel.alpha != 1.0:
                raise ValueError(
                    "recurrent-critical regime requires the d = alpha = 1 kernel"
                )
        elif not kernel.transient:
            raise ValueError("transient regime requires a transient kernel")

    def spatial_scale(self, kernel: StepKernel) -> float:
        """b_N: lattice lengths per unit of rescaled space."""
        if self.regime == "transient":
            return float(self.N) ** (1.0 / kernel.alpha)
        return float(self.N)


@dataclass
class EmpiricalPath:
    """Ensemble of piecewise-constant mass paths sampled on a fixed grid."""

    times: np.ndarray
    mass: np.ndarray  # (nreplicas, ntimes)
    capped: np.ndarray  # (nreplicas,) 1 where the mass cap froze the path
    seed: int
    state: np.ndarray | None = None  # torus bitmasks, same shape as mass
    event_log: list | None = None  # per replica (times, sites, deltas)
    err: np.ndarray | None = field(default=None, repr=False)
    initial: np.ndarray | None = field(default=None, repr=False)

    @property
    def nreplicas(self) -> int:
        return self.mass.shape[0]

    def mean_mass(self, j: int) -> Estimate:
        return mc_estimate(self.mass[:, j].astype(float), self.seed)


@dataclass
class CoupledPaths:
    times: np.ndarray
    lower: np.ndarray
    middle: np.ndarray
    upper: np.ndarray
    events: np.ndarray
    seed: int


def _prepare(kernel, initial, sample_times, torus_L):
    if kernel.d != 1:
        raise ValueError("dynamics runs are one-dimensional")
    if isinstance(initial, SpinConfiguration):
        init = initial.sites
    else:
        init = np.unique(np.asarray(list(initial), dtype=np.int64))
    if torus_L:
        init = np.unique(init % torus_L)
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be a nonempty increasing grid")
    if times[0] < 0:
        raise ValueError("sample times must be nonnegative")
    return init, times


def run_voter(
    kernel: StepKernel,
    nu: float,
    initial,
    sample_times,
    nreplicas: int = 1,
    seed: int = 0,
    parallelism: int = 1,
    torus_L: int = 0,
    site_cap: int = 1_000_000,
) -> EmpiricalPath:
    """Exact-law voter model; |xi_t| (and torus states) on the sample grid."""
    return run_biased_voter(
        kernel, nu, 0.0, 0, initial, sample_times, nreplicas, seed,
        parallelism, torus_L, site_cap,
    )


def run_biased_voter(
    kernel: StepKernel,
    nu: float,
    b: float,
    side: int,
    initial,
    sample_times,
    nreplicas: int = 1,
    seed: int = 0,
    parallelism: int = 1,
    torus_L: int = 0,
    site_cap: int = 1_000_000,
) -> EmpiricalPath:
    """Biased voter model: births at (nu+b) f1 (side=+1) or deaths at
    (nu+b) f0 (side=-1); side=0 requires b=0 and is the plain voter model."""
    if b < 0 or nu <= 0:
        raise ValueError("need nu > 0 and b >= 0")
    if side not in (-1, 0, 1) or (side == 0 and b != 0.0):
        raise ValueError("side must be +-1, or 0 with b = 0")
    init, times = _prepare(kernel, initial, sample_times, torus_L)
    fam, q, j, tp, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nreplicas)
    mass = np.zeros((nreplicas, times.size), dtype=np.int64)
    state = np.zeros((nreplicas, times.size), dtype=np.int64)
    flags = np.zeros(nreplicas, dtype=np.int64)

    def worker(lo, hi):
        _dyn.biased_voter_run(
            seeds[lo:hi], fam, q, j, tp, alpha, nu, b, side, torus_L,
            init, times, mass[lo:hi], state[lo:hi], flags[lo:hi], site_cap,
        )

    run_chunked(worker, nreplicas, parallelism)
    return EmpiricalPath(
        times, mass, flags, seed, state if torus_L else None, initial=init
    )


def run_lotka_volterra(
    kernel: StepKernel,
    params: LVParams,
    initial,
    sample_times,
    nreplicas: int = 1,
    seed: int = 0,
    parallelism: int = 1,
    torus_L: int = 0,
    site_cap: int = 1_000_000,
    log_events: int = 0,
) -> EmpiricalPath:
    """Exact-law rate-N Lotka-Volterra run (thinned voter proposals).

    ``log_events`` > 0 records up to that many flips (time, site, +-1) per
    replica for event-grid post-processing.
    """
    if not torus_L:
        params.check_kernel(kernel)
    init, times = _prepare(kernel, initial, sample_times, torus_L)
    fam, q, j, tp, alpha = _engine_pack(kernel)
    ptab = _p_table(kernel)
    pl_tab = wrapped_kernel(kernel, torus_L)[0] if torus_L else np.zeros(1)
    seeds = spawn_seeds(seed, nreplicas)
    mass = np.zeros((nreplicas, times.size), dtype=np.int64)
    state = np.zeros((nreplicas, times.size), dtype=np.int64)
    errs = np.zeros(nreplicas, dtype=np.int64)
    ev_t = np.zeros((nreplicas, log_events))
    ev_s = np.zeros((nreplicas, log_events), dtype=np.int64)
    ev_d = np.zeros((nreplicas, log_events), dtype=np.int64)
    ev_n = np.zeros(nreplicas, dtype=np.int64)
    a0m1 = params.alpha0 - 1.0
    a1m1 = params.alpha1 - 1.0

    def worker(lo, hi):
        _dyn.lv_run(
            seeds[lo:hi], fam, q, j, tp, alpha, kernel.C, ptab,
            float(params.N), a0m1, a1m1, torus_L, pl_tab, init, times,
            mass[lo:hi], state[lo:hi], errs[lo:hi], site_cap,
            ev_t[lo:hi], ev_s[lo:hi], ev_d[lo:hi], ev_n[lo:hi],
        )

    run_chunked(worker, nreplicas, parallelism)
    if np.any(errs == 1):
        raise AssertionError(
            "thinning acceptance probability left [0, 1]; rate algebra bug"
        )
    log = None
    if log_events:
        log = [
            (ev_t[r, : ev_n[r]].copy(), ev_s[r, : ev_n[r]].copy(), ev_d[r, : ev_n[r]].copy())
            for r in range(nreplicas)
        ]
    capped = (errs == 2).astype(np.int64)
    return EmpiricalPath(
        times, mass, capped, seed, state if torus_L else None, log, errs, init
    )


def run_coupled_triple(
    kernel: StepKernel,
    params: LVParams,
    initial,
    sample_times,
    nreplicas: int = 1,
    seed: int = 0,
    parallelism: int = 1,
    theta_bar: float | None = None,
    max_events: int = 10**9,
    site_cap: int = 1_000_000,
) -> CoupledPaths:
    """Monotone triple: 0-biased voter <= Lotka-Volterra <= 1-biased voter.

    One shared proposal stream drives all three; the pointwise inclusion is
    asserted after every event and a violation aborts the run (it would mean
    the coupling thresholds are wrong, not a statistical fluctuation).
    """
    if params.regime != "recurrent-critical":
        raise ValueError("the coupled triple is a recurrent-critical construction")
    params.check_kernel(kernel)
    if theta_bar is None:
        theta_bar = max(abs(params.theta0), abs(params.theta1))
    if theta_bar < max(abs(params.theta0), abs(params.theta1)):
        raise ValueError("theta_bar must dominate |theta_0|, |theta_1|")
    N = float(params.N)
    logN = math.log(N)
    nu = N - theta_bar * logN
    b = 2.0 * theta_bar * logN
    if nu <= 0:
        raise ValueError("N too small for this theta_bar (nu_N <= 0)")
    init, times = _prepare(kernel, initial, sample_times, 0)
    fam, q, j, tp, alpha = _engine_pack(kernel)
    ptab = _p_table(kernel)
    seeds = spawn_seeds(seed, nreplicas)
    mass3 = np.zeros((nreplicas, times.size, 3), dtype=np.int64)
    aborts = np.zeros(nreplicas, dtype=np.int64)
    events = np.zeros(nreplicas, dtype=np.int64)
    a0m1 = params.alpha0 - 1.0
    a1m1 = params.alpha1 - 1.0

    def worker(lo, hi):
        _dyn.coupled_run(
            seeds[lo:hi], fam, q, j, tp, alpha, kernel.C, ptab,
            nu, b, N, a0m1, a1m1, init, times,
            mass3[lo:hi], aborts[lo:hi], events[lo:hi], max_events, site_cap,
        )

    run_chunked(worker, nreplicas, parallelism)
    if np.any(aborts >= 0):
        r = int(np.argmax(aborts >= 0))
        raise AssertionError(
            f"coupling ordering violated in replica {r} at event {aborts[r]}"
        )
    return CoupledPaths(
        times, mass3[:, :, 0], mass3[:, :, 1], mass3[:, :, 2], events, seed
    )


def frozen_flip_audit(
    kernel: StepKernel,
    params: LVParams,
    config,
    target: int,
    nevents: int = 1_000_000,
    seed: int = 0,
) -> dict:
    """Measure the realized 0 -> 1 proposal flow at one empty site.

    The configuration is frozen: birth proposals are drawn by the production
    code path but never applied, and acceptances at ``target`` are counted.
    Per proposal the exact acceptance probability is
    f1(target)/|xi| * (1 + (alpha_0 - 1) f1(target)) / max(1, alpha_0),
    which corresponds to flip intensity N f1 (1 + (alpha_0 - 1) f1).
    Returns counts plus the binomial z-score against the exact probability.
    """
    config = config if isinstance(config, SpinConfiguration) else SpinConfiguration(config)
    if target in config:
        raise ValueError("audit target must be an empty site")
    fam, q, j, tp, alpha = _engine_pack(kernel)
    ptab = _p_table(kernel)
    a0m1 = params.alpha0 - 1.0
    count = _dyn.frozen_lv_audit(
        np.uint64(spawn_seeds(seed, 1)[0]), fam, q, j, tp, alpha,
        kernel.C, ptab, a0m1, config.sites, np.int64(target), nevents,
    )
    f1 = float(np.sum(kernel.eval_many(config.sites - target)))
    p_exact = f1 / config.mass * (1.0 + a0m1 * f1) / max(1.0, 1.0 + a0m1)
    se = math.sqrt(p_exact * (1.0 - p_exact) / nevents)
    rate = count / nevents
    return {
        "count": int(count),
        "nevents": nevents,
        "expected_probability": p_exact,
        "observed_probability": rate,
        "z": (rate - p_exact) / se if se > 0 else 0.0,
        "flip_intensity": float(params.N) * f1 * (1.0 + a0m1 * f1),
    }


def rescaled_observe(
    path: EmpiricalPath, params: LVParams, kernel: StepKernel, phis, initial=None
):
    """X_t(phi) = (1/N') sum_x xi_t(x) phi(x / b_N) along logged event paths.

    Requires ``log_events`` for nontrivial test functions; configurations are
    replayed from ``initial`` (the same set the run started from) through the
    event log and evaluated at the path's sample times.  phis may include the
    string "mass" for phi = 1 (no replay needed).
    Returns {phi_index: array (nreplicas, ntimes)}.
    """
    nprime = params.nprime
    bN = params.spatial_scale(kernel)
    if initial is None:
        initial = path.initial if path.initial is not None else ()
    init = initial.sites if isinstance(initial, SpinConfiguration) else np.asarray(
        list(initial), dtype=np.int64
    )
    out = {}
    needs_replay = any(not (isinstance(p, str) and p == "mass") for p in phis)
    if needs_replay and path.event_log is None:
        raise ValueError("rescaled_observe with nontrivial phi needs log_events")
    for ip, phi in enumerate(phis):
        if isinstance(phi, str) and phi == "mass":
            out[ip] = path.mass / nprime
            continue
        acc0 = float(sum(phi(x / bN) for x in init))
        vals = np.zeros((path.nreplicas, path.times.size))
        for r, (ts, ss, ds) in enumerate(path.event_log):
            cursor = 0
            acc = acc0
            for tcur, scur, dcur in zip(ts, ss, ds):
                while cursor < path.times.size and path.times[cursor] < tcur:
                    vals[r, cursor] = acc
                    cursor += 1
                acc += float(dcur) * float(phi(scur / bN))
            while cursor < path.times.size:
                vals[r, cursor] = acc
                cursor += 1
        out[ip] = vals / nprime
    return out


@dataclass
class SurvivalResult:
    times: np.ndarray
    p_t: list  # Estimates of P(|xi_t| > 0)
    capped_fraction: float
    survivor_masses: list  # per time: masses of surviving replicas
    nreplicas: int
    seed: int


def survival_probability(
    kernel: StepKernel,
    spec,
    sample_times,
    nreplicas: int,
    seed: int = 0,
    parallelism: int = 1,
    site_cap: int = 1_000_000,
) -> SurvivalResult:
    """Survival of the process started from a single 1 at the origin.

    ``spec`` is either a voter rate (float nu) or LVParams.  Capped replicas
    (mass cap reached) are counted as surviving, making p_t a lower bound;
    the capped fraction is reported alongside.
    """
    if isinstance(spec, LVParams):
        path = run_lotka_volterra(
            kernel, spec, [0], sample_times, nreplicas, seed, parallelism,
            site_cap=site_cap,
        )
    else:
        path = run_voter(
            kernel, float(spec), [0], sample_times, nreplicas, seed,
            parallelism, site_cap=site_cap,
        )
    alive = (path.mass > 0) | (path.capped[:, None] > 0)
    ests = [mc_estimate(alive[:, j].astype(float), seed) for j in range(path.times.size)]
    masses = [path.mass[alive[:, j], j].copy() for j in range(path.times.size)]
    return SurvivalResult(
        path.times, ests, float(np.mean(path.capped > 0)), masses, nreplicas, seed
    )
