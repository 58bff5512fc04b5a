"""Named experiments with deterministic CSV/JSON artifacts.

Each experiment takes a flat key=value config (dotted keys allowed, ``#``
comments, mandatory ``experiment`` and ``seed``), runs the relevant
simulation or analysis, and writes CSV files plus a JSON sidecar carrying
provenance (build id, config hash, seed) and every estimate as
(value, SE, n).  Outputs are fully determined by (config, seed), including
under different parallelism degrees.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stablelv import coalescing as co
from stablelv import dynamics as dy
from stablelv import martingale as mg
from stablelv import oracle as orc
from stablelv import walks as wk
from stablelv.estimates import Estimate, mc_estimate
from stablelv.kernels import KernelConfigError, StepKernel, make_kernel

__all__ = [
    "ConfigError",
    "CheckFailure",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "list_experiments",
    "run_experiment",
    "REGISTRY",
]

OUTPUT_ROOT_ENV = "STABLELV_OUT"


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


class CheckFailure(RuntimeError):
    """A verification experiment found a violated invariant."""


# ----------------------------------------------------------------- config


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; keys may be dotted."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    raw: dict
    out_dir: Path
    parallelism: int = 1
    _used: set = field(default_factory=set, repr=False)

    def get(self, key, cast=str, default=None, required=False):
        if key in self.raw:
            self._used.add(key)
            try:
                return cast(self.raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"key {key!r}: cannot parse {self.raw[key]!r}") from exc
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default

    def floats(self, key, default=None):
        val = self.get(key, str, None)
        if val is None:
            return list(default) if default is not None else None
        try:
            return [float(v) for v in val.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected comma-separated floats") from exc

    def kernel(self, prefix="kernel", required=True) -> StepKernel | None:
        fam = self.get(f"{prefix}.family", str, None)
        if fam is None:
            if required:
                raise ConfigError(f"missing required key {prefix!r}.family")
            return None
        d = self.get(f"{prefix}.d", int, 1)
        alpha = self.get(f"{prefix}.alpha", float, 1.0)
        try:
            return make_kernel(fam, d, alpha)
        except KernelConfigError as exc:
            raise ConfigError(f"key {prefix}.family: {exc}") from exc

    def lv_params(self) -> dy.LVParams:
        try:
            return dy.LVParams(
                N=self.get("params.N", float, required=True),
                theta0=self.get("params.theta0", float, 0.0),
                theta1=self.get("params.theta1", float, 0.0),
                regime=self.get("params.regime", str, "recurrent-critical"),
            )
        except ValueError as exc:
            raise ConfigError(f"params.*: {exc}") from exc


def load_config(path, out_override=None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = parse_config(path.read_text())
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    if "seed" not in raw:
        raise ConfigError("missing required key 'seed' (no wall-clock default)")
    name = raw["experiment"]
    try:
        seed = int(raw["seed"])
    except ValueError as exc:
        raise ConfigError(f"key 'seed': not an integer: {raw['seed']!r}") from exc
    root = out_override or os.environ.get(OUTPUT_ROOT_ENV) or raw.get("out", ".")
    cfg = ExperimentConfig(
        name=name,
        seed=seed,
        raw=raw,
        out_dir=Path(root),
        parallelism=int(raw.get("parallelism", "1")),
    )
    cfg._used.update(("experiment", "seed", "out", "parallelism"))
    return cfg


# ----------------------------------------------------------------- artifacts


def build_id() -> str:
    try:
        return (
            subprocess.run(
                ["git", "describe", "--always", "--dirty"],
                capture_output=True,
                text=True,
                cwd=Path(__file__).parent,
                timeout=10,
            ).stdout.strip()
            or "unknown"
        )
    except OSError:
        return "unknown"


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, Estimate):
        return {"value": obj.value, "SE": obj.se, "n": obj.n}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_sidecar(cfg: ExperimentConfig, summary: dict, artifacts: list) -> Path:
    path = cfg.out_dir / f"{cfg.name}.json"
    payload = {
        "experiment": cfg.name,
        "build_id": build_id(),
        "config_hash": config_hash(cfg.raw),
        "seed": cfg.seed,
        "artifacts": [str(a) for a in artifacts],
        "summary": _jsonable(summary),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


# ----------------------------------------------------------------- registry


REGISTRY: dict = {}


def _experiment(name):
    def deco(fn):
        REGISTRY[name] = fn
        return fn

    return deco


def list_experiments():
    return sorted(REGISTRY)


def run_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.name not in REGISTRY:
        raise ConfigError(
            f"unknown experiment {cfg.name!r}; known: {', '.join(list_experiments())}"
        )
    return REGISTRY[cfg.name](cfg)


# ------------------------------------------------------------- experiments


@_experiment("kernel-check")
def _kernel_check(cfg: ExperimentConfig) -> dict:
    """Domain-of-attraction ladder: n (1 - psi(eta/b(n))) against the
    calibrated stable symbol sigma^2 |eta|^alpha on an eta grid."""
    etas = cfg.floats("etas", default=(0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0))
    n = cfg.get("n", float, 1e6)
    specs = cfg.get("kernels", str, "pareto:1:1.0,pareto:1:0.7").split(",")
    rows = []
    worst = 0.0
    for spec in specs:
        fam, d, alpha = spec.strip().split(":")
        kernel = make_kernel(fam, int(d), float(alpha))
        sigma2 = getattr(kernel, "sigma2", float(kernel.da_limit(1.0, 1e8)))
        for eta in etas:
            val = float(kernel.da_limit(eta, n))
            limit = sigma2 * abs(eta) ** kernel.alpha
            rel = abs(val - limit) / limit
            worst = max(worst, rel)
            rows.append([kernel.kernel_id, eta, n, val, limit, rel])
    out = write_csv(
        cfg.out_dir / "kernel_check.csv",
        ["kernel", "eta", "n", "da_value", "limit", "rel_error"],
        rows,
    )
    summary = {"max_rel_error": worst}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("llt")
def _llt(cfg: ExperimentConfig) -> dict:
    """Local-limit ladder: sup |b(t) p_t(0,x) - p_1(x/b(t))| and the uniform
    constant C(t) = b(t) max_x p_t(0,x) over increasing t."""
    kernel = cfg.kernel()
    ts = cfg.floats("t_list", default=(1e2, 1e3, 1e4))
    rows = []
    for t in ts:
        xs, scaled, dens, cert = wk.llt_profile(kernel, t)
        rows.append(
            [kernel.kernel_id, t, float(np.max(np.abs(scaled - dens))),
             float(np.max(scaled)), cert]
        )
    out = write_csv(
        cfg.out_dir / "llt.csv",
        ["kernel", "t", "sup_error", "c_uniform", "certificate"],
        rows,
    )
    summary = {"sup_errors": [r[2] for r in rows], "c_uniform": [r[3] for r in rows]}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("hitting")
def _hitting(cfg: ExperimentConfig) -> dict:
    """Hitting-tail ladder H(t) log t for the critical recurrent kernel."""
    kernel = cfg.kernel()
    ts = cfg.floats("t_list", default=(1e2, 1e3))
    nsamples = cfg.get("nsamples", int, 20_000)
    ests = wk.hitting_tail(kernel, 1.0, ts, nsamples, cfg.seed, cfg.parallelism)
    rows = [
        [t, e.value, e.se, e.n, e.value * math.log(t), e.se * math.log(t)]
        for t, e in zip(ts, ests)
    ]
    out = write_csv(
        cfg.out_dir / "hitting.csv",
        ["t", "H", "SE", "n", "H_logt", "SE_logt"],
        rows,
    )
    summary = {"H_logt": [Estimate(r[4], r[5], nsamples, cfg.seed) for r in rows]}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("potential")
def _potential(cfg: ExperimentConfig) -> dict:
    """Potential kernel a(x): quadrature table vs closed-form decomposition."""
    kernel = cfg.kernel()
    window = cfg.get("window", int, 64)
    table = wk.potential_kernel(kernel, window)
    xs = np.arange(0, window + 1)
    rows = []
    use_decomp = kernel.family == "pareto" and kernel.alpha == 1.0
    worst = 0.0
    for x in xs:
        direct = table.a(int(x))
        decomp = float(wk.potential_pareto1(int(x))) if use_decomp else math.nan
        if use_decomp:
            worst = max(worst, abs(direct - decomp))
        rows.append([int(x), direct, decomp])
    out = write_csv(
        cfg.out_dir / "potential.csv", ["x", "a_quadrature", "a_decomposed"], rows
    )
    summary = {"max_method_diff": worst, "error_bound": table.error_bound}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("range")
def _range(cfg: ExperimentConfig) -> dict:
    """Mean-range ladder R(t) log t / t for the critical recurrent kernel."""
    kernel = cfg.kernel()
    ts = cfg.floats("t_list", default=(1e2, 1e3))
    nsamples = cfg.get("nsamples", int, 20_000)
    rows = []
    ests = {}
    for i, t in enumerate(ts):
        e = wk.mean_range(kernel, t, nsamples, cfg.seed + i, cfg.parallelism)
        scale = math.log(t) / t
        rows.append([t, e.value, e.se, e.n, e.value * scale, e.se * scale])
        ests[t] = Estimate(e.value * scale, e.se * scale, e.n, e.seed)
    out = write_csv(
        cfg.out_dir / "range.csv",
        ["t", "R", "SE", "n", "R_logt_over_t", "SE_scaled"],
        rows,
    )
    summary = {"R_logt_over_t": ests}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("constants-transient")
def _constants_transient(cfg: ExperimentConfig) -> dict:
    """Transient-regime limit constants: gamma_e (MC vs Green oracle) and
    the drift constants beta, delta."""
    kernel = cfg.kernel()
    nsamples = cfg.get("nsamples", int, 20_000)
    horizons = tuple(cfg.floats("horizons", default=(300.0, 1000.0, 3000.0)))
    ge = co.estimate_gamma_e(
        kernel, horizons=horizons, nsamples=nsamples, seed=cfg.seed,
        parallelism=cfg.parallelism,
    )
    oracle = co.gamma_e_oracle(kernel)
    bd = co.estimate_beta_delta(
        kernel, horizons=horizons, nsamples=nsamples, seed=cfg.seed + 1,
        parallelism=cfg.parallelism,
    )
    rows = [
        ["gamma_e", ge.estimate.value, ge.estimate.se, ge.estimate.n, oracle],
        ["beta", bd.beta.value, bd.beta.se, bd.beta.n, math.nan],
        ["delta", bd.delta.value, bd.delta.se, bd.delta.n, math.nan],
    ]
    out = write_csv(
        cfg.out_dir / "constants.csv", ["name", "value", "SE", "n", "oracle"], rows
    )
    summary = {
        "gamma_e": ge.estimate,
        "gamma_e_oracle": oracle,
        "beta": bd.beta,
        "delta": bd.delta,
    }
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("gamma-star")
def _gamma_star(cfg: ExperimentConfig) -> dict:
    """Recurrent-regime constant gamma*: (log T) q_T plateau and the direct
    potential-kernel estimator."""
    kernel = cfg.kernel()
    nsamples = cfg.get("nsamples", int, 30_000)
    schedule = tuple(cfg.floats("schedule", default=(1e3, 3e3, 1e4)))
    res = co.estimate_gamma_star(
        kernel, schedule=schedule, nsamples=nsamples, seed=cfg.seed,
        parallelism=cfg.parallelism,
    )
    rows = [["plateau", T, e.value, e.se, e.n] for T, e in res.plateau]
    rows.append(["direct", math.nan, res.direct.value, res.direct.se, res.direct.n])
    out = write_csv(
        cfg.out_dir / "gamma_star.csv", ["estimator", "T", "value", "SE", "n"], rows
    )
    summary = {
        "plateau": {str(T): e for T, e in res.plateau},
        "direct": res.direct,
        "undecided_fraction": res.undecided_fraction,
    }
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("voter-survival")
def _voter_survival(cfg: ExperimentConfig) -> dict:
    """Survival probability of the voter model from a single 1, plus the
    conditional mass samples p_t |xi_t| given survival at the largest time."""
    kernel = cfg.kernel()
    ts = cfg.floats("t_list", default=(1e2, 1e3))
    nreplicas = cfg.get("nreplicas", int, 20_000)
    nu = cfg.get("nu", float, 1.0)
    res = dy.survival_probability(
        kernel, nu, ts, nreplicas, cfg.seed, cfg.parallelism,
        site_cap=cfg.get("site_cap", int, 1_000_000),
    )
    rows = [
        [t, e.value, e.se, e.n, res.capped_fraction]
        for t, e in zip(res.times, res.p_t)
    ]
    out = write_csv(
        cfg.out_dir / "survival.csv", ["t", "p_t", "SE", "n", "capped_fraction"], rows
    )
    p_last = res.p_t[-1].value
    cond = res.survivor_masses[-1].astype(float) * p_last
    out2 = write_csv(
        cfg.out_dir / "conditional_mass.csv",
        ["t", "scaled_mass"],
        [[res.times[-1], v] for v in cond],
    )
    summary = {"p_t": {str(t): e for t, e in zip(res.times, res.p_t)},
               "capped_fraction": res.capped_fraction,
               "n_survivors_last": int(cond.size)}
    write_sidecar(cfg, summary, [out, out2])
    return summary


@_experiment("lv-run")
def _lv_run(cfg: ExperimentConfig) -> dict:
    """Lotka-Volterra ensemble; rescaled total-mass paths X_t(1)."""
    kernel = cfg.kernel()
    params = cfg.lv_params()
    ts = cfg.floats("t_list", default=(0.25, 0.5, 0.75, 1.0))
    nreplicas = cfg.get("nreplicas", int, 100)
    block = cfg.get("initial_block", int, 10)
    path = dy.run_lotka_volterra(
        kernel, params, dy.SpinConfiguration.block(block), ts, nreplicas,
        cfg.seed, cfg.parallelism, site_cap=cfg.get("site_cap", int, 1_000_000),
    )
    rows = [
        [r, t, path.mass[r, j] / params.nprime]
        for r in range(nreplicas)
        for j, t in enumerate(path.times)
    ]
    out = write_csv(cfg.out_dir / "mass_path.csv", ["replica", "t", "X1"], rows)
    summary = {
        "mean_final_X1": mc_estimate(path.mass[:, -1] / params.nprime, cfg.seed),
        "capped": int(path.capped.sum()),
    }
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("coupling-audit")
def _coupling_audit(cfg: ExperimentConfig) -> dict:
    """Monotone triple run; per-time ensemble means of the three masses.
    Any pathwise ordering violation aborts the experiment."""
    kernel = cfg.kernel()
    params = cfg.lv_params()
    ts = cfg.floats("t_list", default=(0.02, 0.05, 0.1))
    nreplicas = cfg.get("nreplicas", int, 8)
    block = cfg.get("initial_block", int, 3)
    cp = dy.run_coupled_triple(
        kernel, params, dy.SpinConfiguration.block(block), ts, nreplicas,
        cfg.seed, cfg.parallelism,
        theta_bar=cfg.get("theta_bar", float, None),
    )
    rows = [
        [t, float(cp.lower[:, j].mean()), float(cp.middle[:, j].mean()),
         float(cp.upper[:, j].mean())]
        for j, t in enumerate(cp.times)
    ]
    out = write_csv(
        cfg.out_dir / "coupling_audit.csv", ["t", "lower", "middle", "upper"], rows
    )
    summary = {"total_events": int(cp.events.sum()), "ordering_violations": 0}
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("mp-diag")
def _mp_diag(cfg: ExperimentConfig) -> dict:
    """Martingale-problem diagnostics for a list of test functions."""
    kernel = cfg.kernel()
    params = cfg.lv_params()
    t_end = cfg.get("t", float, 0.25)
    nreplicas = cfg.get("nreplicas", int, 200)
    block = cfg.get("initial_block", int, 7)
    etas = cfg.floats("etas", default=())
    theta_ref = cfg.get("theta_reference", float, None)
    phis = [mg.TestFunction("constant")] + [
        mg.TestFunction("plane-wave", eta=e) for e in etas
    ]
    init = dy.SpinConfiguration.block(block).sites
    rows = []
    summary = {}
    for phi in phis:
        rep = mg.martingale_diagnostic(
            kernel, params, phi, init, t_end, nreplicas, cfg.seed,
            cfg.parallelism, theta_reference=theta_ref,
            site_cap=cfg.get("site_cap", int, 200_000),
        )
        r = rep.csv_row()
        rows.append([r["N"], r["t"], r["phi_id"], r["mean_M"], r["se_M"],
                     r["qv_ratio"], r["drift_ratio"]])
        summary[phi.phi_id] = {
            "mean_M": rep.mean_M,
            "qv_ratio": rep.qv_ratio,
            "drift_ratio": rep.drift_ratio,
            "b_reference": rep.b_reference,
        }
    out = write_csv(
        cfg.out_dir / "mp_diag.csv",
        ["N", "t", "phi_id", "mean_M", "se_M", "qv_ratio", "drift_ratio"],
        rows,
    )
    write_sidecar(cfg, summary, [out])
    return summary


@_experiment("oracle-suite")
def _oracle_suite(cfg: ExperimentConfig) -> dict:
    """Exact-CTMC verification sweep: duality grid, moment bounds,
    domination orderings.  Violations raise CheckFailure."""
    rows = []
    worst = 0.0
    kernels = [make_kernel("nearest-neighbor", 1, 2), make_kernel("pareto", 1, 1.0)]
    for kernel in kernels:
        for L in (4, 5):
            for A in ([1], [0, 2]):
                for t in (0.3, 1.0, 3.0):
                    _, _, diff = orc.check_duality(kernel, L, A, [0, 1], t, tol=1e-11)
                    worst = max(worst, diff)
                    rows.append(
                        ["duality", f"{kernel.kernel_id};L={L};A={A};t={t}", diff]
                    )
    if worst > 1e-8:
        raise CheckFailure(f"duality residual {worst:.3e} exceeds 1e-8")
    for kernel in kernels:
        rep = orc.check_moment_bounds(kernel, 5, [0, 2], b=0.4, t=1.0)
        for key in ("slack_first", "slack_second", "slack_coarse"):
            rows.append(["moment-bound", f"{kernel.kernel_id};{key}", rep[key]])
            if rep[key] < -1e-9:
                raise CheckFailure(f"moment bound {key} violated for {kernel.kernel_id}")
        doms = orc.check_domination(kernel, 5, [0, 2], b=0.4, t=0.5, events=[[0]])
        for lo, mid, up in doms:
            rows.append(["domination", kernel.kernel_id, up - lo])
            if lo > mid + 1e-8 or mid > up + 1e-8:
                raise CheckFailure(f"domination ordering violated for {kernel.kernel_id}")
    out = write_csv(cfg.out_dir / "oracle_suite.csv", ["check", "case", "value"], rows)
    summary = {"worst_duality_residual": worst, "cases": len(rows)}
    write_sidecar(cfg, summary, [out])
    return summary
