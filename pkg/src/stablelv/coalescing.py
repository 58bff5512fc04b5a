"""Coalescing-walk constants: escape probabilities and collision functionals.

Transient kernels admit three lattice constants built from hitting events of
independent/coalescing walks started from 0, e, e' with (e, e') ~ p x p:

* ``gamma_e``  -- escape probability sum_e p(e) P^e(tau_0 = infinity),
* ``beta``     -- P(the (e, e') pair meets, while neither ever meets 0),
* ``delta``    -- P(neither e nor e' ever meets 0).

Monte Carlo runs can only reach a finite horizon T; the truncation bias decays
like T^(1 - d/alpha), so estimates at a horizon schedule are combined by a
weighted least-squares fit of P(T) = gamma + c T^(1-d/alpha), with the
standard error propagated through the fit weights from the per-replica
indicator covariance.

For the recurrent critical kernel (d = alpha = 1) the analogous object is the
slowly vanishing q_T = P(the pair meets by T while 0 stays unmet), for which
(log T) q_T has a finite limit.  Two estimators are provided: the plateau of
(log T) q_T over a horizon schedule, and a direct one that replaces the
"0 stays unmet after the pair meets" tail by its potential-kernel value
pi sigma2 a(y - x) evaluated at the first pair-collision geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stablelv import _engine as eng
from stablelv.estimates import Estimate, mc_estimate, run_chunked, spawn_seeds
from stablelv.kernels import StepKernel
from stablelv.walks import _engine_pack, green_zero, potential_pareto1

__all__ = [
    "gamma_e_oracle",
    "escape_indicators",
    "estimate_gamma_e",
    "triple_times",
    "estimate_beta_delta",
    "estimate_qT",
    "estimate_gamma_star",
    "GammaEResult",
    "BetaDeltaResult",
    "GammaStarResult",
]


def gamma_e_oracle(kernel: StepKernel) -> float:
    """Exact escape probability 1/G(0) for a transient kernel.

    First-step analysis gives sum_e p(e) P^e(never hit 0) = 1/G(0): the number
    of visits to the start is geometric with success probability 1/G(0), and
    the escape weight is rate-independent.
    """
    if not kernel.transient:
        raise ValueError("escape probability vanishes for recurrent kernels")
    return 1.0 / green_zero(kernel)


def _extrapolated(indicators: np.ndarray, horizons, kappa: float, seed: int) -> Estimate:
    """WLS fit of mean(T) = gamma + c T^-kappa; returns gamma with its SE."""
    horizons = np.asarray(horizons, dtype=float)
    n = indicators.shape[0]
    A = np.column_stack([np.ones(horizons.size), horizons**-kappa])
    # row of the pseudo-inverse that extracts the intercept
    w = np.linalg.pinv(A)[0]
    means = indicators.mean(axis=0)
    value = float(w @ means)
    cov = np.cov(indicators, rowvar=False)
    se = float(math.sqrt(max(w @ np.atleast_2d(cov) @ w, 0.0) / n))
    return Estimate(value, se, n, seed)


@dataclass
class GammaEResult:
    estimate: Estimate
    horizons: tuple
    curve: list  # per-horizon Estimates (biased upward, decreasing in T)
    kappa: float


def escape_indicators(
    kernel: StepKernel,
    nu: float,
    horizons,
    nsamples: int,
    seed: int,
    parallelism: int = 1,
) -> np.ndarray:
    """Per-replica indicators {tau_0 > T} for each horizon (walk from a p-step)."""
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    tmax = float(max(horizons))
    seeds = spawn_seeds(seed, nsamples)
    times = np.zeros(nsamples)

    def worker(lo, hi):
        eng.walk_hitting_from_pstep(
            seeds[lo:hi], fam, q, j, tail_p, alpha, kernel.d, nu, tmax, times[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    return (times[:, None] > np.asarray(horizons, dtype=float)[None, :]).astype(float)


def estimate_gamma_e(
    kernel: StepKernel,
    horizons=(1e3, 1e4, 1e5),
    nsamples: int = 100_000,
    seed: int = 0,
    parallelism: int = 1,
) -> GammaEResult:
    """Escape probability by horizon-extrapolated Monte Carlo (transient only)."""
    if not kernel.transient:
        raise ValueError("gamma_e requires a transient kernel")
    ind = escape_indicators(kernel, 1.0, horizons, nsamples, seed, parallelism)
    kappa = kernel.d / kernel.alpha - 1.0
    est = _extrapolated(ind, horizons, kappa, seed)
    curve = [mc_estimate(ind[:, i], seed) for i in range(len(horizons))]
    return GammaEResult(est, tuple(horizons), curve, kappa)


def triple_times(
    kernel: StepKernel,
    nu: float,
    tmax: float,
    nsamples: int,
    seed: int,
    parallelism: int = 1,
) -> np.ndarray:
    """Coalescence times (tau_ee', tau_0e, tau_0e') of walkers from {0, e, e'}.

    Entries > tmax encode 'not merged by tmax'.
    """
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nsamples)
    out = np.zeros((nsamples, 3))

    def worker(lo, hi):
        eng.coalescing_triple_times(
            seeds[lo:hi], fam, q, j, tail_p, alpha, kernel.d, nu, tmax, out[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    return out


@dataclass
class BetaDeltaResult:
    beta: Estimate
    delta: Estimate
    horizons: tuple
    beta_curve: list
    delta_curve: list


def estimate_beta_delta(
    kernel: StepKernel,
    horizons=(1e3, 1e4, 1e5),
    nsamples: int = 100_000,
    seed: int = 0,
    parallelism: int = 1,
) -> BetaDeltaResult:
    """Pair-collision functionals beta <= delta for a transient kernel."""
    if not kernel.transient:
        raise ValueError("beta/delta require a transient kernel")
    times = triple_times(kernel, 1.0, float(max(horizons)), nsamples, seed, parallelism)
    hs = np.asarray(horizons, dtype=float)
    t_ee, t_0e, t_0ep = times[:, 0:1], times[:, 1:2], times[:, 2:3]
    ind_delta = ((t_0e > hs) & (t_0ep > hs)).astype(float)
    ind_beta = ((t_ee <= hs) & (t_0e > hs) & (t_0ep > hs)).astype(float)
    kappa = kernel.d / kernel.alpha - 1.0
    beta = _extrapolated(ind_beta, hs, kappa, seed)
    delta = _extrapolated(ind_delta, hs, kappa, seed)
    return BetaDeltaResult(
        beta,
        delta,
        tuple(horizons),
        [mc_estimate(ind_beta[:, i], seed) for i in range(hs.size)],
        [mc_estimate(ind_delta[:, i], seed) for i in range(hs.size)],
    )


def estimate_qT(
    kernel: StepKernel,
    T: float,
    nsamples: int,
    seed: int = 0,
    parallelism: int = 1,
    times: np.ndarray | None = None,
) -> Estimate:
    """q_T = P(pair meets by T, 0 unmet by T) for the critical recurrent kernel."""
    if kernel.transient:
        raise ValueError("q_T is a recurrent-kernel quantity")
    if times is None:
        times = triple_times(kernel, 1.0, T, nsamples, seed, parallelism)
    ind = ((times[:, 0] <= T) & (times[:, 1] > T) & (times[:, 2] > T)).astype(float)
    return mc_estimate(ind, seed)


@dataclass
class GammaStarResult:
    plateau: list  # (T, Estimate of (log T) q_T)
    direct: Estimate
    undecided_fraction: float
    inconclusive: bool

    @property
    def value(self) -> float:
        return self.direct.value


def estimate_gamma_star(
    kernel: StepKernel,
    schedule=(1e3, 3e3, 1e4),
    nsamples: int = 200_000,
    seed: int = 0,
    parallelism: int = 1,
    direct_tmax: float = 1e4,
) -> GammaStarResult:
    """Limit of (log T) q_T, by plateau and by the direct potential estimator.

    The direct estimator runs three *independent* walks from {0, e, e'} until
    the (e, e') pair first collides (with no earlier 0-collision), at
    positions x = B^0, y = B^e = B^e'; each such event contributes
    pi sigma2 a(y - x), the potential-kernel weight of the event that 0 is
    never met afterwards, rescaled by the stable local time normalization.
    """
    if kernel.transient or kernel.alpha != 1.0 or kernel.d != 1:
        raise ValueError("gamma_star requires the critical d = alpha = 1 kernel")
    times = triple_times(
        kernel, 1.0, float(max(schedule)), nsamples, seed, parallelism
    )
    plateau = []
    for T in schedule:
        q = estimate_qT(kernel, float(T), nsamples, seed, times=times)
        plateau.append(
            (float(T), Estimate(q.value * math.log(T), q.se * math.log(T), q.n, seed))
        )
    # flatness check at 2 SE between consecutive schedule points
    inconclusive = False
    for (ta, ea), (tb, eb) in zip(plateau[:-1], plateau[1:]):
        if abs(ea.value - eb.value) > 2.0 * ea.combined_se(eb):
            inconclusive = True

    fam, q_, j_, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed + 1, nsamples)
    coll = np.zeros((nsamples, 4))

    def worker(lo, hi):
        eng.independent_first_collision(
            seeds[lo:hi], fam, q_, j_, tail_p, alpha, 1.0, direct_tmax, coll[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    status = coll[:, 0]
    z = np.abs(coll[status == 1.0, 3] - coll[status == 1.0, 2]).astype(np.int64)
    weights = np.zeros(nsamples)
    weights[status == 1.0] = math.pi * kernel.sigma2 * potential_pareto1(z)
    direct = mc_estimate(weights, seed + 1)
    undecided = float(np.mean(status == -1.0))
    return GammaStarResult(plateau, direct, undecided, inconclusive)
