"""Exact finite-state ground truth on small one-dimensional tori.

Interacting-particle simulators are validated against exact continuous-time
Markov-chain computations: a torus of L <= 12 sites carries 2^L spin states,
the flip rates of the voter, biased-voter, and Lotka-Volterra models are
assembled from the wrapped step kernel, and marginal distributions are
computed by uniformization with a certified Poisson truncation error.

The wrapped kernel p_L(x) = sum_k p(x + kL) acquires self-jump mass at
x = 0 from the |k| >= 1 terms; self-jumps are unobservable no-ops, so that
mass is removed and the kernel renormalized (the removed mass is recorded).
The torus simulators draw steps by rejection of e = 0 (mod L), which realizes
exactly this renormalized kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import zeta
from scipy.stats import poisson

from stablelv.kernels import StepKernel

__all__ = [
    "TorusModel",
    "wrapped_kernel",
    "exact_distribution",
    "check_duality",
    "check_moment_bounds",
    "check_domination",
]

MAX_L = 12


def wrapped_kernel(kernel: StepKernel, L: int) -> tuple[np.ndarray, float]:
    """Renormalized wrapped kernel on Z/L with the self-jump mass removed.

    Returns (p_L array over displacements 0..L-1 with p_L[0] = 0, removed
    self-jump mass).  For the heavy-tail family the wrap sums are Hurwitz
    zeta values; for nearest-neighbor steps no wrapping occurs for L >= 3.
    """
    if kernel.d != 1:
        raise ValueError("torus oracles are one-dimensional")
    if not 3 <= L <= MAX_L:
        raise ValueError(f"torus size must be in [3, {MAX_L}]")
    p = np.zeros(L)
    if kernel.family == "nearest-neighbor":
        p[1] = 0.5
        p[L - 1] = 0.5
        return p, 0.0
    a1 = 1.0 + kernel.alpha
    scale = kernel.C * float(L) ** (-a1)
    for x in range(1, L):
        p[x] = scale * (zeta(a1, x / L) + zeta(a1, 1.0 - x / L))
    self_mass = 2.0 * scale * zeta(a1, 1.0)
    total = p.sum() + self_mass
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"wrapped kernel mass {total} != 1")
    p /= 1.0 - self_mass
    return p, float(self_mass)


@dataclass
class TorusModel:
    """Spin-flip model on the L-site torus with exact rate functions.

    model: "voter" (rate nu), "biased" (bias b added on ``side`` = +1 births
    or -1 deaths), or "lv" (rate N with alpha_i = 1 + theta_i / nprime).
    States are L-bit integers, bit x = occupation of site x.
    """

    kernel: StepKernel
    L: int
    model: str = "voter"
    nu: float = 1.0
    b: float = 0.0
    side: int = 1
    N: float = 1.0
    alpha0: float = 1.0
    alpha1: float = 1.0
    p_wrapped: np.ndarray = field(init=False, repr=False)
    self_jump_mass: float = field(init=False)

    def __post_init__(self):
        if self.model not in ("voter", "biased", "lv"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "biased" and (self.b < 0 or self.side not in (1, -1)):
            raise ValueError("biased model needs b >= 0 and side in {+1,-1}")
        if self.model == "lv" and (self.alpha0 < 0 or self.alpha1 < 0):
            raise ValueError("lv model needs alpha_i >= 0")
        self.p_wrapped, self.self_jump_mass = wrapped_kernel(self.kernel, self.L)

    @property
    def nstates(self) -> int:
        return 1 << self.L

    def f1(self, state: int, x: int) -> float:
        """Occupied-neighbor frequency at site x under the wrapped kernel."""
        acc = 0.0
        for y in range(self.L):
            if (state >> y) & 1:
                acc += self.p_wrapped[(y - x) % self.L]
        return acc

    def flip_rate(self, state: int, x: int) -> float:
        """Rate of flipping site x in ``state`` (either direction)."""
        occupied = (state >> x) & 1
        f1 = self.f1(state, x)
        f0 = 1.0 - f1
        if self.model == "voter":
            return self.nu * (f0 if occupied else f1)
        if self.model == "biased":
            up = self.nu + (self.b if self.side == 1 else 0.0)
            down = self.nu + (self.b if self.side == -1 else 0.0)
            return down * f0 if occupied else up * f1
        if occupied:
            return self.N * f0 * (1.0 + (self.alpha1 - 1.0) * f0)
        return self.N * f1 * (1.0 + (self.alpha0 - 1.0) * f1)

    def generator(self) -> csr_matrix:
        """Sparse CTMC generator Q over 2^L states (rows sum to zero)."""
        ns = self.nstates
        rows, cols, vals = [], [], []
        for state in range(ns):
            out = 0.0
            for x in range(self.L):
                r = self.flip_rate(state, x)
                if r > 0.0:
                    rows.append(state)
                    cols.append(state ^ (1 << x))
                    vals.append(r)
                    out += r
            rows.append(state)
            cols.append(state)
            vals.append(-out)
        return csr_matrix((vals, (rows, cols)), shape=(ns, ns))


def _uniformized(Q: csr_matrix, pi0: np.ndarray, t: float, tol: float):
    """Distribution at time t by uniformization; returns (pi_t, error bound).

    pi_t = e^{-lam t} sum_k (lam t)^k / k! * pi0 P^k with P = I + Q/lam; the
    Poisson tail beyond the truncation K bounds the total-variation error.
    """
    if t == 0.0:
        return pi0.copy(), 0.0
    lam = float(-Q.diagonal().min())
    if lam == 0.0:
        return pi0.copy(), 0.0
    lam *= 1.05  # slack keeps P strictly substochastic off the diagonal
    mu = lam * t
    K = int(poisson.isf(tol / 2.0, mu)) + 2
    P = Q.multiply(1.0 / lam)
    v = pi0.copy()
    acc = np.zeros_like(pi0)
    log_terms = poisson.logpmf(np.arange(K + 1), mu)
    for k in range(K + 1):
        acc += math.exp(log_terms[k]) * v
        if k < K:
            v = v + (v @ P)  # v P_full = v (I + Q/lam)
    err = float(poisson.sf(K, mu))
    return acc, err


def exact_distribution(
    model: TorusModel, initial: int, t: float, tol: float = 1e-10
):
    """Exact state distribution at time t from a deterministic initial state.

    Returns (probability vector over 2^L states, certified TV error bound).
    """
    if not 0 <= initial < model.nstates:
        raise ValueError("initial state out of range")
    if t < 0:
        raise ValueError("time must be nonnegative")
    pi0 = np.zeros(model.nstates)
    pi0[initial] = 1.0
    dist, err = _uniformized(model.generator(), pi0, t, tol)
    if err > tol:
        raise ArithmeticError(f"uniformization truncation {err} exceeds {tol}")
    # clip tiny negatives from floating accumulation
    dist = np.clip(dist, 0.0, None)
    return dist, err


def mass_distribution(dist: np.ndarray, L: int) -> np.ndarray:
    """Aggregate a state distribution into the |xi| in {0..L} histogram."""
    out = np.zeros(L + 1)
    for state, p in enumerate(dist):
        out[bin(state).count("1")] += p
    return out


# ------------------------------------------------------------------ duality


def _walk_generator(p_wrapped: np.ndarray, nu: float) -> np.ndarray:
    """Dense generator of a single rate-nu wrapped-kernel walk on the torus."""
    L = p_wrapped.size
    Q = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            if i != j:
                Q[i, j] = nu * p_wrapped[(j - i) % L]
        Q[i, i] = -Q[i].sum()
    return Q


def _pair_dual_distribution(p_wrapped: np.ndarray, nu: float, a: int, b: int, t: float, tol: float):
    """Coalescing two-walker dual on the torus, exactly.

    State space: ordered pairs (i, j), i != j, plus merged singletons; walkers
    jump independently at rate nu and merge on collision.  Returns
    (pair probabilities dict-by-index matrix, merged vector, error bound).
    """
    L = p_wrapped.size
    npair = L * L  # (i, j) with i == j unused
    ns = npair + L

    def pid(i, j):
        return i * L + j

    rows, cols, vals = [], [], []
    for i in range(L):
        for j in range(L):
            if i == j:
                continue
            s = pid(i, j)
            out = 0.0
            for e in range(1, L):
                pe = p_wrapped[e]
                if pe == 0.0:
                    continue
                i2 = (i + e) % L
                j2 = (j + e) % L
                # first walker moves
                tgt = npair + j if i2 == j else pid(i2, j)
                rows.append(s), cols.append(tgt), vals.append(nu * pe)
                # second walker moves
                tgt = npair + i if j2 == i else pid(i, j2)
                rows.append(s), cols.append(tgt), vals.append(nu * pe)
                out += 2.0 * nu * pe
            rows.append(s), cols.append(s), vals.append(-out)
    # merged walker moves as a single walk
    for i in range(L):
        s = npair + i
        out = 0.0
        for e in range(1, L):
            pe = p_wrapped[e]
            if pe == 0.0:
                continue
            rows.append(s), cols.append(npair + (i + e) % L), vals.append(nu * pe)
            out += nu * pe
        rows.append(s), cols.append(s), vals.append(-out)
    Q = csr_matrix((vals, (rows, cols)), shape=(ns, ns))
    pi0 = np.zeros(ns)
    pi0[pid(a, b)] = 1.0
    dist, err = _uniformized(Q, pi0, t, tol)
    return dist[:npair].reshape(L, L), dist[npair:], err


def check_duality(
    kernel: StepKernel,
    L: int,
    A,
    xi0,
    t: float,
    nu: float = 1.0,
    tol: float = 1e-10,
):
    """Voter duality: P(xi_t = 1 on A) vs coalescing-dual hit probabilities.

    Both sides are computed by independent exact routes: the left on the full
    2^L chain, the right on the <= 2-walker coalescing dual.  Returns
    (lhs, rhs, |lhs - rhs|).
    """
    A = sorted(set(int(a) % L for a in A))
    if len(A) > 2:
        raise ValueError("dual computed only for |A| <= 2")
    xi0_mask = 0
    for x in xi0:
        xi0_mask |= 1 << (int(x) % L)
    if not A:
        return 1.0, 1.0, 0.0
    model = TorusModel(kernel, L, model="voter", nu=nu)
    dist, _ = exact_distribution(model, xi0_mask, t, tol)
    amask = 0
    for a in A:
        amask |= 1 << a
    states = np.arange(model.nstates)
    lhs = float(dist[(states & amask) == amask].sum())

    in0 = np.array([(xi0_mask >> y) & 1 for y in range(L)], dtype=float)
    if len(A) == 1:
        Q = _walk_generator(model.p_wrapped, nu)
        pi0 = np.zeros(L)
        pi0[A[0]] = 1.0
        q, _ = _uniformized(csr_matrix(Q), pi0, t, tol)
        rhs = float(q @ in0)
    else:
        pair, merged, _ = _pair_dual_distribution(
            model.p_wrapped, nu, A[0], A[1], t, tol
        )
        rhs = float(np.einsum("ij,i,j->", pair, in0, in0) + merged @ in0)
    return lhs, rhs, abs(lhs - rhs)


# ----------------------------------------------------------- moment bounds


def check_moment_bounds(
    kernel: StepKernel,
    L: int,
    xi0,
    b: float,
    t: float,
    nu: float = 1.0,
    tol: float = 1e-10,
) -> dict:
    """Exact first/second moments of the 1-biased voter mass vs their bounds.

    Bounds checked (m0 = |xi_0|):
      first   E|xi_t|    <= e^{bt} m0
      second  E|xi_t|^2  <= e^{2bt} (m0^2 + ((2 nu + b)/b)(1 - e^{-bt}) m0)
      coarse  E|xi_t|^2  <= e^{2bt} (m0^2 + (2 nu + b) t m0)
    For b = 0 the second bound is taken in its b -> 0 limit 2 nu t m0, and
    the first moment is an exact martingale.
    """
    xi0_mask = 0
    for x in xi0:
        xi0_mask |= 1 << (int(x) % L)
    m0 = bin(xi0_mask).count("1")
    model = TorusModel(kernel, L, model="biased", nu=nu, b=b, side=1)
    dist, err = exact_distribution(model, xi0_mask, t, tol)
    masses = np.array([bin(s).count("1") for s in range(model.nstates)], dtype=float)
    e1 = float(dist @ masses)
    e2 = float(dist @ masses**2)
    bound1 = math.exp(b * t) * m0
    if b > 0:
        growth = (2.0 * nu + b) / b * (1.0 - math.exp(-b * t))
    else:
        growth = 2.0 * nu * t
    bound2 = math.exp(2.0 * b * t) * (m0**2 + growth * m0)
    bound3 = math.exp(2.0 * b * t) * (m0**2 + (2.0 * nu + b) * t * m0)
    slack_tol = 10.0 * max(err, 1e-12)
    report = {
        "E1": e1,
        "E2": e2,
        "bound_first": bound1,
        "bound_second": bound2,
        "bound_coarse": bound3,
        "slack_first": bound1 - e1,
        "slack_second": bound2 - e2,
        "slack_coarse": bound3 - e2,
        "error_bound": err,
    }
    if bound1 - e1 < -slack_tol or bound2 - e2 < -slack_tol or bound3 - e2 < -slack_tol:
        raise AssertionError(f"moment bound violated: {report}")
    return report


# -------------------------------------------------------------- domination


def check_domination(
    kernel: StepKernel,
    L: int,
    xi0,
    b: float,
    t: float,
    events,
    nu: float = 1.0,
    tol: float = 1e-10,
) -> list:
    """P_0-biased <= P_voter <= P_1-biased for events {xi = 1 on A}, exactly.

    ``events`` is a list of site subsets A.  Returns per-event triples
    (lower, middle, upper); raises if the ordering fails beyond 1e-8.
    """
    xi0_mask = 0
    for x in xi0:
        xi0_mask |= 1 << (int(x) % L)
    dists = []
    for model in (
        TorusModel(kernel, L, model="biased", nu=nu, b=b, side=-1),
        TorusModel(kernel, L, model="voter", nu=nu),
        TorusModel(kernel, L, model="biased", nu=nu, b=b, side=1),
    ):
        dist, _ = exact_distribution(model, xi0_mask, t, tol)
        dists.append(dist)
    states = np.arange(1 << L)
    out = []
    for A in events:
        amask = 0
        for a in A:
            amask |= 1 << (int(a) % L)
        sel = (states & amask) == amask
        lo, mid, up = (float(d[sel].sum()) for d in dists)
        if lo > mid + 1e-8 or mid > up + 1e-8:
            raise AssertionError(f"domination violated for A={A}: {lo}, {mid}, {up}")
        out.append((lo, mid, up))
    return out
