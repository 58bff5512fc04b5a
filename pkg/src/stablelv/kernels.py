"""Symmetric step kernels on Z^d in the domain of normal attraction of stable laws.

Two families are supported:

* ``nearest-neighbor`` in d = 1, 2, 3: p(+-e_i) = 1/(2d), attracted to the
  Gaussian (alpha = 2) with scale sigma2 = 1/(2d).
* ``pareto`` in d = 1 with tail index alpha in (0, 2):
  p(x) = C |x|^(-1-alpha) for x != 0, C = 1/(2 zeta(1+alpha)), attracted to a
  symmetric alpha-stable law.

The characteristic function psi(eta) = sum_x p(x) cos(x . eta) is evaluated in
closed form: for the pareto family through the exact polylogarithm expansion of
sum_{x>=1} cos(x eta) / x^(1+alpha), which is accurate to machine precision on
(-pi, pi] and free of cancellation at small eta.  Step sampling is exact (no
tail truncation): the inverse CDF uses Hurwitz-zeta tail masses and a lazily
extended prefix table.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import special

__all__ = ["StepKernel", "FractionalMoment", "make_kernel"]

_SERIES_TERMS = 80  # even-order Taylor terms kept in the polylog expansion


class KernelConfigError(ValueError):
    """Unsupported (family, d, alpha) combination."""


@dataclass(frozen=True)
class FractionalMoment:
    """Fractional moment sum |p|_abar = sum_x |x|^abar p(x).

    ``value`` is the midpoint of the certified bracket; ``certificate`` is the
    half-width of the tail bracket actually used.  ``finite`` is False when the
    series diverges (pareto with abar >= alpha), in which case ``value`` is inf.
    """

    exponent: float
    value: float
    finite: bool
    certificate: float


def _pareto_series_coeffs(alpha: float) -> np.ndarray:
    """Taylor coefficients c_j = zeta(1+alpha-2j)/(2j)! of the polylog expansion.

    Re Li_{1+alpha}(e^{i eta}) = Gamma(-alpha) cos(pi alpha/2) |eta|^alpha
                                 + sum_{j>=0} (-1)^j c_j eta^{2j},
    valid for |eta| < 2 pi and alpha not an integer.
    """
    coeffs = np.empty(_SERIES_TERMS + 1)
    with mpmath.workdps(40):
        for j in range(_SERIES_TERMS + 1):
            coeffs[j] = float(mpmath.zeta(1 + alpha - 2 * j) / mpmath.factorial(2 * j))
    return coeffs


@dataclass
class StepKernel:
    """Symmetric, irreducible step law on Z^d with p(0) = 0."""

    family: str
    d: int
    alpha: float
    sigma2: float = field(init=False)
    C: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.family == "nearest-neighbor":
            if self.d not in (1, 2, 3):
                raise KernelConfigError("nearest-neighbor kernel supports d in {1,2,3}")
            if self.alpha != 2:
                raise KernelConfigError("nearest-neighbor kernel requires alpha = 2")
            self.sigma2 = 1.0 / (2 * self.d)
        elif self.family == "pareto":
            if self.d != 1:
                raise KernelConfigError("pareto kernel supports d = 1 only")
            if not 0 < self.alpha < 2:
                raise KernelConfigError("pareto kernel requires alpha in (0, 2)")
            self.C = 1.0 / (2.0 * float(special.zeta(1 + self.alpha)))
            if self.alpha == 1.0:
                self._coeffs = None
            else:
                self._coeffs = _pareto_series_coeffs(self.alpha)
                self._lead = (
                    -special.gamma(-self.alpha)
                    * math.cos(math.pi * self.alpha / 2.0)
                    / float(special.zeta(1 + self.alpha))
                )
            # Exact prefix CDF over the step radius, lazily extended.
            self._cdf_lock = threading.Lock()
            self._radius_cdf = self._build_radius_cdf(4096)
            self.sigma2 = self._calibrate_sigma2()
        else:
            raise KernelConfigError(f"unknown kernel family {self.family!r}")

    # ------------------------------------------------------------------ basics

    @property
    def transient(self) -> bool:
        """True iff the rate-1 walk is transient, i.e. d > alpha (normal attraction)."""
        return self.d > self.alpha

    def b(self, n: float) -> float:
        """Norming sequence b(n) = n^(1/alpha)."""
        return float(n) ** (1.0 / self.alpha)

    def eval(self, x) -> float:
        """Exact step probability p(x); x is an int (d=1) or length-d sequence."""
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        if x.shape != (self.d,):
            raise ValueError(f"site must have dimension {self.d}")
        if self.family == "nearest-neighbor":
            if np.sum(np.abs(x)) == 1:
                return 1.0 / (2 * self.d)
            return 0.0
        xi = int(x[0])
        if xi == 0:
            return 0.0
        return self.C * abs(xi) ** (-1.0 - self.alpha)

    def eval_many(self, x: np.ndarray) -> np.ndarray:
        """Vectorized p(x) for d = 1 integer arrays."""
        if self.d != 1:
            raise ValueError("eval_many supports d = 1")
        x = np.asarray(x)
        out = np.zeros(x.shape, dtype=float)
        nz = x != 0
        if self.family == "pareto":
            out[nz] = self.C * np.abs(x[nz]) ** (-1.0 - self.alpha)
        else:
            out[np.abs(x) == 1] = 0.5
        return out

    # ------------------------------------------------ characteristic function

    def one_minus_psi(self, eta) -> np.ndarray | float:
        """1 - psi(eta), cancellation-free.

        ``eta`` is a scalar (d=1) or an array whose last axis has length d; the
        result drops that axis.
        """
        eta_arr = np.asarray(eta, dtype=float)
        scalar = eta_arr.ndim == 0 if self.d == 1 else eta_arr.ndim == 1
        if self.d == 1:
            comps = eta_arr[..., None]
        else:
            comps = eta_arr
            if comps.shape[-1] != self.d:
                raise ValueError(f"eta must have last dimension {self.d}")
        if self.family == "nearest-neighbor":
            val = np.mean(2.0 * np.sin(comps / 2.0) ** 2, axis=-1)
        else:
            val = self._pareto_one_minus_psi(np.abs(comps[..., 0]))
        return float(val) if scalar else val

    def characteristic(self, eta):
        """psi(eta) = sum_x p(x) cos(x . eta)."""
        return 1.0 - self.one_minus_psi(eta)

    def _pareto_one_minus_psi(self, mu: np.ndarray) -> np.ndarray:
        if np.any(mu > 2 * math.pi - 1e-9):
            raise ValueError("characteristic defined on (-pi, pi] (|eta| < 2 pi)")
        if self.alpha == 1.0:
            # Re Li_2(e^{i mu}) = pi^2/6 - pi mu/2 + mu^2/4 on [0, 2 pi].
            return (3.0 / math.pi) * mu - (3.0 / (2 * math.pi**2)) * mu * mu
        acc = np.zeros_like(mu)
        mu2 = mu * mu
        power = np.ones_like(mu)
        sign = 1.0
        for j in range(1, _SERIES_TERMS + 1):
            sign = -sign
            power = power * mu2
            acc += sign * self._coeffs[j] * power
        zeta_a = float(special.zeta(1 + self.alpha))
        return self._lead * mu**self.alpha - acc / zeta_a

    def da_limit(self, eta, n: float):
        """n (1 - psi(eta / b(n))); approaches sigma2 |eta|^alpha as n grows."""
        eta_arr = np.asarray(eta, dtype=float)
        return n * self.one_minus_psi(eta_arr / self.b(n))

    def _calibrate_sigma2(self) -> float:
        """Plateau of da_limit at n = 1e8, eta = 1 (pareto calibration)."""
        return float(self.da_limit(1.0, 1e8))

    # ----------------------------------------------------------------- moments

    def fractional_moment(self, abar: float) -> FractionalMoment:
        """|p|_abar = sum_x |x|^abar p(x) with an integral tail bracket."""
        if abar <= 0:
            raise ValueError("exponent must be positive")
        if self.family == "nearest-neighbor":
            return FractionalMoment(abar, 1.0, True, 0.0)
        if abar >= self.alpha:
            return FractionalMoment(abar, math.inf, False, math.inf)
        # sum_x |x|^abar p(x) = 2 C sum_{x>=1} x^(abar - 1 - alpha)
        #                     = 2 C zeta(1 + alpha - abar), exactly.
        value = 2.0 * self.C * float(special.zeta(1.0 + self.alpha - abar))
        return FractionalMoment(abar, value, True, 1e-12 * value)

    # ---------------------------------------------------------------- sampling

    def _build_radius_cdf(self, R: int) -> np.ndarray:
        """Exact P(radius <= r) for r = 1..R via Hurwitz-zeta tail masses."""
        r = np.arange(1, R + 1, dtype=float)
        return 1.0 - 2.0 * self.C * special.zeta(1 + self.alpha, r + 1.0)

    _MAX_TABLE = 1 << 23  # cap the table; rarer draws fall back to bisection

    def _extend_radius_cdf(self, need: float) -> None:
        with self._cdf_lock:
            while (
                self._radius_cdf[-1] < need
                and len(self._radius_cdf) < self._MAX_TABLE
            ):
                self._radius_cdf = self._build_radius_cdf(2 * len(self._radius_cdf))

    def _tail_radius(self, u: float) -> int:
        """Smallest r with P(radius <= r) >= u, by exact-CDF bisection."""
        lo = len(self._radius_cdf)
        hi = 2 * lo
        while 1.0 - 2.0 * self.C * float(special.zeta(1 + self.alpha, hi + 1.0)) < u:
            lo, hi = hi, 2 * hi
        while hi > lo + 1:
            mid = (lo + hi) // 2
            if 1.0 - 2.0 * self.C * float(special.zeta(1 + self.alpha, mid + 1.0)) < u:
                lo = mid
            else:
                hi = mid
        return hi

    def pre_extend_table(self, radius: int) -> None:
        """Pre-extend the sampling table before sharing across workers."""
        if self.family == "pareto" and len(self._radius_cdf) < radius:
            with self._cdf_lock:
                self._radius_cdf = self._build_radius_cdf(int(radius))

    def sample_steps(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n exact draws from p; shape (n,) for d=1, else (n, d)."""
        if self.family == "nearest-neighbor":
            axis = rng.integers(0, self.d, size=n)
            sign = rng.integers(0, 2, size=n) * 2 - 1
            if self.d == 1:
                return sign.astype(np.int64)
            out = np.zeros((n, self.d), dtype=np.int64)
            out[np.arange(n), axis] = sign
            return out
        u = rng.random(n)
        hi = u.max(initial=0.0)
        if hi >= self._radius_cdf[-1]:
            self._extend_radius_cdf(hi)
        radius = np.searchsorted(self._radius_cdf, u, side="right") + 1
        over = np.nonzero(u >= self._radius_cdf[-1])[0]
        for i in over:
            radius[i] = self._tail_radius(float(u[i]))
        sign = rng.integers(0, 2, size=n) * 2 - 1
        return (sign * radius).astype(np.int64)

    def sample_step(self, rng: np.random.Generator):
        """One exact draw from p."""
        s = self.sample_steps(rng, 1)
        return int(s[0]) if self.d == 1 else s[0]

    # ------------------------------------------------------------------- misc

    @property
    def kernel_id(self) -> str:
        if self.family == "nearest-neighbor":
            return f"nn(d={self.d})"
        return f"pareto(d={self.d},alpha={self.alpha:g})"


def make_kernel(family: str, d: int, alpha: float) -> StepKernel:
    """Construct a supported step kernel (see module docstring)."""
    return StepKernel(family=family, d=int(d), alpha=float(alpha))
