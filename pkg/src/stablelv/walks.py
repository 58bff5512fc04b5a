"""Analytics and Monte Carlo for the rate-nu continuous-time random walk.

Transition probabilities are computed by Fourier inversion on the torus: the
uniform-grid trapezoid sum of size M equals the exact aliased probability
sum_k p_t(0, x + kM), so the quadrature error *is* the aliased mass.  For
heavy-tail kernels the leading alias term nu*t*p(x + kM) is subtracted
analytically and the remainder is certified with the two-sided stable bound
p_t(0,z) <= c * t / |z|^(1+alpha); for nearest-neighbor kernels a Chernoff
bound on the Poisson walk certifies the (exponentially small) alias.

Monte Carlo estimators (hitting tails, mean range, displacement tails) ride on
the numba engine and carry (mean, SE, n, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

from stablelv import _engine as eng
from stablelv.estimates import Estimate, mc_estimate, run_chunked, spawn_seeds
from stablelv.kernels import StepKernel, make_kernel

__all__ = [
    "TransitionTable",
    "StableDensity",
    "PotentialKernel",
    "transition_probability",
    "transition_table",
    "stable_density",
    "llt_error",
    "green_function",
    "green_zero",
    "hitting_times",
    "hitting_tail",
    "potential_kernel",
    "mean_range",
    "displacement_tail",
]


class PrecisionError(RuntimeError):
    """Requested quadrature precision is unattainable at feasible resolution."""


# --------------------------------------------------------------- Fourier core

_symbol_cache: dict = {}


def _engine_pack(kernel: StepKernel):
    """(fam, alias_q, alias_j, tail_p, alpha) arguments for the numba engines."""
    if kernel.family == "pareto":
        key = ("pack", kernel.kernel_id)
        if key not in _symbol_cache:
            q, j, tail_p, alpha = eng.pareto_sampler_pack(kernel)
            _symbol_cache[key] = (1, q, j, tail_p, alpha)
        return _symbol_cache[key]
    return (0, np.zeros(1), np.zeros(1, dtype=np.int64), 0.0, 2.0)


def _alias_bound(kernel: StepKernel, nu: float, t: float, m_away: float) -> float:
    """Certified bound on sum of p_t(0, y) over |y| >= m_away."""
    nut = nu * t
    if kernel.family == "pareto":
        a = kernel.alpha
        # two-sided stable bound p_t(0,z) <= c2 t/|z|^(1+a); c2 = 8 C zeta covers
        # the one-jump principal term nu t p(z) with ample margin.
        c2 = 8.0 * kernel.C * float(special.zeta(1 + a))
        return 2.0 * c2 * nut * m_away ** (-a) / a
    # Chernoff bound for the +-1 Poisson walk (per axis rate nu/d).
    lam = nut / kernel.d
    r = m_away
    s = math.asinh(r / max(lam, 1e-300))
    expo = lam * (math.cosh(s) - 1.0) - s * r
    return 2.0 * kernel.d * math.exp(min(expo, 0.0))


def _pareto_first_alias(kernel: StepKernel, nu: float, t: float, x: np.ndarray, M: int):
    """Leading aliased mass sum_{k!=0} nu t p(x + kM) for |x| <= M/2."""
    acc = np.zeros(x.shape, dtype=float)
    a = kernel.alpha
    for k in range(1, 21):
        acc += (k * M - x) ** (-1.0 - a) + (k * M + x) ** (-1.0 - a)
    acc += 2.0 * (M ** (-1.0 - a)) * float(special.zeta(1 + a, 21.0))
    return nu * t * kernel.C * acc


@dataclass
class TransitionTable:
    """p_t(0, x) for |x| <= halfwidth, with a certified quadrature error bound."""

    t: float
    nu: float
    halfwidth: int
    values: np.ndarray = field(repr=False)  # index i -> x = i - halfwidth
    error_bound: float
    grid_size: int

    def prob(self, x: int) -> float:
        i = int(x) + self.halfwidth
        if not 0 <= i < self.values.size:
            raise IndexError("site outside transition-table window")
        return float(self.values[i])

    @property
    def xs(self) -> np.ndarray:
        return np.arange(-self.halfwidth, self.halfwidth + 1)


def _symbol_half(kernel: StepKernel, nu: float, t: float, M: int) -> np.ndarray:
    key = (kernel.kernel_id, nu, t, M)
    if key not in _symbol_cache:
        theta = np.linspace(0.0, math.pi, M // 2 + 1)
        vals = np.empty(M // 2 + 1)
        chunk = 1 << 21
        for lo in range(0, theta.size, chunk):
            hi = min(lo + chunk, theta.size)
            vals[lo:hi] = np.exp(-nu * t * kernel.one_minus_psi(theta[lo:hi]))
        if len(_symbol_cache) > 12:
            _symbol_cache.clear()
        _symbol_cache[key] = vals
    return _symbol_cache[key]


def transition_table(
    kernel: StepKernel, nu: float, t: float, halfwidth: int, tol: float = 1e-8
) -> TransitionTable:
    """Fourier-inversion table of p_t(0, x), d = 1 only."""
    if kernel.d != 1:
        raise ValueError("transition_table supports d = 1; use transition_probability")
    if t == 0:
        v = np.zeros(2 * halfwidth + 1)
        v[halfwidth] = 1.0
        return TransitionTable(t, nu, halfwidth, v, 0.0, 0)
    M = 1 << 10
    while M < 4 * halfwidth:
        M *= 2
    # enlarge until the post-subtraction alias certificate meets tol
    while True:
        if kernel.family == "pareto":
            a = kernel.alpha
            # pointwise alias before subtraction: sum_k c2 t (kM - x)^{-1-a},
            # bounded by 3 c2 t (M/2)^{-1-a}; the one-jump subtraction leaves a
            # relative remainder of at most 2 nu t (M/2)^{-a}
            c2 = 8.0 * kernel.C * float(special.zeta(1 + a))
            point = 3.0 * c2 * nu * t * (M / 2.0) ** (-1.0 - a)
            resid = point * min(1.0, 2.0 * nu * t * (M / 2.0) ** (-a))
        else:
            resid = _alias_bound(kernel, nu, t, M / 2.0)
        if resid < tol or M >= (1 << 26):
            break
        M *= 2
    if resid >= tol:
        raise PrecisionError(
            f"cannot certify transition quadrature below {tol:g} (best {resid:g})"
        )
    S = _symbol_half(kernel, nu, t, M)
    full = np.fft.irfft(S, M)
    xs = np.arange(0, halfwidth + 1, dtype=float)
    pos = full[: halfwidth + 1].copy()
    if kernel.family == "pareto":
        pos -= _pareto_first_alias(kernel, nu, t, xs, M)
    np.maximum(pos, 0.0, out=pos)
    values = np.concatenate([pos[::-1], pos[1:]])
    return TransitionTable(t, nu, halfwidth, values, float(resid + 1e-13), M)


def transition_probability(
    kernel: StepKernel, nu: float, t: float, x, tol: float = 1e-8
) -> float:
    """p_t(0, x) for the rate-nu walk; d <= 3 (nearest-neighbor) or d = 1."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if t == 0:
        return 1.0 if not np.any(x_arr) else 0.0
    if kernel.d == 1:
        table = transition_table(kernel, nu, t, int(abs(int(x_arr[0]))) + 1, tol)
        return table.prob(int(x_arr[0]))
    # nearest-neighbor d >= 2: exact product of independent axis walks,
    # each axis computed by the same d=1 Fourier inversion.
    axis_kernel = make_kernel("nearest-neighbor", 1, 2)
    out = 1.0
    for c in range(kernel.d):
        tab = transition_table(
            axis_kernel, nu / kernel.d, t, int(abs(int(x_arr[c]))) + 1, tol
        )
        out *= tab.prob(int(x_arr[c]))
    return out


# ------------------------------------------------------------ stable density

_density_cache: dict = {}


class StableDensity:
    """Density p_1 of the symmetric alpha-stable law with CF exp(-sigma2 |eta|^alpha)."""

    def __init__(self, alpha: float, sigma2: float, d: int = 1):
        if d != 1 and alpha != 2:
            raise NotImplementedError("d >= 2 stable densities only for alpha = 2")
        self.alpha = alpha
        self.sigma2 = sigma2
        self.d = d
        self._spline = None
        self._tail_coeff = None
        if alpha not in (1.0, 2.0):
            self._build_spline()

    def _build_spline(self):
        # p(y_j) on the FFT-conjugate grid y_j = 2 pi j / (h N): the trapezoid
        # sum over w = i h is exact up to periodization at distance 2 pi / h,
        # far beyond the splined range.
        w_max = (42.0 / self.sigma2) ** (1.0 / self.alpha)
        N = 1 << 19
        nh = N // 2
        h = w_max / nh
        w = np.arange(nh + 1) * h
        cf = np.exp(-self.sigma2 * w**self.alpha)
        vals_grid = np.fft.irfft(cf, N) * (N * h / (2 * math.pi))
        dy = 2 * math.pi / (h * N)
        ymax = 50.0
        keep = int(ymax / dy) + 2
        ys = np.arange(keep) * dy
        self._spline = interpolate.CubicSpline(ys, vals_grid[:keep])
        # algebraic tail p(y) ~ K |y|^{-1-alpha}; K fitted near the spline edge
        edge = ys[ys > 0.8 * ymax]
        self._tail_coeff = float(
            np.mean(self._spline(edge) * edge ** (1 + self.alpha))
        )
        self._ymax = float(ys[-2])

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        if self.alpha == 2.0:
            v = self.sigma2
            if self.d == 1:
                return np.exp(-(y**2) / (4 * v)) / math.sqrt(4 * math.pi * v)
            r2 = np.sum(np.atleast_2d(y) ** 2, axis=-1)
            return np.exp(-r2 / (4 * v)) * (4 * math.pi * v) ** (-self.d / 2.0)
        if self.alpha == 1.0:
            return self.sigma2 / (math.pi * (self.sigma2**2 + y**2))
        out = np.where(
            y < self._ymax - 1e-9,
            self._spline(np.minimum(y, self._ymax)),
            self._tail_coeff * np.maximum(y, 1.0) ** (-1 - self.alpha),
        )
        return out


def stable_density(alpha: float, sigma2: float, d: int, y) -> float:
    """Evaluate the stable density p_1(y) (closed forms for alpha in {1, 2})."""
    key = (alpha, sigma2, d)
    if key not in _density_cache:
        _density_cache[key] = StableDensity(alpha, sigma2, d)
    out = _density_cache[key](y)
    return float(out) if np.ndim(out) == 0 else out


# -------------------------------------------------------- local limit theorem


def llt_profile(kernel: StepKernel, t: float, width_mult: float = 20.0):
    """Scaled lattice probabilities against the stable density (d = 1).

    Returns (xs, scaled, dens, cert): sites xs covering |x| <= width_mult*b(t)
    (subsampled when the window is huge), scaled[i] = b(t) p_t(0, xs[i]),
    dens[i] = p_1(xs[i]/b(t)), and a certified bound on the numerical error of
    the difference scaled - dens.

    The difference is obtained by quadrature of the *symbol difference*
    exp(-t(1-psi)) - exp(-t sigma2 |eta|^alpha): the fractional singularities
    at eta = 0 (hence the heavy probability tails) cancel exactly, so the
    integrand is smooth-tailed and supported on eta_c = (46.5/(t sigma2))^(1/a).
    The trapezoid sum is an exact Fourier periodization with period 2*pi/h far
    beyond every evaluated site, so its only errors are the symbol truncation
    (< e^-46) and, when the x grid is subsampled, a band-limited interpolation
    loss of at most (eta_c dx)^2/8 relative.
    """
    if kernel.d != 1:
        raise ValueError("llt_profile supports d = 1")
    b = kernel.b(t)
    window = int(math.ceil(width_mult * b))
    a = kernel.alpha
    eta_c = min(math.pi, (46.5 / (t * kernel.sigma2)) ** (1.0 / a))
    n_eta = 8192
    eta = np.linspace(0.0, eta_c, n_eta)
    D = np.exp(-t * kernel.one_minus_psi(eta)) - np.exp(-t * kernel.sigma2 * eta**a)
    w = np.full(n_eta, eta[1] - eta[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    # x grid: all integers when affordable, else band-limit-safe subsampling
    max_pts = 40_000
    if 2 * window + 1 <= max_pts:
        dx = 1
    else:
        dx = max(1, int(math.ceil(2 * window / max_pts)))
        dx = min(dx, max(1, int(0.3 / max(eta_c, 1e-300))))
    xs = np.arange(0, window + 1, dx)
    diff = np.empty(xs.size)
    chunk = 256
    dw = D * w
    for lo in range(0, xs.size, chunk):
        hi = min(lo + chunk, xs.size)
        diff[lo:hi] = (np.cos(np.outer(xs[lo:hi].astype(float), eta)) * dw).sum(axis=1)
    diff *= b / math.pi
    dens = stable_density(a, kernel.sigma2, 1, xs / b)
    scaled = dens + diff
    trunc = 2.0 * b * math.exp(-37.0)
    sampling_loss = 0.0 if dx == 1 else (eta_c * dx) ** 2 / 8.0
    cert = trunc + sampling_loss * float(np.max(np.abs(diff)))
    xs_full = np.concatenate([-xs[:0:-1], xs])
    return (
        xs_full,
        np.concatenate([scaled[:0:-1], scaled]),
        np.concatenate([dens[:0:-1], dens]),
        float(cert),
    )


def llt_error(kernel: StepKernel, t: float) -> float:
    """sup_x |b(t) p_t(0,x) - p_1(x/b(t))| over |x| <= 20 b(t) (d = 1)."""
    _, scaled, dens, _ = llt_profile(kernel, t)
    return float(np.max(np.abs(scaled - dens)))


# ------------------------------------------------------------ Green functions


def green_zero(kernel: StepKernel, nu: float = 1.0) -> float:
    """G(0) for a transient kernel (expected total time at the start site)."""
    return green_function(kernel, [0] * kernel.d if kernel.d > 1 else 0, nu=nu)


def green_function(kernel: StepKernel, x, horizon: float | None = None, nu: float = 1.0):
    """G(x) (horizon None) or G_T(x) = int_0^T p_s(0,x) ds for the rate-nu walk."""
    if horizon is None and not kernel.transient:
        raise ValueError("infinite-horizon Green function requires a transient kernel")
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if kernel.d == 1:
        xi = int(x_arr[0])

        # (1/pi) int_0^pi cos(x eta) weight d eta; quad handles the origin
        def g(eta):
            omp = kernel.one_minus_psi(eta)
            T = horizon
            if T is None:
                w = 1.0 / omp
            else:
                z = nu * T * omp
                w = T if z < 1e-12 else (1.0 - math.exp(-z)) / (nu * omp)
            return math.cos(xi * eta) * w

        val, _ = integrate.quad(g, 0.0, math.pi, limit=400, epsabs=1e-10, epsrel=1e-10)
        return val / (math.pi * nu) if horizon is None else val / math.pi
    # nearest-neighbor d = 3 (or 2): time integral of the Bessel product
    lam = nu / kernel.d

    def p_at(s):
        out = 1.0
        for c in range(kernel.d):
            out *= special.ive(abs(int(x_arr[c])), lam * s)
        return out

    upper = np.inf if horizon is None else horizon
    val, _ = integrate.quad(p_at, 0.0, upper, limit=400)
    return val


# ------------------------------------------------------------- hitting tails


def hitting_times(
    kernel: StepKernel, nu: float, tmax: float, nsamples: int, seed: int, parallelism: int = 1
) -> np.ndarray:
    """First-hit times of 0 for walks from a p-distributed first step.

    Entries > tmax encode 'not hit by tmax'.
    """
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nsamples)
    out = np.zeros(nsamples)

    def worker(lo, hi):
        eng.walk_hitting_from_pstep(
            seeds[lo:hi], fam, q, j, tail_p, alpha, kernel.d, nu, tmax, out[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    return out


def hitting_tail(
    kernel: StepKernel,
    nu: float,
    t_list,
    nsamples: int,
    seed: int,
    parallelism: int = 1,
) -> list[Estimate]:
    """H(t) = sum_e p(e) P^e(tau_0 > t) estimated at each t in t_list."""
    t_list = np.atleast_1d(np.asarray(t_list, dtype=float))
    times = hitting_times(kernel, nu, float(t_list.max()), nsamples, seed, parallelism)
    return [mc_estimate((times > t).astype(float), seed) for t in t_list]


# ----------------------------------------------------------- potential kernel


@dataclass
class PotentialKernel:
    """Table of the recurrent-walk potential kernel a(x) on |x| <= window."""

    window: int
    values: np.ndarray  # index |x|
    error_bound: float

    def a(self, x: int) -> float:
        return float(self.values[abs(int(x))])


def potential_kernel(kernel: StepKernel, window: int, tol: float = 1e-6) -> PotentialKernel:
    """a(x) = (2 pi)^(-1) int (1 - cos x eta)/(1 - psi) d eta for d=1 recurrent kernels."""
    if kernel.d != 1 or kernel.transient:
        raise ValueError("potential kernel requires a d = 1 recurrent kernel")
    xs = np.arange(0, window + 1)
    prev = None
    M = 1 << 14
    while True:
        # open midpoint-type uniform grid on (0, pi]; integrand extended by its
        # limit 0 (alpha < 2) or x^2 (alpha = 2) at eta = 0.
        eta = (np.arange(M) + 0.5) * (math.pi / M)
        w = 1.0 / kernel.one_minus_psi(eta)
        vals = np.empty(xs.size)
        chunk = 128
        for lo in range(0, xs.size, chunk):
            hi = min(lo + chunk, xs.size)
            vals[lo:hi] = ((1.0 - np.cos(np.outer(xs[lo:hi], eta))) * w).sum(axis=1) / M
        if prev is not None and np.max(np.abs(vals - prev)) < tol:
            return PotentialKernel(window, vals, float(np.max(np.abs(vals - prev))))
        prev = vals
        M *= 2
        if M > (1 << 22):
            raise PrecisionError("potential-kernel quadrature did not converge")


def potential_pareto1(x, table_limit: int = 4096):
    """Potential kernel for the heavy-tail d=1, tail-index-1 kernel, any x.

    Uses the exact decomposition 1/(1-psi) = 1/(sigma2 eta) + (1/6)/(1 - eta/(2 pi))
    available for this kernel: a(x) = (Cin(pi |x|) + log 2)/(pi sigma2) - J(x),
    with J(x) an oscillatory integral that is evaluated on |x| <= table_limit
    and certifiably below 7e-5/|x| beyond.
    """
    x = np.abs(np.atleast_1d(np.asarray(x))).astype(float)
    si, ci = special.sici(math.pi * np.maximum(x, 1e-300))
    cin = np.where(x > 0, np.euler_gamma + np.log(np.maximum(math.pi * x, 1e-300)) - ci, 0.0)
    main = (cin + math.log(2.0)) / 3.0  # 1/(pi sigma2) = 1/3 for this kernel
    J = np.zeros_like(x)
    small = (x > 0) & (x <= table_limit)
    if np.any(small):
        M = 1 << 16
        eta = (np.arange(M) + 0.5) * (math.pi / M)
        g = (1.0 / 6.0) / (1.0 - eta / (2 * math.pi))
        xs = x[small]
        out = np.empty(xs.size)
        chunk = 256
        for lo in range(0, xs.size, chunk):
            hi = min(lo + chunk, xs.size)
            out[lo:hi] = (np.cos(np.outer(xs[lo:hi], eta)) * g).sum(axis=1) / M
        J[small] = out
    res = np.where(x == 0, 0.0, main - J)
    return res if res.size > 1 else float(res[0])


# ------------------------------------------------------- range & displacement


def mean_range(
    kernel: StepKernel, t: float, nsamples: int, seed: int, parallelism: int = 1
) -> Estimate:
    """Mean number of distinct sites visited by time t (rate-1 walk, d=1)."""
    if kernel.d != 1:
        raise ValueError("mean_range engine supports d = 1")
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nsamples)
    out = np.zeros(nsamples, dtype=np.int64)

    def worker(lo, hi):
        eng.walk_range(seeds[lo:hi], fam, q, j, tail_p, alpha, 1.0, t, out[lo:hi])

    run_chunked(worker, nsamples, parallelism)
    return mc_estimate(out.astype(float), seed)


def displacement_tail(
    kernel: StepKernel,
    nu: float,
    t: float,
    r: float,
    nsamples: int,
    seed: int,
    parallelism: int = 1,
) -> Estimate:
    """P(max_{u<=t} |B_u| >= r) by Monte Carlo."""
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nsamples)
    out = np.zeros(nsamples)

    def worker(lo, hi):
        eng.walk_max_abs(
            seeds[lo:hi], fam, q, j, tail_p, alpha, kernel.d, nu, t, out[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    return mc_estimate((out >= r).astype(float), seed)


def walk_endpoints(
    kernel: StepKernel, nu: float, t: float, nsamples: int, seed: int, parallelism: int = 1
) -> np.ndarray:
    """Monte Carlo endpoints B_t (shape (n, 3); unused coordinates zero)."""
    fam, q, j, tail_p, alpha = _engine_pack(kernel)
    seeds = spawn_seeds(seed, nsamples)
    out = np.zeros((nsamples, 3), dtype=np.int64)

    def worker(lo, hi):
        eng.walk_endpoints(
            seeds[lo:hi], fam, q, j, tail_p, alpha, kernel.d, nu, t, out[lo:hi]
        )

    run_chunked(worker, nsamples, parallelism)
    return out
