"""Walk-analytics tests against independent oracles.

Oracles: the nearest-neighbor transition closed form exp(-nu t) I_x(nu t) per
axis (modified Bessel), the d=3 simple-walk Green constant 1.516386059...
(classical Watson value), a(x) = |x| for the d=1 simple walk, the reflection
asymptotics H(t) ~ sqrt(pi/(2t)) and E[range] ~ sqrt(8t/pi), Chapman-
Kolmogorov self-consistency, and Monte Carlo cross-checks at 4-5 SE.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special

from stablelv.kernels import make_kernel
from stablelv import walks


NN1 = make_kernel("nearest-neighbor", 1, 2)
NN3 = make_kernel("nearest-neighbor", 3, 2)
PAR1 = make_kernel("pareto", 1, 1.0)
PAR07 = make_kernel("pareto", 1, 0.7)


class TestTransition:
    def test_nn_d1_bessel_oracle(self):
        t, nu = 5.0, 1.0
        table = walks.transition_table(NN1, nu, t, 30)
        for x in range(0, 12):
            want = float(special.ive(x, nu * t))
            assert table.prob(x) == pytest.approx(want, abs=1e-12)
            assert table.prob(-x) == pytest.approx(want, abs=1e-12)

    def test_nn_d3_bessel_product_oracle(self):
        t, nu = 6.0, 1.0
        for x in ([0, 0, 0], [1, 2, 0], [3, 1, 1]):
            want = 1.0
            for c in x:
                want *= float(special.ive(abs(c), nu * t / 3.0))
            got = walks.transition_probability(NN3, nu, t, x)
            assert got == pytest.approx(want, rel=1e-9)

    def test_t_zero_is_delta(self):
        table = walks.transition_table(PAR1, 1.0, 0.0, 5)
        assert table.prob(0) == 1.0
        assert table.prob(3) == 0.0

    def test_mass_and_positivity(self):
        for k, t in ((PAR1, 5.0), (PAR07, 2.0), (NN1, 5.0)):
            table = walks.transition_table(k, 1.0, t, 4096)
            assert np.all(table.values >= 0.0)
            total = float(table.values.sum())
            # missing mass beyond the window is the walk's tail there
            assert total <= 1.0 + 1e-9
            assert total >= 1.0 - walks._alias_bound(k, 1.0, t, 4096.0) - 1e-9

    def test_pareto_table_vs_monte_carlo(self):
        t = 5.0
        table = walks.transition_table(PAR1, 1.0, t, 64)
        pts = walks.walk_endpoints(PAR1, 1.0, t, 200_000, seed=31)
        xs = pts[:, 0]
        for x in (0, 1, 2, 7):
            p = table.prob(x)
            phat = float(np.mean(xs == x))
            se = math.sqrt(p * (1 - p) / xs.size)
            assert abs(phat - p) < 4.5 * se, x

    def test_chapman_kolmogorov(self):
        s = t = 3.0
        W = 2048
        tab = walks.transition_table(PAR1, 1.0, s, W)
        conv = np.convolve(tab.values, tab.values)
        tab2 = walks.transition_table(PAR1, 1.0, s + t, W)
        mid = conv.size // 2
        for x in range(-50, 51):
            assert conv[mid + x] == pytest.approx(tab2.prob(x), abs=3e-4)

    def test_error_bound_is_recorded(self):
        tab = walks.transition_table(PAR07, 1.0, 2.0, 128)
        assert 0 < tab.error_bound < 1e-8


class TestStableDensity:
    def test_cauchy_closed_form(self):
        s2 = 3.0 / math.pi
        assert walks.stable_density(1.0, s2, 1, 0.0) == pytest.approx(
            1.0 / (math.pi * s2)
        )
        # direct characteristic-function quadrature oracle
        for y in (0.5, 2.0):
            want, _ = integrate.quad(
                lambda w: math.cos(y * w) * math.exp(-s2 * w) / math.pi, 0, np.inf
            )
            assert walks.stable_density(1.0, s2, 1, y) == pytest.approx(want, rel=1e-8)

    def test_gaussian_closed_form(self):
        # alpha = 2 with CF exp(-s2 w^2) is N(0, 2 s2)
        v = 2 * 0.5
        assert walks.stable_density(2.0, 0.5, 1, 0.0) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi * v)
        )

    def test_alpha07_spline_against_quadrature(self):
        s2 = PAR07.sigma2
        for y in (0.0, 1.0, 5.0):
            want, _ = integrate.quad(
                lambda w: math.cos(y * w) * math.exp(-s2 * w**0.7) / math.pi,
                0,
                np.inf,
                limit=400,
            )
            got = walks.stable_density(0.7, s2, 1, y)
            assert got == pytest.approx(want, rel=5e-5)

    def test_alpha07_mass_and_tail(self):
        s2 = PAR07.sigma2
        ys = np.linspace(-50, 50, 200001)
        vals = walks.stable_density(0.7, s2, 1, ys)
        assert np.all(vals > 0)
        core = float(np.trapezoid(vals, ys))
        # algebraic tail K y^{-1-a} integrates to 2 K 50^{-a} / a
        K = walks.stable_density(0.7, s2, 1, 60.0) * 60.0**1.7
        total = core + 2 * K * 50.0**-0.7 / 0.7
        assert total == pytest.approx(1.0, abs=5e-3)

    def test_tail_exponent(self):
        s2 = PAR07.sigma2
        r = walks.stable_density(0.7, s2, 1, 200.0) / walks.stable_density(
            0.7, s2, 1, 400.0
        )
        assert r == pytest.approx(2.0**1.7, rel=0.02)


class TestLocalLimit:
    def test_profile_certificate_small(self):
        for k in (NN1, PAR1):
            xs, scaled, dens, cert = walks.llt_profile(k, 100.0)
            assert cert < 1e-6
            assert xs.size == scaled.size == dens.size
            assert np.all(scaled >= -cert)

    def test_error_decreases_nn(self):
        errs = [walks.llt_error(NN1, t) for t in (100.0, 1000.0)]
        assert errs[1] < errs[0]

    def test_error_decreases_pareto1(self):
        errs = [walks.llt_error(PAR1, t) for t in (100.0, 1000.0)]
        assert errs[1] < errs[0]

    def test_uniform_bound(self):
        # sup_x b(t) p_t(0,x) <= p_1(0) + o(1), uniformly over the grid
        for k, t in ((PAR1, 100.0), (PAR07, 100.0), (NN1, 100.0)):
            _, scaled, dens, cert = walks.llt_profile(k, t)
            peak = walks.stable_density(k.alpha, k.sigma2, 1, 0.0)
            assert float(scaled.max()) <= peak * 1.05 + cert

    def test_interior_lower_bound(self):
        # inf over |x| <= 2 b(t) of b p_t is bounded below (no interior holes)
        for k in (PAR1, PAR07):
            xs, scaled, dens, _ = walks.llt_profile(k, 200.0)
            b = k.b(200.0)
            inner = np.abs(xs) <= 2 * b
            floor = walks.stable_density(k.alpha, k.sigma2, 1, 2.0)
            assert float(scaled[inner].min()) >= 0.5 * floor

    def test_matches_direct_table_nn(self):
        t = 100.0
        xs, scaled, dens, cert = walks.llt_profile(NN1, t)
        b = math.sqrt(t)
        for x in (0, 7, 25):
            i = int(np.where(xs == x)[0][0])
            want = b * float(special.ive(x, t))
            assert scaled[i] == pytest.approx(want, abs=1e-8)


class TestGreen:
    def test_watson_constant_d3(self):
        # classical value of the d=3 simple-walk Green function at the origin
        assert walks.green_zero(NN3) == pytest.approx(1.516386059137, rel=1e-6)

    def test_transient_pareto07(self):
        g0 = walks.green_function(PAR07, 0)
        g1 = walks.green_function(PAR07, 1)
        assert g0 > g1 > 0
        assert walks.green_function(PAR07, -1) == pytest.approx(g1, rel=1e-10)

    def test_one_step_identity(self):
        # sum_e p(e) G(e) = G(0) - 1 for the rate-1 walk (first-step analysis);
        # bracket using 0 <= G(e) <= G(0) for the unsummed tail
        g0 = walks.green_function(PAR07, 0)
        es = np.arange(1, 65)
        gvals = np.array([walks.green_function(PAR07, int(e)) for e in es])
        pe = PAR07.eval_many(es)
        partial = float(2 * np.sum(pe * gvals))
        tail_mass = 2 * PAR07.C * float(special.zeta(1.7, 65))
        assert partial <= g0 - 1 + 1e-6
        assert partial + tail_mass * g0 >= g0 - 1 - 1e-6

    def test_recurrent_requires_horizon(self):
        with pytest.raises(ValueError):
            walks.green_function(PAR1, 0)

    def test_finite_horizon_grows_like_log(self):
        g1 = walks.green_function(PAR1, 0, horizon=1e3)
        g2 = walks.green_function(PAR1, 0, horizon=1e4)
        g3 = walks.green_function(PAR1, 0, horizon=1e5)
        # increments of G_T(0) approach (log 10)/(pi sigma2) = log(10)/3
        inc1, inc2 = g2 - g1, g3 - g2
        assert inc2 == pytest.approx(math.log(10) / 3.0, rel=0.02)
        assert abs(inc2 - math.log(10) / 3.0) < abs(inc1 - math.log(10) / 3.0) + 1e-3

    def test_nu_scaling(self):
        # occupation time scales as 1/nu
        g = walks.green_function(PAR07, 0)
        g2 = walks.green_function(PAR07, 0, nu=2.0)
        assert g2 == pytest.approx(g / 2.0, rel=1e-9)


class TestHitting:
    def test_nn_reflection_asymptotics(self):
        # no-return probability of the simple walk ~ sqrt(2/(pi t)) (ballot
        # asymptotics through the last-exit identity)
        t = 400.0
        est = walks.hitting_tail(NN1, 1.0, [t], 40_000, seed=71)[0]
        want = math.sqrt(2.0 / (math.pi * t))
        assert abs(est.value / want - 1.0) < 0.06

    def test_tail_monotone_and_deterministic(self):
        ests = walks.hitting_tail(PAR1, 1.0, [10.0, 100.0], 20_000, seed=72)
        assert ests[0].value > ests[1].value > 0
        again = walks.hitting_tail(PAR1, 1.0, [10.0, 100.0], 20_000, seed=72)
        assert again[0].value == ests[0].value

    def test_parallelism_invariance(self):
        a = walks.hitting_times(PAR1, 1.0, 50.0, 5000, seed=73, parallelism=1)
        b = walks.hitting_times(PAR1, 1.0, 50.0, 5000, seed=73, parallelism=3)
        np.testing.assert_array_equal(a, b)

    def test_product_with_green_horizon(self):
        # H(t) G_t(0) -> 1 for recurrent kernels (renewal identity), loosely at
        # moderate t because corrections decay only logarithmically
        t = 10_000.0
        est = walks.hitting_tail(PAR1, 1.0, [t], 20_000, seed=74)[0]
        gt = walks.green_function(PAR1, 0, horizon=t)
        assert abs(est.value * gt - 1.0) < 0.25


class TestPotential:
    def test_nn_exact_absolute_value(self):
        pk = walks.potential_kernel(NN1, 12)
        for x in range(0, 13):
            assert pk.a(x) == pytest.approx(float(x), abs=1e-6)

    def test_pareto1_two_routes_agree(self):
        pk = walks.potential_kernel(PAR1, 40)
        direct = walks.potential_pareto1(np.arange(0, 41))
        np.testing.assert_allclose(pk.values, direct, atol=2e-4)

    def test_pareto1_log_asymptote(self):
        # a(x) ~ (euler_gamma + log(2 pi x)) / 3 for this kernel
        for x in (1e5, 1e7):
            want = (np.euler_gamma + math.log(2 * math.pi * x)) / 3.0
            assert walks.potential_pareto1(x) == pytest.approx(want, rel=1e-3)

    def test_discrete_series_oracle_small_x(self):
        # a(x) = lim_K (2 pi)^{-1} int (1 - cos x eta)(1 - psi^K)/(1 - psi)
        K = 200_000
        M = 1 << 18
        eta = (np.arange(M) + 0.5) * (math.pi / M)
        psi = 1.0 - PAR1.one_minus_psi(eta)
        w = (1.0 - psi**K) / (1.0 - psi)
        pk = walks.potential_kernel(PAR1, 5)
        for x in (1, 3, 5):
            oracle = float(np.sum((1.0 - np.cos(x * eta)) * w)) / M
            assert pk.a(x) == pytest.approx(oracle, abs=5e-4)

    def test_transient_rejected(self):
        with pytest.raises(ValueError):
            walks.potential_kernel(PAR07, 4)


class TestRangeAndDisplacement:
    def test_nn_range_asymptotics(self):
        # E[range] ~ sqrt(8 t / pi) for the d=1 simple walk
        t = 2000.0
        est = walks.mean_range(NN1, t, 2000, seed=91)
        want = math.sqrt(8 * t / math.pi)
        assert abs(est.value / want - 1.0) < 0.05

    def test_pareto_range_exceeds_nn(self):
        # heavy-tail walks visit more sites per unit time
        t = 300.0
        est_p = walks.mean_range(PAR1, t, 1500, seed=92)
        est_n = walks.mean_range(NN1, t, 1500, seed=92)
        assert est_p.value > est_n.value

    def test_displacement_tail_one_jump(self):
        # P(max |B| >= r) ~ nu t * P(|step| >= r) for r far beyond b(t)
        t, r = 50.0, 5000.0
        est = walks.displacement_tail(PAR1, 1.0, t, r, 40_000, seed=93)
        want = t * float(2 * PAR1.C * special.zeta(2.0, r))
        assert abs(est.value / want - 1.0) < 0.15

    def test_displacement_deterministic(self):
        a = walks.displacement_tail(PAR07, 1.0, 10.0, 100.0, 5000, seed=94)
        b = walks.displacement_tail(PAR07, 1.0, 10.0, 100.0, 5000, seed=94)
        assert a.value == b.value
