"""Sanity tests for the Monte Carlo core: exact samplers and determinism."""

import math

import numpy as np

from stablelv import _engine as eng
from stablelv.estimates import spawn_seeds
from stablelv.kernels import make_kernel


def test_alias_table_is_exact():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    q, j = eng.build_alias(probs)
    # reconstruct cell masses from the alias structure
    mass = np.zeros(4)
    for k in range(4):
        mass[k] += q[k] / 4
        mass[j[k]] += (1 - q[k]) / 4
    np.testing.assert_allclose(mass, probs, atol=1e-14)


def test_pareto_engine_sampler_matches_eval():
    k = make_kernel("pareto", 1, 0.7)
    q, j, tail_p, alpha = eng.pareto_sampler_pack(k)
    n = 400_000
    seeds = spawn_seeds(123, n)
    out = np.zeros((n, 3), dtype=np.int64)
    # one step each: use walk_endpoints with nu*t chosen so most paths take steps
    eng.walk_endpoints(seeds[:1], 1, q, j, tail_p, alpha, 1, 1.0, 0.1, out[:1])
    # direct step draws via a tiny shim: sample by running the radius sampler
    s = eng.rng_seed(np.uint64(42))
    draws = np.empty(n, dtype=np.int64)
    for i in range(n):
        draws[i] = eng._pareto_step(s, q, j, tail_p, alpha)
    for x in (1, 2, 5, 40):
        p = k.eval(x)
        phat = np.mean(draws == x)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(phat - p) < 4.5 * se, x
    # tail region reachable, matches exact tail mass beyond the alias table
    ptail = 2 * k.C * 0.0  # placeholder to keep names obvious
    big = np.abs(draws) > (1 << 16)
    from scipy import special

    ptail = 2 * k.C * float(special.zeta(1.7, (1 << 16) + 1))
    se = math.sqrt(ptail * (1 - ptail) / n)
    assert abs(np.mean(big) - ptail) < 5 * se


def test_rng_determinism():
    s1 = eng.rng_seed(np.uint64(7))
    s2 = eng.rng_seed(np.uint64(7))
    a = [eng._next_u64(s1) for _ in range(5)]
    b = [eng._next_u64(s2) for _ in range(5)]
    assert a == b
    s3 = eng.rng_seed(np.uint64(8))
    assert [eng._next_u64(s3) for _ in range(5)] != a


def test_walk_first_hit_nn_d1():
    # nearest-neighbor d=1 from site 1: recurrent, P(hit by large t) near 1
    seeds = spawn_seeds(5, 4000)
    out = np.zeros(4000)
    q = np.zeros(1)
    j = np.zeros(1, dtype=np.int64)
    eng.walk_hitting_from_pstep(seeds, 0, q, j, 0.0, 2.0, 1, 1.0, 2000.0, out)
    frac_hit = np.mean(out <= 2000.0)
    assert frac_hit > 0.9


def test_range_starts_at_one():
    k = make_kernel("pareto", 1, 1.0)
    q, j, tail_p, alpha = eng.pareto_sampler_pack(k)
    seeds = spawn_seeds(9, 50)
    out = np.zeros(50, dtype=np.int64)
    eng.walk_range(seeds, 1, q, j, tail_p, alpha, 1.0, 0.0, out)
    assert np.all(out == 1)
