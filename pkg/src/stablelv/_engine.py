"""Numba Monte Carlo core: RNG, exact step samplers, hash table, walk engines.

Everything in this module is deterministic given a replica seed, independently
of threading: replicas never share mutable state, and each replica's RNG is a
private xoshiro256++ stream seeded through splitmix64 from a 64-bit seed.

The pareto step sampler is exact: radii up to ``_TABLE_RADIUS`` come from an
alias table built from the exact cell masses, and the tail is drawn by integer
rejection against a continuous Pareto proposal whose acceptance ratio is
computed from the exact cell masses, so no truncation bias is introduced.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from scipy import special

EMPTY = np.int64(-(2**63))
TOMB = np.int64(-(2**63) + 1)

_TABLE_RADIUS = 1 << 16

# ----------------------------------------------------------------------- RNG


@njit(types.uint64(types.uint64), cache=True, nogil=True, inline="always")
def _sm64(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def rng_seed(seed):
    """Initialize a 4-word xoshiro256++ state from a 64-bit seed."""
    s = np.empty(4, dtype=np.uint64)
    z = np.uint64(seed)
    for i in range(4):
        z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
        s[i] = _sm64(z)
    return s


@njit(types.uint64(types.uint64[:]), cache=True, nogil=True, inline="always")
def _next_u64(s):
    x = s[0] + s[3]
    result = ((x << np.uint64(23)) | (x >> np.uint64(41))) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << np.uint64(45)) | (s[3] >> np.uint64(19))
    return result


@njit(types.float64(types.uint64[:]), cache=True, nogil=True, inline="always")
def _u01(s):
    return (_next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(types.float64(types.uint64[:]), cache=True, nogil=True, inline="always")
def _exp1(s):
    u = 1.0 - (_next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return -np.log(u)


# ------------------------------------------------------------- step sampling


def build_alias(probs: np.ndarray):
    """Vose alias table for a finite distribution (values indexed 0..K-1)."""
    probs = np.asarray(probs, dtype=float)
    K = probs.size
    scaled = probs * K / probs.sum()
    q = np.zeros(K)
    j = np.zeros(K, dtype=np.int64)
    small = [i for i in range(K) if scaled[i] < 1.0]
    large = [i for i in range(K) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        q[s] = scaled[s]
        j[s] = g
        scaled[g] = scaled[g] - (1.0 - scaled[s])
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:
        q[i] = 1.0
        j[i] = i
    return q, j


def pareto_sampler_pack(kernel):
    """(alias_q, alias_j, tail_p, alpha) for the exact d=1 pareto radius draw."""
    r = np.arange(1, _TABLE_RADIUS + 1, dtype=float)
    cell = r ** (-1.0 - kernel.alpha)
    tail_p = float(
        2.0 * kernel.C * special.zeta(1 + kernel.alpha, _TABLE_RADIUS + 1.0)
    )
    q, j = build_alias(cell)
    return q, j, tail_p, kernel.alpha


@njit(cache=True, nogil=True, inline="always")
def _tail_radius(s, alpha, R1):
    """Exact draw of the radius conditioned on radius >= R1 (integer rejection)."""
    rej_ref = R1 ** (-1.0 - alpha) / (R1**-alpha - (R1 + 1.0) ** -alpha)
    while True:
        u = 1.0 - _u01(s)
        v = R1 * u ** (-1.0 / alpha)
        m = np.floor(v)
        if m > 1e17:  # astronomically rare; re-draw to stay in exact int64 range
            continue
        ratio = m ** (-1.0 - alpha) / (m**-alpha - (m + 1.0) ** -alpha)
        if _u01(s) < ratio / rej_ref:
            return np.int64(m)


@njit(cache=True, nogil=True, inline="always")
def _pareto_step(s, alias_q, alias_j, tail_p, alpha):
    u = _u01(s)
    if u < tail_p:
        radius = _tail_radius(s, alpha, float(_TABLE_RADIUS + 1))
    else:
        k = np.int64(_u01(s) * alias_q.size)
        if k == alias_q.size:
            k -= 1
        if _u01(s) >= alias_q[k]:
            k = alias_j[k]
        radius = k + 1
    if _next_u64(s) & np.uint64(1):
        return radius
    return -radius


@njit(cache=True, nogil=True, inline="always")
def _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, out):
    """One step in up to 3 coordinates; fam 0 = nearest-neighbor, 1 = pareto."""
    out[0] = 0
    out[1] = 0
    out[2] = 0
    if fam == 1:
        out[0] = _pareto_step(s, alias_q, alias_j, tail_p, alpha)
    else:
        axis = np.int64(_u01(s) * d)
        if axis == d:
            axis -= 1
        out[axis] = 1 if (_next_u64(s) & np.uint64(1)) else -1


# ------------------------------------------------------------ open hash set


@njit(types.int64(types.int64, types.int64), cache=True, nogil=True, inline="always")
def _hashslot(key, mask):
    z = np.uint64(key) * np.uint64(0x9E3779B97F4A7C15)
    z ^= z >> np.uint64(32)
    return np.int64(z & np.uint64(mask))


@njit(cache=True, nogil=True, inline="always")
def _map_find(keys, key):
    """Slot of ``key`` or -1; keys length must be a power of two."""
    mask = keys.size - 1
    i = _hashslot(key, mask)
    while True:
        k = keys[i]
        if k == key:
            return i
        if k == EMPTY:
            return np.int64(-1)
        i = (i + 1) & mask


@njit(cache=True, nogil=True, inline="always")
def _map_put(keys, vals, key, val):
    """Insert key->val (key must not be present). Returns used slot."""
    mask = keys.size - 1
    i = _hashslot(key, mask)
    while keys[i] != EMPTY and keys[i] != TOMB:
        i = (i + 1) & mask
    keys[i] = key
    vals[i] = val
    return i


@njit(cache=True, nogil=True, inline="always")
def _map_del(keys, key):
    i = _map_find(keys, key)
    keys[i] = TOMB
    return i


# -------------------------------------------------------------- walk engines


@njit(cache=True, nogil=True)
def walk_first_hit(seed, fam, alias_q, alias_j, tail_p, alpha, d, nu, start, tmax):
    """First hitting time of the origin by a rate-``nu`` walk from ``start``.

    Returns tmax + 1 when the origin is not hit by ``tmax``.  ``start`` is a
    length-3 int64 array (unused coordinates zero).
    """
    s = rng_seed(seed)
    x = start.copy()
    step = np.zeros(3, dtype=np.int64)
    t = 0.0
    if x[0] == 0 and x[1] == 0 and x[2] == 0:
        return 0.0
    while True:
        t += _exp1(s) / nu
        if t > tmax:
            return tmax + 1.0
        _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
        x[0] += step[0]
        x[1] += step[1]
        x[2] += step[2]
        if x[0] == 0 and x[1] == 0 and x[2] == 0:
            return t


@njit(cache=True, nogil=True)
def walk_hitting_from_pstep(seeds, fam, alias_q, alias_j, tail_p, alpha, d, nu, tmax, out):
    """Per-replica first-hit times of 0 for walks started from a p-step."""
    step = np.zeros(3, dtype=np.int64)
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
        start = step.copy()
        # hand the prepared walk its own continuation stream
        x = start
        t = 0.0
        hit = tmax + 1.0
        while True:
            t += _exp1(s) / nu
            if t > tmax:
                break
            _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
            x[0] += step[0]
            x[1] += step[1]
            x[2] += step[2]
            if x[0] == 0 and x[1] == 0 and x[2] == 0:
                hit = t
                break
        out[r] = hit


@njit(cache=True, nogil=True)
def walk_pair_meet(seeds, fam, alias_q, alias_j, tail_p, alpha, d, tmax, out):
    """Coalescence time of walkers from (0, e), e ~ p, via the rate-2 difference walk."""
    step = np.zeros(3, dtype=np.int64)
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
        x = step.copy()
        t = 0.0
        hit = tmax + 1.0
        if x[0] == 0 and x[1] == 0 and x[2] == 0:
            out[r] = 0.0
            continue
        while True:
            t += _exp1(s) / 2.0
            if t > tmax:
                break
            _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
            x[0] += step[0]
            x[1] += step[1]
            x[2] += step[2]
            if x[0] == 0 and x[1] == 0 and x[2] == 0:
                hit = t
                break
        out[r] = hit


@njit(cache=True, nogil=True)
def walk_endpoints(seeds, fam, alias_q, alias_j, tail_p, alpha, d, nu, t_end, out):
    """Positions at time t_end of independent rate-nu walks from 0 (shape (n,3))."""
    step = np.zeros(3, dtype=np.int64)
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        x0 = 0
        x1 = 0
        x2 = 0
        t = 0.0
        while True:
            t += _exp1(s) / nu
            if t > t_end:
                break
            _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
            x0 += step[0]
            x1 += step[1]
            x2 += step[2]
        out[r, 0] = x0
        out[r, 1] = x1
        out[r, 2] = x2


@njit(cache=True, nogil=True)
def walk_range(seeds, fam, alias_q, alias_j, tail_p, alpha, nu, t_end, out):
    """Number of distinct visited sites by t_end for d=1 rate-nu walks from 0."""
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        cap = 1 << 12
        keys = np.full(cap, EMPTY, dtype=np.int64)
        n = 0
        mask = cap - 1
        x = np.int64(0)
        # insert origin
        keys[_hashslot(x, mask)] = x
        n = 1
        t = 0.0
        while True:
            t += _exp1(s) / nu
            if t > t_end:
                break
            st = _pareto_step(s, alias_q, alias_j, tail_p, alpha) if fam == 1 else (
                np.int64(1) if (_next_u64(s) & np.uint64(1)) else np.int64(-1)
            )
            x += st
            i = _map_find(keys, x)
            if i < 0:
                _map_put(keys, keys, x, x)
                n += 1
                if 2 * n > cap:
                    newcap = cap * 2
                    newkeys = np.full(newcap, EMPTY, dtype=np.int64)
                    for i2 in range(cap):
                        if keys[i2] != EMPTY:
                            _map_put(newkeys, newkeys, keys[i2], keys[i2])
                    keys = newkeys
                    cap = newcap
                    mask = cap - 1
        out[r] = n


@njit(cache=True, nogil=True)
def walk_max_abs(seeds, fam, alias_q, alias_j, tail_p, alpha, d, nu, t_end, out):
    """max_{u<=t} |B_u| (Euclidean, squared compared) for rate-nu walks from 0."""
    step = np.zeros(3, dtype=np.int64)
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        x0 = 0
        x1 = 0
        x2 = 0
        best = 0.0
        t = 0.0
        while True:
            t += _exp1(s) / nu
            if t > t_end:
                break
            _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
            x0 += step[0]
            x1 += step[1]
            x2 += step[2]
            v = float(x0 * x0 + x1 * x1 + x2 * x2)
            if v > best:
                best = v
        out[r] = np.sqrt(best)


@njit(cache=True, nogil=True)
def coalescing_triple_times(seeds, fam, alias_q, alias_j, tail_p, alpha, d, nu, tmax, out):
    """Coalescing walkers from {0, e, e'} with (e, e') ~ p x p.

    Writes per replica (tau_ee', tau_0e, tau_0e') capped at tmax (tmax + 1 when
    the pair has not coalesced).  Cluster bookkeeping: labels 0, 1, 2 for the
    walkers started at 0, e, e'; merged walkers share a position index.
    """
    step = np.zeros(3, dtype=np.int64)
    pos = np.zeros((3, 3), dtype=np.int64)
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
        for c in range(3):
            pos[1, c] = step[c]
        _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
        for c in range(3):
            pos[2, c] = step[c]
        for c in range(3):
            pos[0, c] = 0
        # cluster id per original walker
        cl = np.array([0, 1, 2], dtype=np.int64)
        t_ee = tmax + 1.0
        t_0e = tmax + 1.0
        t_0ep = tmax + 1.0
        # immediate coincidences at time 0
        for a in range(3):
            for b2 in range(a + 1, 3):
                if cl[a] != cl[b2] and (
                    pos[cl[a], 0] == pos[cl[b2], 0]
                    and pos[cl[a], 1] == pos[cl[b2], 1]
                    and pos[cl[a], 2] == pos[cl[b2], 2]
                ):
                    cm = cl[b2]
                    for w in range(3):
                        if cl[w] == cm:
                            cl[w] = cl[a]
        if cl[1] == cl[2] and t_ee > tmax:
            t_ee = 0.0
        if cl[0] == cl[1]:
            t_0e = 0.0
        if cl[0] == cl[2]:
            t_0ep = 0.0
        t = 0.0
        while True:
            # live clusters
            nlive = 0
            live0 = -1
            live1 = -1
            live2 = -1
            seen0 = False
            seen1 = False
            seen2 = False
            for w in range(3):
                c2 = cl[w]
                if c2 == 0 and not seen0:
                    seen0 = True
                    nlive += 1
                elif c2 == 1 and not seen1:
                    seen1 = True
                    nlive += 1
                elif c2 == 2 and not seen2:
                    seen2 = True
                    nlive += 1
            if nlive == 1:
                break
            if t_0e <= tmax and t_0ep <= tmax and t_ee <= tmax:
                break
            t += _exp1(s) / (nu * nlive)
            if t > tmax:
                break
            # choose a live cluster uniformly
            pick = np.int64(_u01(s) * nlive)
            if pick == nlive:
                pick -= 1
            chosen = -1
            cnt = 0
            for c2 in range(3):
                used = False
                for w in range(3):
                    if cl[w] == c2:
                        used = True
                        break
                if used:
                    if cnt == pick:
                        chosen = c2
                        break
                    cnt += 1
            _step_d(s, fam, alias_q, alias_j, tail_p, alpha, d, step)
            for c2 in range(3):
                pos[chosen, c2] += step[c2]
            # merge check against other live clusters
            for other in range(3):
                if other == chosen:
                    continue
                used = False
                for w in range(3):
                    if cl[w] == other:
                        used = True
                        break
                if not used:
                    continue
                if (
                    pos[chosen, 0] == pos[other, 0]
                    and pos[chosen, 1] == pos[other, 1]
                    and pos[chosen, 2] == pos[other, 2]
                ):
                    for w in range(3):
                        if cl[w] == other:
                            cl[w] = chosen
                    if cl[1] == cl[2] and t_ee > tmax:
                        t_ee = t
                    if cl[0] == cl[1] and t_0e > tmax:
                        t_0e = t
                    if cl[0] == cl[2] and t_0ep > tmax:
                        t_0ep = t
        out[r, 0] = t_ee
        out[r, 1] = t_0e
        out[r, 2] = t_0ep


@njit(cache=True, nogil=True)
def independent_first_collision(seeds, fam, alias_q, alias_j, tail_p, alpha, nu, tmax, out):
    """Independent walks from {0, e, e'} (d=1): first (e,e') collision data.

    Per replica writes (status, u, x, y): status 1 if the (e,e') pair collided
    at time u <= tmax with no earlier 0-collision, in which case x = B^0_u and
    y = B^e_u; status 0 if a 0-collision happened first; status -1 if no
    decision by tmax.
    """
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        e = _pareto_step(s, alias_q, alias_j, tail_p, alpha)
        ep = _pareto_step(s, alias_q, alias_j, tail_p, alpha)
        x0 = np.int64(0)
        x1 = e
        x2 = ep
        status = np.int64(-1)
        u = tmax + 1.0
        if x1 == x0 or x2 == x0:
            status = 0
            u = 0.0
        elif x1 == x2:
            status = 1
            u = 0.0
        t = 0.0
        while status < 0:
            t += _exp1(s) / (3.0 * nu)
            if t > tmax:
                break
            w = np.int64(_u01(s) * 3)
            if w == 3:
                w -= 1
            st = _pareto_step(s, alias_q, alias_j, tail_p, alpha)
            if w == 0:
                x0 += st
            elif w == 1:
                x1 += st
            else:
                x2 += st
            if x0 == x1 or x0 == x2:
                status = 0
                u = t
            elif x1 == x2:
                status = 1
                u = t
        out[r, 0] = float(status)
        out[r, 1] = u
        out[r, 2] = float(x0)
        out[r, 3] = float(x1)
