"""Numba event engines for spin systems on Z (d = 1) and small tori.

State is a sparse 1-set: open-addressed hash map site -> dense index, plus a
dense ``sites`` array supporting uniform sampling and O(1) deletion by
swap-with-last.  All engines are deterministic per replica seed and release
the GIL.

Flip mechanics (exact law):

* voter / biased voter: "push" proposals (uniform 1-site y, step e ~ p,
  target x = y + e, flip 0->1 if empty) at rate (nu + b_birth)|xi| and "pull"
  proposals (uniform 1-site x, flip 1->0 if xi(x+e) = 0) at rate
  (nu + b_death)|xi|.
* Lotka-Volterra: the same proposals at dominating rates N max(1, alpha_i)|xi|
  thinned by the exact acceptance ratios (1 + (alpha_0-1) f1(x))/max(1,alpha_0)
  for births and (1 + (alpha_1-1) f0(x))/max(1,alpha_1) for deaths, with
  f1(x) summed exactly over the current 1-set.
* coupled triple: one proposal stream drawn from the upper (1-biased) set;
  lower/middle/upper apply their own thresholds to the shared uniform so that
  the inclusion lower <= middle <= upper is preserved pathwise (asserted).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from stablelv._engine import (
    EMPTY,
    TOMB,
    _exp1,
    _hashslot,
    _next_u64,
    _pareto_step,
    _u01,
    rng_seed,
)

# ------------------------------------------------------------ hash map + set


@njit(cache=True, nogil=True, inline="always")
def _hs_find(keys, x):
    mask = keys.size - 1
    i = _hashslot(x, mask)
    while True:
        k = keys[i]
        if k == x:
            return i
        if k == EMPTY:
            return np.int64(-1)
        i = (i + 1) & mask


@njit(cache=True, nogil=True, inline="always")
def _hs_add(keys, idx, sites, n, x):
    """Insert x (must be absent); returns new n."""
    mask = keys.size - 1
    i = _hashslot(x, mask)
    free = np.int64(-1)
    while True:
        k = keys[i]
        if k == TOMB and free < 0:
            free = i
        if k == EMPTY:
            j = free if free >= 0 else i
            keys[j] = x
            idx[j] = n
            sites[n] = x
            return n + 1
        i = (i + 1) & mask


@njit(cache=True, nogil=True, inline="always")
def _hs_del(keys, idx, sites, n, x):
    """Remove x (must be present); returns new n."""
    i = _hs_find(keys, x)
    pos = idx[i]
    keys[i] = TOMB
    last = sites[n - 1]
    if last != x:
        sites[pos] = last
        j = _hs_find(keys, last)
        idx[j] = pos
    return n - 1


@njit(cache=True, nogil=True)
def _hs_rebuild(sites, n, cap):
    keys = np.full(cap, EMPTY, dtype=np.int64)
    idx = np.empty(cap, dtype=np.int64)
    mask = cap - 1
    for i in range(n):
        s = _hashslot(sites[i], mask)
        while keys[s] != EMPTY:
            s = (s + 1) & mask
        keys[s] = sites[i]
        idx[s] = i
    return keys, idx


# ------------------------------------------------------------- step sampling


@njit(cache=True, nogil=True, inline="always")
def _step1(s, fam, alias_q, alias_j, tail_p, alpha):
    if fam == 1:
        return _pareto_step(s, alias_q, alias_j, tail_p, alpha)
    if _next_u64(s) & np.uint64(1):
        return np.int64(1)
    return np.int64(-1)


@njit(cache=True, nogil=True, inline="always")
def _step1_torus(s, fam, alias_q, alias_j, tail_p, alpha, L):
    """Step of the wrapped kernel with the self-jump mass removed."""
    while True:
        e = _step1(s, fam, alias_q, alias_j, tail_p, alpha) % L
        if e != 0:
            return e


@njit(cache=True, nogil=True, inline="always")
def _p_eval(fam, C, alpha, ptab, z):
    """Exact step probability p(z) on Z (table-accelerated for small |z|)."""
    az = z if z >= 0 else -z
    if az == 0:
        return 0.0
    if fam == 0:
        return 0.5 if az == 1 else 0.0
    if az < ptab.size:
        return ptab[az]
    return C * float(az) ** (-1.0 - alpha)


@njit(cache=True, nogil=True, inline="always")
def _f1_at(fam, C, alpha, ptab, torus_L, pl_tab, sites, n, x):
    """Exact 1-neighbor frequency f1(x) = sum_y p(y - x) xi(y)."""
    acc = 0.0
    if torus_L > 0:
        for i in range(n):
            acc += pl_tab[(sites[i] - x) % torus_L]
    else:
        for i in range(n):
            acc += _p_eval(fam, C, alpha, ptab, sites[i] - x)
    return acc


# ----------------------------------------------------------- voter & biased


@njit(cache=True, nogil=True, inline="always")
def _torus_mask(sites, n):
    mask = np.int64(0)
    for i in range(n):
        mask |= np.int64(1) << sites[i]
    return mask


@njit(cache=True, nogil=True)
def biased_voter_run(
    seeds,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    nu,
    b,
    side,
    torus_L,
    init_sites,
    sample_times,
    out_mass,
    out_state,
    out_flag,
    site_cap,
):
    """Voter (side=0, b=0) or 1-/0-biased voter (side=+1/-1) mass paths.

    out_mass[r, k] = |xi| at sample_times[k]; out_flag[r] = 1 if the mass cap
    was hit (path then frozen at the cap as a lower bound).  On a torus the
    full configuration bitmask is written to out_state alongside each sample.
    """
    nt = sample_times.size
    sites = np.empty(site_cap, dtype=np.int64)
    cap0 = 64
    while cap0 < 4 * (init_sites.size + 1):
        cap0 *= 2
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        keys = np.full(cap0, EMPTY, dtype=np.int64)
        idx = np.empty(cap0, dtype=np.int64)
        n = 0
        fill = 0
        for i in range(init_sites.size):
            n = _hs_add(keys, idx, sites, n, init_sites[i])
            fill += 1
        push = nu + (b if side == 1 else 0.0)
        pull = nu + (b if side == -1 else 0.0)
        t = 0.0
        cur = 0
        flag = 0
        while cur < nt:
            if n == 0:
                break
            rate = (push + pull) * n
            t += _exp1(s) / rate
            while cur < nt and sample_times[cur] < t:
                out_mass[r, cur] = n
                if torus_L > 0:
                    out_state[r, cur] = _torus_mask(sites, n)
                cur += 1
            if cur >= nt:
                break
            k = np.int64(_u01(s) * n)
            if k == n:
                k -= 1
            y = sites[k]
            if torus_L > 0:
                e = _step1_torus(s, fam, alias_q, alias_j, tail_p, alpha, torus_L)
            else:
                e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
            if _u01(s) * (push + pull) < push:
                x = y + e
                if torus_L > 0:
                    x %= torus_L
                if _hs_find(keys, x) < 0:
                    if n >= site_cap - 1:
                        flag = 1
                        break
                    n = _hs_add(keys, idx, sites, n, x)
                    fill += 1
                    if 3 * (fill + 1) > 2 * keys.size:
                        cap2 = keys.size
                        while 3 * (n + 1) * 2 > 2 * cap2:
                            cap2 *= 2
                        keys, idx = _hs_rebuild(sites, n, cap2)
                        fill = n
            else:
                x = y + e
                if torus_L > 0:
                    x %= torus_L
                if _hs_find(keys, x) < 0:
                    n = _hs_del(keys, idx, sites, n, y)
        while cur < nt:
            out_mass[r, cur] = n if (n > 0 or flag == 1) else 0
            if torus_L > 0:
                out_state[r, cur] = _torus_mask(sites, n)
            cur += 1
        out_flag[r] = flag


# ------------------------------------------------------------ Lotka-Volterra


@njit(cache=True, nogil=True)
def lv_run(
    seeds,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    C,
    ptab,
    N,
    a0m1,
    a1m1,
    torus_L,
    pl_tab,
    init_sites,
    sample_times,
    out_mass,
    out_state,
    out_err,
    site_cap,
    ev_times,
    ev_sites,
    ev_delta,
    ev_count,
):
    """Rescaled Lotka-Volterra run by exact thinning.

    out_err[r]: 0 ok, 1 acceptance-probability out of [0,1] (rate-algebra
    bug; aborted), 2 mass cap hit.  If ev_times has room (per-replica stride
    ev_times.shape[1] > 0) the event log (time, site, +-1) is recorded.
    The acceptance uniform is drawn only when the probability is below one,
    so theta = 0 consumes the same stream as the rate-N voter model.
    """
    nt = sample_times.size
    log_cap = ev_times.shape[1] if ev_times.ndim == 2 else 0
    m0 = max(1.0, 1.0 + a0m1)
    m1 = max(1.0, 1.0 + a1m1)
    sites = np.empty(site_cap, dtype=np.int64)
    cap0 = 64
    while cap0 < 4 * (init_sites.size + 1):
        cap0 *= 2
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        keys = np.full(cap0, EMPTY, dtype=np.int64)
        idx = np.empty(cap0, dtype=np.int64)
        n = 0
        fill = 0
        for i in range(init_sites.size):
            n = _hs_add(keys, idx, sites, n, init_sites[i])
            fill += 1
        t = 0.0
        cur = 0
        err = 0
        nev = 0
        while cur < nt:
            if n == 0:
                break
            rate = N * (m0 + m1) * n
            t += _exp1(s) / rate
            while cur < nt and sample_times[cur] < t:
                out_mass[r, cur] = n
                if torus_L > 0:
                    out_state[r, cur] = _torus_mask(sites, n)
                cur += 1
            if cur >= nt:
                break
            k = np.int64(_u01(s) * n)
            if k == n:
                k -= 1
            y = sites[k]
            if torus_L > 0:
                e = _step1_torus(s, fam, alias_q, alias_j, tail_p, alpha, torus_L)
            else:
                e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
            birth = _u01(s) * (m0 + m1) < m0
            x = y + e
            if torus_L > 0:
                x %= torus_L
            if birth:
                if _hs_find(keys, x) >= 0:
                    continue
                f1 = _f1_at(fam, C, alpha, ptab, torus_L, pl_tab, sites, n, x)
                acc = (1.0 + a0m1 * f1) / m0
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc >= 1.0 or _u01(s) < acc:
                    if n >= site_cap - 1:
                        err = 2
                        break
                    n = _hs_add(keys, idx, sites, n, x)
                    fill += 1
                    if 3 * (fill + 1) > 2 * keys.size:
                        cap2 = keys.size
                        while 3 * (n + 1) * 2 > 2 * cap2:
                            cap2 *= 2
                        keys, idx = _hs_rebuild(sites, n, cap2)
                        fill = n
                    if nev < log_cap:
                        ev_times[r, nev] = t
                        ev_sites[r, nev] = x
                        ev_delta[r, nev] = 1
                        nev += 1
            else:
                # pull death at the chosen 1-site y, requiring xi(y + e) = 0
                if _hs_find(keys, x) >= 0:
                    continue
                f1 = _f1_at(fam, C, alpha, ptab, torus_L, pl_tab, sites, n, y)
                f0 = 1.0 - f1
                acc = (1.0 + a1m1 * f0) / m1
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc >= 1.0 or _u01(s) < acc:
                    n = _hs_del(keys, idx, sites, n, y)
                    if nev < log_cap:
                        ev_times[r, nev] = t
                        ev_sites[r, nev] = y
                        ev_delta[r, nev] = -1
                        nev += 1
        while cur < nt:
            out_mass[r, cur] = n
            if torus_L > 0:
                out_state[r, cur] = _torus_mask(sites, n)
            cur += 1
        out_err[r] = err
        ev_count[r] = nev


@njit(cache=True, nogil=True)
def frozen_lv_audit(
    seed,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    C,
    ptab,
    a0m1,
    sites,
    target,
    nevents,
):
    """Accepted 0->1 flips at an empty ``target`` over nevents frozen birth
    proposals (configuration never updated). Returns the acceptance count."""
    s = rng_seed(seed)
    n = sites.size
    m0 = max(1.0, 1.0 + a0m1)
    count = 0
    empty_pl = np.zeros(1)
    for _ in range(nevents):
        k = np.int64(_u01(s) * n)
        if k == n:
            k -= 1
        y = sites[k]
        e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
        x = y + e
        u = _u01(s)
        if x != target:
            continue
        f1 = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, x)
        acc = (1.0 + a0m1 * f1) / m0
        if u < acc:
            count += 1
    return count


# ------------------------------------------------------------ coupled triple


@njit(cache=True, nogil=True)
def coupled_run(
    seeds,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    C,
    ptab,
    nu,
    b,
    N,
    a0m1,
    a1m1,
    init_sites,
    sample_times,
    out_mass3,
    out_abort,
    out_events,
    max_events,
    site_cap,
):
    """Monotone triple (lower 0-biased voter, LV, upper 1-biased voter).

    One proposal stream is drawn from the upper set; each process applies its
    own threshold to the shared uniform.  out_abort[r] = event index of an
    ordering violation (-1 if none, the expected outcome).
    """
    nt = sample_times.size
    sU = np.empty(site_cap, dtype=np.int64)
    sM = np.empty(site_cap, dtype=np.int64)
    sL = np.empty(site_cap, dtype=np.int64)
    cap0 = 64
    while cap0 < 8 * (init_sites.size + 1):
        cap0 *= 2
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        kU = np.full(cap0, EMPTY, dtype=np.int64)
        iU = np.empty(cap0, dtype=np.int64)
        kM = np.full(cap0, EMPTY, dtype=np.int64)
        iM = np.empty(cap0, dtype=np.int64)
        kL = np.full(cap0, EMPTY, dtype=np.int64)
        iL = np.empty(cap0, dtype=np.int64)
        nU = 0
        nM = 0
        nL = 0
        for i in range(init_sites.size):
            nU = _hs_add(kU, iU, sU, nU, init_sites[i])
            nM = _hs_add(kM, iM, sM, nM, init_sites[i])
            nL = _hs_add(kL, iL, sL, nL, init_sites[i])
        fillU = nU
        fillM = nM
        fillL = nL
        t = 0.0
        cur = 0
        abort = np.int64(-1)
        nev = np.int64(0)
        empty_pl = np.zeros(1)
        while cur < nt and nev < max_events:
            if nU == 0:
                break
            rate = 2.0 * (nu + b) * nU
            t += _exp1(s) / rate
            while cur < nt and sample_times[cur] < t:
                out_mass3[r, cur, 0] = nL
                out_mass3[r, cur, 1] = nM
                out_mass3[r, cur, 2] = nU
                cur += 1
            if cur >= nt:
                break
            nev += 1
            k = np.int64(_u01(s) * nU)
            if k == nU:
                k -= 1
            y = sU[k]
            e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
            u = _u01(s)
            birth = _next_u64(s) & np.uint64(1)
            x = y + e
            if nU >= site_cap - 2 or nM >= site_cap - 2:
                break
            if birth:
                # upper always accepts; middle needs y occupied + LV threshold;
                # lower needs y occupied + voter threshold nu/(nu+b)
                if _hs_find(kU, x) < 0:
                    nU = _hs_add(kU, iU, sU, nU, x)
                    fillU += 1
                    if 3 * (fillU + 1) > 2 * kU.size:
                        cap2 = 64
                        while cap2 < 4 * (nU + 1):
                            cap2 *= 2
                        kU, iU = _hs_rebuild(sU, nU, cap2)
                        fillU = nU
                if _hs_find(kM, y) >= 0 and _hs_find(kM, x) < 0:
                    f1 = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sM, nM, x)
                    if u < N * (1.0 + a0m1 * f1) / (nu + b):
                        nM = _hs_add(kM, iM, sM, nM, x)
                        fillM += 1
                        if 3 * (fillM + 1) > 2 * kM.size:
                            cap2 = 64
                            while cap2 < 4 * (nM + 1):
                                cap2 *= 2
                            kM, iM = _hs_rebuild(sM, nM, cap2)
                            fillM = nM
                if _hs_find(kL, y) >= 0 and _hs_find(kL, x) < 0:
                    if u < nu / (nu + b):
                        nL = _hs_add(kL, iL, sL, nL, x)
                        fillL += 1
                        if 3 * (fillL + 1) > 2 * kL.size:
                            cap2 = 64
                            while cap2 < 4 * (nL + 1):
                                cap2 *= 2
                            kL, iL = _hs_rebuild(sL, nL, cap2)
                            fillL = nL
            else:
                # death of site y = chosen upper 1-site, given xi(y + e) empty;
                # lower always accepts, middle LV threshold, upper voter rate
                if _hs_find(kL, y) >= 0 and _hs_find(kL, x) < 0:
                    nL = _hs_del(kL, iL, sL, nL, y)
                if _hs_find(kM, y) >= 0 and _hs_find(kM, x) < 0:
                    f0 = 1.0 - _f1_at(fam, C, alpha, ptab, 0, empty_pl, sM, nM, y)
                    if u < N * (1.0 + a1m1 * f0) / (nu + b):
                        nM = _hs_del(kM, iM, sM, nM, y)
                if _hs_find(kU, x) < 0:
                    if u < nu / (nu + b):
                        nU = _hs_del(kU, iU, sU, nU, y)
            # ordering audit on the touched sites
            for site in (x, y):
                lo = 1 if _hs_find(kL, site) >= 0 else 0
                mid = 1 if _hs_find(kM, site) >= 0 else 0
                up = 1 if _hs_find(kU, site) >= 0 else 0
                if lo > mid or mid > up:
                    abort = nev
            if abort >= 0:
                break
        while cur < nt:
            out_mass3[r, cur, 0] = nL
            out_mass3[r, cur, 1] = nM
            out_mass3[r, cur, 2] = nU
            cur += 1
        out_abort[r] = abort
        out_events[r] = nev


# ------------------------------------------------- semimartingale bookkeeping


@njit(cache=True, nogil=True)
def decomp_run0(
    seeds,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    C,
    ptab,
    N,
    a0m1,
    a1m1,
    nprime,
    w0_re,
    Z,
    init_sites,
    t_end,
    out,
    oob,
    site_cap,
):
    """Fast phi = 1 specialization of decomp_run (same output layout).

    With phi = 1 every trigonometric weight collapses and only |xi|,
    F1 = sum_{x in xi} f1(x), D2s = sum_{x in xi} f1(x)^2 and the pair sum
    P0 = sum_{x} f1(x)^2 need maintaining; each accepted flip costs one
    p-evaluation and one W-table lookup per occupied site.
    """
    m0 = max(1.0, 1.0 + a0m1)
    m1 = max(1.0, 1.0 + a1m1)
    empty_pl = np.zeros(1)
    sites = np.empty(site_cap, dtype=np.int64)
    farr = np.empty(site_cap, dtype=np.float64)
    cap0 = 64
    while cap0 < 4 * (init_sites.size + 1):
        cap0 *= 2
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        keys = np.full(cap0, EMPTY, dtype=np.int64)
        idx = np.empty(cap0, dtype=np.int64)
        n = 0
        for i in range(init_sites.size):
            n = _hs_add(keys, idx, sites, n, init_sites[i])
        fill = n
        F1 = 0.0
        D2s = 0.0
        for i in range(n):
            fi = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, sites[i])
            farr[i] = fi
            F1 += fi
            D2s += fi * fi
        P0 = 0.0
        for i in range(n):
            for j2 in range(n):
                re0, _ = _w_look(w0_re, w0_re, Z, sites[j2] - sites[i], oob)
                P0 += re0
        n0 = n
        t = 0.0
        D2 = 0.0
        D3 = 0.0
        Q1 = 0.0
        Q2 = 0.0
        iX1 = 0.0
        iX2 = 0.0
        err = 0
        nev = np.int64(0)
        w0self = w0_re[Z]
        while True:
            if n == 0:
                break
            I2 = (N * a0m1 / nprime) * (P0 - D2s)
            I3 = (N * a1m1 / nprime) * (n - 2.0 * F1 + D2s)
            Iq1 = (N / (nprime * nprime)) * (2.0 * n - 2.0 * F1)
            Iq2 = (N / (nprime * nprime)) * (
                a0m1 * (P0 - D2s) + a1m1 * (n - 2.0 * F1 + D2s)
            )
            rate = N * (m0 + m1) * n
            dt = _exp1(s) / rate
            if t + dt >= t_end:
                dt = t_end - t
                t = t_end
            else:
                t += dt
            D2 += I2 * dt
            D3 += I3 * dt
            Q1 += Iq1 * dt
            Q2 += Iq2 * dt
            iX1 += (n / nprime) * dt
            iX2 += (n / nprime) * dt
            if t >= t_end:
                break
            nev += 1
            k = np.int64(_u01(s) * n)
            if k == n:
                k -= 1
            y = sites[k]
            e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
            birth = _u01(s) * (m0 + m1) < m0
            x = y + e
            if birth:
                if _hs_find(keys, x) >= 0:
                    continue
                fz = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, x)
                acc = (1.0 + a0m1 * fz) / m0
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc < 1.0 and _u01(s) >= acc:
                    continue
                if n >= site_cap - 1:
                    err = 2
                    break
                for i in range(n):
                    d = _p_eval(fam, C, alpha, ptab, x - sites[i])
                    F1 += d
                    D2s += d * (2.0 * farr[i] + d)
                    farr[i] += d
                    re0, _ = _w_look(w0_re, w0_re, Z, sites[i] - x, oob)
                    P0 += 2.0 * re0
                P0 += w0self
                n = _hs_add(keys, idx, sites, n, x)
                farr[n - 1] = fz
                F1 += fz
                D2s += fz * fz
                fill += 1
                if 3 * (fill + 1) > 2 * keys.size:
                    cap2 = keys.size
                    while 3 * (n + 1) * 2 > 2 * cap2:
                        cap2 *= 2
                    keys, idx = _hs_rebuild(sites, n, cap2)
                    fill = n
            else:
                if _hs_find(keys, x) >= 0:
                    continue
                fz = farr[k]
                acc = (1.0 + a1m1 * (1.0 - fz)) / m1
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc < 1.0 and _u01(s) >= acc:
                    continue
                F1 -= fz
                D2s -= fz * fz
                pos = idx[_hs_find(keys, y)]
                n = _hs_del(keys, idx, sites, n, y)
                if pos < n:
                    farr[pos] = farr[n]
                for i in range(n):
                    d = _p_eval(fam, C, alpha, ptab, y - sites[i])
                    F1 -= d
                    D2s += d * (d - 2.0 * farr[i])
                    farr[i] -= d
                    re0, _ = _w_look(w0_re, w0_re, Z, sites[i] - y, oob)
                    P0 -= 2.0 * re0
                P0 -= w0self
        # final audit: fresh pair sum and neighbor sums
        fP0 = 0.0
        fF1 = 0.0
        for i in range(n):
            fF1 += _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, sites[i])
            for j2 in range(n):
                re0, _ = _w_look(w0_re, w0_re, Z, sites[j2] - sites[i], oob)
                fP0 += re0
        scale = 1.0 + abs(fP0) + abs(fF1)
        resid = (abs(fP0 - P0) + abs(fF1 - F1)) / scale
        out[r, 0] = n0 / nprime
        out[r, 1] = n / nprime
        out[r, 2] = 0.0
        out[r, 3] = D2
        out[r, 4] = D3
        out[r, 5] = Q1
        out[r, 6] = Q2
        out[r, 7] = iX1
        out[r, 8] = iX2
        out[r, 9] = resid
        out[r, 10] = err
        out[r, 11] = nev


@njit(cache=True, nogil=True, inline="always")
def _w_look(tab_re, tab_im, Z, z, oob):
    if z < -Z or z > Z:
        oob[0] += 1
        return 0.0, 0.0
    return tab_re[z + Z], tab_im[z + Z]


@njit(cache=True, nogil=True)
def decomp_run(
    seeds,
    fam,
    alias_q,
    alias_j,
    tail_p,
    alpha,
    C,
    ptab,
    N,
    a0m1,
    a1m1,
    nprime,
    w,
    psi_w,
    psi_2w,
    w0_re,
    ww_re,
    ww_im,
    w2_re,
    w2_im,
    Z,
    init_sites,
    t_end,
    out,
    oob,
    site_cap,
):
    """Lotka-Volterra run maintaining the semimartingale pieces for one
    plane-wave observable phi(x) = cos(w x) (w = 0 gives phi = 1).

    Per replica ``out`` row: [X0(phi), Xt(phi), D1, D2, D3, QV1, QV2,
    int X_s(phi) ds, int X_s(phi^2) ds, pair-sum residual, err, events].
    All integrals are exact piecewise-constant sums over inter-event
    intervals; pair sums (needed for the off-1-set terms sum_x phi f1^2 and
    sum_x phi^2 f1^2) are maintained incrementally through W-kernel tables
    and re-verified against a fresh O(n^2) recomputation at the end.
    """
    m0 = max(1.0, 1.0 + a0m1)
    m1 = max(1.0, 1.0 + a1m1)
    empty_pl = np.zeros(1)
    sites = np.empty(site_cap, dtype=np.int64)
    farr = np.empty(site_cap, dtype=np.float64)
    cap0 = 64
    while cap0 < 4 * (init_sites.size + 1):
        cap0 *= 2
    for r in range(seeds.size):
        s = rng_seed(seeds[r])
        keys = np.full(cap0, EMPTY, dtype=np.int64)
        idx = np.empty(cap0, dtype=np.int64)
        n = 0
        for i in range(init_sites.size):
            n = _hs_add(keys, idx, sites, n, init_sites[i])
        fill = n
        for i in range(n):
            farr[i] = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, sites[i])
        # pair sums over (y, y') in xi^2: P0 = sum W0(y'-y),
        # Pw = sum e^{i w y} W_w(y'-y), P2w likewise at 2w
        P0 = 0.0
        PwR = 0.0
        PwI = 0.0
        P2R = 0.0
        P2I = 0.0
        for i in range(n):
            yi = sites[i]
            cyi = np.cos(w * yi)
            syi = np.sin(w * yi)
            c2i = np.cos(2 * w * yi)
            s2i = np.sin(2 * w * yi)
            for j2 in range(n):
                z = sites[j2] - yi
                re0, _ = _w_look(w0_re, w0_re, Z, z, oob)
                P0 += re0
                rew, imw = _w_look(ww_re, ww_im, Z, z, oob)
                PwR += cyi * rew - syi * imw
                PwI += cyi * imw + syi * rew
                re2, im2 = _w_look(w2_re, w2_im, Z, z, oob)
                P2R += c2i * re2 - s2i * im2
                P2I += c2i * im2 + s2i * re2
        # single-site sums
        S1 = 0.0
        S2 = 0.0
        S1b = 0.0
        for i in range(n):
            cy = np.cos(w * sites[i])
            S1 += cy
            S2 += cy * cy
            S1b += np.cos(2 * w * sites[i])
        X0phi = S1 / nprime
        t = 0.0
        D1 = 0.0
        D2 = 0.0
        D3 = 0.0
        Q1 = 0.0
        Q2 = 0.0
        iX1 = 0.0
        iX2 = 0.0
        err = 0
        nev = np.int64(0)
        while True:
            if n == 0:
                break
            # integrands from current state
            B = 0.0
            Cq = 0.0
            D2s = 0.0
            E2s = 0.0
            for i in range(n):
                cy = np.cos(w * sites[i])
                fi = farr[i]
                B += cy * fi
                Cq += cy * cy * fi
                D2s += cy * fi * fi
                E2s += cy * cy * fi * fi
            T_phi = PwR  # sum over all x of cos(w x) f1(x)^2
            T_phi2 = 0.5 * (P0 + P2R)  # sum over all x of cos^2(w x) f1(x)^2
            U_phi2 = 0.5 * n + 0.5 * psi_2w * S1b
            I1 = N * (psi_w - 1.0) * S1 / nprime
            I2 = (N * a0m1 / nprime) * (T_phi - D2s)
            I3 = (N * a1m1 / nprime) * (S1 - 2.0 * B + D2s)
            Iq1 = (N / (nprime * nprime)) * (S2 + U_phi2 - 2.0 * Cq)
            Iq2 = (N / (nprime * nprime)) * (
                a0m1 * (T_phi2 - E2s) + a1m1 * (S2 - 2.0 * Cq + E2s)
            )
            rate = N * (m0 + m1) * n
            dt = _exp1(s) / rate
            if t + dt >= t_end:
                dt = t_end - t
                t = t_end
            else:
                t += dt
            D1 += I1 * dt
            D2 += I2 * dt
            D3 += I3 * dt
            Q1 += Iq1 * dt
            Q2 += Iq2 * dt
            iX1 += (S1 / nprime) * dt
            iX2 += (S2 / nprime) * dt
            if t >= t_end:
                break
            nev += 1
            k = np.int64(_u01(s) * n)
            if k == n:
                k -= 1
            y = sites[k]
            e = _step1(s, fam, alias_q, alias_j, tail_p, alpha)
            birth = _u01(s) * (m0 + m1) < m0
            x = y + e
            z_new = np.int64(0)
            delta = 0
            if birth:
                if _hs_find(keys, x) >= 0:
                    continue
                f1 = _f1_at(fam, C, alpha, ptab, 0, empty_pl, sites, n, x)
                acc = (1.0 + a0m1 * f1) / m0
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc < 1.0 and _u01(s) >= acc:
                    continue
                if n >= site_cap - 1:
                    err = 2
                    break
                z_new = x
                delta = 1
            else:
                if _hs_find(keys, x) >= 0:
                    continue
                f1 = farr[k]
                f0 = 1.0 - f1
                acc = (1.0 + a1m1 * f0) / m1
                if acc < -1e-12 or acc > 1.0 + 1e-12:
                    err = 1
                    break
                if acc < 1.0 and _u01(s) >= acc:
                    continue
                z_new = y
                delta = -1
            # ---- apply flip at z_new and update maintained quantities
            zc = np.cos(w * z_new)
            zs = np.sin(w * z_new)
            z2c = np.cos(2 * w * z_new)
            z2s = np.sin(2 * w * z_new)
            if delta == 1:
                # pair sums against the old set, then the self term
                dP0 = 0.0
                a_re = 0.0
                a_im = 0.0
                b_re = 0.0
                b_im = 0.0
                a2_re = 0.0
                a2_im = 0.0
                b2_re = 0.0
                b2_im = 0.0
                for i in range(n):
                    yi = sites[i]
                    zz = yi - z_new
                    re0, _ = _w_look(w0_re, w0_re, Z, zz, oob)
                    dP0 += 2.0 * re0
                    rew, imw = _w_look(ww_re, ww_im, Z, zz, oob)
                    a_re += rew
                    a_im += imw
                    rew2, imw2 = _w_look(ww_re, ww_im, Z, -zz, oob)
                    cyi = np.cos(w * yi)
                    syi = np.sin(w * yi)
                    b_re += cyi * rew2 - syi * imw2
                    b_im += cyi * imw2 + syi * rew2
                    re2, im2 = _w_look(w2_re, w2_im, Z, zz, oob)
                    a2_re += re2
                    a2_im += im2
                    re22, im22 = _w_look(w2_re, w2_im, Z, -zz, oob)
                    c2i = np.cos(2 * w * yi)
                    s2i = np.sin(2 * w * yi)
                    b2_re += c2i * re22 - s2i * im22
                    b2_im += c2i * im22 + s2i * re22
                w0self, _ = _w_look(w0_re, w0_re, Z, 0, oob)
                wwselfR, wwselfI = _w_look(ww_re, ww_im, Z, 0, oob)
                w2selfR, w2selfI = _w_look(w2_re, w2_im, Z, 0, oob)
                P0 += dP0 + w0self
                PwR += (zc * a_re - zs * a_im) + b_re + (zc * wwselfR - zs * wwselfI)
                PwI += (zc * a_im + zs * a_re) + b_im + (zc * wwselfI + zs * wwselfR)
                P2R += (z2c * a2_re - z2s * a2_im) + b2_re + (
                    z2c * w2selfR - z2s * w2selfI
                )
                P2I += (z2c * a2_im + z2s * a2_re) + b2_im + (
                    z2c * w2selfI + z2s * w2selfR
                )
                # neighbor frequencies and the dense set
                for i in range(n):
                    farr[i] += _p_eval(fam, C, alpha, ptab, z_new - sites[i])
                n = _hs_add(keys, idx, sites, n, z_new)
                farr[n - 1] = f1
                fill += 1
                if 3 * (fill + 1) > 2 * keys.size:
                    cap2 = keys.size
                    while 3 * (n + 1) * 2 > 2 * cap2:
                        cap2 *= 2
                    keys, idx = _hs_rebuild(sites, n, cap2)
                    fill = n
                S1 += zc
                S2 += zc * zc
                S1b += z2c
            else:
                pos = idx[_hs_find(keys, z_new)]
                n = _hs_del(keys, idx, sites, n, z_new)
                # mirror the swap-with-last that _hs_del performs on ``sites``
                if pos < n:
                    farr[pos] = farr[n]
                for i in range(n):
                    farr[i] -= _p_eval(fam, C, alpha, ptab, z_new - sites[i])
                dP0 = 0.0
                a_re = 0.0
                a_im = 0.0
                b_re = 0.0
                b_im = 0.0
                a2_re = 0.0
                a2_im = 0.0
                b2_re = 0.0
                b2_im = 0.0
                for i in range(n):
                    yi = sites[i]
                    zz = yi - z_new
                    re0, _ = _w_look(w0_re, w0_re, Z, zz, oob)
                    dP0 += 2.0 * re0
                    rew, imw = _w_look(ww_re, ww_im, Z, zz, oob)
                    a_re += rew
                    a_im += imw
                    rew2, imw2 = _w_look(ww_re, ww_im, Z, -zz, oob)
                    cyi = np.cos(w * yi)
                    syi = np.sin(w * yi)
                    b_re += cyi * rew2 - syi * imw2
                    b_im += cyi * imw2 + syi * rew2
                    re2, im2 = _w_look(w2_re, w2_im, Z, zz, oob)
                    a2_re += re2
                    a2_im += im2
                    re22, im22 = _w_look(w2_re, w2_im, Z, -zz, oob)
                    c2i = np.cos(2 * w * yi)
                    s2i = np.sin(2 * w * yi)
                    b2_re += c2i * re22 - s2i * im22
                    b2_im += c2i * im22 + s2i * re22
                w0self, _ = _w_look(w0_re, w0_re, Z, 0, oob)
                wwselfR, wwselfI = _w_look(ww_re, ww_im, Z, 0, oob)
                w2selfR, w2selfI = _w_look(w2_re, w2_im, Z, 0, oob)
                P0 -= dP0 + w0self
                PwR -= (zc * a_re - zs * a_im) + b_re + (zc * wwselfR - zs * wwselfI)
                PwI -= (zc * a_im + zs * a_re) + b_im + (zc * wwselfI + zs * wwselfR)
                P2R -= (z2c * a2_re - z2s * a2_im) + b2_re + (
                    z2c * w2selfR - z2s * w2selfI
                )
                P2I -= (z2c * a2_im + z2s * a2_re) + b2_im + (
                    z2c * w2selfI + z2s * w2selfR
                )
                S1 -= zc
                S2 -= zc * zc
                S1b -= z2c
        # final audit: fresh pair sums
        fP0 = 0.0
        fPwR = 0.0
        fP2R = 0.0
        for i in range(n):
            yi = sites[i]
            cyi = np.cos(w * yi)
            syi = np.sin(w * yi)
            c2i = np.cos(2 * w * yi)
            s2i = np.sin(2 * w * yi)
            for j2 in range(n):
                z = sites[j2] - yi
                re0, _ = _w_look(w0_re, w0_re, Z, z, oob)
                fP0 += re0
                rew, imw = _w_look(ww_re, ww_im, Z, z, oob)
                fPwR += cyi * rew - syi * imw
                re2, im2 = _w_look(w2_re, w2_im, Z, z, oob)
                fP2R += c2i * re2 - s2i * im2
        scale = 1.0 + abs(fP0) + abs(fPwR) + abs(fP2R)
        resid = (abs(fP0 - P0) + abs(fPwR - PwR) + abs(fP2R - P2R)) / scale
        Xt = 0.0
        for i in range(n):
            Xt += np.cos(w * sites[i])
        out[r, 0] = X0phi
        out[r, 1] = Xt / nprime
        out[r, 2] = D1
        out[r, 3] = D2
        out[r, 4] = D3
        out[r, 5] = Q1
        out[r, 6] = Q2
        out[r, 7] = iX1
        out[r, 8] = iX2
        out[r, 9] = resid
        out[r, 10] = err
        out[r, 11] = nev
