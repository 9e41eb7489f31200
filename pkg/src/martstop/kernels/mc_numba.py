import math

import numpy as np
from numba import njit

from ..stats import NBINS, SHIFT, LO_BITS

NQ = 7
_LO_MASK = (1 << LO_BITS) - 1
_TWO53 = 9007199254740992.0


@njit(cache=True)
def _bin_add(bins, row, x):
    if x == 0.0:
        return
    m, e = math.frexp(x)
    mi = np.int64(m * _TWO53)
    idx = e - 53 + SHIFT
    if mi < 0:
        a = -mi
        bins[row, idx, 0] -= a >> LO_BITS
        bins[row, idx, 1] -= a & _LO_MASK
    else:
        bins[row, idx, 0] += mi >> LO_BITS
        bins[row, idx, 1] += mi & _LO_MASK


@njit(cache=True)
def _bin_add_square(bins, row, x):
    # Veltkamp split: hi*hi + 2*hi*lo + lo*lo == x*x exactly
    c = 134217729.0 * x
    hi = c - (c - x)
    lo = x - hi
    _bin_add(bins, row, hi * hi)
    _bin_add(bins, row, 2.0 * hi * lo)
    _bin_add(bins, row, lo * lo)


@njit(cache=True)
def _accumulate(bins, ck, t, Mck, MT, n_max):
    # quantities: alive, R, L, m2, M_{T^n}, |M_{T^n}|, |M_{T^n}| 1(T <= n_max)
    finite = t >= 0
    for c in range(ck.size):
        alive = t < 0 or t > ck[c]
        if alive:
            Mn = Mck[c]
            v0, v1, v2, v3, v4 = 1.0, Mn, 0.0, Mn * Mn, Mn
        else:
            v0, v1, v2, v3, v4 = 0.0, 0.0, MT, 0.0, MT
        v5 = abs(v4)
        v6 = v5 if finite else 0.0
        base = c * NQ
        vals = (v0, v1, v2, v3, v4, v5, v6)
        for q in range(NQ):
            x = vals[q]
            _bin_add(bins, 2 * (base + q), x)
            _bin_add_square(bins, 2 * (base + q) + 1, x)


@njit(cache=True)
def _draw(rng, law_kind, vals, cums, c3, n):
    if law_kind == 0:
        s = 0 if vals.shape[0] == 1 else n - 1
        u = rng.random()
        a = 0
        A = vals.shape[1]
        while a < A - 1 and u >= cums[s, a]:
            a += 1
        return vals[s, a]
    u = rng.random()
    if u < c3[1]:
        return -math.log1p(-rng.random()) / c3[0]
    return -c3[2]


@njit(cache=True)
def _mvalue(variant, S, sumsq, n):
    if variant == 0:
        return S
    if variant == 1:
        return S * S - sumsq
    return S * S - n


@njit(cache=True, nogil=True)
def mc_run(rng, aux, law_kind, vals, cums, c3, variant, rule_kind, level, lower,
           ex_L, ex_first, ex_max, n_paths, n_max, ck):
    C = ck.size
    bins = np.zeros((C * NQ * 2, NBINS, 2), dtype=np.int64)
    T = np.full(n_paths, -1, dtype=np.int64)
    Mf = np.zeros(n_paths)
    Mck = np.zeros(C)
    reached = np.zeros(64, dtype=np.int64)
    accepted = np.zeros(64, dtype=np.int64)
    maxabs = 0.0
    acc_maxabs = 0.0
    for i in range(n_paths):
        S = 0.0
        sumsq = 0.0
        M = 0.0
        ci = 0
        t = -1
        stage = 1
        waiting = False
        dead = False
        n = 0
        while n < n_max:
            n += 1
            x = _draw(rng, law_kind, vals, cums, c3, n)
            S += x
            sumsq += x * x
            M = _mvalue(variant, S, sumsq, n)
            if abs(M) > maxabs:
                maxabs = abs(M)
            stop = False
            if rule_kind == 0:
                stop = M > level
            elif rule_kind == 1:
                stop = M > 0.0 or M < lower
            elif not dead:
                if not waiting:
                    if abs(M) > stage * stage * stage:
                        waiting = True
                elif abs(M) < ex_L:
                    if stage >= ex_first:
                        reached[min(stage, 63)] += 1
                        if aux.random() < 1.0 / (stage * stage):
                            accepted[min(stage, 63)] += 1
                            stop = True
                            if abs(M) > acc_maxabs:
                                acc_maxabs = abs(M)
                    if not stop:
                        stage += 1
                        waiting = False
                        if ex_max > 0 and stage > ex_max:
                            dead = True
            if stop:
                t = n
                break
            if ci < C and ck[ci] == n:
                Mck[ci] = M
                ci += 1
        T[i] = t
        Mf[i] = M
        _accumulate(bins, ck, t, Mck, M, n_max)
    return bins, T, Mf, maxabs, reached, accepted, acc_maxabs


@njit(cache=True)
def _popcount(v):
    x = np.uint64(v)
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def _srw_displacement(rng, m):
    """Net displacement of ``m`` simple-random-walk steps."""
    if m <= 53:
        bits = np.int64(rng.random() * _TWO53)
        if m < 53:
            bits &= (np.int64(1) << m) - 1
        k = _popcount(bits)
    else:
        k = rng.binomial(m, 0.5)
    return 2 * k - m


@njit(cache=True, nogil=True)
def srw_example1_run(rng, aux, ex_L, ex_first, ex_max, n_paths, n_max, ck):
    """Staged randomized rule over the simple random walk, advancing in exact jumps.

    A jump of ``m`` steps is taken only when no stage event can occur within
    it (the walk is at least ``m + 1`` steps away from the next threshold),
    so the law of the stopped path is exactly that of step-by-step
    simulation.
    """
    C = ck.size
    bins = np.zeros((C * NQ * 2, NBINS, 2), dtype=np.int64)
    T = np.full(n_paths, -1, dtype=np.int64)
    Mf = np.zeros(n_paths)
    Mck = np.zeros(C)
    reached = np.zeros(64, dtype=np.int64)
    accepted = np.zeros(64, dtype=np.int64)
    maxabs = 0.0
    acc_maxabs = 0.0
    l_int = int(math.ceil(ex_L)) - 1  # |M| < L  <=>  |M| <= l_int
    for i in range(n_paths):
        M = 0
        n = 0
        ci = 0
        t = -1
        stage = 1
        waiting = False
        dead = False
        while n < n_max:
            nxt = ck[ci] if ci < C else n_max
            room = nxt - n
            if dead:
                m = room
            elif not waiting:
                m = stage * stage * stage - abs(M)  # distance to |M| > k^3, minus one
            else:
                m = abs(M) - l_int - 1
            if m > room:
                m = room
            if m < 1:
                m = 1
            M += _srw_displacement(rng, m)
            n += m
            a = abs(M)
            if a > maxabs:
                maxabs = a
            stop = False
            if not dead:
                if not waiting:
                    if a > stage * stage * stage:
                        waiting = True
                elif a <= l_int:
                    if stage >= ex_first:
                        reached[min(stage, 63)] += 1
                        if aux.random() < 1.0 / (stage * stage):
                            accepted[min(stage, 63)] += 1
                            stop = True
                            if a > acc_maxabs:
                                acc_maxabs = a
                    if not stop:
                        stage += 1
                        waiting = False
                        if ex_max > 0 and stage > ex_max:
                            dead = True
            if stop:
                t = n
                break
            if ci < C and ck[ci] == n:
                Mck[ci] = M
                ci += 1
        T[i] = t
        Mf[i] = M
        _accumulate(bins, ck, t, Mck, float(M), n_max)
    return bins, T, Mf, maxabs, reached, accepted, acc_maxabs


@njit(cache=True, nogil=True)
def wobble_run(rng, law_kind, vals, cums, c3, variant, k_list, window, eps_list, n_paths):
    K = k_list.size
    E = eps_list.size
    counts = np.zeros((K, E), dtype=np.int64)
    horizon = 0
    for j in range(K):
        if k_list[j] + window > horizon:
            horizon = k_list[j] + window
    Mk = np.zeros(K)
    sup = np.zeros(K)
    for i in range(n_paths):
        S = 0.0
        sumsq = 0.0
        for j in range(K):
            sup[j] = 0.0
            Mk[j] = 0.0
        for n in range(1, horizon + 1):
            x = _draw(rng, law_kind, vals, cums, c3, n)
            S += x
            sumsq += x * x
            M = _mvalue(variant, S, sumsq, n)
            for j in range(K):
                if n == k_list[j]:
                    Mk[j] = M
                elif k_list[j] < n <= k_list[j] + window:
                    d = abs(M - Mk[j])
                    if d > sup[j]:
                        sup[j] = d
        for j in range(K):
            for e in range(E):
                if sup[j] > eps_list[e]:
                    counts[j, e] += 1
    return counts
