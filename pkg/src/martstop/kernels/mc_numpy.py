import math

import numpy as np

from ..stats import NBINS, exact_bins, square_parts

NQ = 7


def _draw(rng, law_kind, vals, cums, c3, n, k):
    if law_kind == 0:
        s = 0 if vals.shape[0] == 1 else n - 1
        u = rng.random(k)
        a = np.minimum(np.searchsorted(cums[s], u, side="right"), vals.shape[1] - 1)
        return vals[s][a]
    u = rng.random(k)
    e = -np.log1p(-rng.random(k)) / c3[0]
    return np.where(u < c3[1], e, -c3[2])


def _mvalue(variant, S, sumsq, n):
    if variant == 0:
        return S.copy()
    if variant == 1:
        return S * S - sumsq
    return S * S - n


def _accumulate(ck, T, Mck, Mf):
    C = ck.size
    bins = np.zeros((C * NQ * 2, NBINS, 2), dtype=np.int64)
    finite = T >= 0
    for c in range(C):
        alive = (T < 0) | (T > ck[c])
        Mn = np.where(alive, Mck[:, c], 0.0)
        MT = np.where(alive, 0.0, Mf)
        sv = Mn + MT
        asv = np.abs(sv)
        q = (alive.astype(np.float64), Mn, MT, Mn * Mn, sv, asv, np.where(finite, asv, 0.0))
        for j, x in enumerate(q):
            row = 2 * (c * NQ + j)
            bins[row] = exact_bins(x)
            bins[row + 1] = exact_bins(square_parts(x))
    return bins


class _Example1State:
    def __init__(self, k, ex_L, ex_first, ex_max, l_int=None):
        self.stage = np.ones(k, dtype=np.int64)
        self.waiting = np.zeros(k, dtype=bool)
        self.dead = np.zeros(k, dtype=bool)
        self.ex_L, self.ex_first, self.ex_max, self.l_int = ex_L, ex_first, ex_max, l_int
        self.reached = np.zeros(64, dtype=np.int64)
        self.accepted = np.zeros(64, dtype=np.int64)
        self.acc_maxabs = 0.0

    def update(self, aux, M):
        a = np.abs(M)
        live = ~self.dead
        cube = self.stage ** 3
        up = live & ~self.waiting & (a > cube)
        if self.l_int is None:
            back = a < self.ex_L
        else:
            back = a <= self.l_int
        ret = live & self.waiting & back
        self.waiting[up] = True
        stop = np.zeros(M.size, dtype=bool)
        coin = ret & (self.stage >= self.ex_first)
        if coin.any():
            ks = self.stage[coin]
            acc = aux.random(ks.size) < 1.0 / (ks * ks).astype(np.float64)
            np.add.at(self.reached, np.minimum(ks, 63), 1)
            np.add.at(self.accepted, np.minimum(ks[acc], 63), 1)
            where = np.nonzero(coin)[0]
            stop[where[acc]] = True
            if acc.any():
                self.acc_maxabs = max(self.acc_maxabs, float(a[where[acc]].max()))
        adv = ret & ~stop
        self.stage[adv] += 1
        self.waiting[adv] = False
        if self.ex_max > 0:
            self.dead |= self.stage > self.ex_max
        return stop

    def keep(self, mask):
        self.stage = self.stage[mask]
        self.waiting = self.waiting[mask]
        self.dead = self.dead[mask]


def mc_run(rng, aux, law_kind, vals, cums, c3, variant, rule_kind, level, lower,
           ex_L, ex_first, ex_max, n_paths, n_max, ck):
    C = ck.size
    ck_pos = {int(n): c for c, n in enumerate(ck)}
    T = np.full(n_paths, -1, dtype=np.int64)
    Mf = np.zeros(n_paths)
    Mck = np.zeros((n_paths, C))
    idx = np.arange(n_paths)
    S = np.zeros(n_paths)
    sumsq = np.zeros(n_paths)
    M = np.zeros(n_paths)
    ex = _Example1State(n_paths, ex_L, ex_first, ex_max) if rule_kind == 2 else None
    maxabs = 0.0
    for n in range(1, n_max + 1):
        if idx.size == 0:
            break
        x = _draw(rng, law_kind, vals, cums, c3, n, idx.size)
        S += x
        sumsq += x * x
        M = _mvalue(variant, S, sumsq, n)
        maxabs = max(maxabs, float(np.abs(M).max()))
        if rule_kind == 0:
            stop = M > level
        elif rule_kind == 1:
            stop = (M > 0.0) | (M < lower)
        else:
            stop = ex.update(aux, M)
        go = ~stop
        if n in ck_pos:
            Mck[idx[go], ck_pos[n]] = M[go]
        T[idx[stop]] = n
        Mf[idx[stop]] = M[stop]
        idx, S, sumsq, M = idx[go], S[go], sumsq[go], M[go]
        if ex is not None:
            ex.keep(go)
    Mf[idx] = M
    bins = _accumulate(ck, T, Mck, Mf)
    if ex is None:
        z = np.zeros(64, dtype=np.int64)
        return bins, T, Mf, maxabs, z, z.copy(), 0.0
    return bins, T, Mf, maxabs, ex.reached, ex.accepted, ex.acc_maxabs


def srw_example1_run(rng, aux, ex_L, ex_first, ex_max, n_paths, n_max, ck):
    C = ck.size
    l_int = int(math.ceil(ex_L)) - 1
    T = np.full(n_paths, -1, dtype=np.int64)
    Mf = np.zeros(n_paths)
    Mck = np.zeros((n_paths, C))
    idx = np.arange(n_paths)
    M = np.zeros(n_paths, dtype=np.int64)
    n = np.zeros(n_paths, dtype=np.int64)
    ci = np.zeros(n_paths, dtype=np.int64)
    ex = _Example1State(n_paths, ex_L, ex_first, ex_max, l_int=l_int)
    ck_ext = np.append(ck, n_max)
    maxabs = 0.0
    while idx.size:
        room = ck_ext[ci] - n
        safe = np.where(ex.waiting, np.abs(M) - l_int - 1, ex.stage ** 3 - np.abs(M))
        m = np.where(ex.dead, room, np.minimum(safe, room))
        m = np.maximum(m, 1)
        M += 2 * rng.binomial(m, 0.5) - m
        n += m
        maxabs = max(maxabs, float(np.abs(M).max()))
        stop = ex.update(aux, M)
        at_ck = ~stop & (ci < C) & (ck_ext[ci] == n)
        Mck[idx[at_ck], ci[at_ck]] = M[at_ck]
        ci[at_ck] += 1
        T[idx[stop]] = n[stop]
        done = stop | (n >= n_max)
        Mf[idx[done]] = M[done]
        go = ~done
        idx, M, n, ci = idx[go], M[go], n[go], ci[go]
        ex.keep(go)
    bins = _accumulate(ck, T, Mck, Mf)
    return bins, T, Mf, maxabs, ex.reached, ex.accepted, ex.acc_maxabs


def wobble_run(rng, law_kind, vals, cums, c3, variant, k_list, window, eps_list, n_paths):
    horizon = int((k_list + window).max())
    S = np.zeros(n_paths)
    sumsq = np.zeros(n_paths)
    Mk = np.zeros((k_list.size, n_paths))
    sup = np.zeros((k_list.size, n_paths))
    for n in range(1, horizon + 1):
        x = _draw(rng, law_kind, vals, cums, c3, n, n_paths)
        S += x
        sumsq += x * x
        M = _mvalue(variant, S, sumsq, n)
        for j, k in enumerate(k_list):
            if n == k:
                Mk[j] = M
            elif k < n <= k + window:
                np.maximum(sup[j], np.abs(M - Mk[j]), out=sup[j])
    return (sup[:, :, None] > eps_list[None, None, :]).sum(axis=1).astype(np.int64)
