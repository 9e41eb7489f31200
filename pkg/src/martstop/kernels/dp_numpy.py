import numpy as np


def _mvals(x, n, transform):
    x = x.astype(np.float64)
    return x if transform == 0 else x * x - n


def dp_run(vals, masses, tail_mass, tail_m1, transform, rule_kind, level, lower,
           N, eps, p_extra, hist_lo, hist_size):
    S, A = vals.shape
    K = p_extra.shape[0]
    P = np.zeros(N + 1)
    L = np.zeros(N + 1)
    R = np.zeros(N + 1)
    m2 = np.zeros(N + 1)
    m3 = np.zeros(N + 1)
    mp = np.zeros((K, N + 1))
    stop_mass = np.zeros(N + 1)
    stop_m1 = np.zeros(N + 1)
    err_mass = np.zeros(N + 1)
    err_m1 = np.zeros(N + 1)
    hist = np.zeros(hist_size)
    overflow = 0.0
    P[0] = 1.0

    cur = np.ones(1)
    lo = 0
    em = 0.0
    e1 = 0.0
    Lc = 0.0
    peak = 1
    last = N
    for n in range(1, N + 1):
        s = 0 if S == 1 else n - 1
        w = cur.size
        if tail_mass[s] > 0.0:
            a0 = cur.sum()
            a1 = (cur * np.abs(np.arange(lo, lo + w))).sum()
            em += tail_mass[s] * a0
            e1 += tail_mass[s] * a1 + tail_m1[s] * a0
        live = masses[s] > 0.0
        v, q = vals[s][live], masses[s][live]
        amin, amax = int(v.min()), int(v.max())
        nxt = np.zeros(w + amax - amin)
        for a in range(v.size):
            off = int(v[a]) - amin
            nxt[off:off + w] += q[a] * cur
        nlo = lo + amin
        M = _mvals(np.arange(nlo, nlo + nxt.size), n, transform)

        if rule_kind == 0:
            hit = M > level
        else:
            hit = (M > 0.0) | (M < lower)
        hit &= nxt != 0.0
        hm = nxt[hit]
        hv = M[hit]
        sm = hm.sum()
        s1 = (hm * hv).sum()
        idx = hv.astype(np.int64) - hist_lo
        ok = (idx >= 0) & (idx < hist_size)
        np.add.at(hist, idx[ok], hm[ok])
        overflow += hm[~ok].sum()
        nxt[hit] = 0.0

        keep = np.nonzero(nxt > eps)[0]
        if keep.size:
            left, right = keep[0], keep[-1] + 1
        else:
            left, right = 0, 0
        cut = np.ones(nxt.size, dtype=bool)
        cut[left:right] = False
        em += nxt[cut].sum()
        e1 += (nxt[cut] * np.abs(M[cut])).sum()

        a = nxt[left:right]
        Ma = M[left:right]
        aM = np.abs(Ma)
        Lc += s1
        P[n] = a.sum()
        L[n] = Lc
        R[n] = (a * Ma).sum()
        m2[n] = (a * Ma * Ma).sum()
        m3[n] = (a * aM ** 3).sum()
        for j in range(K):
            mp[j, n] = (a * aM ** p_extra[j]).sum()
        stop_mass[n] = sm
        stop_m1[n] = s1
        err_mass[n] = em
        err_m1[n] = e1

        cur = a.copy()
        lo = nlo + left
        peak = max(peak, cur.size)
        if cur.size == 0:
            last = n
            L[n + 1:] = Lc
            err_mass[n + 1:] = em
            err_m1[n + 1:] = e1
            break
    return P, L, R, m2, m3, mp, stop_mass, stop_m1, err_mass, err_m1, hist, overflow, peak, last
