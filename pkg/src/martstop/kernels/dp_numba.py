import numpy as np
from numba import njit


@njit(cache=True)
def _mval(x, n, transform):
    if transform == 0:
        return float(x)
    return float(x) * float(x) - n


@njit(cache=True)
def _stops(M, rule_kind, level, lower):
    if rule_kind == 0:
        return M > level
    return M > 0.0 or M < lower


@njit(cache=True, nogil=True)
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

    cap = 64
    cur = np.zeros(cap)
    nxt = np.zeros(cap)
    cur[0] = 1.0
    lo = 0
    w = 1
    em = 0.0
    e1 = 0.0
    Lc = 0.0
    peak = 1
    last = N
    for n in range(1, N + 1):
        s = 0 if S == 1 else n - 1
        tm = tail_mass[s]
        if tm > 0.0:
            a0 = 0.0
            a1 = 0.0
            for i in range(w):
                a0 += cur[i]
                a1 += cur[i] * abs(lo + i)
            em += tm * a0
            e1 += tm * a1 + tail_m1[s] * a0

        amin = 1 << 62
        amax = -(1 << 62)
        for a in range(A):
            if masses[s, a] > 0.0:
                if vals[s, a] < amin:
                    amin = vals[s, a]
                if vals[s, a] > amax:
                    amax = vals[s, a]
        nw = w + amax - amin
        if nw > cap:
            cap = max(2 * cap, nw)
            tmp = np.zeros(cap)
            tmp[:w] = cur[:w]
            cur = tmp
            nxt = np.zeros(cap)
        nxt[:nw] = 0.0
        for a in range(A):
            q = masses[s, a]
            if q == 0.0:
                continue
            off = vals[s, a] - amin
            for i in range(w):
                nxt[i + off] += q * cur[i]
        nlo = lo + amin

        sm = 0.0
        s1 = 0.0
        for i in range(nw):
            m = nxt[i]
            if m == 0.0:
                continue
            M = _mval(nlo + i, n, transform)
            if _stops(M, rule_kind, level, lower):
                sm += m
                s1 += m * M
                k = int(M) - hist_lo
                if 0 <= k < hist_size:
                    hist[k] += m
                else:
                    overflow += m
                nxt[i] = 0.0

        left = 0
        while left < nw and nxt[left] <= eps:
            m = nxt[left]
            if m > 0.0:
                em += m
                e1 += m * abs(_mval(nlo + left, n, transform))
            left += 1
        right = nw
        while right > left and nxt[right - 1] <= eps:
            m = nxt[right - 1]
            if m > 0.0:
                em += m
                e1 += m * abs(_mval(nlo + right - 1, n, transform))
            right -= 1

        p0 = 0.0
        r1 = 0.0
        r2 = 0.0
        r3 = 0.0
        for i in range(left, right):
            m = nxt[i]
            if m == 0.0:
                continue
            M = _mval(nlo + i, n, transform)
            aM = abs(M)
            p0 += m
            r1 += m * M
            r2 += m * M * M
            r3 += m * aM * aM * aM
            for j in range(K):
                mp[j, n] += m * aM ** p_extra[j]

        Lc += s1
        P[n] = p0
        L[n] = Lc
        R[n] = r1
        m2[n] = r2
        m3[n] = r3
        stop_mass[n] = sm
        stop_m1[n] = s1
        err_mass[n] = em
        err_m1[n] = e1

        w = right - left
        lo = nlo + left
        for i in range(w):
            cur[i] = nxt[left + i]
        if w > peak:
            peak = w
        if w == 0:
            last = n
            for k2 in range(n + 1, N + 1):
                L[k2] = Lc
                err_mass[k2] = em
                err_m1[k2] = e1
            break
    return P, L, R, m2, m3, mp, stop_mass, stop_m1, err_mass, err_m1, hist, overflow, peak, last
