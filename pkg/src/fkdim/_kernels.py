"""Compiled inner loops shared by the systems and orbit-metric modules.

Every kernel writes each output cell from its own inputs only, so results do
not depend on the number of worker threads.
"""

import numpy as np
from numba import njit, prange

# ---------------------------------------------------------------------------
# leaf distance tensors
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def scalar_full(xa, xb, circle):
    """out[r, c, i, j] = d(xa[r, i], xb[c, j]) for scalar orbits."""
    R, n = xa.shape
    C = xb.shape[0]
    out = np.empty((R, C, n, n))
    for r in prange(R):
        for c in range(C):
            for i in range(n):
                a = xa[r, i]
                for j in range(n):
                    d = abs(a - xb[c, j])
                    if circle and d > 0.5:
                        d = 1.0 - d
                    out[r, c, i, j] = d
    return out


@njit(cache=True, parallel=True)
def scalar_diag(xa, xb, circle):
    R, n = xa.shape
    C = xb.shape[0]
    out = np.empty((R, C, n))
    for r in prange(R):
        for c in range(C):
            for i in range(n):
                d = abs(xa[r, i] - xb[c, i])
                if circle and d > 0.5:
                    d = 1.0 - d
                out[r, c, i] = d
    return out


@njit(cache=True, parallel=True)
def shift_full(xa, xb, w, n, discrete):
    """out[r, c, i, j] = sum_t w[t] rho(xa[r, i+t], xb[c, j+t]).

    ``xa``/``xb`` hold the periodic sequences unrolled to length n + L, so no
    index wraps inside the loops.
    """
    R, E, D = xa.shape
    C = xb.shape[0]
    L = w.size
    out = np.empty((R, C, n, n))
    for r in prange(R):
        P = np.empty((E, E))
        for c in range(C):
            # rho between every pair of unrolled coordinates
            for k in range(E):
                for m in range(E):
                    if discrete:
                        v = 0.0
                        for q in range(D):
                            if xa[r, k, q] != xb[c, m, q]:
                                v = 1.0
                                break
                    else:
                        v = 0.0
                        for q in range(D):
                            d = abs(xa[r, k, q] - xb[c, m, q])
                            if d > v:
                                v = d
                    P[k, m] = v
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for t in range(L):
                        s += w[t] * P[i + t, j + t]
                    out[r, c, i, j] = s
    return out


@njit(cache=True, parallel=True)
def shift_diag(xa, xb, w, n, discrete):
    R, E, D = xa.shape
    C = xb.shape[0]
    L = w.size
    out = np.empty((R, C, n))
    for r in prange(R):
        delta = np.empty(E)
        for c in range(C):
            for k in range(E):
                v = 0.0
                for q in range(D):
                    if discrete:
                        if xa[r, k, q] != xb[c, k, q]:
                            v = 1.0
                    else:
                        d = abs(xa[r, k, q] - xb[c, k, q])
                        if d > v:
                            v = d
                delta[k] = v
            for i in range(n):
                s = 0.0
                for t in range(L):
                    s += w[t] * delta[i + t]
                out[r, c, i] = s
    return out


# ---------------------------------------------------------------------------
# (n, delta)-matching
# ---------------------------------------------------------------------------


@njit(cache=True)
def _match_size_dp(E, thr, strict):
    n = E.shape[0]
    m = E.shape[1]
    prev = np.zeros(m + 1, np.int64)
    cur = np.zeros(m + 1, np.int64)
    for i in range(n):
        cur[0] = 0
        for j in range(m):
            e = E[i, j]
            ok = e < thr if strict else e <= thr
            best = prev[j + 1]
            if cur[j] > best:
                best = cur[j]
            if ok and prev[j] + 1 > best:
                best = prev[j] + 1
            cur[j + 1] = best
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


@njit(cache=True)
def _match_size_bits(E, thr, strict):
    # bit-parallel LCS over an arbitrary compatibility matrix (columns <= 64)
    n = E.shape[0]
    m = E.shape[1]
    one = np.uint64(1)
    V = ~np.uint64(0)
    for i in range(n):
        M = np.uint64(0)
        for j in range(m):
            e = E[i, j]
            if (e < thr) if strict else (e <= thr):
                M |= one << np.uint64(j)
        U = V & M
        V = (V + U) | (V - U)
    zeros = 0
    for j in range(m):
        if not (V >> np.uint64(j)) & one:
            zeros += 1
    return zeros


@njit(cache=True)
def match_size(E, thr, strict):
    """Longest order-preserving match using pairs E[i, j] < thr (or <= thr)."""
    if E.shape[1] <= 64:
        return _match_size_bits(E, thr, strict)
    return _match_size_dp(E, thr, strict)


@njit(cache=True)
def fk_breakpoint(E):
    """Exact inf{delta > 0 : fbar_{n,delta} < delta}, capped at 1."""
    n = E.shape[0]
    vals = np.sort(E.ravel())
    u = np.empty(vals.size)
    m = 0
    for v in vals:
        if m == 0 or v != u[m - 1]:
            u[m] = v
            m += 1
    # interval k is (u[k-1], u[k]] with u[-1] = 0 and u[m] = inf; the
    # predicate fbar_k < upper_k is monotone in k, so bisect for the first hit
    lo = 0
    hi = m
    while lo < hi:
        k = (lo + hi) // 2
        if k == 0:
            g = 1.0
        else:
            g = (n - match_size(E, u[k - 1], False)) / n
        if g < u[k]:
            hi = k
        else:
            lo = k + 1
    k = lo
    if k == 0:
        res = 1.0
    else:
        lower = u[k - 1]
        g = (n - match_size(E, lower, False)) / n
        res = lower if lower > g else g
    return res if res < 1.0 else 1.0


@njit(cache=True)
def fk_bisect(E, tol):
    n = E.shape[0]
    lo = 0.0
    hi = 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (n - match_size(E, mid, True)) / n < mid:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# per-pair reductions over a block of distance tensors
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def reduce_fk(T):
    R, C = T.shape[0], T.shape[1]
    out = np.empty((R, C))
    for r in prange(R):
        for c in range(C):
            out[r, c] = fk_breakpoint(T[r, c])
    return out


@njit(cache=True, parallel=True)
def within_fk(T, eps):
    """Membership d_FK < eps, tested as (n - M_{<eps}) / n < eps."""
    R, C, n = T.shape[0], T.shape[1], T.shape[2]
    out = np.empty((R, C), np.bool_)
    for r in prange(R):
        for c in range(C):
            out[r, c] = (n - match_size(T[r, c], eps, True)) / n < eps
    return out


@njit(cache=True)
def diag_max(d):
    best = d[0]
    for v in d[1:]:
        if v > best:
            best = v
    return best


@njit(cache=True)
def diag_mean(d):
    s = 0.0
    for v in d:
        s += v
    return s / d.size


@njit(cache=True)
def _kth_largest(d, g, buf):
    # (g+1)-th largest entry via a partial insertion sort into buf[: g + 1]
    k = 0
    for v in d:
        if k <= g:
            pos = k
            k += 1
        elif v > buf[g]:
            pos = g
        else:
            continue
        while pos > 0 and buf[pos - 1] < v:
            buf[pos] = buf[pos - 1]
            pos -= 1
        buf[pos] = v
    return buf[g]


@njit(cache=True)
def diag_mistake(d, g):
    # (g+1)-th largest entry: y is in the mistake ball iff this is < eps
    return _kth_largest(d, g, np.empty(g + 1))


@njit(cache=True, parallel=True)
def reduce_diag(Dg, kind, g):
    """kind 0 = max (Bowen), 1 = mean, 2 = mistake radius."""
    R, C = Dg.shape[0], Dg.shape[1]
    out = np.empty((R, C))
    for r in prange(R):
        buf = np.empty(g + 1)
        for c in range(C):
            d = Dg[r, c]
            if kind == 0:
                out[r, c] = diag_max(d)
            elif kind == 1:
                out[r, c] = diag_mean(d)
            else:
                out[r, c] = _kth_largest(d, g, buf)
    return out


@njit(cache=True, parallel=True)
def diagonal_of(T):
    R, C, n = T.shape[0], T.shape[1], T.shape[2]
    out = np.empty((R, C, n))
    for r in prange(R):
        for c in range(C):
            for i in range(n):
                out[r, c, i] = T[r, c, i, i]
    return out
