"""Numba kernels for LLL, enumeration and BKZ block insertion.

Bases are ``int64`` row matrices. Gram-Schmidt data lives in ``float64``:
``mu[i, j]`` (j < i) and ``bstar[i] = |b*_i|^2``. Every LLL step recomputes the
GSO row of the current vector from exact integer dot products, which keeps the
floating-point state from drifting (Schnorr-Euchner style).
"""

import numpy as np
from numba import njit

# |mu| larger than this after a size-reduction pass triggers another pass.
ETA = 0.51
# b*_k collapsing below this fraction of |b_k|^2 means dependent rows.
RANK_TOL = 1e-10


@njit(cache=True)
def _dot(B, i, j):
    s = 0
    for t in range(B.shape[1]):
        s += B[i, t] * B[j, t]
    return s


@njit(cache=True)
def _gso_row(B, mu, bstar, k):
    """Recompute mu[k, :k] and bstar[k] from integer dot products."""
    for j in range(k):
        s = float(_dot(B, k, j))
        for i in range(j):
            s -= mu[j, i] * mu[k, i] * bstar[i]
        mu[k, j] = s / bstar[j]
    s = float(_dot(B, k, k))
    for j in range(k):
        s -= mu[k, j] * mu[k, j] * bstar[j]
    bstar[k] = s


@njit(cache=True)
def gso(B):
    d = B.shape[0]
    mu = np.zeros((d, d))
    bstar = np.zeros(d)
    for k in range(d):
        _gso_row(B, mu, bstar, k)
        mu[k, k] = 1.0
    return mu, bstar


@njit(cache=True)
def _row_sub(B, k, j, r):
    for t in range(B.shape[1]):
        B[k, t] -= r * B[j, t]


@njit(cache=True)
def _swap(B, i, j):
    for t in range(B.shape[1]):
        tmp = B[i, t]
        B[i, t] = B[j, t]
        B[j, t] = tmp


@njit(cache=True)
def lll_kernel(B, U, track, delta, start, mu, bstar):
    """LLL-reduce ``B`` in place, assuming rows ``< start`` carry a valid GSO.

    Returns 0 on success, -1 if the basis is (numerically) rank deficient.
    ``U`` receives the same row operations when ``track`` is set.
    """
    d = B.shape[0]
    if d == 0:
        return 0
    k = max(start, 0)
    if k == 0:
        _gso_row(B, mu, bstar, 0)
        if bstar[0] <= 0.0:
            return -1
        k = 1
    while k < d:
        # size reduction with GSO recomputation until stable
        for _ in range(64):
            _gso_row(B, mu, bstar, k)
            changed = False
            for j in range(k - 1, -1, -1):
                m = mu[k, j]
                if abs(m) > ETA:
                    r = np.rint(m)
                    ri = np.int64(r)
                    _row_sub(B, k, j, ri)
                    if track:
                        _row_sub(U, k, j, ri)
                    for i in range(j):
                        mu[k, i] -= r * mu[j, i]
                    mu[k, j] -= r
                    changed = True
            if not changed:
                break
        _gso_row(B, mu, bstar, k)
        # Gram-Schmidt norms of a full-rank integer basis can be fractional,
        # so only a relative collapse signals dependence
        if bstar[k] <= RANK_TOL * _dot(B, k, k):
            return -1
        m = mu[k, k - 1]
        if bstar[k] < (delta - m * m) * bstar[k - 1]:
            _swap(B, k, k - 1)
            if track:
                _swap(U, k, k - 1)
            k = k - 1
            if k == 0:
                _gso_row(B, mu, bstar, 0)
                k = 1
            else:
                _gso_row(B, mu, bstar, k)
        else:
            k += 1
    for i in range(d):
        mu[i, i] = 1.0
    return 0


@njit(cache=True)
def enumerate_block(mu, bstar, kappa, beta, radius2, max_nodes):
    """Schnorr-Euchner enumeration of the shortest projected vector in a block.

    Searches integer combinations of ``b_kappa .. b_{kappa+beta-1}`` whose
    projection orthogonal to ``b_0 .. b_{kappa-1}`` has squared norm below
    ``radius2``; the radius shrinks on every improvement so the last solution
    is the block minimum. Returns ``(coeffs, norm2, status)`` where status is
    1 found, 0 nothing inside the radius, -1 node budget exhausted.
    """
    n = beta
    # 1-based arrays following the textbook iterative formulation
    sigma = np.zeros((n + 2, n + 2))
    r = np.zeros(n + 2, dtype=np.int64)
    for i in range(n + 2):
        r[i] = i
    rho = np.zeros(n + 2)
    v = np.zeros(n + 2)
    c = np.zeros(n + 2)
    w = np.zeros(n + 2)
    v[1] = 1.0
    best = np.zeros(n, dtype=np.int64)
    best_norm = radius2
    status = 0
    last_nonzero = 1
    k = 1
    nodes = 0
    while True:
        nodes += 1
        if max_nodes > 0 and nodes > max_nodes:
            if status == 1:
                return best, best_norm, 1
            return best, best_norm, -1
        diff = v[k] - c[k]
        rho[k] = rho[k + 1] + diff * diff * bstar[kappa + k - 1]
        if rho[k] < best_norm:
            if k == 1:
                if rho[1] > 1e-9:
                    best_norm = rho[1]
                    for i in range(n):
                        best[i] = np.int64(v[i + 1])
                    status = 1
                # fall through to the sibling / parent move below
                k += 1
                if k == n + 1:
                    return best, best_norm, status
                r[k - 1] = k
                if k >= last_nonzero:
                    last_nonzero = k
                    v[k] += 1.0
                else:
                    if v[k] > c[k]:
                        v[k] -= w[k]
                    else:
                        v[k] += w[k]
                    w[k] += 1.0
            else:
                k -= 1
                if r[k - 1] < r[k]:
                    r[k - 1] = r[k]
                for i in range(r[k], k, -1):
                    sigma[i, k] = sigma[i + 1, k] + v[i] * mu[kappa + i - 1, kappa + k - 1]
                c[k] = -sigma[k + 1, k]
                v[k] = np.rint(c[k])
                w[k] = 1.0
        else:
            k += 1
            if k == n + 1:
                return best, best_norm, status
            r[k - 1] = k
            if k >= last_nonzero:
                last_nonzero = k
                v[k] += 1.0
            else:
                if v[k] > c[k]:
                    v[k] -= w[k]
                else:
                    v[k] += w[k]
                w[k] += 1.0


@njit(cache=True)
def _xgcd(a, b):
    # returns g, x, y with a*x + b*y = g >= 0
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b != 0:
        qt = a // b
        a, b = b, a - qt * b
        x0, x1 = x1, x0 - qt * x1
        y0, y1 = y1, y0 - qt * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


@njit(cache=True)
def insert_combination(B, U, track, kappa, coeffs):
    """Make ``sum coeffs[i] * b_{kappa+i}`` the row ``kappa`` by a unimodular block transform.

    Collapses coefficient pairs from the back with extended Euclid so the
    block keeps spanning the same lattice. Requires gcd(coeffs) == 1.
    """
    n = coeffs.shape[0]
    x = coeffs.copy()
    cols = B.shape[1]
    ucols = U.shape[1]
    tmp = np.zeros(cols, dtype=np.int64)
    utmp = np.zeros(ucols, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        a_i = x[i]
        a_j = x[i + 1]
        if a_j == 0:
            continue
        g, s, t = _xgcd(a_i, a_j)
        p, qq = a_i // g, a_j // g
        # new_i = p*b_i + qq*b_j ; new_j = -t*b_i + s*b_j   (det = p*s + qq*t = 1)
        ri = kappa + i
        rj = kappa + i + 1
        for col in range(cols):
            bi = B[ri, col]
            bj = B[rj, col]
            tmp[col] = p * bi + qq * bj
            B[rj, col] = -t * bi + s * bj
            B[ri, col] = tmp[col]
        if track:
            for col in range(ucols):
                ui = U[ri, col]
                uj = U[rj, col]
                utmp[col] = p * ui + qq * uj
                U[rj, col] = -t * ui + s * uj
                U[ri, col] = utmp[col]
        x[i] = g
        x[i + 1] = 0
    if x[0] < 0:
        for col in range(cols):
            B[kappa, col] = -B[kappa, col]
        if track:
            for col in range(ucols):
                U[kappa, col] = -U[kappa, col]
    return abs(x[0])
