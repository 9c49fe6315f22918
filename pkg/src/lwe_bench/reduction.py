"""Lattice reduction: LLL, exact block enumeration, BKZ and the q-ary embedding.

All bases are integer row matrices. The heavy lifting happens in the numba
kernels of :mod:`lwe_bench._kernels`; this module owns the loop structure,
timing, transform tracking and the q-ary preprocessing contract.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import centered_mod
from .errors import InvalidBasis, InvalidOperands

__all__ = [
    "BkzResult",
    "ReductionProfile",
    "QaryReduction",
    "bkz",
    "find_cliff",
    "gso",
    "lll",
    "mean_row_std",
    "qary_basis",
    "qary_embed_reduce",
    "svp_enumerate",
]

log = logging.getLogger(__name__)

# Node cap per enumeration call. Exact search at block size 40 stays well below it.
DEFAULT_MAX_NODES = 50_000_000


def _as_basis(basis) -> np.ndarray:
    B = np.array(basis, dtype=np.int64, copy=True)
    if B.ndim != 2 or B.shape[0] == 0:
        raise InvalidBasis("basis must be a non-empty 2-d integer matrix")
    if B.shape[0] > B.shape[1]:
        raise InvalidBasis(f"{B.shape[0]} rows cannot be independent in dimension {B.shape[1]}")
    return B


def gso(basis):
    """Gram-Schmidt coefficients ``mu`` and squared norms ``|b*_i|^2``."""
    return K.gso(_as_basis(basis))


def lll(basis, delta: float = 0.99, transform: bool = False):
    """LLL-reduce the rows of ``basis``.

    Returns the reduced basis, or ``(basis, U)`` with ``U @ basis_in == basis_out``
    when ``transform`` is set.
    """
    if not 0.25 < delta < 1:
        raise InvalidOperands("delta must lie in (0.25, 1)")
    B = _as_basis(basis)
    d = B.shape[0]
    U = np.eye(d, dtype=np.int64) if transform else np.zeros((0, 0), dtype=np.int64)
    mu = np.zeros((d, d))
    bstar = np.zeros(d)
    if K.lll_kernel(B, U, transform, delta, 0, mu, bstar) != 0:
        raise InvalidBasis("basis is rank deficient")
    return (B, U) if transform else B


def svp_enumerate(block, radius: float | None = None, max_nodes: int = DEFAULT_MAX_NODES):
    """Coefficients of a shortest nonzero vector of the lattice spanned by ``block``.

    ``block`` is an integer basis (rows) or a ``(mu, bstar)`` pair describing a
    projected block. ``radius`` bounds the search (squared norm is compared
    against ``radius**2``); by default the first vector's length. Returns
    ``None`` when no lattice vector lies within the radius.
    """
    if isinstance(block, tuple):
        mu, bstar = (np.asarray(x, dtype=float) for x in block)
    else:
        mu, bstar = gso(block)
    beta = bstar.size
    if beta > 40:
        raise InvalidOperands("exact enumeration is limited to blocks of dimension <= 40")
    r2 = bstar[0] * (1 + 1e-9) if radius is None else float(radius) ** 2
    coeffs, _, status = K.enumerate_block(mu, bstar, 0, beta, r2, max_nodes)
    if status != 1:
        return None
    return coeffs


@dataclass
class BkzResult:
    basis: np.ndarray
    transform: np.ndarray | None
    loops: int
    loop_times: list = field(default_factory=list)
    first_norms: list = field(default_factory=list)
    timed_out: bool = False
    converged: bool = False


def bkz(
    basis,
    beta: int,
    max_loops: int = 8,
    delta: float = 0.99,
    transform: bool = False,
    time_limit: float | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
    callback=None,
    lll_first: bool = True,
) -> BkzResult:
    """BKZ-``beta`` with exact enumeration as the SVP oracle.

    Runs tours until a tour makes no insertion, ``max_loops`` tours are done,
    ``time_limit`` seconds elapse (best-so-far returned with ``timed_out``) or
    ``callback(tour_index, basis)`` returns True.
    """
    if beta < 2:
        raise InvalidOperands("block size must be >= 2")
    B = _as_basis(basis)
    d = B.shape[0]
    U = np.eye(d, dtype=np.int64) if transform else np.zeros((0, 0), dtype=np.int64)
    mu = np.zeros((d, d))
    bstar = np.zeros(d)
    t0 = time.perf_counter()
    if lll_first and K.lll_kernel(B, U, transform, delta, 0, mu, bstar) != 0:
        raise InvalidBasis("basis is rank deficient")
    if not lll_first:
        mu, bstar = K.gso(B)
    result = BkzResult(B, U if transform else None, 0)
    beta = min(beta, d)
    for tour in range(max_loops):
        tour_start = time.perf_counter()
        changed = False
        for kappa in range(d - 1):
            end = min(kappa + beta, d)
            size = end - kappa
            if size < 2:
                continue
            coeffs, _, status = K.enumerate_block(
                mu, bstar, kappa, size, bstar[kappa] * (1 - 1e-6), max_nodes
            )
            if status == 1:
                g = K.insert_combination(B, U, transform, kappa, coeffs)
                if g != 1:
                    raise InvalidBasis(f"non-primitive enumeration solution (gcd={g})")
                if K.lll_kernel(B, U, transform, delta, kappa, mu, bstar) != 0:
                    raise InvalidBasis("numerical breakdown during BKZ insertion")
                changed = True
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                result.timed_out = True
                break
        result.loops = tour + 1
        result.loop_times.append(time.perf_counter() - tour_start)
        result.first_norms.append(float(np.sqrt(bstar[0])))
        log.debug("bkz-%d tour %d: |b0|=%.2f (%.2fs)", beta, tour, np.sqrt(bstar[0]), result.loop_times[-1])
        if result.timed_out:
            break
        if callback is not None and callback(tour, B):
            break
        if not changed:
            result.converged = True
            break
    return result


def qary_basis(A, q: int, omega: int) -> np.ndarray:
    """``[[0, q I_n], [omega I_m, A]]`` for an ``m x n`` matrix ``A``."""
    A = np.asarray(A, dtype=np.int64)
    m, n = A.shape
    top = np.hstack([np.zeros((n, m), dtype=np.int64), q * np.eye(n, dtype=np.int64)])
    bottom = np.hstack([omega * np.eye(m, dtype=np.int64), A])
    return np.vstack([top, bottom])


def mean_row_std(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.mean(np.std(M, axis=1)))


def find_cliff(column_std, min_ratio: float = 2.0, min_width: int = 2):
    """Split index ``c`` maximizing mean(std[:c]) / mean(std[c:]).

    Returns ``(c, ratio)`` when the best ratio reaches ``min_ratio``, else
    ``None``. Both sides keep at least ``min_width`` columns.
    """
    s = np.asarray(column_std, dtype=float)
    n = s.size
    if n < 2 * min_width:
        return None
    csum = np.concatenate([[0.0], np.cumsum(s)])
    c = np.arange(min_width, n - min_width + 1)
    left = csum[c] / c
    right = (csum[-1] - csum[c]) / (n - c)
    ratio = left / np.maximum(right, 1e-12)
    best = int(np.argmax(ratio))
    if ratio[best] < min_ratio:
        return None
    return int(c[best]), float(ratio[best])


@dataclass
class ReductionProfile:
    per_column_std: np.ndarray
    rho: float
    loops: int
    wall_time: float
    rho_history: list = field(default_factory=list)
    loop_times: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "loops": self.loops,
            "wall_time": self.wall_time,
            "rho_history": list(self.rho_history),
            "loop_times": list(self.loop_times),
            "per_column_std": [float(x) for x in self.per_column_std],
        }


@dataclass
class QaryReduction:
    R: np.ndarray  # (rows, m) transform rows, zero rows removed
    RA: np.ndarray  # centered R @ A mod q
    profile: ReductionProfile
    basis: np.ndarray

    def apply(self, b, q: int) -> np.ndarray:
        """Centered ``R b mod q`` for a vector (or matrix of columns) ``b``."""
        return centered_mod(self.R @ np.asarray(b, dtype=np.int64), q)


def _extract(B, A, q, omega, m):
    R = B[:, :m] // omega
    keep = np.any(R != 0, axis=1)
    R = R[keep]
    RA = centered_mod(R @ np.asarray(A, dtype=np.int64), q)
    return R, RA


def qary_embed_reduce(
    A,
    q: int,
    omega: int = 4,
    beta: int = 20,
    target_rho: float | None = None,
    max_loops: int = 8,
    time_limit: float | None = None,
    flatline: float = 0.002,
) -> QaryReduction:
    """Reduce the q-ary embedding of ``A`` and return the reduced sample transform.

    Runs LLL, then BKZ-``beta`` tours (skipped when ``beta <= 2``), recording
    rho = sigma(RA) / sigma(A) after each phase. Stops at ``target_rho``, when
    rho improves by less than ``flatline`` over a tour, or at ``max_loops``.
    """
    if omega < 1:
        raise InvalidOperands("omega must be >= 1")
    A = np.mod(np.asarray(A, dtype=np.int64), q)
    m, n = A.shape
    t0 = time.perf_counter()
    sigma_a = mean_row_std(centered_mod(A, q)) or 1.0
    B = lll(qary_basis(A, q, omega))
    history = []

    def rho_of(basis):
        _, RA = _extract(basis, A, q, omega, m)
        return mean_row_std(RA) / sigma_a

    history.append(rho_of(B))
    loop_times = []
    loops = 0
    if beta > 2 and (target_rho is None or history[-1] > target_rho):

        def on_tour(tour, basis):
            history.append(rho_of(basis))
            if target_rho is not None and history[-1] <= target_rho:
                return True
            return history[-2] - history[-1] < flatline

        res = bkz(B, beta, max_loops=max_loops, time_limit=time_limit, callback=on_tour, lll_first=False)
        B = res.basis
        loops = res.loops
        loop_times = res.loop_times
        if len(history) < loops + 1:
            history.append(rho_of(B))
    R, RA = _extract(B, A, q, omega, m)
    per_col = np.std(RA, axis=0) if RA.shape[0] else np.zeros(n)
    profile = ReductionProfile(
        per_column_std=per_col,
        rho=history[-1],
        loops=loops,
        wall_time=time.perf_counter() - t0,
        rho_history=history,
        loop_times=loop_times,
    )
    return QaryReduction(R=R, RA=RA, profile=profile, basis=B)
