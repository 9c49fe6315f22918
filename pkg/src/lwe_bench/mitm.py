"""Dual-hybrid meet-in-the-middle for Decision-LWE.

The secret is split as ``s = s1 || s2`` with ``s2`` the last ``zeta``
coordinates. Short vectors of the scaled dual lattice of ``A1`` turn
``(A, b)`` into ``tau`` derived samples ``(A', b')`` in ``s2`` alone, with a
small error ``e'``. Half-weight guesses for ``s2`` are hashed by which
side of ``q/2`` their image ``A' s`` falls on; a guess ``s_dag`` and a table
entry ``s_star`` meet when ``b' - A' s_dag`` lands in the bucket of
``A' s_star`` (up to flips of coordinates near a hash boundary).

The table stores supports and an assignment id only; values are re-derived
when a bucket is probed.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .core import centered_mod, matmul_mod
from .errors import BoundTooLarge, InvalidSpec, MemoryCapExceeded, SearchBlowup
from .reduction import bkz, lll
from .sampling import SampleSet

__all__ = [
    "MAX_BOUNDARY",
    "MitmDecision",
    "MitmParams",
    "MitmTable",
    "boundary_flips",
    "boundary_positions",
    "derive_samples_and_bound",
    "dual_basis",
    "lsh_index",
    "mitm_attack",
    "mitm_decide",
    "scaled_dual_short_vectors",
    "table_memory_estimate",
]

log = logging.getLogger(__name__)

MAX_BOUNDARY = 24
# per table entry: 8-byte indices, container overhead, tau-bit key in 64-bit words
_INDEX_BYTES = 8
_ENTRY_OVERHEAD = 64


@dataclass(frozen=True)
class MitmParams:
    zeta: int
    tau: int = 50
    c: int = 10
    B: float | None = None
    alphabet: tuple = (1,)
    m: int | None = None
    beta: int = 20

    def __post_init__(self):
        if self.zeta < 1 or self.tau < 1 or self.c < 1:
            raise InvalidSpec("zeta, tau and c must be positive")


@dataclass
class MitmTable:
    buckets: dict = field(default_factory=dict)
    entry_count: int = 0

    def insert(self, key: str, support: tuple, assignment: int) -> None:
        self.buckets.setdefault(key, []).append((support, assignment))
        self.entry_count += 1

    def get(self, key: str) -> list:
        return self.buckets.get(key, [])


def lsh_index(v, q: int) -> str:
    """Bit ``i`` is 1 iff ``v_i < q/2`` (entries canonical in ``[0, q)``)."""
    v = np.mod(np.asarray(v), q)
    return "".join("1" if 2 * int(x) < q else "0" for x in v)


def boundary_positions(r, B: float, q: int) -> list:
    """Coordinates within ``B`` of a hash threshold (0 or q/2), inclusive."""
    r = np.mod(np.asarray(r), q).astype(float)
    near_zero = (r <= B) | (r >= q - B)
    near_half = np.abs(r - q / 2) <= B
    return [int(i) for i in np.flatnonzero(near_zero | near_half)]


def boundary_flips(r, B: float, q: int) -> list:
    """Every subset of boundary positions (each one an alternative bucket)."""
    if B >= q / 4:
        raise InvalidSpec("boundary flips need B < q/4")
    pos = boundary_positions(r, B, q)
    if len(pos) > MAX_BOUNDARY:
        raise SearchBlowup(f"{len(pos)} boundary coordinates exceed the limit of {MAX_BOUNDARY}")
    out = []
    for size in range(len(pos) + 1):
        out.extend(frozenset(c) for c in combinations(pos, size))
    return out


def _flip(key: str, subset) -> str:
    if not subset:
        return key
    chars = list(key)
    for i in subset:
        chars[i] = "0" if chars[i] == "1" else "1"
    return "".join(chars)


def table_memory_estimate(zeta: int, h_prime: int, tau: int = 50, alphabet_size: int = 1) -> int:
    """Bytes for a table holding every support of weight ``<= ceil(h'/2)`` in ``zeta`` slots.

    Only supports are stored, so ``alphabet_size`` does not change the size.
    """
    if h_prime > zeta:
        raise InvalidSpec("h' cannot exceed zeta")
    half = -(-h_prime // 2)
    key_bytes = 8 * max(1, -(-tau // 64))
    total = 0
    for w in range(half + 1):
        total += math.comb(zeta, w) * (_INDEX_BYTES * w + _ENTRY_OVERHEAD + key_bytes)
    return total


def dual_basis(A1, q: int, c: int) -> np.ndarray:
    """Integer basis ``[[c I_m, A1], [0, q I]]`` of the scaled dual lattice (times c)."""
    A1 = np.mod(np.asarray(A1, dtype=np.int64), q)
    m, k = A1.shape
    top = np.hstack([c * np.eye(m, dtype=np.int64), A1])
    bot = np.hstack([np.zeros((k, m), dtype=np.int64), q * np.eye(k, dtype=np.int64)])
    return np.vstack([top, bot])


def _short_vector(task):
    A1, q, c, beta, block = task
    m = A1.shape[0]
    B = lll(dual_basis(A1, q, c))
    if beta > 2:
        B = bkz(B, beta, max_loops=4, lll_first=False).basis
    norms = np.linalg.norm(B.astype(float), axis=1)
    for i in np.argsort(norms, kind="stable"):
        y1 = B[i, :m] // c
        if np.any(y1):
            return y1, B[i, m:], float(norms[i]), block
    return None


def scaled_dual_short_vectors(A1_blocks, q: int, c: int = 10, tau: int | None = None, beta: int = 20, workers=None):
    """One short dual vector per block: ``(y1, w, norm, block)`` with ``y1^T A1 = w mod q``.

    ``w`` is ``c * y2``; ``norm`` is the length of the reduced lattice vector
    ``(c y1, w)``. ``A1_blocks`` is a list of ``m x (n - zeta)`` matrices or
    a single matrix reused ``tau`` times. Blocks whose reduction yields no
    usable vector are skipped, so fewer than ``tau`` vectors may come back.
    """
    if isinstance(A1_blocks, np.ndarray) and A1_blocks.ndim == 2:
        A1_blocks = [A1_blocks] * (tau or 1)
    blocks = list(A1_blocks)[: tau or None]
    tasks = [(np.asarray(A), q, c, beta, i) for i, A in enumerate(blocks)]
    nworkers = int(workers or os.environ.get("LWE_BENCH_WORKERS", "1"))
    if nworkers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(nworkers) as pool:
            out = list(pool.map(_short_vector, tasks))
    else:
        out = [_short_vector(t) for t in tasks]
    return [v for v in out if v is not None]


def derive_samples_and_bound(short_vectors, A2_blocks, b_blocks, sigma_e: float, c: int, q: int):
    """Derived samples ``A'_i = y1_i^T A2``, ``b'_i = <y1_i, b>`` and the bound ``B``.

    ``B = (2 + 1/sqrt(2 pi)) alpha q sqrt(m / (m + n1)) mean|v| / c`` with
    ``alpha = sqrt(2 pi) sigma_e / q`` and ``|v|`` the reduced lattice vector
    length. Raises :class:`BoundTooLarge` when ``B >= q/8``.
    """
    if not short_vectors:
        raise InvalidSpec("need at least one short vector")
    single = isinstance(A2_blocks, np.ndarray) and A2_blocks.ndim == 2
    rows, bs = [], []
    for y1, _, _, block in short_vectors:
        A2 = A2_blocks if single else A2_blocks[block]
        b = b_blocks if single else b_blocks[block]
        rows.append(matmul_mod(y1, np.asarray(A2), q))
        bs.append(int(matmul_mod(y1, np.asarray(b), q)))
    Ap = np.array(rows, dtype=np.int64)
    bp = np.array(bs, dtype=np.int64)
    m = short_vectors[0][0].size
    n1 = short_vectors[0][1].size
    alpha = math.sqrt(2 * math.pi) * sigma_e / q
    mean_norm = float(np.mean([v[2] for v in short_vectors]))
    B = (2 + 1 / math.sqrt(2 * math.pi)) * alpha * q * math.sqrt(m / (m + n1)) * mean_norm / c
    if B >= q / 8:
        raise BoundTooLarge(f"B/q = {B / q:.3f} >= 1/8; reduction is not strong enough")
    return Ap, bp, B


@dataclass
class MitmDecision:
    is_lwe: bool
    s2: np.ndarray | None = None
    pairs_checked: int = 0
    table_entries: int = 0
    blowups: int = 0
    seconds: float = 0.0


def _candidates(zeta, max_weight, alphabet):
    vals = sorted(set(int(v) for v in alphabet if v))
    for w in range(max_weight + 1):
        for support in combinations(range(zeta), w):
            for aid, assign in enumerate(product(vals, repeat=w)):
                yield support, aid, assign


def _assignment(aid: int, w: int, alphabet):
    vals = sorted(set(int(v) for v in alphabet if v))
    out = []
    for _ in range(w):
        out.append(vals[aid % len(vals)])
        aid //= len(vals)
    return tuple(reversed(out))


def mitm_decide(Ap, bp, h: int, params: MitmParams, q: int, B: float | None = None, mem_cap: int | None = None):
    """Decide whether ``(A', b')`` is LWE with an ``s2`` of weight ``<= h``.

    Each half-weight candidate is inserted and immediately used as a probe:
    buckets of ``b' - A' s`` (with boundary flips) are searched for an entry
    with disjoint support whose combination leaves
    ``median |b' - A' s_dag - A' s_star| <= B``.
    """
    t0 = time.perf_counter()
    Ap = np.mod(np.asarray(Ap, dtype=np.int64), q)
    bp = np.mod(np.asarray(bp, dtype=np.int64), q)
    B = params.B if B is None else B
    if B is None:
        raise InvalidSpec("a bound B is required")
    zeta = Ap.shape[1]
    half = -(-h // 2)
    if mem_cap is not None:
        est = table_memory_estimate(zeta, h, Ap.shape[0], len(params.alphabet))
        if est > mem_cap:
            raise MemoryCapExceeded(est, mem_cap)
    table = MitmTable()
    images = {}
    dec = MitmDecision(False)
    for support, aid, assign in _candidates(zeta, half, params.alphabet):
        img = Ap[:, list(support)] @ np.array(assign, dtype=np.int64) % q if support else np.zeros(Ap.shape[0], np.int64)
        images[(support, aid)] = img
        table.insert(lsh_index(img, q), support, aid)
        resid = np.mod(bp - img, q)
        try:
            flips = boundary_flips(resid, B, q)
        except SearchBlowup:
            dec.blowups += 1
            continue
        key = lsh_index(resid, q)
        for subset in flips:
            for sup2, aid2 in table.get(_flip(key, subset)):
                if set(sup2) & set(support):
                    continue
                dec.pairs_checked += 1
                r = centered_mod(resid - images[(sup2, aid2)], q)
                if np.median(np.abs(r)) <= B:
                    s2 = np.zeros(zeta, dtype=np.int64)
                    s2[list(support)] = assign
                    s2[list(sup2)] = _assignment(aid2, len(sup2), params.alphabet)
                    dec.is_lwe, dec.s2 = True, s2
                    dec.table_entries = table.entry_count
                    dec.seconds = time.perf_counter() - t0
                    return dec
    dec.table_entries = table.entry_count
    dec.seconds = time.perf_counter() - t0
    return dec


def mitm_attack(samples: SampleSet, params: MitmParams, h: int, mem_cap: int | None = None, workers=None):
    """Full pipeline on ``tau * m`` samples; returns ``(decision, B, (A', b'))``."""
    n = samples.params.dim
    q = samples.params.q
    m = params.m or n
    if len(samples) < params.tau * m:
        raise InvalidSpec(f"need tau*m = {params.tau * m} samples, have {len(samples)}")
    n1 = n - params.zeta
    if n1 < 1:
        raise InvalidSpec("zeta must leave at least one column for the dual lattice")
    blocks = [np.arange(i * m, (i + 1) * m) for i in range(params.tau)]
    A1 = [samples.A[idx, :n1] for idx in blocks]
    A2 = [samples.A[idx, n1:] for idx in blocks]
    bb = [samples.b[idx] for idx in blocks]
    vecs = scaled_dual_short_vectors(A1, q, params.c, params.tau, params.beta, workers=workers)
    Ap, bp, B = derive_samples_and_bound(vecs, A2, bb, samples.params.sigma_e, params.c, q)
    dec = mitm_decide(Ap, bp, h, params, q, B=B if params.B is None else params.B, mem_cap=mem_cap)
    return dec, B, (Ap, bp)
