"""Subsample-and-reduce dataset construction and the ring cliff algebra.

Reduction only looks at ``A``, so the expensive part (a list of subsample
index sets and their transforms ``R``) is kept in a :class:`ReductionRun`
that can be applied to any ``b`` for the same matrix. Trials that share
``A`` but use different secrets then share one preprocessing pass.

Ring and module rows carry provenance: the full b-polynomial of the reduced
polynomial sample and the coefficient index ``j`` the scalar row stands for.
Multiplying a sample by ``x**l`` moves row ``j`` to row ``j + l`` (negated on
wrap), which is what :func:`cliff_shift` uses to regenerate ``rb``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .core import centered_mod, matmul_mod, negacyclic_shift
from .errors import InvalidShift, InvalidSpec, UnstableStatistics
from .reduction import ReductionProfile, qary_embed_reduce
from .sampling import LweParams, SampleSet

__all__ = [
    "ReducedDataset",
    "ReductionRun",
    "apply_reductions",
    "build_reduced_dataset",
    "cliff_shift",
    "cliff_split_permutation",
    "cruel_mask",
    "cruel_threshold",
    "default_m",
    "min_partial_hamming",
    "reduce_matrices",
    "shift_dataset",
    "window_min_counts",
]

log = logging.getLogger(__name__)

MIN_ROWS_FOR_STATS = 100


def cruel_threshold(q: int) -> float:
    return q / (2 * math.sqrt(12))


def default_m(params: LweParams) -> int:
    return int(round(0.875 * params.dim))


def cruel_mask(ra, q: int) -> np.ndarray:
    """Columns whose centered std exceeds ``q / (2 sqrt 12)``."""
    ra = np.asarray(ra)
    if ra.ndim != 2 or ra.shape[0] < MIN_ROWS_FOR_STATS:
        raise UnstableStatistics(f"need >= {MIN_ROWS_FOR_STATS} rows for column statistics")
    stds = np.std(centered_mod(ra, q).astype(float), axis=0)
    return stds > cruel_threshold(q)


@dataclass
class ReducedDataset:
    ra: np.ndarray  # centered, (rows, n*k)
    rb: np.ndarray  # centered, (rows,)
    params: LweParams
    cruel_mask: np.ndarray | None = None
    shift: int = 0
    split_permutation: np.ndarray | None = None
    bpoly: np.ndarray | None = None  # (rows, n), canonical; ring/module only
    j: np.ndarray | None = None  # (rows,)
    profiles: list = field(default_factory=list)
    partial: bool = False
    seed: int | None = None

    def __len__(self):
        return self.ra.shape[0]

    @property
    def num_cruel(self) -> int:
        return int(np.count_nonzero(self.cruel_mask)) if self.cruel_mask is not None else 0

    @property
    def rho(self) -> float:
        if not self.profiles:
            return float("nan")
        return float(np.mean([p.rho for p in self.profiles]))

    def compute_mask(self) -> np.ndarray:
        self.cruel_mask = cruel_mask(self.ra, self.params.q)
        return self.cruel_mask

    def column_std(self) -> np.ndarray:
        return np.std(self.ra.astype(float), axis=0)

    def subset(self, idx) -> "ReducedDataset":
        return ReducedDataset(
            self.ra[idx],
            self.rb[idx],
            self.params,
            self.cruel_mask,
            self.shift,
            self.split_permutation,
            None if self.bpoly is None else self.bpoly[idx],
            None if self.j is None else self.j[idx],
            self.profiles,
            self.partial,
            self.seed,
        )

    def residuals(self, s) -> np.ndarray:
        q = self.params.q
        return centered_mod(self.rb - matmul_mod(self.ra, np.asarray(s), q), q)

    def save(self, path) -> None:
        header = {
            "kind": "reduced",
            "params": self.params.to_dict(),
            "variant": self.params.variant,
            "seed": self.seed,
            "shift": int(self.shift),
            "split_permutation": None
            if self.split_permutation is None
            else [int(v) for v in self.split_permutation],
            "partial": bool(self.partial),
            "num_cruel": self.num_cruel,
            "cruel_mask": None if self.cruel_mask is None else [int(v) for v in self.cruel_mask],
        }
        io.write_rows(path, header, self.ra, self.rb)
        io.write_sidecar_json(
            path,
            ".profile.json",
            {
                "rho": self.rho,
                "per_column_std": [float(v) for v in self.column_std()],
                "matrices": [p.to_dict() for p in self.profiles],
            },
        )
        if self.bpoly is not None:
            io.write_rows(io.sidecar(path, ".prov"), {"kind": "provenance"}, self.bpoly, self.j)

    @classmethod
    def load(cls, path) -> "ReducedDataset":
        header, ra, rb = io.read_rows(path)
        if header.get("kind") != "reduced":
            raise InvalidSpec(f"{path} is not a reduced dataset")
        params = LweParams.from_dict(header["params"])
        prof = io.read_sidecar_json(path, ".profile.json") or {}
        profiles = [
            ReductionProfile(
                per_column_std=np.array(p["per_column_std"]),
                rho=p["rho"],
                loops=p["loops"],
                wall_time=p["wall_time"],
                rho_history=p["rho_history"],
                loop_times=p["loop_times"],
            )
            for p in prof.get("matrices", [])
        ]
        bpoly = j = None
        prov = io.sidecar(path, ".prov")
        if prov.exists():
            _, bpoly, j = io.read_rows(prov)
        mask = header.get("cruel_mask")
        perm = header.get("split_permutation")
        return cls(
            ra=ra,
            rb=rb,
            params=params,
            cruel_mask=None if mask is None else np.array(mask, dtype=bool),
            shift=header.get("shift", 0),
            split_permutation=None if perm is None else np.array(perm, dtype=np.int64),
            bpoly=bpoly,
            j=j,
            profiles=profiles,
            partial=header.get("partial", False),
            seed=header.get("seed"),
        )


@dataclass
class ReductionRun:
    """Subsample index sets and their reduction transforms for one matrix ``A``."""

    indices: list
    transforms: list
    profiles: list
    split_permutation: np.ndarray | None = None
    partial: bool = False

    @property
    def rows(self) -> int:
        return int(sum(R.shape[0] for R in self.transforms))


def cliff_split_permutation(k: int, n: int, n_u: int):
    """Permutation moving each component's first ``nu = N_u / k`` coordinates to the front.

    Returns ``(perm, inverse, adjusted)``; ``a[perm]`` is the permuted vector and
    ``adjusted`` is True when ``N_u`` was not divisible by ``k`` and ``nu`` was
    rounded up.
    """
    if k < 1 or n < 1 or not 0 <= n_u <= k * n:
        raise InvalidSpec("need k, n >= 1 and 0 <= N_u <= k*n")
    adjusted = n_u % k != 0
    nu = min(-(-n_u // k), n)
    front = [i * n + t for i in range(k) for t in range(nu)]
    back = [i * n + t for i in range(k) for t in range(nu, n)]
    perm = np.array(front + back, dtype=np.int64)
    inv = np.argsort(perm)
    return perm, inv, adjusted


def _reduce_one(task):
    A_sub, q, omega, beta, max_loops, time_limit, target_rho = task
    r = qary_embed_reduce(
        A_sub, q, omega=omega, beta=beta, max_loops=max_loops, time_limit=time_limit, target_rho=target_rho
    )
    return r.R, r.profile


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get("LWE_BENCH_WORKERS", "1")))


def reduce_matrices(
    A,
    q: int,
    m: int,
    omega: int = 4,
    beta: int = 20,
    num_matrices: int | None = None,
    target_count: int | None = None,
    seed: int = 0,
    max_loops: int = 8,
    time_limit: float | None = None,
    target_rho: float | None = None,
    split_nu: tuple[int, int, int] | None = None,
    workers: int | None = None,
) -> ReductionRun:
    """Reduce random ``m``-row subsamples of ``A`` until ``target_count`` rows or ``num_matrices``.

    ``split_nu = (k, n, N_u)`` applies the cliff-splitting permutation to the
    columns before reduction (the returned ``R`` acts on unpermuted rows, so
    no inverse step is needed afterwards).
    """
    A = np.asarray(A)
    N = A.shape[0]
    if not 1 <= m <= N:
        raise InvalidSpec(f"subsample size m={m} must lie in [1, {N}]")
    if num_matrices is None and target_count is None:
        num_matrices = 1
    rng = np.random.default_rng(seed)
    perm = None
    if split_nu is not None:
        perm, _, _ = cliff_split_permutation(*split_nu)
    cap = num_matrices if num_matrices is not None else 10**9
    nworkers = _workers(workers)
    run = ReductionRun([], [], [], perm)
    pool = ProcessPoolExecutor(nworkers) if nworkers > 1 else None
    try:
        while len(run.indices) < cap and (target_count is None or run.rows < target_count):
            batch = min(nworkers, cap - len(run.indices))
            idx_batch = [np.sort(rng.choice(N, size=m, replace=False)) for _ in range(batch)]
            tasks = []
            for idx in idx_batch:
                sub = A[idx] if perm is None else A[idx][:, perm]
                tasks.append((sub, q, omega, beta, max_loops, time_limit, target_rho))
            results = list(pool.map(_reduce_one, tasks)) if pool else [_reduce_one(t) for t in tasks]
            for idx, (R, prof) in zip(idx_batch, results):
                run.indices.append(idx)
                run.transforms.append(R)
                run.profiles.append(prof)
                log.info("matrix %d: rho=%.3f rows=%d", len(run.indices), prof.rho, R.shape[0])
    finally:
        if pool:
            pool.shutdown()
    run.partial = target_count is not None and run.rows < target_count
    return run


def _ring_provenance(samples: SampleSet, idx, R):
    # reduced polynomial b: sum_i R_i * x^(n-1-j_i) * b_{t_i}(x); its scalar row is j = n-1
    n = samples.params.n
    q = samples.params.q
    t = idx // n
    j = idx % n
    shifted = np.stack([negacyclic_shift(samples.b_poly[ti].astype(np.int64), n - 1 - ji) for ti, ji in zip(t, j)])
    return matmul_mod(R, shifted, q)


def apply_reductions(run: ReductionRun, samples: SampleSet, seed: int | None = None) -> ReducedDataset:
    """Apply every stored transform to ``samples`` and collect the reduced rows."""
    q = samples.params.q
    ras, rbs, polys = [], [], []
    ring = samples.params.variant != "plain" and samples.b_poly is not None
    for idx, R in zip(run.indices, run.transforms):
        if R.shape[0] == 0:
            continue
        ras.append(centered_mod(matmul_mod(R, samples.A[idx], q), q))
        rbs.append(centered_mod(matmul_mod(R, samples.b[idx], q), q))
        if ring:
            polys.append(_ring_provenance(samples, idx, R))
    dim = samples.A.shape[1]
    ra = np.vstack(ras) if ras else np.zeros((0, dim), dtype=np.int64)
    rb = np.concatenate(rbs) if rbs else np.zeros(0, dtype=np.int64)
    bpoly = jj = None
    if ring:
        bpoly = np.vstack(polys) if polys else np.zeros((0, samples.params.n), dtype=np.int64)
        jj = np.full(ra.shape[0], samples.params.n - 1, dtype=np.int64)
    ds = ReducedDataset(
        ra=ra,
        rb=rb,
        params=samples.params,
        split_permutation=run.split_permutation,
        bpoly=bpoly,
        j=jj,
        profiles=list(run.profiles),
        partial=run.partial,
        seed=seed,
    )
    if len(ds) >= MIN_ROWS_FOR_STATS:
        ds.compute_mask()
    return ds


def build_reduced_dataset(
    samples: SampleSet,
    m: int | None = None,
    omega: int = 4,
    beta: int = 20,
    num_matrices: int | None = None,
    target_count: int | None = None,
    seed: int = 0,
    **kwargs,
) -> ReducedDataset:
    """Subsample ``m`` rows, reduce, apply ``R`` to ``(A, b)``; repeat until ``target_count`` rows."""
    m = default_m(samples.params) if m is None else int(m)
    run = reduce_matrices(
        samples.A,
        samples.params.q,
        m,
        omega=omega,
        beta=beta,
        num_matrices=num_matrices,
        target_count=target_count,
        seed=seed,
        **kwargs,
    )
    return apply_reductions(run, samples, seed=seed)


def _check_shift(l: int, n: int) -> int:
    l = int(l)
    if not 0 <= l < 2 * n:
        raise InvalidShift(f"shift {l} outside [0, {2 * n})")
    return l


def cliff_shift(ra, bpoly, j: int, l: int, q: int, k: int = 1):
    """Row of ``x**l`` times a reduced polynomial sample.

    ``ra`` is the scalar row (``k`` components of length ``n``), ``bpoly`` the
    sample's full b-polynomial and ``j`` the coefficient the row stands for.
    Returns ``(ra', rb', j')`` with ``ra'`` the componentwise ``x**l`` shift.
    """
    ra = np.asarray(ra)
    n = ra.shape[-1] // k
    l = _check_shift(l, n)
    shifted = np.concatenate([negacyclic_shift(c, l) for c in np.split(ra, k)])
    pos = int(j) + l
    sign = -1 if (pos // n) % 2 else 1
    rb = centered_mod(sign * int(np.asarray(bpoly)[pos % n]), q)
    return centered_mod(shifted, q), rb, pos % n


def shift_dataset(ds: ReducedDataset, l: int) -> ReducedDataset:
    """Every row multiplied by ``x**l``; the cruel mask rotates with the columns."""
    if ds.bpoly is None or ds.j is None:
        raise InvalidSpec("cliff shifting needs ring/module rows with b-polynomial provenance")
    params = ds.params
    n, k, q = params.n, params.k, params.q
    l = _check_shift(l, n)
    rows = ds.ra.shape[0]
    comps = ds.ra.reshape(rows, k, n)
    ra = centered_mod(negacyclic_shift(comps, l).reshape(rows, k * n), q)
    pos = ds.j + l
    sign = np.where((pos // n) % 2 == 1, -1, 1)
    rb = centered_mod(sign * ds.bpoly[np.arange(rows), pos % n], q)
    mask = None
    if ds.cruel_mask is not None:
        mask = np.roll(ds.cruel_mask.reshape(k, n), l % n, axis=1).reshape(-1)
    return ReducedDataset(
        ra=ra,
        rb=rb,
        params=params,
        cruel_mask=mask,
        shift=(ds.shift + l) % (2 * n),
        split_permutation=ds.split_permutation,
        bpoly=ds.bpoly,
        j=pos % n,
        profiles=ds.profiles,
        partial=ds.partial,
        seed=ds.seed,
    )


def window_min_counts(counts, nu: int):
    """Min and argmin over cyclic windows of width ``nu`` of per-position ``counts`` (last axis)."""
    counts = np.asarray(counts)
    n = counts.shape[-1]
    if not 0 <= nu <= n:
        raise InvalidSpec(f"window {nu} must lie in [0, {n}]")
    ext = np.concatenate([counts, counts[..., :nu]], axis=-1)
    csum = np.concatenate([np.zeros(counts.shape[:-1] + (1,), dtype=np.int64), np.cumsum(ext, axis=-1)], axis=-1)
    sums = csum[..., nu : nu + n] - csum[..., :n]
    return sums.min(axis=-1), sums.argmin(axis=-1)


def min_partial_hamming(secret, nu: int, k: int = 1):
    """``(h*, w*)``: fewest nonzeros over cyclic windows ``[w, w+nu)`` summed over components."""
    s = np.asarray(secret)
    if s.size % k:
        raise InvalidSpec("secret length must be a multiple of k")
    counts = (s.reshape(k, -1) != 0).sum(axis=0)
    h, w = window_min_counts(counts, nu)
    return int(h), int(w)
