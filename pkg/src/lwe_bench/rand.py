"""Random generation backends.

Two matrix backends are available. ``cryptographic`` draws from a SHAKE-256
keystream with rejection sampling (no modulo bias). ``lcg`` is a deliberately
weak linear congruential generator reduced naively mod q, used to study how
structured randomness helps lattice reduction.

Secrets, errors and index subsampling always come from ``numpy`` generators
derived from the same seed, so runs are reproducible end to end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSpec

__all__ = [
    "GLIBC_LCG",
    "GeneratorSpec",
    "MatrixGenerator",
    "derive_seed",
    "lcg_column_params",
    "lcg_stream",
    "make_generator",
    "uniform_matrix",
]

# a, c, m of the classic BSD/glibc rand_r recurrence.
GLIBC_LCG = (1103515245, 12345, 2**31)

_SEED_MASK = 2**64 - 1


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "cryptographic"
    seed: int = 0
    lcg_params: tuple[int, int, int] = GLIBC_LCG

    def __post_init__(self):
        if self.kind not in ("cryptographic", "lcg"):
            raise InvalidSpec(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)
        a, c, m = (int(v) for v in self.lcg_params)
        if self.kind == "lcg" and not (m > a >= 1 and m > c >= 0):
            raise InvalidSpec(f"invalid LCG parameters a={a}, c={c}, m={m}")
        object.__setattr__(self, "lcg_params", (a, c, m))

    def child(self, index: int) -> "GeneratorSpec":
        """Independent spec for worker/trial ``index`` (base seed + index)."""
        return replace(self, seed=derive_seed(self.seed, index))


def derive_seed(base: int, *path: int) -> int:
    seed = int(base)
    for p in path:
        seed = (seed + int(p)) & _SEED_MASK
    return seed


def lcg_stream(x0: int, count: int, a: int, c: int, m: int) -> np.ndarray:
    """Raw LCG states ``x_1 .. x_count`` starting from ``x_0 = x0``."""
    out = np.empty(count, dtype=object if m > 2**31 else np.int64)
    x = int(x0) % m
    for i in range(count):
        x = (a * x + c) % m
        out[i] = x
    return out


def lcg_column_params(a: int, c: int, m: int, n: int) -> tuple[int, int]:
    """Recurrence followed by each column of a row-filled LCG matrix with rows of length ``n``."""
    a_col = pow(a, n, m)
    geom = sum(pow(a, j, m) for j in range(n)) % m
    return a_col, (c * geom) % m


class MatrixGenerator:
    """Stateful generator built from a :class:`GeneratorSpec`. Single owner."""

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec
        self.np = np.random.default_rng(spec.seed)
        self._counter = 0
        self._lcg_state = spec.seed % spec.lcg_params[2]
        self.last_raw = None

    def _shake_words(self, count: int) -> np.ndarray:
        key = self.spec.seed.to_bytes(8, "little") + self._counter.to_bytes(8, "little")
        self._counter += 1
        return np.frombuffer(hashlib.shake_256(key).digest(8 * count), dtype="<u8")

    def uniform_mod(self, q: int, count: int) -> np.ndarray:
        """``count`` draws reduced mod ``q``, in generation order."""
        if self.spec.kind == "lcg":
            a, c, m = self.spec.lcg_params
            raw = lcg_stream(self._lcg_state, count, a, c, m)
            if count:
                self._lcg_state = int(raw[-1])
            self.last_raw = raw
            return np.mod(raw, q).astype(np.int64 if q < 2**62 else object)
        return self._rejection(q, count)

    def _rejection(self, q: int, count: int) -> np.ndarray:
        if q > 2**63:
            raise InvalidSpec("cryptographic backend supports q <= 2**63")
        limit = (2**64 // q) * q
        out = []
        need = count
        while need > 0:
            words = self._shake_words(need + need // 8 + 8)
            if limit < 2**64:
                words = words[words < np.uint64(limit)]
            take = words[:need] % np.uint64(q)
            out.append(take.astype(np.int64) if q < 2**62 else take.astype(object))
            need -= take.size
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def make_generator(spec_or_seed=None) -> MatrixGenerator:
    if isinstance(spec_or_seed, MatrixGenerator):
        return spec_or_seed
    if isinstance(spec_or_seed, GeneratorSpec):
        return MatrixGenerator(spec_or_seed)
    return MatrixGenerator(GeneratorSpec(seed=0 if spec_or_seed is None else spec_or_seed))


def uniform_matrix(rows: int, cols: int, q: int, gen) -> np.ndarray:
    """Uniform matrix over Z_q filled row by row, left to right."""
    gen = make_generator(gen)
    return gen.uniform_mod(q, rows * cols).reshape(rows, cols)
