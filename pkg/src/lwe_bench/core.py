"""Exact modular arithmetic and negacyclic polynomial algebra.

Small moduli use ``int64`` numpy arrays. When a product could overflow 64 bits
(``q`` up to 2**50 in the HE settings) arrays switch to ``object`` dtype so
all arithmetic stays exact Python-integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension, InvalidModulus, InvalidOperands

__all__ = [
    "ZqVector",
    "NegacyclicPoly",
    "centered_mod",
    "dtype_for",
    "is_power_of_two",
    "matmul_mod",
    "module_embed",
    "module_split",
    "negacyclic_mul",
    "negacyclic_shift",
    "skew_circulant",
]

_INT64_BUDGET = 2**62


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def dtype_for(q: int, terms: int = 1, factor: int | None = None):
    """Pick a numpy dtype that keeps ``terms`` products of size ``q * factor`` exact."""
    factor = q if factor is None else factor
    if int(q) * int(factor) * max(int(terms), 1) < _INT64_BUDGET:
        return np.int64
    return object


def _check_modulus(q) -> int:
    q = int(q)
    if q < 2:
        raise InvalidModulus(f"modulus must be >= 2, got {q}")
    return q


def centered_mod(x, q):
    """Reduce ``x`` mod ``q`` into the centered range.

    Odd ``q`` maps to ``[-(q-1)/2, (q-1)/2]``; even ``q`` maps to ``[-q/2, q/2 - 1]``.
    Works on Python ints and on numpy arrays (elementwise).
    """
    q = _check_modulus(q)
    half = (q - 1) // 2
    if isinstance(x, np.ndarray):
        r = np.mod(x, q)
        return np.where(r > half, r - q, r)
    r = int(x) % q
    return r - q if r > half else r


def matmul_mod(A, B, q):
    """``A @ B mod q`` in canonical range, exact for any modulus size."""
    q = _check_modulus(q)
    A = np.asarray(A)
    B = np.asarray(B)
    inner = A.shape[-1]
    amax = int(np.max(np.abs(A))) if A.size else 0
    bmax = int(np.max(np.abs(B))) if B.size else 0
    if amax * bmax * max(inner, 1) < _INT64_BUDGET:
        out = A.astype(np.int64) @ B.astype(np.int64)
        return np.mod(out, q)
    out = A.astype(object) @ B.astype(object)
    return np.mod(out, q)


@dataclass(frozen=True)
class ZqVector:
    entries: np.ndarray
    q: int

    def __post_init__(self):
        q = _check_modulus(self.q)
        arr = np.mod(np.asarray(self.entries, dtype=dtype_for(q, 1, 1)), q)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidDimension("ZqVector needs a non-empty 1-d entry list")
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "q", q)

    def __len__(self):
        return self.entries.size

    def centered(self):
        return centered_mod(self.entries, self.q)


@dataclass(frozen=True)
class NegacyclicPoly:
    """Element of Z_q[X]/(X^n + 1) stored as its coefficient vector."""

    coeffs: np.ndarray
    q: int

    def __post_init__(self):
        q = _check_modulus(self.q)
        arr = np.asarray(self.coeffs)
        if arr.ndim != 1 or not is_power_of_two(arr.size):
            raise InvalidDimension(f"ring dimension must be a power of two, got {arr.size}")
        arr = np.mod(arr.astype(dtype_for(q, 1, 1)), q)
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.coeffs.size

    def __mul__(self, other):
        return negacyclic_mul(self, other)

    def __eq__(self, other):
        return (
            isinstance(other, NegacyclicPoly)
            and self.q == other.q
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.q, tuple(int(c) for c in self.coeffs)))


def negacyclic_shift(y, l: int):
    """Coefficients of ``x**l * y(x)`` in Z[X]/(X^n + 1), no modular reduction.

    Works on the last axis, so a ``(rows, n)`` array shifts every row.
    """
    y = np.asarray(y)
    n = y.shape[-1]
    l = int(l) % (2 * n)
    sign = 1
    if l >= n:
        sign, l = -1, l - n
    out = np.empty_like(y)
    out[..., l:] = y[..., : n - l]
    out[..., :l] = -y[..., n - l :]
    return sign * out if sign < 0 else out


def skew_circulant(a, q=None):
    """Matrix whose row ``l`` is the coefficient vector of ``x**l * a(x)``.

    ``a`` may be a :class:`NegacyclicPoly`, a :class:`ZqVector` or a plain
    integer sequence. With a modulus the matrix is reduced to ``[0, q)``.
    """
    if isinstance(a, (NegacyclicPoly, ZqVector)):
        q = a.q if q is None else q
        a = a.coeffs if isinstance(a, NegacyclicPoly) else a.entries
    a = np.asarray(a)
    n = a.size
    if not is_power_of_two(n):
        raise InvalidDimension(f"skew-circulant needs power-of-two length, got {n}")
    rows = np.empty((n, n), dtype=a.dtype if a.dtype == object else np.int64)
    rows[0] = a
    for l in range(1, n):
        rows[l] = negacyclic_shift(rows[l - 1], 1)
    if q is not None:
        rows = np.mod(rows, _check_modulus(q))
    return rows


def _negacyclic_convolve(a, s, q):
    n = a.size
    dt = dtype_for(q, n)
    full = np.convolve(a.astype(dt), s.astype(dt))
    res = full[:n].copy()
    res[: n - 1] -= full[n:]
    return np.mod(res, q)


def negacyclic_mul(a: NegacyclicPoly, s: NegacyclicPoly) -> NegacyclicPoly:
    if not isinstance(a, NegacyclicPoly) or not isinstance(s, NegacyclicPoly):
        raise InvalidOperands("negacyclic_mul expects two NegacyclicPoly values")
    if a.n != s.n or a.q != s.q:
        raise InvalidOperands(f"operand mismatch: (n={a.n}, q={a.q}) vs (n={s.n}, q={s.q})")
    return NegacyclicPoly(_negacyclic_convolve(a.coeffs, s.coeffs, a.q), a.q)


def module_embed(polys) -> ZqVector:
    """Concatenate the coefficient vectors of ``k`` polynomials, component order kept."""
    polys = list(polys)
    if not polys:
        raise InvalidOperands("module_embed needs at least one polynomial")
    n, q = polys[0].n, polys[0].q
    if any(p.n != n or p.q != q for p in polys):
        raise InvalidOperands("all module components must share n and q")
    return ZqVector(np.concatenate([p.coeffs for p in polys]), q)


def module_split(vec: ZqVector, k: int) -> list[NegacyclicPoly]:
    """Inverse of :func:`module_embed`."""
    entries = vec.entries
    if k < 1 or entries.size % k:
        raise InvalidOperands(f"cannot split length {entries.size} into {k} components")
    return [NegacyclicPoly(chunk, vec.q) for chunk in np.split(entries, k)]
