"""Secrets, errors and LWE / RLWE / MLWE sample generation.

Ring and module samples are expanded into plain LWE rows. For a polynomial
sample ``(a_1..a_k, b)`` the row belonging to coefficient ``j`` of ``b`` is the
concatenation over components of column ``j`` of ``skew_circulant(a_i)``, so
``b_j = <row_j, s> + e_j`` holds for the natural coefficient embedding of ``s``.
The polynomial form is kept alongside (``polys`` / ``b_poly``) for the
ring-aware preprocessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import centered_mod, dtype_for, is_power_of_two, matmul_mod, skew_circulant
from .errors import InvalidSpec
from .rand import make_generator, uniform_matrix

__all__ = [
    "ErrorSpec",
    "LweParams",
    "SampleSet",
    "SecretSpec",
    "expand_ring_sample",
    "gen_samples",
    "plant_secret",
    "sample_error",
    "sample_secret",
]

SECRET_DISTS = ("binary", "ternary", "binomial", "gaussian", "uniform")


@dataclass(frozen=True)
class SecretSpec:
    dist: str
    length: int
    fixed_h: int | None = None
    eta: int = 2
    sigma: float = 3.19

    def __post_init__(self):
        if self.dist not in SECRET_DISTS:
            raise InvalidSpec(f"unknown secret distribution {self.dist!r}")
        if self.length < 1:
            raise InvalidSpec("secret length must be positive")
        if self.fixed_h is not None and not 0 <= self.fixed_h <= self.length:
            raise InvalidSpec(f"fixed_h={self.fixed_h} outside [0, {self.length}]")

    @property
    def std(self) -> float:
        """Standard deviation of a nonzero-unconditioned coordinate (used for scaling)."""
        return _dist_std(self.dist, self.eta, self.sigma)


@dataclass(frozen=True)
class ErrorSpec:
    dist: str = "gaussian"
    sigma: float = 3.19
    eta: int = 2

    def __post_init__(self):
        if self.dist not in ("gaussian", "binomial", "ternary", "binary"):
            raise InvalidSpec(f"unsupported error distribution {self.dist!r}")

    @property
    def std(self) -> float:
        return _dist_std(self.dist, self.eta, self.sigma)

    @property
    def bound(self) -> float:
        """Largest residual a correct secret can leave (6 sigma for gaussians)."""
        if self.dist == "binomial":
            return float(self.eta)
        if self.dist in ("ternary", "binary"):
            return 1.0
        return 6.0 * self.sigma


def _dist_std(dist, eta, sigma):
    if dist == "binomial":
        return math.sqrt(eta / 2)
    if dist == "gaussian":
        return float(sigma)
    if dist == "ternary":
        return math.sqrt(2 / 3)
    if dist == "binary":
        return 0.5
    return float("nan")


@dataclass(frozen=True)
class LweParams:
    n: int
    q: int
    secret: SecretSpec
    error: ErrorSpec = field(default_factory=ErrorSpec)
    k: int = 1
    variant: str = "plain"

    def __post_init__(self):
        if self.variant not in ("plain", "ring", "module"):
            raise InvalidSpec(f"unknown variant {self.variant!r}")
        if self.q < 2:
            raise InvalidSpec("q must be >= 2")
        if self.variant == "ring" and (not is_power_of_two(self.n) or self.k != 1):
            raise InvalidSpec("ring variant needs power-of-two n and k=1")
        if self.variant == "module" and (not is_power_of_two(self.n) or self.k < 2):
            raise InvalidSpec("module variant needs power-of-two n and k>=2")
        if self.variant == "plain" and self.k != 1:
            raise InvalidSpec("plain LWE uses k=1")
        if self.secret.length != self.dim:
            raise InvalidSpec(f"secret length {self.secret.length} != n*k = {self.dim}")

    @property
    def dim(self) -> int:
        return self.n * self.k

    @property
    def sigma_e(self) -> float:
        return self.error.std

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "q": self.q,
            "variant": self.variant,
            "secret": {
                "dist": self.secret.dist,
                "length": self.secret.length,
                "fixed_h": self.secret.fixed_h,
                "eta": self.secret.eta,
                "sigma": self.secret.sigma,
            },
            "error": {"dist": self.error.dist, "sigma": self.error.sigma, "eta": self.error.eta},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LweParams":
        return cls(
            n=int(d["n"]),
            k=int(d.get("k", 1)),
            q=int(d["q"]),
            variant=d.get("variant", "plain"),
            secret=SecretSpec(**d["secret"]),
            error=ErrorSpec(**d.get("error", {})),
        )


@dataclass
class SampleSet:
    A: np.ndarray
    b: np.ndarray
    params: LweParams
    secret: np.ndarray | None = None
    polys: np.ndarray | None = None  # (num, k, n) for ring/module
    b_poly: np.ndarray | None = None  # (num, n)

    def __len__(self):
        return self.A.shape[0]

    def residuals(self, s) -> np.ndarray:
        """Centered ``b - A s``; the only sanctioned way to use a candidate secret."""
        return centered_mod(np.asarray(self.b) - matmul_mod(self.A, np.asarray(s), self.params.q), self.params.q)

    def subset(self, idx) -> "SampleSet":
        return SampleSet(self.A[idx], self.b[idx], self.params, self.secret)


def _binomial(rng, eta, size):
    bits = rng.integers(0, 2, size=(2, eta, size))
    return bits[0].sum(axis=0) - bits[1].sum(axis=0)


def _rounded_gaussian(rng, sigma, size):
    if sigma == 0:
        return np.zeros(size, dtype=np.int64)
    return np.rint(rng.normal(0.0, sigma, size)).astype(np.int64)


def _draw(rng, dist, size, eta=2, sigma=3.19, q=None):
    if dist == "binary":
        return rng.integers(0, 2, size=size)
    if dist == "ternary":
        return rng.integers(-1, 2, size=size)
    if dist == "binomial":
        return _binomial(rng, eta, size)
    if dist == "gaussian":
        return _rounded_gaussian(rng, sigma, size)
    if dist == "uniform":
        if q is None:
            raise InvalidSpec("uniform secrets need the modulus q")
        return centered_mod(rng.integers(0, q, size=size), q)
    raise InvalidSpec(f"unknown distribution {dist!r}")


def _draw_nonzero(rng, dist, size, eta=2, sigma=3.19, q=None):
    if dist == "binary":
        return np.ones(size, dtype=np.int64)
    if dist == "ternary":
        return rng.choice(np.array([-1, 1]), size=size)
    out = np.zeros(size, dtype=np.int64)
    todo = np.arange(size)
    while todo.size:
        vals = _draw(rng, dist, todo.size, eta=eta, sigma=sigma, q=q)
        ok = vals != 0
        out[todo[ok]] = vals[ok]
        todo = todo[~ok]
    return out


def _rng(gen):
    return make_generator(gen).np


def sample_secret(spec: SecretSpec, gen=None, q: int | None = None) -> np.ndarray:
    rng = _rng(gen)
    if spec.fixed_h is None:
        return np.asarray(_draw(rng, spec.dist, spec.length, spec.eta, spec.sigma, q), dtype=np.int64)
    if spec.fixed_h > spec.length:
        raise InvalidSpec("fixed_h exceeds secret length")
    s = np.zeros(spec.length, dtype=np.int64)
    support = rng.choice(spec.length, size=spec.fixed_h, replace=False)
    s[support] = _draw_nonzero(rng, spec.dist, spec.fixed_h, spec.eta, spec.sigma, q)
    return s


def sample_error(dist, length: int, gen=None) -> np.ndarray:
    """I.i.d. error vector; ``dist`` is an :class:`ErrorSpec` or a distribution name."""
    if isinstance(dist, str):
        dist = ErrorSpec(dist=dist)
    rng = _rng(gen)
    return np.asarray(_draw(rng, dist.dist, length, dist.eta, dist.sigma), dtype=np.int64)


def expand_ring_sample(a_polys: np.ndarray) -> np.ndarray:
    """LWE rows (``n x k*n``) of one ring/module sample with components ``a_polys`` (``k x n``)."""
    a_polys = np.atleast_2d(a_polys)
    return np.hstack([skew_circulant(a).T for a in a_polys])


def gen_samples(params: LweParams, num: int | None = None, secret=None, gen=None) -> SampleSet:
    """Generate ``num`` samples (default ``4n``) for ``secret``.

    For ring/module variants ``num`` counts polynomial samples; ``A`` then holds
    ``num * n`` expanded LWE rows.
    """
    gen = make_generator(gen)
    q = params.q
    num = 4 * params.n if num is None else int(num)
    if secret is None:
        secret = sample_secret(params.secret, gen, q)
    secret = np.asarray(secret, dtype=np.int64)
    if secret.shape != (params.dim,):
        raise InvalidSpec(f"secret length {secret.size} != n*k = {params.dim}")
    if params.variant == "plain":
        A = uniform_matrix(num, params.n, q, gen)
        e = sample_error(params.error, num, gen)
        b = np.mod(matmul_mod(A, secret, q) + e, q)
        return SampleSet(A, b, params, secret)

    n, k = params.n, params.k
    polys = uniform_matrix(num * k, n, q, gen).reshape(num, k, n)
    e = sample_error(params.error, num * n, gen).reshape(num, n)
    s_polys = secret.reshape(k, n)
    dt = dtype_for(q, n * k)
    b_poly = np.zeros((num, n), dtype=dt)
    for i in range(k):
        b_poly = b_poly + _batch_negacyclic(polys[:, i, :].astype(dt), s_polys[i].astype(dt), q)
    b_poly = np.mod(b_poly + e, q)
    A = np.vstack([expand_ring_sample(polys[t]) for t in range(num)])
    b = b_poly.reshape(-1)
    return SampleSet(A, b, params, secret, polys=polys, b_poly=b_poly)


def plant_secret(base: SampleSet, secret, gen=None) -> SampleSet:
    """Same ``A`` (or ring polynomials) as ``base`` with a new secret and fresh errors."""
    gen = make_generator(gen)
    params = base.params
    q = params.q
    secret = np.asarray(secret, dtype=np.int64)
    if secret.shape != (params.dim,):
        raise InvalidSpec(f"secret length {secret.size} != n*k = {params.dim}")
    if base.polys is None:
        e = sample_error(params.error, len(base), gen)
        b = np.mod(matmul_mod(base.A, secret, q) + e, q)
        return SampleSet(base.A, b, params, secret)
    num, k, n = base.polys.shape
    e = sample_error(params.error, num * n, gen).reshape(num, n)
    dt = dtype_for(q, n * k)
    b_poly = np.zeros((num, n), dtype=dt)
    s_polys = secret.reshape(k, n)
    for i in range(k):
        b_poly = b_poly + _batch_negacyclic(base.polys[:, i, :].astype(dt), s_polys[i].astype(dt), q)
    b_poly = np.mod(b_poly + e, q)
    return SampleSet(base.A, b_poly.reshape(-1), params, secret, polys=base.polys, b_poly=b_poly)


def _batch_negacyclic(a_rows, s, q):
    # row-wise a(x) * s(x) mod (x^n + 1, q)
    n = s.size
    out = np.zeros_like(a_rows)
    for j in range(n):
        if s[j] == 0:
            continue
        shifted = np.empty_like(a_rows)
        shifted[:, j:] = a_rows[:, : n - j]
        shifted[:, :j] = -a_rows[:, n - j :]
        out = np.mod(out + s[j] * shifted, q)
    return out
