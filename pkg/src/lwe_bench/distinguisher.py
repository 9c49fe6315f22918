"""Secret extraction from a predictor ``f(a) ~ <a, s> mod q``.

The slope distinguisher reads ``s_i`` off the finite difference
``(f(a + delta e_i) - f(a)) / delta`` at many base points and takes the most
common rounded value. The binary distinguisher only asks whether a large step
along ``e_i`` moves the prediction at all.

Oracles expose ``predict(rows) -> values`` on a 2-d batch of inputs. Two are
provided: a synthetic linear oracle with deterministic per-input noise, and an
adapter that talks to an external process over stdin/stdout, one
space-separated input vector per line in, one integer per line out.
"""

from __future__ import annotations

import subprocess
import sys
from dataclasses import dataclass

import numpy as np

from .core import centered_mod
from .errors import InvalidOperands

__all__ = [
    "StdioOracle",
    "SyntheticOracle",
    "binary_distinguish",
    "recover_secret",
    "serve_oracle",
    "slope_distinguish",
]

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(x):
    # splitmix64 finalizer on uint64 arrays
    x = x.astype(np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


class SyntheticOracle:
    """``f(a) = <a, s> + round(N(0, sigma)) mod q`` with noise fixed per (seed, input)."""

    concurrency_safe = True

    def __init__(self, secret, q: int, sigma: float = 0.0, seed: int = 0):
        self.secret = np.asarray(secret, dtype=np.int64)
        self.q = int(q)
        self.sigma = float(sigma)
        rng = np.random.default_rng(seed)
        self._key = rng.integers(1, 2**62, size=self.secret.size, dtype=np.int64).astype(np.uint64)
        self._salt = np.uint64(int(rng.integers(0, 2**62)))

    def _noise(self, rows):
        if self.sigma == 0:
            return np.zeros(rows.shape[0], dtype=np.int64)
        with np.errstate(over="ignore"):
            h = (np.mod(rows, self.q).astype(np.uint64) * self._key).sum(axis=1, dtype=np.uint64) + self._salt
        u1 = (_mix(h) >> np.uint64(11)).astype(float) / 2.0**53
        u2 = (_mix(h ^ np.uint64(0x9E3779B97F4A7C15)) >> np.uint64(11)).astype(float) / 2.0**53
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2 * np.pi * u2)
        return np.rint(self.sigma * z).astype(np.int64)

    def predict(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
        return np.mod(rows @ self.secret + self._noise(rows), self.q)


class StdioOracle:
    """Adapter for an external predictor speaking the line protocol on its stdin/stdout."""

    concurrency_safe = False

    def __init__(self, command, q: int):
        self.q = int(q)
        self.proc = subprocess.Popen(
            command,
            shell=isinstance(command, str),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def predict(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows))
        out = np.empty(rows.shape[0], dtype=np.int64)
        for i, row in enumerate(rows):
            self.proc.stdin.write(" ".join(str(int(v)) for v in row) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
            if not line:
                raise InvalidOperands("oracle process closed its output")
            out[i] = int(line.strip()) % self.q
        return out

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_oracle(oracle, instream=None, outstream=None) -> int:
    """Answer line-protocol queries with ``oracle`` until end of input. Returns the query count."""
    instream = sys.stdin if instream is None else instream
    outstream = sys.stdout if outstream is None else outstream
    count = 0
    for line in instream:
        if not line.strip():
            continue
        row = np.array([int(t) for t in line.split()], dtype=np.int64)
        outstream.write(f"{int(oracle.predict(row[None, :])[0])}\n")
        outstream.flush()
        count += 1
    return count


@dataclass
class SlopeEstimate:
    value: int
    share: float
    known: bool


def _base_points(base_points, num_probes, dim, q, rng):
    if base_points is None:
        return rng.integers(0, q, size=(num_probes, dim))
    pts = np.asarray(base_points, dtype=np.int64)
    return pts[:num_probes]


def slope_distinguish(
    oracle, q: int, i: int, delta: int = 16, num_probes: int = 128, base_points=None, dim=None, seed: int = 0, base_values=None, min_share: float = 0.2
) -> SlopeEstimate:
    """Mode of ``round(centered(f(a + delta e_i) - f(a)) / delta)`` over the probes.

    ``known`` is False when the modal value covers less than ``min_share`` of
    the probes.
    """
    if delta < 1:
        raise InvalidOperands("delta must be >= 1")
    rng = np.random.default_rng(seed)
    pts = _base_points(base_points, num_probes, dim, q, rng)
    f0 = oracle.predict(pts) if base_values is None else base_values
    moved = pts.copy()
    moved[:, i] = (moved[:, i] + delta) % q
    f1 = oracle.predict(moved)
    slopes = np.rint(centered_mod(f1 - f0, q) / delta).astype(np.int64)
    vals, counts = np.unique(slopes, return_counts=True)
    best = int(np.argmax(counts))
    share = counts[best] / slopes.size
    return SlopeEstimate(int(vals[best]), float(share), bool(share >= min_share))


def recover_secret(oracle, q: int, dim: int, delta: int = 16, num_probes: int = 128, seed: int = 0):
    """Slope estimate for every coordinate, sharing one set of base points.

    Returns ``(secret, unknown_indices)``.
    """
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, q, size=(num_probes, dim))
    f0 = oracle.predict(pts)
    s = np.zeros(dim, dtype=np.int64)
    unknown = []
    for i in range(dim):
        est = slope_distinguish(oracle, q, i, delta, num_probes, base_points=pts, base_values=f0)
        s[i] = est.value
        if not est.known:
            unknown.append(i)
    return s, unknown


def binary_distinguish(
    oracle, q: int, i: int, num_probes: int = 128, base_points=None, dim=None, seed: int = 0, noise_floor: float | None = None
) -> str:
    """``active`` iff the median |change| after a ``q/4`` step at ``i`` exceeds the floor (default q/16)."""
    rng = np.random.default_rng(seed)
    pts = _base_points(base_points, num_probes, dim, q, rng)
    step = q // 4
    moved = pts.copy()
    moved[:, i] = (moved[:, i] + step) % q
    diff = np.abs(centered_mod(oracle.predict(moved) - oracle.predict(pts), q))
    floor = q / 16 if noise_floor is None else noise_floor
    return "active" if float(np.median(diff)) > floor else "inactive"
