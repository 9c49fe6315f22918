"""Search-LWE through Kannan's embedding and BKZ."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cc import verify_secret
from .errors import InvalidSpec
from .reduction import bkz, lll
from .sampling import SampleSet

__all__ = ["KannanLattice", "UsvpResult", "default_omega", "kannan_embed", "usvp_attack"]

log = logging.getLogger(__name__)


@dataclass
class KannanLattice:
    basis: np.ndarray
    omega: int
    n: int
    m: int

    def planted(self, s, e) -> np.ndarray:
        """The short vector ``(omega s, -e, -1)`` for a known secret and error."""
        return np.concatenate([self.omega * np.asarray(s), -np.asarray(e), [-1]]).astype(np.int64)


def kannan_embed(A, b, q: int, omega: int = 1) -> KannanLattice:
    """Rows ``[[0, qI_m, 0], [omega I_n, A^T, 0], [0, b, 1]]`` for ``m x n`` ``A``."""
    A = np.asarray(A, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    m, n = A.shape
    if m < 1 or b.size != m:
        raise InvalidSpec("need m >= 1 samples with matching b")
    d = n + m + 1
    B = np.zeros((d, d), dtype=np.int64)
    B[:m, n : n + m] = q * np.eye(m, dtype=np.int64)
    B[m : m + n, :n] = omega * np.eye(n, dtype=np.int64)
    B[m : m + n, n : n + m] = A.T % q
    B[m + n, n : n + m] = b % q
    B[m + n, -1] = 1
    return KannanLattice(B, int(omega), n, m)


def default_omega(sigma_e: float, sigma_s: float) -> int:
    """Scale that balances ``omega s`` against ``e``."""
    if not sigma_s or sigma_s <= 0 or not math.isfinite(sigma_s):
        return 1
    return max(1, int(round(sigma_e / sigma_s)))


def _coordinate_std(spec) -> float:
    # std of one secret coordinate, accounting for a fixed Hamming weight
    if spec.fixed_h is None:
        return spec.std
    p = spec.fixed_h / spec.length
    if spec.dist == "binary":
        return math.sqrt(p * (1 - p))
    if spec.dist == "ternary":
        return math.sqrt(p)
    if spec.dist == "binomial":
        p0 = math.comb(2 * spec.eta, spec.eta) / 4**spec.eta
        return math.sqrt(p * spec.std**2 / (1 - p0))
    return math.sqrt(p) * spec.std


@dataclass
class UsvpResult:
    secret: np.ndarray | None
    status: str  # recovered | failed | timeout
    tours: int = 0
    betas: list = field(default_factory=list)
    tour_times: list = field(default_factory=list)
    first_norms: list = field(default_factory=list)
    seconds: float = 0.0


def _scan(B, lat: KannanLattice, holdout: SampleSet):
    n, om = lat.n, lat.omega
    for row in B:
        last = row[-1]
        if abs(last) != 1:
            continue
        head = row[:n]
        if np.any(head % om):
            continue
        s = -last * head // om
        if verify_secret(holdout, s):
            return s
    return None


def usvp_attack(
    samples: SampleSet,
    holdout: SampleSet,
    m: int | None = None,
    omega: int | None = None,
    beta_start: int = 20,
    beta_step: int = 5,
    beta_max: int = 40,
    loop_budget: int = 8,
    time_limit: float | None = None,
    stall_tours: int = 2,
) -> UsvpResult:
    """BKZ tours on the Kannan embedding, scanning for the planted vector after each.

    ``beta`` starts at ``beta_start`` and grows by ``beta_step`` (capped at
    ``beta_max``) whenever the first basis vector has not shortened for
    ``stall_tours`` tours. LLL runs first and counts as tour 0 only for the
    scan; the tour budget counts BKZ tours.
    """
    params = samples.params
    n = params.dim
    m = int(round(0.875 * n)) if m is None else int(m)
    if m > len(samples):
        raise InvalidSpec(f"need {m} samples, have {len(samples)}")
    if omega is None:
        omega = default_omega(params.sigma_e, _coordinate_std(params.secret))
    lat = kannan_embed(samples.A[:m], samples.b[:m], params.q, omega)
    t0 = time.perf_counter()
    B = lll(lat.basis)
    res = UsvpResult(None, "failed")
    s = _scan(B, lat, holdout)
    if s is not None:
        res.secret, res.status = s, "recovered"
        res.seconds = time.perf_counter() - t0
        return res
    beta = min(beta_start, beta_max)
    best = float(np.linalg.norm(B[0]))
    stall = 0
    for tour in range(loop_budget):
        remaining = None if time_limit is None else time_limit - (time.perf_counter() - t0)
        if remaining is not None and remaining <= 0:
            res.status = "timeout"
            break
        out = bkz(B, beta, max_loops=1, time_limit=remaining, lll_first=False)
        B = out.basis
        res.tours = tour + 1
        res.betas.append(beta)
        res.tour_times.extend(out.loop_times)
        norm = float(np.linalg.norm(B[0]))
        res.first_norms.append(norm)
        log.info("usvp tour %d beta=%d |b0|=%.2f (%.1fs)", tour + 1, beta, norm, out.loop_times[-1])
        s = _scan(B, lat, holdout)
        if s is not None:
            res.secret, res.status = s, "recovered"
            break
        if out.timed_out:
            res.status = "timeout"
            break
        if norm < best - 1e-9:
            best, stall = norm, 0
        else:
            stall += 1
            if stall >= stall_tours and beta < beta_max:
                beta = min(beta + beta_step, beta_max)
                stall = 0
    res.seconds = time.perf_counter() - t0
    return res
