import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lwe_bench.core import centered_mod
from lwe_bench.errors import InvalidSpec, MemoryCapExceeded, SearchBlowup
from lwe_bench.mitm import (
    MitmParams,
    boundary_flips,
    boundary_positions,
    derive_samples_and_bound,
    dual_basis,
    lsh_index,
    mitm_attack,
    mitm_decide,
    scaled_dual_short_vectors,
    table_memory_estimate,
)
from lwe_bench.sampling import LweParams, SecretSpec, gen_samples


def test_lsh_index_examples():
    assert lsh_index([100, 3000, 1664], 3329) == "101"
    assert lsh_index(np.zeros(5, dtype=int), 3329) == "11111"
    assert lsh_index([1665, 3328], 3329) == "00"


def test_boundary_flips_sizes():
    q = 3329
    assert boundary_flips([800, 2500], 10, q) == [frozenset()]
    flips = boundary_flips([800, 2500, 900, 5], 10, q)
    assert flips == [frozenset(), frozenset({3})]
    assert boundary_positions([1660, 3320, 800], 10, q) == [0, 1]
    with pytest.raises(SearchBlowup):
        boundary_flips(np.zeros(30, dtype=int), 10, q)
    with pytest.raises(InvalidSpec):
        boundary_flips([1], q / 4, q)


def test_table_memory_estimate_reference_points():
    # weight-0 only: a single entry
    assert table_memory_estimate(100, 0) == table_memory_estimate(5, 0)
    gb = table_memory_estimate(500, 8) / 1e9
    assert 244 / 2 <= gb <= 244 * 2
    assert table_memory_estimate(500, 6) < table_memory_estimate(500, 8)
    with pytest.raises(InvalidSpec):
        table_memory_estimate(4, 5)


@given(st.integers(1, 200), st.integers(0, 10), st.integers(0, 10))
def test_table_memory_monotone(zeta, h1, h2):
    lo, hi = sorted((min(h1, zeta), min(h2, zeta)))
    assert table_memory_estimate(zeta, lo) <= table_memory_estimate(zeta, hi)
    if hi <= zeta - 1:
        assert table_memory_estimate(zeta, hi) <= table_memory_estimate(zeta + 1, hi)


def test_dual_basis_layout():
    A1 = np.array([[1, 2], [3, 4], [5, 6]])
    B = dual_basis(A1, 7, 10)
    assert B.shape == (5, 5)
    assert np.array_equal(B[:3, :3], 10 * np.eye(3, dtype=np.int64))
    assert np.array_equal(B[3:, 3:], 7 * np.eye(2, dtype=np.int64))


def test_short_vectors_are_dual_vectors():
    rng = np.random.default_rng(0)
    q = 3329
    A1 = rng.integers(0, q, size=(24, 16))
    vecs = scaled_dual_short_vectors([A1, A1[::-1]], q, c=10, beta=10)
    assert len(vecs) == 2
    for y1, w, norm, block in vecs:
        A = A1 if block == 0 else A1[::-1]
        assert np.any(y1)
        assert np.all((y1 @ A - w) % q == 0)
        assert math.isclose(norm, np.linalg.norm(np.concatenate([10 * y1, w])))


def test_derived_samples_vanish_on_zero_input():
    rng = np.random.default_rng(1)
    q = 3329
    A1 = rng.integers(0, q, size=(24, 16))
    vecs = scaled_dual_short_vectors(A1, q, c=10, tau=3, beta=2)
    Ap, bp, B = derive_samples_and_bound(vecs, np.zeros((24, 8), int), np.zeros(24, int), 3.19, 10, q)
    assert Ap.shape == (len(vecs), 8)
    assert not np.any(Ap) and not np.any(bp)
    assert 0 < B < q / 8


def test_planted_derived_error_within_bound():
    q = 3329
    n, zeta, m, tau = 32, 12, 40, 40
    p = LweParams(n, q, SecretSpec("binary", n, fixed_h=4))
    S = gen_samples(p, num=tau * m, gen=2)
    n1 = n - zeta
    blocks = [np.arange(i * m, (i + 1) * m) for i in range(tau)]
    vecs = scaled_dual_short_vectors([S.A[b, :n1] for b in blocks], q, c=10, tau=tau, beta=10)
    Ap, bp, B = derive_samples_and_bound(vecs, [S.A[b, n1:] for b in blocks], [S.b[b] for b in blocks], p.sigma_e, 10, q)
    # e' = <y1, e> + <w, s1> with both parts short
    e_derived = centered_mod(bp - Ap @ S.secret[n1:], q)
    assert np.mean(np.abs(e_derived) <= B) >= 0.95


def _toy(zeta=32, tau=12, h=4, seed=0, noise=20):
    q = 3329
    rng = np.random.default_rng(seed)
    Ap = rng.integers(0, q, size=(tau, zeta))
    s2 = np.zeros(zeta, dtype=np.int64)
    s2[rng.choice(zeta, h, replace=False)] = 1
    e = rng.integers(-noise, noise + 1, size=tau)
    return Ap, np.mod(Ap @ s2 + e, q), s2


@pytest.mark.parametrize("seed", range(4))
def test_decide_finds_planted_s2(seed):
    Ap, bp, s2 = _toy(seed=seed)
    dec = mitm_decide(Ap, bp, 4, MitmParams(zeta=32, tau=12), 3329, B=40)
    assert dec.is_lwe
    assert np.array_equal(dec.s2, s2)


@pytest.mark.parametrize("seed", range(4))
def test_decide_rejects_uniform(seed):
    Ap, _, _ = _toy(seed=seed)
    bp = np.random.default_rng(100 + seed).integers(0, 3329, size=12)
    dec = mitm_decide(Ap, bp, 4, MitmParams(zeta=32, tau=12), 3329, B=40)
    assert not dec.is_lwe


def test_table_stores_every_half_weight_support_once():
    Ap, _, _ = _toy(zeta=16)
    bp = np.random.default_rng(5).integers(0, 3329, size=12)
    dec = mitm_decide(Ap, bp, 4, MitmParams(zeta=16, tau=12), 3329, B=40)
    assert dec.table_entries == sum(math.comb(16, w) for w in range(3))
    dec3 = mitm_decide(Ap, bp, 4, MitmParams(zeta=16, tau=12, alphabet=(-1, 1)), 3329, B=40)
    assert dec3.table_entries == sum(math.comb(16, w) * 2**w for w in range(3))


def test_memory_cap_refuses_before_building():
    Ap, bp, _ = _toy()
    with pytest.raises(MemoryCapExceeded):
        mitm_decide(Ap, bp, 4, MitmParams(zeta=32, tau=12), 3329, B=40, mem_cap=1000)


def test_attack_pipeline_small():
    q = 3329
    p = LweParams(32, q, SecretSpec("binary", 32, fixed_h=3))
    S = gen_samples(p, num=16 * 32, gen=4)
    S.secret[:] = 0
    S.secret[-3:] = 1
    S.b = np.mod(S.A @ S.secret + np.random.default_rng(0).integers(-3, 4, size=len(S)), q)
    dec, B, (Ap, bp) = mitm_attack(S, MitmParams(zeta=12, tau=16, c=10, m=32, beta=10), 3)
    assert Ap.shape[1] == 12
    assert dec.is_lwe and np.array_equal(dec.s2, S.secret[-12:])
