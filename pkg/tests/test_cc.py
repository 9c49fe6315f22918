import math
from itertools import product

import numpy as np
import pytest

from lwe_bench.cc import (
    alphabet_for,
    all_supports,
    brute_force_cruel,
    candidate_count,
    cc_attack,
    greedy_cool_recovery,
    linreg_cool_recovery,
    verify_secret,
)
from lwe_bench.core import centered_mod
from lwe_bench.errors import InvalidSpec
from lwe_bench.preprocess import ReducedDataset
from lwe_bench.sampling import ErrorSpec, LweParams, SecretSpec, gen_samples

Q = 3329
UNIFORM = Q / math.sqrt(12)


def synthetic(secret, n_cruel=8, rows=3000, cool_sigma=40.0, err_sigma=20.0, seed=0):
    """Reduced data with uniform cruel columns first and small cool columns after."""
    n = secret.size
    rng = np.random.default_rng(seed)
    ra = np.empty((rows, n), dtype=np.int64)
    ra[:, :n_cruel] = rng.integers(-(Q // 2), Q // 2 + 1, size=(rows, n_cruel))
    ra[:, n_cruel:] = np.rint(rng.normal(0, cool_sigma, size=(rows, n - n_cruel)))
    e = np.rint(rng.normal(0, err_sigma, size=rows)).astype(np.int64)
    rb = centered_mod(ra @ secret + e, Q)
    p = LweParams(n, Q, SecretSpec("ternary", n))
    mask = np.zeros(n, dtype=bool)
    mask[:n_cruel] = True
    return ReducedDataset(ra, rb, p, cruel_mask=mask)


def holdout_for(secret, num=64, seed=1):
    p = LweParams(secret.size, Q, SecretSpec("ternary", secret.size))
    return gen_samples(p, num=num, secret=secret, gen=seed)


def test_alphabets():
    assert alphabet_for("binary") == (1,)
    assert alphabet_for("ternary") == (-1, 1)
    assert alphabet_for("binomial", eta=2) == (-2, -1, 1, 2)
    with pytest.raises(InvalidSpec):
        alphabet_for("uniform")


@pytest.mark.parametrize("nc,h,a", [(8, 2, 2), (10, 3, 1), (6, 3, 4)])
def test_visited_count_matches_enumeration(nc, h, a):
    alphabet = (-1, 1) if a == 2 else (1,) if a == 1 else (-2, -1, 1, 2)
    expected = sum(a ** len(sup) for sup in all_supports(nc, h))
    assert candidate_count(nc, h, a) == expected
    s = np.zeros(16, dtype=np.int64)
    ds = synthetic(s, n_cruel=nc, rows=400)
    stats = {}
    brute_force_cruel(ds, h, alphabet, stop_early=False, stats=stats)
    assert stats["visited"] == expected


def test_all_cool_secret_ranks_empty_support_first():
    s = np.zeros(24, dtype=np.int64)
    s[[10, 15, 20]] = [1, -1, 1]
    cands = brute_force_cruel(synthetic(s), 2, (-1, 1))
    assert cands[0].support == ()


def test_exhaustive_separation_of_true_guess():
    s = np.zeros(24, dtype=np.int64)
    s[[2, 5]] = [1, -1]
    s[[12, 18]] = [-1, 1]
    ds = synthetic(s)
    cruel = np.flatnonzero(ds.cruel_mask)
    for sup in all_supports(cruel.size, 2):
        for vals in product((-1, 1), repeat=len(sup)):
            guess = np.zeros(24, dtype=np.int64)
            guess[cruel[list(sup)]] = vals
            std = np.std(centered_mod(ds.rb - ds.ra[:, cruel] @ guess[cruel], Q))
            if np.array_equal(guess[cruel], s[cruel]):
                assert std < 0.5 * UNIFORM
            else:
                assert std > 0.9 * UNIFORM


def test_uniform_residual_std_is_calibrated():
    rng = np.random.default_rng(3)
    r = rng.integers(0, Q, size=5000)
    assert 0.95 * UNIFORM <= np.std(centered_mod(r, Q)) <= 1.05 * UNIFORM


def test_brute_force_finds_planted_cruel_part():
    s = np.zeros(24, dtype=np.int64)
    s[[1, 6]] = [-1, 1]
    s[[9, 13, 22]] = [1, 1, -1]
    cands = brute_force_cruel(synthetic(s, seed=4), 3, (-1, 1))
    best = cands[0]
    assert best.support == (1, 6) and best.values == (-1, 1)


def test_linreg_exact_with_zero_error():
    s = np.zeros(24, dtype=np.int64)
    s[[3, 11, 17, 19]] = [1, -1, 1, -1]
    ds = synthetic(s, err_sigma=0.0)
    base = np.zeros(24, dtype=np.int64)
    base[3] = 1
    assert np.array_equal(linreg_cool_recovery(ds, base, (-1, 1)), s)
    assert np.array_equal(linreg_cool_recovery(ds, base), s)


def test_greedy_recovers_cool_part():
    s = np.zeros(24, dtype=np.int64)
    s[[0, 9, 14]] = [1, -1, 1]
    ds = synthetic(s, seed=5)
    base = np.zeros(24, dtype=np.int64)
    base[0] = 1
    got, converged = greedy_cool_recovery(ds, base, (-1, 1))
    assert converged
    assert np.array_equal(got, s)


def test_verify_secret_accepts_and_rejects():
    p = LweParams(32, Q, SecretSpec("ternary", 32, fixed_h=6))
    S = gen_samples(p, num=64, gen=2)
    assert verify_secret(S, S.secret)
    wrong = S.secret.copy()
    i = int(np.flatnonzero(wrong)[0])
    wrong[i] += 1
    assert not verify_secret(S, wrong)
    rng = np.random.default_rng(0)
    assert not verify_secret(S, rng.integers(-1, 2, size=32))
    with pytest.raises(InvalidSpec):
        verify_secret(S.subset(slice(0, 10)), S.secret)


def test_attack_end_to_end_on_synthetic_data():
    s = np.zeros(24, dtype=np.int64)
    s[[4, 7]] = [1, 1]
    s[[10, 21]] = [-1, 1]
    res = cc_attack(synthetic(s, seed=6), holdout_for(s), 3, (-1, 1), method="both")
    assert res.status == "recovered"
    assert np.array_equal(res.secret, s)
    assert res.verified_linreg and res.verified_greedy


def test_wrong_cruel_guess_does_not_verify():
    s = np.zeros(24, dtype=np.int64)
    s[[2, 5]] = [1, -1]
    s[[12, 18]] = [-1, 1]
    ds = synthetic(s, seed=7)
    base = np.zeros(24, dtype=np.int64)
    base[[2, 5]] = [-1, 1]
    guess = linreg_cool_recovery(ds, base, (-1, 1))
    assert not verify_secret(holdout_for(s), guess)


def test_attack_never_accepts_random_targets():
    s = np.zeros(24, dtype=np.int64)
    ds = synthetic(s, seed=8)
    ds.rb = np.random.default_rng(1).integers(-(Q // 2), Q // 2 + 1, size=len(ds))
    p = LweParams(24, Q, SecretSpec("ternary", 24))
    H = gen_samples(p, num=64, gen=9)
    H.b = np.random.default_rng(2).integers(0, Q, size=64)
    res = cc_attack(ds, H, 2, (-1, 1))
    assert res.status == "failed"


def test_unknown_method_rejected():
    s = np.zeros(24, dtype=np.int64)
    with pytest.raises(InvalidSpec):
        cc_attack(synthetic(s, rows=200), holdout_for(s), 1, (-1, 1), method="magic")
