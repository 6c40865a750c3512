import numpy as np
import pytest
from scipy import stats

from varmetro.fock import FockState, OutcomeDistribution
from varmetro.sampling import CountRecord, derive_seed, draw_counts, estimate, make_rng, sample


def dist(p):
    return OutcomeDistribution(tuple(FockState.from_modes(len(p), k) for k in range(len(p))), np.array(p))


def test_zero_and_deterministic_cases():
    assert sample(dist([0.5, 0.5]), 0, seed=1).counts.tolist() == [0, 0]
    assert sample(dist([1.0, 0, 0]), 1000, seed=2).counts.tolist() == [1000, 0, 0]
    with pytest.raises(ValueError):
        sample(dist([1.0]), -1)


def test_binomial_concentration():
    c = sample(dist([0.5, 0.5]), 10**6, seed=3).counts
    assert abs(c[0] - 5e5) < 5 * 500


def test_estimate():
    rec = CountRecord(dist([0.5, 0.5]).outcomes, np.array([3, 7]))
    np.testing.assert_allclose(estimate(rec).probabilities, [0.3, 0.7])
    assert estimate(rec).outcomes == rec.outcomes
    with pytest.raises(ValueError):
        estimate(CountRecord(rec.outcomes, np.array([0, 0])))


def test_law_of_large_numbers():
    d = dist([0.1, 0.2, 0.3, 0.4])
    est = estimate(sample(d, 10**6, seed=4))
    assert np.abs(est.probabilities - d.probabilities).max() < 5e-3
    assert est.probabilities.sum() == 1.0


def test_reproducible():
    d = dist([0.1, 0.6, 0.3])
    a = sample(d, 500, seed=9).counts
    b = sample(d, 500, seed=9).counts
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample(d, 500, seed=10).counts)


def test_chi_squared_goodness_of_fit():
    p = np.array([0.05, 0.15, 0.3, 0.5])
    passed = 0
    for seed in range(200):
        c = draw_counts(p, 2000, make_rng(seed))
        passed += stats.chisquare(c, 2000 * p).pvalue > 1e-3
    assert passed >= 0.99 * 200


def test_streams_are_independent():
    a = make_rng(5, 0).random(4)
    b = make_rng(5, 1).random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, make_rng(5, 0).random(4))
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)


def test_count_record_round_trip():
    rec = sample(dist([0.2, 0.8]), 50, seed=11)
    back = CountRecord.from_json(rec.to_json())
    assert back.outcomes == rec.outcomes
    np.testing.assert_array_equal(back.counts, rec.counts)
    assert back.seed == 11 and back.total == 50
    with pytest.raises(ValueError):
        CountRecord(rec.outcomes, np.array([1, -1]))
