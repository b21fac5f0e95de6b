from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from barsched.bars import (
    RNG_ALGORITHM,
    accurate_bar,
    bar_from_prediction,
    binomial_bar,
    derive_rng,
    expected_commit_elapsed,
    poisson_bar,
    poisson_jump_points,
    single_signal_bar,
    stochastic_levels,
)


def test_rng_algorithm_tag():
    assert RNG_ALGORITHM == "pcg64"


def test_derive_rng_is_deterministic_and_key_sensitive():
    a = derive_rng(3, 1, 4).random(4)
    b = derive_rng(3, 1, 4).random(4)
    c = derive_rng(3, 1, 5).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# single-signal constructors
# ---------------------------------------------------------------------------

def test_single_signal_bar_shape():
    bar = single_signal_bar(0.5, 0.3)
    assert bar.thresholds == (0.3, 1.0)
    assert bar.levels == (0.5,)
    assert bar.display(0.29) == 0.0
    assert bar.display(0.3) == 0.5
    assert bar.display(1.0) == 1.0


def test_single_signal_bar_clamped_firing_never_emits_early():
    bar = single_signal_bar(0.5, 1.0)
    assert bar.thresholds == (1.0, 1.0)
    assert bar.granularity == 1
    assert bar.display(0.999) == 0.0


def test_single_signal_bar_validation():
    with pytest.raises(ValueError, match="signal_fraction"):
        single_signal_bar(0.0, 0.5)
    with pytest.raises(ValueError, match="signal_fraction"):
        single_signal_bar(1.0, 0.5)
    with pytest.raises(ValueError, match="firing_fraction"):
        single_signal_bar(0.5, -0.1)
    with pytest.raises(ValueError, match="firing_fraction"):
        single_signal_bar(0.5, 1.1)


def test_accurate_bar_fires_at_its_own_fraction():
    bar = accurate_bar(0.5)
    assert bar.thresholds == (0.5, 1.0)
    assert bar.levels == (0.5,)


def test_prediction_modes():
    # delayed mode scales the prediction by the signal fraction
    assert bar_from_prediction(0.5, 3.0, 2.0, "delayed").thresholds == (0.75, 1.0)
    # direct mode uses the raw size ratio
    assert bar_from_prediction(0.5, 3.0, 2.0, "direct").thresholds == (1.0, 1.0)
    assert bar_from_prediction(0.5, 1.0, 2.0, "direct").thresholds == (0.5, 1.0)
    # perfect prediction in delayed mode lands on the signal fraction
    assert bar_from_prediction(0.25, 2.0, 2.0, "delayed").thresholds == (0.25, 1.0)
    # negative noise clamps to zero
    assert bar_from_prediction(0.5, -1.0, 2.0, "delayed").thresholds == (0.0, 1.0)
    with pytest.raises(ValueError, match="unknown prediction mode"):
        bar_from_prediction(0.5, 1.0, 1.0, "psychic")


# ---------------------------------------------------------------------------
# stochastic constructors
# ---------------------------------------------------------------------------

def test_stochastic_levels_grid():
    assert stochastic_levels(3) == (0.25, 0.5, 0.75)
    assert stochastic_levels(1) == (0.5,)
    with pytest.raises(ValueError, match=">= 1"):
        stochastic_levels(0)


def test_poisson_bar_structure():
    bar = poisson_bar(5, 2.0, derive_rng(0, 0))
    assert bar.granularity == 5
    assert bar.levels == stochastic_levels(5)
    assert bar.thresholds[-1] == 1.0
    assert all(bar.thresholds[i] <= bar.thresholds[i + 1] for i in range(5))
    assert all(t <= 1.0 for t in bar.thresholds)


def test_poisson_jump_points_are_unclamped_partial_sums():
    pts = poisson_jump_points(4, derive_rng(8, 1))
    assert pts.shape == (4,)
    assert np.all(np.diff(pts) > 0)
    # the bar clamps what the raw points may exceed
    bar = poisson_bar(4, 1.0, derive_rng(8, 1))
    clamped = np.minimum(poisson_jump_points(4, derive_rng(8, 1)), 1.0)
    assert np.allclose(bar.thresholds[:-1], clamped)


def test_poisson_first_jump_mean():
    # E of the first pre-clamp point is 1/g
    g = 10
    draws = np.array([poisson_jump_points(g, derive_rng(1, i))[0] for i in range(100_000)])
    assert abs(draws.mean() - 1 / g) <= 3 * draws.std() / math.sqrt(len(draws))


def test_poisson_gaps_pass_a_ks_test_against_exponential():
    g = 7
    pts = np.stack([poisson_jump_points(g, derive_rng(2, i)) for i in range(1500)])
    gaps = np.diff(np.concatenate([np.zeros((pts.shape[0], 1)), pts], axis=1), axis=1)
    sample = gaps.ravel()[:10_000]
    d, _ = stats.kstest(sample, "expon", args=(0, 1 / g))
    # 1% critical value for the KS statistic at this sample size
    assert d < 1.63 / math.sqrt(len(sample))


def test_poisson_jump_count_is_poisson_distributed_before_clamping():
    g, x = 100, 0.3
    counts = np.array(
        [(poisson_jump_points(g, derive_rng(3, i)) <= x).sum() for i in range(10_000)]
    )
    se = counts.std() / math.sqrt(len(counts))
    assert abs(counts.mean() - g * x) <= 3 * se


def test_binomial_bar_structure_and_sortedness():
    for i in range(25):
        bar = binomial_bar(6, 1.5, derive_rng(4, i))
        assert bar.granularity == 6
        assert list(bar.thresholds) == sorted(bar.thresholds)
        assert bar.thresholds[-1] == 1.0


def test_binomial_displayed_count_matches_binomial_mean():
    g, x = 50, 0.4
    counts = np.array(
        [
            sum(1 for t in binomial_bar(g, 1.0, derive_rng(5, i)).thresholds[:-1] if t <= x)
            for i in range(10_000)
        ]
    )
    se = counts.std() / math.sqrt(len(counts))
    assert abs(counts.mean() - g * x) <= 3 * se


def test_binomial_single_threshold_is_uniform():
    draws = np.array(
        [binomial_bar(1, 1.0, derive_rng(6, i)).thresholds[0] for i in range(1000)]
    )
    assert abs(draws.mean() - 0.5) <= 0.015 * 3


def test_expected_commit_elapsed():
    assert expected_commit_elapsed(5, 100, 1.0) == 0.05
    assert expected_commit_elapsed(7, 7, 3.0) == 3.0
    with pytest.raises(ValueError):
        expected_commit_elapsed(0, 5, 1.0)
    with pytest.raises(ValueError):
        expected_commit_elapsed(6, 5, 1.0)


def test_bars_are_reproducible_from_their_seeds():
    a = poisson_bar(9, 2.5, derive_rng(42, 0, 7))
    b = poisson_bar(9, 2.5, derive_rng(42, 0, 7))
    assert a == b
    c = binomial_bar(9, 2.5, derive_rng(42, 0, 8))
    d = binomial_bar(9, 2.5, derive_rng(42, 0, 8))
    assert c == d
