"""Progress-bar builders: deterministic bars from predictions and random bars
with Poisson or binomial jump points.

Within one instance all bars must share a display-level vector, so builders
here keep the displayed values fixed (the advertised fractions) and move only
the thresholds, i.e. *when* each advertised fraction actually shows up.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .model import StepProgressBar

RNG_ALGORITHM = "pcg64"


def derive_rng(*key: int) -> np.random.Generator:
    """Deterministic generator from an integer key tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def single_signal_bar(signal_fraction: float, firing_fraction: float) -> StepProgressBar:
    """One-jump bar advertising ``signal_fraction`` done, firing when the true
    progress fraction reaches ``firing_fraction``.

    A firing fraction of 1 yields a bar whose jump is absorbed by completion
    (it never signals) while keeping granularity 1.
    """
    if not 0.0 < signal_fraction < 1.0:
        raise ValueError("signal_fraction must be in (0, 1)")
    if not 0.0 <= firing_fraction <= 1.0:
        raise ValueError("firing_fraction must be in [0, 1]")
    return StepProgressBar((firing_fraction, 1.0), (signal_fraction,))


def accurate_bar(signal_fraction: float) -> StepProgressBar:
    """Single jump exactly at the advertised fraction of true progress."""
    if not 0.0 < signal_fraction <= 1.0:
        raise ValueError("signal_fraction must be in (0, 1]")
    if signal_fraction == 1.0:
        return StepProgressBar((1.0,), ())  # jump coincides with completion
    return single_signal_bar(signal_fraction, signal_fraction)


def bar_from_prediction(
    signal_fraction: float, predicted: float, p: float, mode: str = "delayed"
) -> StepProgressBar:
    """Single-jump bar whose firing point encodes a size prediction.

    "delayed" fires after ``signal_fraction * predicted`` time units (where an
    accurate bar would fire if the prediction were right); "direct" fires after
    ``predicted`` itself.  Either way the firing fraction is clamped to [0, 1].
    """
    if mode == "delayed":
        raw = signal_fraction * predicted / p
    elif mode == "direct":
        raw = predicted / p
    else:
        raise ValueError(f"unknown prediction mode: {mode}")
    return single_signal_bar(signal_fraction, min(1.0, max(0.0, raw)))


@lru_cache(maxsize=None)
def stochastic_levels(granularity: int) -> tuple[float, ...]:
    """Evenly spaced display levels h/(granularity+1), h = 1..granularity."""
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    g = granularity
    return tuple(h / (g + 1) for h in range(1, g + 1))


def poisson_jump_points(granularity: int, rng: np.random.Generator) -> np.ndarray:
    """Unclamped jump points: cumulative sums of Exponential(rate=granularity)
    gaps.  Values above 1 are legal here; clamping is the bar builder's job.
    """
    g = granularity
    gaps = -np.log1p(-rng.random(g)) / g
    return np.cumsum(gaps)


def poisson_bar(granularity: int, p: float, rng: np.random.Generator) -> StepProgressBar:
    points = np.minimum(poisson_jump_points(granularity, rng), 1.0)
    thresholds = tuple(float(x) for x in points) + (1.0,)
    return StepProgressBar(thresholds, stochastic_levels(granularity))


def binomial_bar(granularity: int, p: float, rng: np.random.Generator) -> StepProgressBar:
    points = np.sort(rng.random(granularity))
    thresholds = tuple(float(x) for x in points) + (1.0,)
    return StepProgressBar(thresholds, stochastic_levels(granularity))


def expected_commit_elapsed(k: int, granularity: int, p: float) -> float:
    """Mean elapsed time at the k-th jump of a Poisson bar (ignoring clamping)."""
    if not 1 <= k <= granularity:
        raise ValueError("jump index must be in [1, granularity]")
    return (k / granularity) * p
