from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest

from barsched.model import (
    Instance,
    Job,
    SimEvent,
    StepProgressBar,
    check_delay_decomposition,
    error_terms,
    event_log_dump,
    instance_from_json,
    instance_to_json,
    make_instance,
    near_eq,
    opt_cost,
    outcome_from_records,
)
from barsched.bars import accurate_bar, single_signal_bar


def flat_bar() -> StepProgressBar:
    """Uninformative bar: a single jump at completion."""
    return StepProgressBar((1.0,), ())


# ---------------------------------------------------------------------------
# oracles (independent re-derivations, kept deliberately naive)
# ---------------------------------------------------------------------------

def brute_force_opt_single(sizes) -> float:
    """Try every completion order; no preemption can beat the best order."""
    best = math.inf
    for perm in itertools.permutations(sizes):
        t = 0.0
        cost = 0.0
        for p in perm:
            t += p
            cost += t
        best = min(best, cost)
    return best


def list_schedule_opt_multi(sizes, machines: int) -> float:
    """Shortest-first list scheduling on identical machines.

    For total completion time, preemption buys nothing on identical machines,
    so this nonpreemptive schedule is an exact optimum oracle.
    """
    free = [0.0] * machines
    cost = 0.0
    for p in sorted(sizes):
        k = min(range(machines), key=lambda i: free[i])
        free[k] += p
        cost += free[k]
    return cost


def error_terms_reference(sizes, alpha, betas):
    """Straight transcription of the three error summaries, written separately
    from the production code path."""
    n = len(sizes)
    by_size = sorted(range(n), key=lambda i: (sizes[i], i))
    rank_of = {j: r for r, j in enumerate(by_size)}
    timing = sum(
        (n - 1 - rank_of[i]) * (betas[i] - alpha) * sizes[i] for i in range(n)
    )
    inversion = 0.0
    for a, b in itertools.combinations(range(n), 2):
        i, j = by_size[a], by_size[b]
        if betas[j] * sizes[j] < betas[i] * sizes[i]:
            inversion += sizes[j] - sizes[i]
    l1 = sum(abs(betas[i] - alpha) * sizes[i] for i in range(n))
    return timing, inversion, l1


# ---------------------------------------------------------------------------
# jobs and bars
# ---------------------------------------------------------------------------

def test_job_rejects_nonpositive_size():
    with pytest.raises(ValueError, match="must be positive"):
        Job(0, 0.0)
    with pytest.raises(ValueError, match="must be positive"):
        Job(1, -2.5)


def test_bar_display_is_a_left_closed_step_function():
    bar = StepProgressBar((0.2, 0.7, 1.0), (0.3, 0.8))
    assert bar.display(0.0) == 0.0
    assert bar.display(0.19999) == 0.0
    assert bar.display(0.2) == 0.3  # jump counts at its own threshold
    assert bar.display(0.5) == 0.3
    assert bar.display(0.7) == 0.8
    assert bar.display(1.0) == 1.0
    assert bar.granularity == 2


def test_bar_jump_counting():
    bar = StepProgressBar((0.2, 0.7, 1.0), (0.3, 0.8))
    assert bar.jumps_at_or_below(0.1) == 0
    assert bar.jumps_at_or_below(0.2) == 1
    assert bar.jumps_at_or_below(0.9) == 2
    assert bar.jumps_at_or_below(1.0) == 3


def test_bar_validation_messages():
    with pytest.raises(ValueError, match="one more threshold"):
        StepProgressBar((0.5, 1.0), (0.2, 0.4))
    with pytest.raises(ValueError, match="final threshold"):
        StepProgressBar((0.5, 0.9), (0.2,))
    with pytest.raises(ValueError, match="nondecreasing"):
        StepProgressBar((0.7, 0.2, 1.0), (0.3, 0.6))
    with pytest.raises(ValueError, match="strictly increasing"):
        StepProgressBar((0.2, 0.7, 1.0), (0.8, 0.3))
    with pytest.raises(ValueError, match="strictly increasing"):
        StepProgressBar((0.2, 0.7, 1.0), (0.3, 1.5))


def test_bar_validation_uses_the_same_rules_past_the_vector_cutoff():
    # > 64 thresholds goes down the numpy path; same acceptance either way
    n = 100
    th = tuple(i / n for i in range(1, n)) + (1.0,)
    lv = tuple(i / n for i in range(1, n))
    bar = StepProgressBar(th, lv)
    assert bar.granularity == n - 1
    bad = (0.5,) + th[1:]
    with pytest.raises(ValueError, match="nondecreasing"):
        StepProgressBar(bad, lv)


def test_threshold_exactly_one_is_allowed_before_the_final_one():
    # a clamped jump can coincide with completion
    bar = StepProgressBar((0.4, 1.0, 1.0), (0.3, 0.6))
    assert bar.display(0.99) == 0.3
    assert bar.display(1.0) == 1.0


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def test_instance_requires_matching_bars_and_contiguous_ids():
    with pytest.raises(ValueError, match="one progress bar per job"):
        Instance((Job(0, 1.0),), ())
    with pytest.raises(ValueError, match="0..n-1"):
        Instance((Job(1, 1.0),), (flat_bar(),))
    with pytest.raises(ValueError, match="machines must be >= 1"):
        make_instance([1.0], [flat_bar()], machines=0)


def test_instance_bars_share_one_level_vector():
    good = make_instance([1.0, 2.0], [single_signal_bar(0.5, 0.2), single_signal_bar(0.5, 0.9)])
    assert good.n == 2
    with pytest.raises(ValueError, match="share one level vector"):
        make_instance([1.0, 2.0], [single_signal_bar(0.5, 0.2), single_signal_bar(0.6, 0.2)])


def test_instance_sizes_helper():
    inst = make_instance([3.0, 1.5], [flat_bar(), flat_bar()])
    assert inst.sizes() == (3.0, 1.5)


# ---------------------------------------------------------------------------
# opt_cost
# ---------------------------------------------------------------------------

def test_opt_cost_three_jobs():
    inst = make_instance([1.0, 2.0, 3.0], [flat_bar()] * 3)
    assert opt_cost(inst) == 10.0


def test_opt_cost_empty_instance_raises():
    with pytest.raises(ValueError, match="empty instance"):
        opt_cost(Instance((), ()))


def test_opt_cost_matches_brute_force_on_random_single_machine():
    rng = np.random.default_rng(4242)
    for _ in range(40):
        n = int(rng.integers(1, 8))
        sizes = [float(x) for x in 0.2 + rng.random(n) * 5]
        inst = make_instance(sizes, [flat_bar()] * n)
        assert near_eq(opt_cost(inst), brute_force_opt_single(sizes), rel=1e-12)


def test_opt_cost_two_machines_hand_case():
    inst = make_instance([1.0, 1.0, 2.0, 2.0], [flat_bar()] * 4, machines=2)
    assert near_eq(opt_cost(inst), 8.0)


def test_opt_cost_multi_machine_matches_list_schedule_oracle():
    rng = np.random.default_rng(99)
    for _ in range(30):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(2, 4))
        sizes = [float(x) for x in 0.3 + rng.random(n) * 4]
        inst = make_instance(sizes, [flat_bar()] * n, machines=m)
        assert near_eq(opt_cost(inst), list_schedule_opt_multi(sizes, m), rel=1e-9)


def test_opt_cost_with_machines_beyond_jobs_is_total_size():
    sizes = [2.0, 3.0, 5.0]
    inst = make_instance(sizes, [flat_bar()] * 3, machines=7)
    assert near_eq(opt_cost(inst), sum(sizes))


def test_opt_cost_ignores_the_clairvoyance_flag():
    inst = make_instance([1.0, 4.0], [flat_bar()] * 2, machines=2, clairvoyant=False)
    assert near_eq(opt_cost(inst), 5.0)


# ---------------------------------------------------------------------------
# delay decomposition & outcome plumbing
# ---------------------------------------------------------------------------

def test_decomposition_accepts_a_consistent_outcome():
    # two jobs sharing the machine equally: C = (2, 3), d(1,2)=min snapshot
    inst = make_instance([1.0, 2.0], [flat_bar()] * 2)
    delays = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = outcome_from_records(2, [2.0, 3.0], delays, [])
    assert out.total_cost == 5.0
    assert check_delay_decomposition(out, inst, 1e-9)


def test_decomposition_rejects_a_corrupted_delay_matrix():
    inst = make_instance([1.0, 2.0], [flat_bar()] * 2)
    delays = np.array([[0.0, 1.0], [0.5, 0.0]])
    out = outcome_from_records(2, [2.0, 3.0], delays, [])
    assert not check_delay_decomposition(out, inst, 1e-9)


def test_outcome_delay_matrix_is_read_only():
    out = outcome_from_records(1, [1.0], np.zeros((1, 1)), [])
    with pytest.raises(ValueError):
        out.delays[0, 0] = 5.0


def test_outcome_from_records_zeroes_the_diagonal():
    d = np.full((2, 2), 7.0)
    out = outcome_from_records(2, [1.0, 2.0], d, [])
    assert out.delays[0, 0] == 0.0 and out.delays[1, 1] == 0.0
    assert out.delays[0, 1] == 7.0


# ---------------------------------------------------------------------------
# error terms
# ---------------------------------------------------------------------------

def test_error_terms_hand_cases():
    inst = make_instance([1.0, 2.0], [flat_bar()] * 2)
    t, inv, l1 = error_terms(inst, 0.5, [0.9, 0.1])
    assert near_eq(t, 0.4) and near_eq(inv, 1.0) and near_eq(l1, 1.2)
    t, inv, l1 = error_terms(inst, 0.5, [0.4, 0.6])
    assert near_eq(t, -0.1) and near_eq(inv, 0.0) and near_eq(l1, 0.3)


def test_error_terms_match_reference_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 10))
        sizes = [float(x) for x in 0.1 + rng.random(n) * 3]
        betas = [float(b) for b in rng.random(n)]
        alpha = float(rng.uniform(0.05, 0.95))
        inst = make_instance(sizes, [flat_bar()] * n)
        got = error_terms(inst, alpha, betas)
        want = error_terms_reference(sizes, alpha, betas)
        for g, w in zip(got, want):
            assert near_eq(g, w, rel=1e-12, abs_=1e-12)


def test_error_terms_validates_inputs():
    inst = make_instance([1.0, 2.0], [flat_bar()] * 2)
    with pytest.raises(ValueError, match="one threshold per job"):
        error_terms(inst, 0.5, [0.5])
    with pytest.raises(ValueError, match="outside"):
        error_terms(inst, 0.5, [0.5, 1.2])


def test_error_terms_vanish_for_perfect_thresholds():
    inst = make_instance([1.0, 2.0, 5.0], [flat_bar()] * 3)
    t, inv, l1 = error_terms(inst, 0.3, [0.3, 0.3, 0.3])
    assert t == 0.0 and inv == 0.0 and l1 == 0.0


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_json_round_trip_preserves_everything_serialized():
    inst = make_instance(
        [1.5, 2.0],
        [single_signal_bar(0.4, 0.2), single_signal_bar(0.4, 0.9)],
        machines=2,
    )
    back = instance_from_json(instance_to_json(inst))
    assert back.machines == 2
    assert back.sizes() == inst.sizes()
    assert back.bars == inst.bars


def test_json_shape_is_stable():
    inst = make_instance([1.0], [single_signal_bar(0.5, 0.25)])
    doc = json.loads(instance_to_json(inst))
    assert set(doc) == {"machines", "levels", "jobs"}
    assert doc["levels"] == [0.5]
    assert doc["jobs"] == [{"p": 1.0, "thresholds": [0.25, 1.0]}]


def test_json_rejects_mismatched_threshold_length():
    text = json.dumps(
        {"machines": 1, "levels": [0.5], "jobs": [{"p": 1.0, "thresholds": [1.0]}]}
    )
    with pytest.raises(ValueError, match="levels length"):
        instance_from_json(text)


def test_event_log_dump_format():
    events = [
        SimEvent(0.25, "signal", 1, "jump 1"),
        SimEvent(1.0, "complete", 0),
    ]
    assert event_log_dump(events) == "0.25\tsignal\t1\tjump 1\n1\tcomplete\t0\t"


def test_accurate_bar_alpha_one_has_no_interior_levels():
    bar = accurate_bar(1.0)
    assert bar.granularity == 0
    assert bar.thresholds == (1.0,)


def test_near_eq_default_tolerances():
    assert near_eq(1.0, 1.0 + 5e-10)
    assert not near_eq(1.0, 1.001)
    assert near_eq(0.0, 1e-13)
