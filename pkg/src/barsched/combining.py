"""Two-phase candidate selection on a single machine.

Each candidate policy comes with a pairwise-delay oracle: d(i, j) is the
processing job i has received when j finishes if the candidate ran jobs i and
j alone.  Phase one runs a small random sample of jobs back to back (ascending
id) while scoring every candidate as the oracle sum over the sampled pairs;
phase two hands the untouched jobs to the best-scoring candidate.  The glued
schedule satisfies the cost-equals-sizes-plus-delays identity exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import engine
from .bars import derive_rng
from .model import Instance, ScheduleOutcome, SimEvent, make_instance, outcome_from_records
from .policies import CommitOnSignal, FollowOrder, RoundRobin


@dataclass(frozen=True)
class DelayOracle:
    """Directional pairwise delay d(i, j) for one candidate policy."""

    fn: Callable[[Instance, int, int], float]
    exact: bool = True
    label: str = "oracle"

    def pair_cost(self, instance: Instance, i: int, j: int) -> float:
        return self.fn(instance, i, j) + self.fn(instance, j, i)


def rr_delay(instance: Instance, i: int, j: int) -> float:
    return min(instance.jobs[i].p, instance.jobs[j].p)


def _firing_elapsed(instance: Instance, j: int) -> float:
    bar = instance.bars[j]
    b = bar.thresholds[0] if bar.granularity == 1 else 1.0
    return b * instance.jobs[j].p


def signal_commit_delay(instance: Instance, i: int, j: int) -> float:
    """Share-until-signal-then-commit: whoever signals first finishes first."""
    si, sj = _firing_elapsed(instance, i), _firing_elapsed(instance, j)
    if (si, i) < (sj, j):
        return instance.jobs[i].p
    return sj


def make_rr_oracle() -> DelayOracle:
    return DelayOracle(rr_delay, exact=True, label="RR")


def make_signal_commit_oracle() -> DelayOracle:
    return DelayOracle(signal_commit_delay, exact=True, label="BlindFollow")


def make_order_oracle(order: Sequence[int], label: str = "FollowOrder") -> DelayOracle:
    pos = {j: r for r, j in enumerate(order)}

    def fn(instance: Instance, i: int, j: int) -> float:
        return instance.jobs[i].p if pos[i] < pos[j] else 0.0

    return DelayOracle(fn, exact=True, label=label)


@dataclass(frozen=True)
class Candidate:
    """A runnable policy plus the oracle predicting its pairwise delays."""

    label: str
    oracle: DelayOracle
    # builds the phase-two policy for a sub-instance; gets the original job
    # ids so order-based candidates can re-rank the survivors
    make_policy: Callable[[Instance, Sequence[int]], object]


def rr_candidate() -> Candidate:
    return Candidate("RR", make_rr_oracle(), lambda inst, ids: RoundRobin())


def signal_commit_candidate() -> Candidate:
    return Candidate("BlindFollow", make_signal_commit_oracle(), lambda inst, ids: CommitOnSignal())


def order_candidate(order: Sequence[int], label: str = "FollowOrder") -> Candidate:
    order = list(order)
    pos = {j: r for r, j in enumerate(order)}

    def build(inst: Instance, ids: Sequence[int]):
        sub_order = sorted(range(len(ids)), key=lambda s: pos[ids[s]])
        return FollowOrder(sub_order)

    return Candidate(label, make_order_oracle(order, label), build)


def all_pairs(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def default_pair_count(n: int, candidates: float) -> int:
    """Sample size growing like n^(2/3) (ln candidates)^(1/3) / 8."""
    bump = max(0.0, math.log(candidates)) ** (1.0 / 3.0)
    return max(1, math.ceil(n ** (2.0 / 3.0) * bump / 8.0))


def _sub_instance(instance: Instance, ids: Sequence[int]) -> Instance:
    return make_instance(
        [instance.jobs[j].p for j in ids],
        [instance.bars[j] for j in ids],
        machines=1,
        clairvoyant=instance.clairvoyant,
    )


def _remap_events(
    events: Sequence[SimEvent], ids: Sequence[int], shift: float
) -> list[SimEvent]:
    return [
        SimEvent(e.time + shift, e.kind, ids[e.job] if e.job >= 0 else -1, e.detail)
        for e in events
    ]


def combine(
    instance: Instance,
    candidates: Sequence[Candidate],
    pair_count: int | None = None,
    seed: int | Sequence[int] = 0,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> tuple[ScheduleOutcome, dict]:
    """Run the two-phase selection schedule; returns (outcome, report)."""
    n = instance.n
    if n < 2:
        raise ValueError("need two jobs to sample pairs")
    if instance.machines != 1:
        raise ValueError("combining runs on a single machine")
    if not candidates:
        raise ValueError("need at least one candidate")

    if pairs is None:
        pool = all_pairs(n)
        m = pair_count if pair_count is not None else default_pair_count(n, len(candidates))
        if isinstance(seed, (tuple, list)):
            rng = derive_rng(*seed)
        else:
            rng = derive_rng(int(seed))
        idx = rng.integers(0, len(pool), size=m)
        sampled_pairs = [pool[int(i)] for i in idx]
    else:
        sampled_pairs = [(min(i, j), max(i, j)) for i, j in pairs]

    estimates = [
        float(sum(c.oracle.pair_cost(instance, i, j) for i, j in sampled_pairs))
        for c in candidates
    ]
    chosen = min(range(len(candidates)), key=lambda h: (estimates[h], h))

    sampled_ids = sorted({j for pr in sampled_pairs for j in pr})
    sampled_set = set(sampled_ids)
    remaining_ids = [j for j in range(n) if j not in sampled_set]

    sub1 = _sub_instance(instance, sampled_ids)
    out1 = engine.run(sub1, FollowOrder(range(sub1.n)))
    handoff = max(out1.completion)

    completion = [0.0] * n
    delays = np.zeros((n, n))
    for s, j in enumerate(sampled_ids):
        completion[j] = out1.completion[s]
        for s2, i in enumerate(sampled_ids):
            delays[i, j] = out1.delays[s2, s]
    events = _remap_events(out1.event_log, sampled_ids, 0.0)

    if remaining_ids:
        sub2 = _sub_instance(instance, remaining_ids)
        policy = candidates[chosen].make_policy(sub2, remaining_ids)
        out2 = engine.run(sub2, policy)
        for r, j in enumerate(remaining_ids):
            completion[j] = handoff + out2.completion[r]
            for r2, i in enumerate(remaining_ids):
                delays[i, j] = out2.delays[r2, r]
        # phase-one jobs are fully processed before any phase-two completion
        for s in sampled_ids:
            for r in remaining_ids:
                delays[s, r] = instance.jobs[s].p
        events += _remap_events(out2.event_log, remaining_ids, handoff)

    events.sort(key=lambda e: (e.time, e.job))
    outcome = outcome_from_records(n, completion, delays, events)
    report = {
        "pairs": [list(pr) for pr in sampled_pairs],
        "pair_count": len(sampled_pairs),
        "labels": [c.label for c in candidates],
        "estimates": estimates,
        "chosen": chosen,
        "chosen_label": candidates[chosen].label,
        "sampled_jobs": sampled_ids,
        "handoff_time": float(handoff),
        "sampling_cost": float(sum(out1.completion)),
    }
    return outcome, report


def oracle_total_cost(instance: Instance, oracle: DelayOracle) -> float:
    """Exact cost the oracle predicts if its candidate ran the whole instance."""
    total = sum(j.p for j in instance.jobs)
    for i, j in all_pairs(instance.n):
        total += oracle.pair_cost(instance, i, j)
    return float(total)
