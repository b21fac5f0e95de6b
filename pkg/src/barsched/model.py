"""Core domain types and closed-form schedule metrics.

Jobs have a hidden processing time and a step-shaped progress bar; the
displayed fraction only moves when the underlying progress crosses one of the
bar's thresholds.  Everything downstream (simulator, policies, experiment
harness) shares the types defined here.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Job:
    id: int
    p: float

    def __post_init__(self) -> None:
        if not self.p > 0:
            raise ValueError(f"job {self.id}: processing time must be positive, got {self.p}")


@dataclass(frozen=True)
class StepProgressBar:
    """Nondecreasing step function from true progress fraction to displayed fraction.

    ``thresholds`` holds the jump positions (last one exactly 1.0) and
    ``levels`` the displayed values after each interior jump, so the bar has
    ``len(levels)`` interior levels; the final jump lands on 1.  Jumps are
    closed on the left: display(x) already includes a jump sitting exactly
    at x.
    """

    thresholds: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        th, lv = self.thresholds, self.levels
        if len(th) != len(lv) + 1:
            raise ValueError("need exactly one more threshold than interior levels")
        if th[-1] != 1.0:
            raise ValueError(f"final threshold must be exactly 1.0, got {th[-1]}")
        n = len(th)
        if n > 64:
            a = np.asarray(th)
            ok = bool(np.all(a >= 0.0) and np.all(a <= 1.0) and np.all(np.diff(a) >= 0.0))
        else:
            ok = all(0.0 <= x <= 1.0 for x in th) and all(
                th[i] <= th[i + 1] for i in range(n - 1)
            )
        if not ok:
            raise ValueError("thresholds must be nondecreasing and inside [0, 1]")
        if len(lv) > 64:
            a = np.asarray(lv)
            ok = bool(np.all(a > 0.0) and np.all(a < 1.0) and np.all(np.diff(a) > 0.0))
        else:
            ok = all(0.0 < x < 1.0 for x in lv) and all(
                lv[i] < lv[i + 1] for i in range(len(lv) - 1)
            )
        if not ok:
            raise ValueError("levels must be strictly increasing and inside (0, 1)")

    @property
    def granularity(self) -> int:
        return len(self.levels)

    def display(self, x: float) -> float:
        """Displayed fraction after ``x`` of the job has truly been processed."""
        jumps = bisect.bisect_right(self.thresholds, x)
        if jumps == 0:
            return 0.0
        if jumps > len(self.levels):
            return 1.0
        return self.levels[jumps - 1]

    def jumps_at_or_below(self, x: float) -> int:
        return bisect.bisect_right(self.thresholds, x)


@dataclass(frozen=True, slots=True)
class DisplayedProgress:
    job: int
    value: float


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    bars: tuple[StepProgressBar, ...]
    machines: int = 1
    clairvoyant: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        if len(self.jobs) != len(self.bars):
            raise ValueError("one progress bar per job required")
        if self.machines < 1:
            raise ValueError("machines must be >= 1")
        ids = [j.id for j in self.jobs]
        if ids != list(range(len(ids))):
            raise ValueError("job ids must be 0..n-1 in order")
        if self.bars:
            ref = self.bars[0].levels
            for b in self.bars[1:]:
                if b.levels != ref:
                    raise ValueError("all bars in an instance must share one level vector")

    @property
    def n(self) -> int:
        return len(self.jobs)

    def sizes(self) -> tuple[float, ...]:
        return tuple(j.p for j in self.jobs)


def make_instance(
    sizes: Sequence[float],
    bars: Sequence[StepProgressBar],
    machines: int = 1,
    clairvoyant: bool = True,
) -> Instance:
    jobs = tuple(Job(i, float(p)) for i, p in enumerate(sizes))
    return Instance(jobs, tuple(bars), machines, clairvoyant)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # "signal" | "complete" | "timer" | "merge"
    job: int  # -1 when not tied to a single job
    detail: str = ""


@dataclass(frozen=True)
class ScheduleOutcome:
    completion: tuple[float, ...]
    delays: np.ndarray  # delays[i, j] = processing job i had received when j finished
    total_cost: float
    event_log: tuple[SimEvent, ...]

    def __post_init__(self) -> None:
        self.delays.setflags(write=False)


def total_cost(outcome: ScheduleOutcome) -> float:
    return float(sum(outcome.completion))


def opt_cost(instance: Instance) -> float:
    """Best achievable total completion time: shortest jobs first.

    On one machine this is the classic weighted-position sum; with several
    machines it is the cost of simulating the shortest-first rate schedule.
    """
    if instance.n == 0:
        raise ValueError("empty instance")
    if instance.machines == 1:
        ordered = sorted(j.p for j in instance.jobs)
        n = len(ordered)
        return float(sum((n - i) * p for i, p in enumerate(ordered)))
    # several machines: run the clairvoyant shortest-first policy
    from . import engine, policies

    omniscient = replace(instance, clairvoyant=True)
    out = engine.run(omniscient, policies.ShortestFirst(machines=instance.machines))
    return out.total_cost


def check_delay_decomposition(outcome: ScheduleOutcome, instance: Instance, tol: float) -> bool:
    """Single-machine identity: total cost = sum of sizes + all pairwise delays."""
    alg = outcome.total_cost
    lhs = sum(j.p for j in instance.jobs) + float(outcome.delays.sum())
    return abs(alg - lhs) <= tol * alg


def error_terms(
    instance: Instance, alpha: float, betas: Sequence[float]
) -> tuple[float, float, float]:
    """Closed-form prediction-error summaries for single-signal bars.

    Returns (timing, inversion, l1):
      timing    — signed cost of signals firing early/late, weighted by how many
                  jobs are still waiting behind each one (can be negative);
      inversion — cost of pairs whose signal order disagrees with the size order;
      l1        — plain size-weighted deviation of thresholds from the target
                  fraction.
    """
    n = instance.n
    if len(betas) != n:
        raise ValueError("need one threshold per job")
    for b in betas:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"threshold outside [0, 1]: {b}")
    order = sorted(range(n), key=lambda i: (instance.jobs[i].p, i))
    timing = 0.0
    for rank, i in enumerate(order):
        waiting_behind = n - 1 - rank
        timing += waiting_behind * (betas[i] - alpha) * instance.jobs[i].p
    inversion = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            i, j = order[a], order[b]
            pi, pj = instance.jobs[i].p, instance.jobs[j].p
            if betas[j] * pj < betas[i] * pi:
                inversion += pj - pi
    l1 = sum(abs(betas[i] - alpha) * instance.jobs[i].p for i in range(n))
    return float(timing), float(inversion), float(l1)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def instance_to_json(instance: Instance) -> str:
    doc = {
        "machines": instance.machines,
        "levels": list(instance.bars[0].levels) if instance.bars else [],
        "jobs": [
            {"p": j.p, "thresholds": list(b.thresholds)}
            for j, b in zip(instance.jobs, instance.bars)
        ],
    }
    return json.dumps(doc, indent=2)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    machines = int(doc["machines"])
    levels = tuple(float(x) for x in doc["levels"])
    sizes: list[float] = []
    bars: list[StepProgressBar] = []
    for spec in doc["jobs"]:
        sizes.append(float(spec["p"]))
        th = tuple(float(x) for x in spec["thresholds"])
        if len(th) != len(levels) + 1:
            raise ValueError("thresholds length must be levels length + 1")
        bars.append(StepProgressBar(th, levels))
    return make_instance(sizes, bars, machines=machines)


def event_log_dump(events: Iterable[SimEvent]) -> str:
    lines = [f"{e.time:.12g}\t{e.kind}\t{e.job}\t{e.detail}" for e in events]
    return "\n".join(lines)


def outcome_from_records(
    n: int,
    completion: Sequence[float],
    delay_matrix: np.ndarray,
    events: Sequence[SimEvent],
) -> ScheduleOutcome:
    d = np.array(delay_matrix, dtype=float)
    np.fill_diagonal(d, 0.0)
    return ScheduleOutcome(
        completion=tuple(float(c) for c in completion),
        delays=d,
        total_cost=float(sum(completion)),
        event_log=tuple(events),
    )


def near_eq(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
