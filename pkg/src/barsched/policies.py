"""Scheduling policies driving the simulation engine.

Conventions shared by all of them: rates are queried between events and must
stay valid until the next one; callbacks (`on_signal`, `on_complete`,
`on_timer`) mutate only policy-internal bookkeeping; simulator state is
read-only for policies.
"""

from __future__ import annotations

import math
from typing import Sequence

from .model import Instance


class PolicyBase:
    label = "policy"

    def bind(self, instance: Instance) -> None:
        self.instance = instance

    def rates(self, state) -> dict[int, float]:  # pragma: no cover - abstract
        raise NotImplementedError

    def next_timer(self, state):
        return None

    def on_signal(self, state, job: int, jump: int) -> None:
        pass

    def on_complete(self, state, job: int) -> None:
        pass

    def on_timer(self, state, tag: str):
        return None

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        return ()

    def _require_single_machine(self, instance: Instance) -> None:
        if instance.machines != 1:
            raise ValueError(f"{self.label} runs on a single machine")

    def _require_single_signal_bars(self, instance: Instance) -> None:
        for bar in instance.bars:
            if bar.granularity != 1:
                raise ValueError("single-signal policy")


class RoundRobin(PolicyBase):
    """Equal share of the machine to every unfinished job."""

    label = "RR"

    def rates(self, state) -> dict[int, float]:
        alive = state.alive
        share = min(1.0, self.instance.machines / len(alive))
        return {j: share for j in alive}


class ShortestFirst(PolicyBase):
    """Clairvoyant baseline: always run the smallest remaining job(s)."""

    label = "SPT"

    def __init__(self, machines: int = 1):
        self.machines = machines

    def bind(self, instance: Instance) -> None:
        if not instance.clairvoyant:
            raise ValueError("clairvoyance required")
        if instance.machines != self.machines:
            raise ValueError("SPT machine count must match the instance")
        super().bind(instance)

    def rates(self, state) -> dict[int, float]:
        ranked = sorted(state.alive, key=lambda j: (self.instance.jobs[j].p, j))
        return {j: 1.0 for j in ranked[: self.machines]}


class FollowOrder(PolicyBase):
    """Run jobs one at a time in a fixed order (e.g. by predicted size)."""

    label = "FollowOrder"

    def __init__(self, order: Sequence[int]):
        self.order = list(order)

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        if sorted(self.order) != list(range(instance.n)):
            raise ValueError("order must be a permutation of the job ids")
        super().bind(instance)

    def rates(self, state) -> dict[int, float]:
        for j in self.order:
            if j in state.alive:
                return {j: 1.0}
        return {}


class ShortestElapsedFirst(PolicyBase):
    """Split the machine among the least-processed jobs.

    Jobs whose elapsed times agree within ``tie_tol`` form one group; a merge
    timer fires when the group catches up with the next-lowest job.
    """

    label = "SETF"

    def __init__(self):
        self.tie_tol = 1e-12

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        super().bind(instance)

    def _group(self, state) -> list[int]:
        lo = min(state.elapsed[j] for j in state.alive)
        return [j for j in sorted(state.alive) if state.elapsed[j] <= lo + self.tie_tol]

    def rates(self, state) -> dict[int, float]:
        group = self._group(state)
        share = 1.0 / len(group)
        return {j: share for j in group}

    def next_timer(self, state):
        group = self._group(state)
        if len(group) == len(state.alive):
            return None
        lo = state.elapsed[group[0]]
        nxt = min(state.elapsed[j] for j in state.alive if j not in group)
        return state.now + (nxt - lo) * len(group), "merge"


class CommitOnSignal(PolicyBase):
    """Round-robin until a job signals, then run it alone to completion.

    Signals arriving while another job holds the machine queue up first come
    first served (simultaneous ones in job-id order).
    """

    label = "BlindFollow"

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        self._require_single_signal_bars(instance)
        super().bind(instance)
        self.active: int | None = None
        self.queue: list[int] = []

    def rates(self, state) -> dict[int, float]:
        if self.active is not None:
            return {self.active: 1.0}
        share = 1.0 / len(state.alive)
        return {j: share for j in state.alive}

    def on_signal(self, state, job: int, jump: int) -> None:
        if self.active is None:
            self.active = job
        else:
            self.queue.append(job)

    def on_complete(self, state, job: int) -> None:
        if job == self.active:
            self.active = None
            while self.queue:
                j = self.queue.pop(0)
                if j in state.alive:
                    self.active = j
                    break

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        return (1,)


class WindowedCommit(PolicyBase):
    """Least-processed-first exploration plus bounded solo runs after signals.

    On a signal at elapsed e the job gets the machine alone for
    ``(1/(signal_fraction*trust) - 1) * e`` time units; if it does not finish
    inside that window it silently rejoins the pool (its high elapsed keeps it
    deprioritized until the others catch up).
    """

    label = "Alg1"

    def __init__(self, signal_fraction: float, trust: float):
        if not 0.0 < signal_fraction <= 1.0:
            raise ValueError("signal_fraction must be in (0, 1]")
        if not 0.0 < trust <= 1.0:
            raise ValueError("trust must be in (0, 1]")
        self.signal_fraction = signal_fraction
        self.trust = trust
        self.window_factor = 1.0 / (signal_fraction * trust) - 1.0
        self.tie_tol = 1e-12

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        self._require_single_signal_bars(instance)
        super().bind(instance)
        self.active: int | None = None
        self.window_end = 0.0
        self.queue: list[int] = []

    def _group(self, state) -> list[int]:
        lo = min(state.elapsed[j] for j in state.alive)
        return [j for j in sorted(state.alive) if state.elapsed[j] <= lo + self.tie_tol]

    def rates(self, state) -> dict[int, float]:
        if self.active is not None:
            return {self.active: 1.0}
        group = self._group(state)
        share = 1.0 / len(group)
        return {j: share for j in group}

    def next_timer(self, state):
        if self.active is not None:
            return self.window_end, "window"
        group = self._group(state)
        if len(group) == len(state.alive):
            return None
        lo = state.elapsed[group[0]]
        nxt = min(state.elapsed[j] for j in state.alive if j not in group)
        return state.now + (nxt - lo) * len(group), "merge"

    def _start_next(self, state) -> None:
        while self.queue:
            j = self.queue.pop(0)
            if j not in state.alive:
                continue
            window = self.window_factor * state.elapsed[j]
            if window <= 0.0:
                continue  # zero window: straight back to the pool
            self.active = j
            self.window_end = state.now + window
            return
        self.active = None

    def on_signal(self, state, job: int, jump: int) -> None:
        self.queue.append(job)
        if self.active is None:
            self._start_next(state)

    def on_complete(self, state, job: int) -> None:
        if job == self.active:
            self.active = None
            self._start_next(state)

    def on_timer(self, state, tag: str):
        # a timer can arrive stale (the windowed job finished in this very
        # batch and a fresh window already started): only honor a due one
        due = state.now >= self.window_end - 1e-9 * max(1.0, abs(self.window_end))
        if tag == "window" and self.active is not None and due:
            j = self.active
            self.active = None
            self._start_next(state)
            return f"window over job {j}"
        return None

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        return (1,)


class TimeShare(PolicyBase):
    """Blend two policies: one gets ``split`` of the machine, the other the rest.

    Both see the same physical signals and completions; a job finishes when its
    combined elapsed reaches its size.  Inner policies must not depend on
    elapsed times or timers, so only rate-memoryless ones are accepted.
    """

    label = "TimeSharing"

    def __init__(self, split: float, inner_a, inner_b):
        if not 0.0 < split < 1.0:
            raise ValueError("split must be inside (0, 1)")
        allowed = (RoundRobin, CommitOnSignal, FollowOrder, ShortestFirst)
        for inner in (inner_a, inner_b):
            if not isinstance(inner, allowed):
                raise ValueError("time-sharing needs elapsed-agnostic inner policies")
        self.split = split
        self.inner_a = inner_a
        self.inner_b = inner_b

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        super().bind(instance)
        self.inner_a.bind(instance)
        self.inner_b.bind(instance)

    def rates(self, state) -> dict[int, float]:
        a = self.inner_a.rates(state)
        b = self.inner_b.rates(state)
        out: dict[int, float] = {}
        for j in state.alive:
            r = self.split * a.get(j, 0.0) + (1.0 - self.split) * b.get(j, 0.0)
            if r > 0.0:
                out[j] = r
        return out

    def on_signal(self, state, job: int, jump: int) -> None:
        self.inner_a.on_signal(state, job, jump)
        self.inner_b.on_signal(state, job, jump)

    def on_complete(self, state, job: int) -> None:
        self.inner_a.on_complete(state, job)
        self.inner_b.on_complete(state, job)

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        seen = set(self.inner_a.watched_jumps(job)) | set(self.inner_b.watched_jumps(job))
        return tuple(sorted(seen))


class ExploreThenCommit(PolicyBase):
    """Round-robin until some job's displayed bar hits the commit level, then
    run that job to completion; repeat on the survivors."""

    label = "RepeatedETC"

    def __init__(self, commit_jump: int):
        if commit_jump < 1:
            raise ValueError("commit jump index must be >= 1")
        self.commit_jump = commit_jump

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        g = instance.bars[0].granularity if instance.bars else 0
        for bar in instance.bars:
            if bar.granularity != g:
                raise ValueError("bars must share one granularity")
        if self.commit_jump > g + 1:
            raise ValueError("commit jump index must be at most granularity + 1")
        self.granularity = g
        super().bind(instance)
        self.committed: int | None = None
        self.ready: list[int] = []

    def rates(self, state) -> dict[int, float]:
        if self.committed is not None:
            return {self.committed: 1.0}
        share = 1.0 / len(state.alive)
        return {j: share for j in state.alive}

    def on_signal(self, state, job: int, jump: int) -> None:
        if jump < self.commit_jump:
            return
        if self.committed is None:
            self.committed = job
        else:
            self.ready.append(job)

    def on_complete(self, state, job: int) -> None:
        if job == self.committed:
            self.committed = None
            while self.ready:
                j = self.ready.pop(0)
                if j in state.alive:
                    self.committed = j
                    break

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        if self.commit_jump > self.granularity:
            return ()
        return (self.commit_jump,)


class ExploreThenRank(PolicyBase):
    """Round-robin until every unfinished job shows at least the display
    threshold, then run them back to back, highest display first."""

    label = "GenericETC"

    def __init__(self, display_threshold: float):
        if not 0.0 < display_threshold <= 1.0:
            raise ValueError("display threshold must be in (0, 1]")
        self.display_threshold = display_threshold

    def bind(self, instance: Instance) -> None:
        self._require_single_machine(instance)
        g = instance.bars[0].granularity if instance.bars else 0
        for bar in instance.bars:
            if bar.granularity != g:
                raise ValueError("bars must share one granularity")
        self.granularity = g
        # smallest jump whose level reaches the threshold
        self.trigger_jump = max(1, math.ceil(self.display_threshold * (g + 1) - 1e-9))
        super().bind(instance)
        self.ready: set[int] = set()
        self.order: list[int] | None = None

    def rates(self, state) -> dict[int, float]:
        if self.order is not None:
            for j in self.order:
                if j in state.alive:
                    return {j: 1.0}
            return {}
        share = 1.0 / len(state.alive)
        return {j: share for j in state.alive}

    def _maybe_switch(self, state) -> None:
        if self.order is None and state.alive and state.alive <= self.ready:
            self.order = sorted(state.alive, key=lambda j: (-state.displayed(j), j))

    def on_signal(self, state, job: int, jump: int) -> None:
        if self.order is None and jump >= self.trigger_jump:
            self.ready.add(job)
            self._maybe_switch(state)

    def on_complete(self, state, job: int) -> None:
        self.ready.discard(job)
        if self.order is None:
            self._maybe_switch(state)

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        if self.trigger_jump > self.granularity:
            return ()
        return (self.trigger_jump,)


class MultiMachineBoost(PolicyBase):
    """Several machines: round-robin pool plus a queue of signaled jobs.

    Signaled jobs move to a first-in-first-out queue; the first ``machines``
    queue entries each hold a whole machine and burn a budget of
    ``elapsed_at_signal * (1 - signal_fraction) / signal_fraction``; running out
    of budget sends a job back to the pool.  The pool splits the machines left
    over.
    """

    label = "MultiMachinePrefExec"

    def __init__(self, signal_fraction: float, machines: int):
        if machines < 1:
            raise ValueError("machines must be >= 1")
        if not 0.0 < signal_fraction <= 1.0:
            raise ValueError("signal_fraction must be in (0, 1]")
        self.signal_fraction = signal_fraction
        self.machines = machines

    def bind(self, instance: Instance) -> None:
        if instance.machines != self.machines:
            raise ValueError("machine count must match the instance")
        self._require_single_signal_bars(instance)
        super().bind(instance)
        self.pool = set(range(instance.n))
        self.queue: list[int] = []
        self.boosted: list[int] = []  # queue prefix currently holding a machine
        self.entry_elapsed: dict[int, float] = {}
        self.budget: dict[int, float] = {}

    def _refresh_boosted(self, state) -> None:
        want = self.queue[: min(self.machines, len(self.queue))]
        for j in want:
            if j not in self.boosted:
                self.entry_elapsed[j] = state.elapsed[j]
        self.boosted = want

    def rates(self, state) -> dict[int, float]:
        out = {j: 1.0 for j in self.boosted}
        pool = [j for j in self.pool if j in state.alive]
        if pool:
            q = min(1.0, (self.machines - len(self.boosted)) / len(pool))
            if q > 0.0:
                for j in pool:
                    out[j] = q
        return out

    def next_timer(self, state):
        best = None
        for j in self.boosted:
            t = state.now + (self.entry_elapsed[j] + self.budget[j] - state.elapsed[j])
            if best is None or t < best:
                best = t
        if best is None:
            return None
        return best, "budget"

    def on_signal(self, state, job: int, jump: int) -> None:
        if job in self.pool:
            self.pool.discard(job)
            a = self.signal_fraction
            self.budget[job] = state.elapsed[job] * (1.0 - a) / a
            self.queue.append(job)
            self._refresh_boosted(state)

    def on_timer(self, state, tag: str):
        spent = [
            j
            for j in self.boosted
            if state.elapsed[j] >= self.entry_elapsed[j] + self.budget[j] - 1e-12
        ]
        for j in spent:
            self.queue.remove(j)
            self.pool.add(j)
        if spent:
            self._refresh_boosted(state)
            return "budget spent job " + ",".join(str(j) for j in spent)
        return None

    def on_complete(self, state, job: int) -> None:
        self.pool.discard(job)
        if job in self.queue:
            self.queue.remove(job)
            self._refresh_boosted(state)

    def watched_jumps(self, job: int) -> tuple[int, ...]:
        return (1,)


# ---------------------------------------------------------------------------
# Config parsing (the JSON shape the CLI accepts)
# ---------------------------------------------------------------------------

def policy_from_config(doc: dict):
    """Build a policy from a {"variant": ..., ...} mapping."""
    try:
        variant = doc["variant"]
    except (TypeError, KeyError):
        raise ValueError("policy config needs a 'variant' field") from None
    if variant == "RR":
        return RoundRobin()
    if variant == "SPT":
        return ShortestFirst(machines=int(doc.get("m", 1)))
    if variant == "SETF":
        return ShortestElapsedFirst()
    if variant == "BlindFollow":
        return CommitOnSignal()
    if variant == "Alg1":
        return WindowedCommit(float(doc["alpha"]), float(doc["rho"]))
    if variant == "TimeSharing":
        return TimeShare(
            float(doc["lambda"]),
            policy_from_config(doc["inner_a"]),
            policy_from_config(doc["inner_b"]),
        )
    if variant == "RepeatedETC":
        k = int(doc["k"])
        if "g" in doc and k > int(doc["g"]) + 1:
            raise ValueError("commit jump index must be at most granularity + 1")
        return ExploreThenCommit(k)
    if variant == "GenericETC":
        return ExploreThenRank(float(doc["threshold_fraction"]))
    if variant == "MultiMachinePrefExec":
        return MultiMachineBoost(float(doc["alpha"]), int(doc["m"]))
    if variant == "FollowOrder":
        return FollowOrder([int(x) for x in doc["order"]])
    raise ValueError(f"unknown policy variant: {variant}")
