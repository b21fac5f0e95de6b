"""Continuous-time schedulers: an exact event-driven engine and a step oracle.

A policy maps simulator state to per-job processing rates that stay valid
until the next event (threshold crossing, completion, or a policy timer).
``run`` advances time analytically between events; ``run_fixed_step`` is an
independent Euler-grid integrator used to cross-check the event engine.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

from .model import Instance, ScheduleOutcome, SimEvent, outcome_from_records

RATE_EPS = 1e-9
_SLACK = 1e-12


class Policy(Protocol):
    def bind(self, instance: Instance) -> None: ...

    def rates(self, state: "SimState") -> dict[int, float]: ...

    def next_timer(self, state: "SimState") -> tuple[float, str] | None: ...

    def on_signal(self, state: "SimState", job: int, jump: int) -> None: ...

    def on_complete(self, state: "SimState", job: int) -> None: ...

    def on_timer(self, state: "SimState", tag: str) -> str | None: ...

    def watched_jumps(self, job: int) -> Sequence[int]: ...


class SimState:
    """Mutable view of one run: policies read it, only the engine writes it."""

    __slots__ = ("instance", "now", "elapsed", "alive", "signals_seen")

    def __init__(self, instance: Instance):
        self.instance = instance
        self.now = 0.0
        self.elapsed = [0.0] * instance.n
        self.alive = set(range(instance.n))
        self.signals_seen = [0] * instance.n

    def displayed(self, job: int) -> float:
        p = self.instance.jobs[job].p
        x = self.elapsed[job] / p
        return self.instance.bars[job].display(min(x, 1.0))


def _reached(value: float, target: float) -> bool:
    return target <= value + _SLACK * max(1.0, abs(target))


def _due(t: float, t_star: float) -> bool:
    return t <= t_star + _SLACK * max(1.0, abs(t_star))


def _validate_rates(rates: dict[int, float], alive: set[int], machines: int) -> None:
    total = 0.0
    for j, r in rates.items():
        if j not in alive:
            raise ValueError("infeasible rates")
        if r < -RATE_EPS or r > 1.0 + RATE_EPS:
            raise ValueError("infeasible rates")
        total += r
    if total > machines + RATE_EPS:
        raise ValueError("infeasible rates")


def _signal_targets(
    instance: Instance, policy, signal_mode: str
) -> list[list[tuple[float, int]]]:
    """Per job: ascending (elapsed target, jump index) pairs worth tracking.

    Thresholds sitting at exactly 1 never emit (completion wins there).
    """
    out: list[list[tuple[float, int]]] = []
    for job, bar in zip(instance.jobs, instance.bars):
        if signal_mode == "watched":
            wanted = set(policy.watched_jumps(job.id))
            pairs = [
                (b * job.p, h)
                for h, b in enumerate(bar.thresholds, start=1)
                if b < 1.0 and h in wanted
            ]
        else:
            pairs = [
                (b * job.p, h) for h, b in enumerate(bar.thresholds, start=1) if b < 1.0
            ]
        out.append(pairs)
    return out


class _Recorder:
    def __init__(self, instance: Instance):
        self.n = instance.n
        self.sizes = [j.p for j in instance.jobs]
        self.completion: list[float | None] = [None] * self.n
        self.snapshots: dict[int, list[float]] = {}
        self.events: list[SimEvent] = []

    def complete(self, job: int, t: float, elapsed: list[float]) -> None:
        self.completion[job] = t
        self.snapshots[job] = list(elapsed)
        self.events.append(SimEvent(t, "complete", job))

    def outcome(self) -> ScheduleOutcome:
        d = np.zeros((self.n, self.n))
        for j, snap in self.snapshots.items():
            for i in range(self.n):
                d[i, j] = min(snap[i], self.sizes[i])
        return outcome_from_records(self.n, self.completion, d, self.events)


def run_fixed_step(instance: Instance, policy, dt: float, signal_mode: str = "full") -> ScheduleOutcome:
    """Euler-grid oracle: advance elapsed by rate*dt per step, detect crossings
    at step boundaries.  Steps with no possible crossing are taken in one
    closed-form jump, which reproduces the literal loop up to float
    associativity.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    policy.bind(instance)
    if hasattr(policy, "tie_tol"):
        # grid neighbours drift ~dt apart; keep equal-elapsed groups together
        policy.tie_tol = max(policy.tie_tol, dt * 1.001)
    state = SimState(instance)
    rec = _Recorder(instance)
    sizes = rec.sizes
    targets = _signal_targets(instance, policy, signal_mode)
    ptr = [0] * instance.n
    steps = 0
    guard = 0
    while state.alive:
        guard += 1
        if guard > 10_000_000:
            raise RuntimeError("step budget exceeded")
        now = steps * dt

        done = [j for j in sorted(state.alive) if _reached(state.elapsed[j], sizes[j])]
        fired: list[tuple[int, int]] = []
        for j in sorted(state.alive):
            if j in done:
                continue
            if ptr[j] < len(targets[j]):
                tgt, h = targets[j][ptr[j]]
                if _reached(state.elapsed[j], tgt):
                    fired.append((j, h))
        timer = policy.next_timer(state)
        timer_due = timer is not None and _due(max(timer[0], 0.0), now)
        if done or fired or timer_due:
            state.now = now
            if done:
                for j in done:
                    state.elapsed[j] = sizes[j]
                for j in done:
                    state.alive.discard(j)
                    rec.complete(j, now, state.elapsed)
                    policy.on_complete(state, j)
            for j, h in fired:
                if j not in state.alive:
                    continue
                ptr[j] += 1
                state.signals_seen[j] += 1
                rec.events.append(SimEvent(now, "signal", j, f"jump {h}"))
                policy.on_signal(state, j, h)
            if timer_due:
                tag = timer[1]
                extra = policy.on_timer(state, tag)
                kind = "merge" if tag == "merge" else "timer"
                rec.events.append(SimEvent(now, kind, -1, extra or tag))
            continue

        rates = policy.rates(state)
        _validate_rates(rates, state.alive, instance.machines)
        timer = policy.next_timer(state)
        k_min: int | None = None
        for j in sorted(state.alive):
            r = rates.get(j, 0.0)
            if r <= 0.0:
                continue
            e = state.elapsed[j]
            goals = [sizes[j]]
            if ptr[j] < len(targets[j]):
                goals.append(targets[j][ptr[j]][0])
            for goal in goals:
                k = max(1, math.ceil((goal - e) / (r * dt) - 1e-9))
                if k_min is None or k < k_min:
                    k_min = k
        if timer is not None:
            k = max(1, math.ceil((timer[0] - now) / dt - 1e-9))
            if k_min is None or k < k_min:
                k_min = k
        if k_min is None:
            raise ValueError("stalled policy")
        for j in state.alive:
            r = rates.get(j, 0.0)
            if r > 0.0:
                state.elapsed[j] += r * k_min * dt
        steps += k_min
    return rec.outcome()


def run(instance: Instance, policy, signal_mode: str = "full") -> ScheduleOutcome:
    """Exact event-driven simulation.

    Simultaneous events are processed completions-first, then signals, then a
    due policy timer, ties in ascending job id.  ``signal_mode="watched"``
    tracks only jump indices the policy declares interesting (completion times
    are unaffected; the event log then omits the other crossings).
    """
    policy.bind(instance)
    state = SimState(instance)
    rec = _Recorder(instance)
    sizes = rec.sizes
    targets = _signal_targets(instance, policy, signal_mode)
    ptr = [0] * instance.n
    guard = 0
    budget = 10_000 + 300 * instance.n * (1 + max(len(t) for t in targets) if targets else 1)
    while state.alive:
        guard += 1
        if guard > budget:
            raise RuntimeError("event budget exceeded")
        rates = policy.rates(state)
        _validate_rates(rates, state.alive, instance.machines)
        timer = policy.next_timer(state)

        # horizon candidates: (time, rank, job, payload); rank orders same-time ties
        candidates: list[tuple[float, int, int, int]] = []
        for j in sorted(state.alive):
            e = state.elapsed[j]
            r = rates.get(j, 0.0)
            p = sizes[j]
            if _reached(e, p):
                candidates.append((state.now, 0, j, 0))
            elif r > 0.0:
                candidates.append((state.now + (p - e) / r, 0, j, 0))
            if ptr[j] < len(targets[j]):
                tgt, h = targets[j][ptr[j]]
                if _reached(e, tgt):
                    candidates.append((state.now, 1, j, h))
                elif r > 0.0:
                    candidates.append((state.now + (tgt - e) / r, 1, j, h))
        if timer is not None:
            candidates.append((max(timer[0], state.now), 2, -1, 0))
        if not candidates:
            raise ValueError("stalled policy")

        t_star = min(c[0] for c in candidates)
        step = t_star - state.now
        if step > 0.0:
            for j in state.alive:
                r = rates.get(j, 0.0)
                if r > 0.0:
                    state.elapsed[j] += r * step
        state.now = t_star

        batch = [c for c in candidates if _due(c[0], t_star)]
        completions = sorted(j for t, rank, j, _ in batch if rank == 0)
        signals = sorted((j, h) for t, rank, j, h in batch if rank == 1)
        timer_due = any(rank == 2 for _, rank, _, _ in batch)

        for j in completions:
            state.elapsed[j] = sizes[j]
        for j, h in signals:
            if j not in completions:
                state.elapsed[j] = targets[j][ptr[j]][0]
        for j in completions:
            state.alive.discard(j)
            rec.complete(j, t_star, state.elapsed)
            policy.on_complete(state, j)
        for j, h in signals:
            if j not in state.alive:
                continue  # completion wins; the crossing is absorbed
            ptr[j] += 1
            state.signals_seen[j] += 1
            rec.events.append(SimEvent(t_star, "signal", j, f"jump {h}"))
            policy.on_signal(state, j, h)
        if timer_due and state.alive:
            tag = timer[1]
            extra = policy.on_timer(state, tag)
            kind = "merge" if tag == "merge" else "timer"
            rec.events.append(SimEvent(t_star, kind, -1, extra or tag))
    return rec.outcome()


def next_event_horizon(
    state: SimState, rates: dict[int, float], instance: Instance, timer: tuple[float, str] | None = None
) -> tuple[float, SimEvent]:
    """Earliest upcoming event under the given (fixed) rates.

    Considers every job's next threshold crossing and completion plus an
    optional pending policy timer; zero-length horizons are allowed.
    """
    best: tuple[float, int, int, SimEvent] | None = None

    def offer(t: float, rank: int, job: int, ev: SimEvent) -> None:
        nonlocal best
        key = (t, rank, job, ev)
        if best is None or key[:3] < best[:3]:
            best = key

    for j in sorted(state.alive):
        job = instance.jobs[j]
        bar = instance.bars[j]
        e = state.elapsed[j]
        r = rates.get(j, 0.0)
        if _reached(e, job.p):
            offer(state.now, 0, j, SimEvent(state.now, "complete", j))
        elif r > 0.0:
            t = state.now + (job.p - e) / r
            offer(t, 0, j, SimEvent(t, "complete", j))
        for h, b in enumerate(bar.thresholds, start=1):
            if b >= 1.0:
                break
            tgt = b * job.p
            if h <= state.signals_seen[j]:
                continue
            if _reached(e, tgt):
                offer(state.now, 1, j, SimEvent(state.now, "signal", j, f"jump {h}"))
            elif r > 0.0:
                t = state.now + (tgt - e) / r
                offer(t, 1, j, SimEvent(t, "signal", j, f"jump {h}"))
            break
    if timer is not None:
        t = max(timer[0], state.now)
        offer(t, 2, -1, SimEvent(t, "timer", -1, timer[1]))
    if best is None:
        raise ValueError("stalled policy")
    return best[0], best[3]
