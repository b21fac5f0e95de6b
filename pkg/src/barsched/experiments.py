"""Instance generators, adversarial fixtures, and the figure pipeline.

Each figure sweeps one knob (prediction noise, bar granularity, or the signal
fraction) over several trials; all arms of one (sweep point, trial) cell share
the instance, predictions, and bars, so curves differ only through the policy.
Runs are reproducible: every random draw comes from a generator keyed by
(master seed, purpose, sweep index, trial[, job]).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import combining, engine
from .bars import accurate_bar, bar_from_prediction, derive_rng, poisson_bar, single_signal_bar
from .model import Instance, StepProgressBar, error_terms, make_instance, opt_cost
from .policies import (
    CommitOnSignal,
    ExploreThenCommit,
    ExploreThenRank,
    FollowOrder,
    MultiMachineBoost,
    RoundRobin,
    TimeShare,
    WindowedCommit,
)

PARETO_SHAPE = 1.1
# purposes for seed derivation; shared across arms so curves use common draws
PURPOSE_INSTANCE = 0
PURPOSE_PREDICTIONS = 1
PURPOSE_BARS = 2
PURPOSE_SAMPLING = 3

CSV_HEADER = "figure,algorithm,params,x,trial,seed,alg_cost,opt_cost,ratio,timing_err,inversion_err,l1_err"

PRESET_NAMES = ("smoothness_rho", "robustification", "stochastic", "thm_checks")


def _key(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def _rng(seed) -> np.random.Generator:
    return derive_rng(*_key(seed))


def pareto_sizes(n: int, shape: float, seed) -> list[float]:
    u = _rng(seed).random(n)
    return [float(x) for x in (1.0 - u) ** (-1.0 / shape)]


def gen_pareto_instance(n: int, shape: float = PARETO_SHAPE, seed=0) -> Instance:
    """Heavy-tailed sizes on support [1, inf); bars start out uninformative."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sizes = pareto_sizes(n, shape, seed)
    bars = [StepProgressBar((1.0,), ())] * n
    return make_instance(sizes, bars, clairvoyant=False)


def with_bars(instance: Instance, bars: Sequence[StepProgressBar]) -> Instance:
    return make_instance(instance.sizes(), bars, instance.machines, instance.clairvoyant)


def gen_gaussian_predictions(instance: Instance, sigma: float, seed) -> list[float]:
    """Independent size predictions, one derived stream per job so that
    parallel execution cannot change the draws."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    base = _key(seed)
    return [float(_rng(base + (j.id,)).normal(j.p, sigma)) for j in instance.jobs]


def brittleness_instance(alpha: float, m_half: int, delta: float) -> Instance:
    """Near-miss fixture: half the jobs size 1, half size 1/alpha, every bar
    firing just short of the advertised fraction."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if not 0.0 < delta < alpha:
        raise ValueError("delta must be in (0, alpha)")
    if m_half < 1:
        raise ValueError("m_half must be >= 1")
    sizes = [1.0] * m_half + [1.0 / alpha] * m_half
    bar = single_signal_bar(alpha, alpha - delta)
    return make_instance(sizes, [bar] * len(sizes), clairvoyant=False)


def firing_fractions(instance: Instance) -> list[float]:
    """Per-job true-progress fraction at which the (single) signal fires."""
    out = []
    for bar in instance.bars:
        out.append(bar.thresholds[0] if bar.granularity == 1 else 1.0)
    return out


# ---------------------------------------------------------------------------
# Trial records and experiment configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    figure: str
    algorithm: str
    params: str
    x: float
    trial: int
    seed: int
    alg_cost: float
    opt_cost: float
    ratio: float
    timing_err: float
    inversion_err: float
    l1_err: float

    def __post_init__(self) -> None:
        if not self.ratio >= 1.0 - 1e-9:
            raise ValueError(f"ratio {self.ratio} below the optimum lower bound")

    def csv_row(self) -> str:
        f = _fmt_float
        return ",".join(
            [
                self.figure,
                self.algorithm,
                self.params,
                f(self.x),
                str(self.trial),
                str(self.seed),
                f(self.alg_cost),
                f(self.opt_cost),
                f(self.ratio),
                f(self.timing_err),
                f(self.inversion_err),
                f(self.l1_err),
            ]
        )


def _fmt_float(v: float) -> str:
    return f"{float(v):.10g}"


def _params_str(params: dict) -> str:
    parts = [f"{k}={v if isinstance(v, str) else _fmt_float(v)}" for k, v in params.items()]
    parts.append("rng=pcg64")
    return ";".join(parts)


@dataclass(frozen=True)
class ArmSpec:
    label: str
    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def get(self, name: str) -> float:
        return dict(self.params)[name]


@dataclass(frozen=True)
class ExperimentConfig:
    figure: str
    n: int
    trials: int
    master_seed: int
    sweep: tuple[float, ...]
    arms: tuple[ArmSpec, ...]

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep:
            raise ValueError("sweep must be nonempty")


def preset(
    name: str,
    n: int = 100,
    trials: int = 20,
    master_seed: int = 7,
    sweep: Sequence[float] | None = None,
) -> ExperimentConfig:
    if name == "smoothness_rho":
        sw = sweep or (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0)
        arms = tuple(
            ArmSpec(f"alg1_rho_{rho:g}", "alg1", (("alpha", 0.5), ("rho", rho)))
            for rho in (1e-15, 1e-5, 1e-3, 1e-1)
        )
    elif name == "robustification":
        sw = sweep or (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0)
        # every arm tuned for the same worst-case ratio of 3
        arms = (
            ArmSpec("time_sharing", "ts", (("lambda", 1.0 / 3.0),)),
            ArmSpec("delayed_alg1", "alg1", (("alpha", 5.0 / 9.0), ("rho", 0.9))),
            ArmSpec("combining", "combining", ()),
        )
    elif name == "stochastic":
        sw = sweep or (3, 6, 12, 24, 48, 96, 192)
        arms = (
            ArmSpec("retc_k1", "retc", (("k", 1),)),
            ArmSpec("retc_tuned", "retc_tuned", ()),
            ArmSpec("rr", "rr", ()),
            ArmSpec("generic_etc", "generic_etc", ()),
        )
    elif name == "thm_checks":
        sw = sweep or (0.25, 0.5, 0.9)
        arms = (
            ArmSpec("blind_follow", "blind", ()),
            ArmSpec("alg1_rho_0.1", "alg1_x", (("rho", 0.1),)),
            ArmSpec("alg1_rho_0.5", "alg1_x", (("rho", 0.5),)),
            ArmSpec("alg1_rho_1", "alg1_x", (("rho", 1.0),)),
            ArmSpec("multi_m2", "multi", (("m", 2),)),
            ArmSpec("multi_m3", "multi", (("m", 3),)),
        )
    else:
        raise ValueError(f"unknown preset: {name}")
    return ExperimentConfig(name, n, trials, master_seed, tuple(float(x) for x in sw), arms)


def tuned_commit_jump(granularity: int) -> int:
    return math.ceil((granularity / 2.0) ** (2.0 / 3.0)) + 1


# ---------------------------------------------------------------------------
# One (sweep point, trial) cell
# ---------------------------------------------------------------------------

def _instance_seed(config: ExperimentConfig, xi: int, trial: int) -> int:
    ss = np.random.SeedSequence((config.master_seed, PURPOSE_INSTANCE, xi, trial))
    return int(ss.generate_state(1)[0])


def _cell(config: ExperimentConfig, xi: int, trial: int) -> tuple[list[TrialRecord], list[dict]]:
    x = config.sweep[xi]
    ms = config.master_seed
    seed_col = _instance_seed(config, xi, trial)
    sizes = pareto_sizes(config.n, PARETO_SHAPE, (ms, PURPOSE_INSTANCE, xi, trial))
    records: list[TrialRecord] = []
    meta: list[dict] = []

    def rec(label: str, params: dict, alg: float, opt: float, errs=(0.0, 0.0, 0.0)) -> None:
        records.append(
            TrialRecord(
                config.figure, label, _params_str(params), float(x), trial, seed_col,
                alg, opt, alg / opt, errs[0], errs[1], errs[2],
            )
        )

    if config.figure == "smoothness_rho":
        alpha = config.arms[0].get("alpha")
        preds = _predictions(sizes, x, ms, xi, trial)
        inst = make_instance(
            sizes,
            [bar_from_prediction(alpha, pi, p, "delayed") for pi, p in zip(preds, sizes)],
            clairvoyant=False,
        )
        opt = opt_cost(inst)
        errs = error_terms(inst, alpha, firing_fractions(inst))
        for arm in config.arms:
            out = engine.run(inst, WindowedCommit(arm.get("alpha"), arm.get("rho")), "watched")
            rec(arm.label, dict(arm.params), out.total_cost, opt, errs)

    elif config.figure == "robustification":
        alpha = next((a.get("alpha") for a in config.arms if a.kind == "alg1"), 5.0 / 9.0)
        preds = _predictions(sizes, x, ms, xi, trial)
        inst = make_instance(
            sizes,
            [bar_from_prediction(alpha, pi, p, "delayed") for pi, p in zip(preds, sizes)],
            clairvoyant=False,
        )
        opt = opt_cost(inst)
        errs = error_terms(inst, alpha, firing_fractions(inst))
        order = sorted(range(config.n), key=lambda j: (preds[j], j))
        for arm in config.arms:
            if arm.kind == "ts":
                pol = TimeShare(arm.get("lambda"), FollowOrder(order), RoundRobin())
                out = engine.run(inst, pol, "watched")
                rec(arm.label, dict(arm.params), out.total_cost, opt, errs)
            elif arm.kind == "alg1":
                out = engine.run(inst, WindowedCommit(arm.get("alpha"), arm.get("rho")), "watched")
                rec(arm.label, dict(arm.params), out.total_cost, opt, errs)
            elif arm.kind == "combining":
                cands = [combining.order_candidate(order, "follow_pred"), combining.rr_candidate()]
                out, report = combining.combine(
                    inst, cands, seed=(ms, PURPOSE_SAMPLING, xi, trial)
                )
                rec(arm.label, {"m_pairs": float(report["pair_count"])}, out.total_cost, opt, errs)
                meta.append({"figure": config.figure, "x": float(x), "trial": trial, **report})
            else:
                raise ValueError(f"unknown arm kind: {arm.kind}")

    elif config.figure == "stochastic":
        g = int(x)
        bars = [
            poisson_bar(g, p, derive_rng(ms, PURPOSE_BARS, xi, trial, i))
            for i, p in enumerate(sizes)
        ]
        inst = make_instance(sizes, bars, clairvoyant=False)
        opt = opt_cost(inst)
        for arm in config.arms:
            if arm.kind == "retc":
                k = int(arm.get("k"))
                pol = ExploreThenCommit(k)
                params = {"k": float(k), "g": float(g)}
            elif arm.kind == "retc_tuned":
                k = tuned_commit_jump(g)
                pol = ExploreThenCommit(k)
                params = {"k": float(k), "g": float(g)}
            elif arm.kind == "rr":
                pol = RoundRobin()
                params = {"g": float(g)}
            elif arm.kind == "generic_etc":
                theta = min(1.0, g ** (-1.0 / 3.0))
                pol = ExploreThenRank(theta)
                params = {"threshold_fraction": theta, "g": float(g)}
            else:
                raise ValueError(f"unknown arm kind: {arm.kind}")
            out = engine.run(inst, pol, "watched")
            rec(arm.label, params, out.total_cost, opt)

    elif config.figure == "thm_checks":
        alpha = float(x)
        bars = [accurate_bar(alpha)] * config.n
        inst = make_instance(sizes, bars, clairvoyant=False)
        opt = opt_cost(inst)
        errs = error_terms(inst, alpha, firing_fractions(inst))
        for arm in config.arms:
            if arm.kind == "blind":
                out = engine.run(inst, CommitOnSignal(), "watched")
                rec(arm.label, {"alpha": alpha}, out.total_cost, opt, errs)
            elif arm.kind == "alg1_x":
                rho = arm.get("rho")
                out = engine.run(inst, WindowedCommit(alpha, rho), "watched")
                rec(arm.label, {"alpha": alpha, "rho": rho}, out.total_cost, opt, errs)
            elif arm.kind == "multi":
                m = int(arm.get("m"))
                inst_m = make_instance(sizes, bars, machines=m, clairvoyant=False)
                out = engine.run(inst_m, MultiMachineBoost(alpha, m), "watched")
                rec(arm.label, {"alpha": alpha, "m": float(m)}, out.total_cost, opt_cost(inst_m), errs)
            else:
                raise ValueError(f"unknown arm kind: {arm.kind}")

    else:
        raise ValueError(f"unknown figure: {config.figure}")

    return records, meta


def _predictions(sizes: Sequence[float], sigma: float, ms: int, xi: int, trial: int) -> list[float]:
    base = (ms, PURPOSE_PREDICTIONS, xi, trial)
    return [float(_rng(base + (i,)).normal(p, sigma)) for i, p in enumerate(sizes)]


def _cell_task(args: tuple[ExperimentConfig, int, int]):
    return _cell(*args)


# ---------------------------------------------------------------------------
# Figure pipeline
# ---------------------------------------------------------------------------

def run_figure(
    config: ExperimentConfig, out_dir: str | os.PathLike, workers: int = 1
) -> tuple[list[TrialRecord], str]:
    """Run every (sweep point, trial) cell, write <figure>.csv, return records.

    Cells are independent; with ``workers > 1`` they run in separate processes.
    Output order and draws depend only on the config, never on scheduling.
    """
    tasks = [
        (config, xi, trial)
        for xi in range(len(config.sweep))
        for trial in range(config.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_cell_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        cells = [_cell_task(t) for t in tasks]

    records = [r for recs, _ in cells for r in recs]
    meta = [m for _, ms_ in cells for m in ms_]

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{config.figure}.csv")
    with open(csv_path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for r in records:
            f.write(r.csv_row() + "\n")
    if meta:
        with open(os.path.join(out_dir, f"{config.figure}_combining.jsonl"), "w") as f:
            for m in meta:
                f.write(json.dumps(m, sort_keys=True) + "\n")
    return records, csv_path


def aggregate(records: Sequence[TrialRecord]) -> dict[tuple[str, float], tuple[float, float, int]]:
    """Mean, sample standard deviation, and count of the ratio per (algorithm, x)."""
    groups: dict[tuple[str, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.algorithm, r.x), []).append(r.ratio)
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals)
        std = float(arr.std(ddof=1)) if len(vals) > 1 else 0.0
        out[key] = (float(arr.mean()), std, len(vals))
    return out


# ---------------------------------------------------------------------------
# Randomized single-machine cases for cross-checks
# ---------------------------------------------------------------------------

RANDOM_CASE_POLICIES = ("RR", "SETF", "SPT", "BlindFollow", "Alg1", "RepeatedETC")


def random_case(seed, policy: str | None = None):
    """A small random instance plus a fresh-policy factory.

    Sizes are uniform on [0.1, 10); bars fit whatever the chosen policy needs.
    Windowed-commit thresholds keep clear of the commit/abort boundary so the
    exact engine and the grid oracle cannot disagree about the branch taken.
    """
    rng = _rng(_key(seed) + (982451653,))
    name = policy if policy is not None else RANDOM_CASE_POLICIES[int(rng.integers(0, 6))]
    n = int(rng.integers(2, 9))
    sizes = [float(0.1 + 9.9 * u) for u in rng.random(n)]

    if name == "RepeatedETC":
        from .bars import binomial_bar, stochastic_levels  # local: avoids unused import at top

        g = int(rng.integers(1, 4))
        bars = [binomial_bar(g, p, rng) for p in sizes]
        k = int(rng.integers(1, g + 2))
        factory = lambda: ExploreThenCommit(k)
        label = f"RepeatedETC(k={k},g={g})"
    else:
        alpha = 0.5
        if name == "Alg1":
            rho = (0.5, 1.0)[int(rng.integers(0, 2))]
            boundary = alpha * rho
            betas = []
            for u in rng.random(n):
                b = float(u)
                if abs(b - boundary) < 0.06:
                    b = min(1.0, b + 0.12)
                betas.append(b)
            factory = lambda: WindowedCommit(alpha, rho)
            label = f"Alg1(alpha={alpha},rho={rho})"
        else:
            betas = [float(u) for u in rng.random(n)]
            if name == "RR":
                factory = RoundRobin
            elif name == "SETF":
                from .policies import ShortestElapsedFirst

                factory = ShortestElapsedFirst
            elif name == "SPT":
                from .policies import ShortestFirst

                factory = lambda: ShortestFirst(machines=1)
            elif name == "BlindFollow":
                factory = CommitOnSignal
            else:
                raise ValueError(f"unknown policy name: {name}")
            label = name
        bars = [single_signal_bar(alpha, b) for b in betas]

    instance = make_instance(sizes, bars)
    return instance, factory, label


# ---------------------------------------------------------------------------
# Tail-probability check for the stochastic commit rule
# ---------------------------------------------------------------------------

def check_high_probability_etc(
    g: int, k: int, epsilon: float, n: int, trials: int, master_seed: int = 0
) -> dict:
    """Empirical rate of ratio > 1 + 3*epsilon + 4k/g over Poisson-bar runs.

    Raises AssertionError if the rate exceeds the predicted tail probability
    2n*exp(-epsilon^2 k/7) plus three binomial standard errors.
    """
    ratio_bound = 1.0 + 3.0 * epsilon + 4.0 * k / g
    violations = 0
    for t in range(trials):
        sizes = pareto_sizes(n, PARETO_SHAPE, (master_seed, PURPOSE_INSTANCE, 0, t))
        bars = [
            poisson_bar(g, p, derive_rng(master_seed, PURPOSE_BARS, 0, t, i))
            for i, p in enumerate(sizes)
        ]
        inst = make_instance(sizes, bars, clairvoyant=False)
        out = engine.run(inst, ExploreThenCommit(k), "watched")
        if out.total_cost / opt_cost(inst) > ratio_bound + 1e-12:
            violations += 1
    rate = violations / trials
    prob_bound = 2.0 * n * math.exp(-(epsilon**2) * k / 7.0)
    se = math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    if rate > prob_bound + 3.0 * se:
        raise AssertionError(
            f"violation rate {rate} exceeds tail bound {prob_bound} + 3se ({se})"
        )
    return {
        "rate": rate,
        "ratio_bound": ratio_bound,
        "prob_bound": prob_bound,
        "se": se,
        "trials": trials,
    }
