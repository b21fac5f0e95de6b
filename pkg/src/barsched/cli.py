"""Command-line interface.

Four commands:

* ``simulate`` — run one policy on one instance file, print completions,
  total cost, the optimum, and their ratio (optionally the event log).
* ``opt`` — print just the optimum for an instance file.
* ``figure`` — run a named experiment preset (or a config file) and write its
  CSV under the output directory (``--out``, else $BARSCHED_OUT_DIR, else
  ``./out``).
* ``verify`` — run a seeded invariant suite; exits 1 listing any violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import engine, experiments
from .bars import poisson_jump_points, derive_rng
from .model import check_delay_decomposition, event_log_dump, instance_from_json, opt_cost
from .policies import RoundRobin, policy_from_config

VERIFY_SUITES = ("decomposition", "opt-bound", "bar-stats", "all")


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _load_instance(path: str):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise SystemExit(_fail(str(e)))
    try:
        return instance_from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise SystemExit(_fail(f"bad instance file {path}: {e}"))


def _cmd_simulate(args) -> int:
    instance = _load_instance(args.instance)
    try:
        policy = policy_from_config(json.loads(args.policy))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        return _fail(f"bad policy config: {e}")
    try:
        out = engine.run(instance, policy)
    except ValueError as e:
        return _fail(str(e))
    for j, c in enumerate(out.completion):
        print(f"C_{j}={c:.10g}")
    opt = opt_cost(instance)
    print(f"ALG={out.total_cost:.10g}")
    print(f"OPT={opt:.10g}")
    print(f"ratio={out.total_cost / opt:.10g}")
    if args.dump_events:
        dump = event_log_dump(out.event_log)
        if dump:
            print(dump)
    return 0


def _cmd_opt(args) -> int:
    instance = _load_instance(args.instance)
    print(f"{opt_cost(instance):.10g}")
    return 0


def _cmd_figure(args) -> int:
    if (args.preset is None) == (args.config is None):
        return _fail("provide exactly one of --preset or --config")
    overrides: dict = {}
    if args.preset is not None:
        name = args.preset
    else:
        try:
            with open(args.config) as f:
                doc = json.load(f)
        except OSError as e:
            return _fail(str(e))
        except json.JSONDecodeError as e:
            return _fail(f"bad config file {args.config}: {e}")
        if not isinstance(doc, dict) or "figure" not in doc:
            return _fail("config file needs a 'figure' field")
        name = doc["figure"]
        for key in ("n", "trials", "master_seed", "sweep"):
            if key in doc:
                overrides[key] = doc[key]
    if args.n is not None:
        overrides["n"] = args.n
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.sweep is not None:
        try:
            overrides["sweep"] = tuple(float(s) for s in args.sweep.split(","))
        except ValueError:
            return _fail(f"bad sweep list: {args.sweep}")
    try:
        config = experiments.preset(name, **overrides)
    except (TypeError, ValueError) as e:
        return _fail(str(e))
    out_dir = args.out or os.environ.get("BARSCHED_OUT_DIR", "./out")
    _, csv_path = experiments.run_figure(config, out_dir, workers=args.jobs)
    print(csv_path)
    return 0


# ---------------------------------------------------------------------------
# verify suites
# ---------------------------------------------------------------------------

def _suite_decomposition(seed: int) -> list[tuple[str, int]]:
    fails = []
    for i in range(60):
        inst, factory, label = experiments.random_case((seed, i))
        out = engine.run(inst, factory())
        if not check_delay_decomposition(out, inst, 1e-9):
            fails.append((f"delay-decomposition[{label}]", i))
    return fails


def _suite_opt_bound(seed: int) -> list[tuple[str, int]]:
    fails = []
    for i in range(60):
        inst, factory, label = experiments.random_case((seed, i))
        alg = engine.run(inst, factory()).total_cost
        opt = opt_cost(inst)
        if alg < opt * (1.0 - 1e-9):
            fails.append((f"optimum-lower-bound[{label}]", i))
        rr = engine.run(inst, RoundRobin()).total_cost
        if rr > 2.0 * opt * (1.0 + 1e-9):
            fails.append(("round-robin-2-competitive", i))
    return fails


def _suite_bar_stats(seed: int) -> list[tuple[str, int]]:
    fails = []
    g, draws = 10, 20_000
    rng = derive_rng(seed, 424242)
    first = [float(poisson_jump_points(g, rng)[0]) for _ in range(draws)]
    mean = sum(first) / draws
    se = (1.0 / g) / draws**0.5
    if abs(mean - 1.0 / g) > 5.0 * se:
        fails.append(("poisson-first-jump-mean", seed))
    return fails


def _cmd_verify(args) -> int:
    suites = {
        "decomposition": _suite_decomposition,
        "opt-bound": _suite_opt_bound,
        "bar-stats": _suite_bar_stats,
    }
    if args.suite == "all":
        names = [s for s in VERIFY_SUITES if s != "all"]
    elif args.suite in suites:
        names = [args.suite]
    else:
        return _fail(f"unknown suite: {args.suite}")
    failures = []
    for name in names:
        failures.extend(suites[name](args.seed))
    if failures:
        for prop, s in failures:
            print(f"FAIL {prop} seed={s}")
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barsched")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one policy on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True, help="policy config as a JSON string")
    p.add_argument("--dump-events", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("opt", help="print the optimal total completion time")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=_cmd_opt)

    p = sub.add_parser("figure", help="run an experiment preset and write its CSV")
    p.add_argument("--preset", choices=experiments.PRESET_NAMES)
    p.add_argument("--config", help="JSON config file (overrides preset defaults)")
    p.add_argument("--out", help="output directory (default $BARSCHED_OUT_DIR or ./out)")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep", help="comma-separated x values")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: all cores)")
    p.set_defaults(func=_cmd_figure)

    p = sub.add_parser("verify", help="run a seeded invariant suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
