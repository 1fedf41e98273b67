"""Command-line front end: instance I/O, solver runs, exact and greedy
baselines, corpus generation and a benchmark table with figures.

Exit codes: 0 success, 1 internal error (and an infeasible verdict from
``validate``), 2 input or validation failure, 3 size or budget limits.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import time

from .errors import ConfigurationBudgetError, InputError, SizeLimitError
from .figures import render_bench_figures
from .greedy import GreedyConfig
from .instance import (
    Assignment,
    assignment_value,
    check_feasible,
    dumps_canonical,
    generate_instance,
    parse_instance,
    serialize_instance,
)
from .pipeline import (
    PipelineParams,
    SolveReport,
    parameters_for_target_gap,
    solve,
    solve_exact,
    solve_greedy,
)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except FileNotFoundError:
        raise InputError(f"file not found: {path}")


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _load_instance(path: str):
    return parse_instance(_read(path))


def _params_dict(params: PipelineParams) -> dict:
    return {
        "xi": params.xi,
        "leveling_n": params.leveling_n,
        "mu": params.mu,
        "delta": params.delta,
        "repetitions": params.repetitions,
        "mode": params.mode,
        "epsilon": params.epsilon,
        "steps": params.greedy.steps,
        "samples": params.greedy.samples,
        "threads": params.threads,
    }


def _report_dict(report: SolveReport) -> dict:
    return {
        "value": report.best_value,
        "assignment": report.best_assignment.to_dict(),
        "params": _params_dict(report.params),
        "seed": report.seed,
        "diagnostics": {
            "gamma_bound": report.gamma_bound,
            "gamma_opt_estimate": report.gamma_opt_estimate,
            "trials": report.total_trials,
            "membership_failures": report.total_membership_failures,
            "oracle_calls": report.oracle_calls,
            "branches": report.branch_count,
        },
        "runtime_ms": round(report.runtime_seconds * 1000.0, 3),
        "timestamp": _now(),
    }


def _emit(args, payload: dict):
    text = dumps_canonical(payload)
    if getattr(args, "out", None):
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def _build_params(args) -> PipelineParams:
    mode = args.mode.replace("-", "_")
    greedy = GreedyConfig(steps=args.steps, samples=args.samples, seed=args.seed,
                          track_values=bool(getattr(args, "trace", None)))
    if args.epsilon is not None:
        if mode != "paper_faithful":
            raise InputError("--epsilon requires --mode paper-faithful")
        return parameters_for_target_gap(
            args.epsilon, repetitions=args.repetitions, greedy=greedy,
            seed=args.seed, threads=args.threads,
            max_branches=args.max_branches, config_cap=args.config_cap)
    if mode == "paper_faithful":
        raise InputError("--mode paper-faithful requires --epsilon")
    return PipelineParams(
        xi=args.xi, leveling_n=args.leveling_n, mu=args.mu, delta=args.delta,
        repetitions=args.repetitions, mode=mode, greedy=greedy, seed=args.seed,
        threads=args.threads, max_branches=args.max_branches,
        config_cap=args.config_cap)


def cmd_solve(args) -> int:
    instance = _load_instance(args.instance)
    params = _build_params(args)
    report = solve(instance, params)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as handle:
            for row in report.winning_trace:
                handle.write(json.dumps(row, sort_keys=True) + "\n")
    _emit(args, _report_dict(report))
    return 0


def cmd_exact(args) -> int:
    instance = _load_instance(args.instance)
    start = time.perf_counter()
    result = solve_exact(instance)
    payload = {
        "value": result.value,
        "assignment": result.assignment.to_dict(),
        "nodes": result.nodes,
        "runtime_ms": round((time.perf_counter() - start) * 1000.0, 3),
        "timestamp": _now(),
    }
    _emit(args, payload)
    return 0


def cmd_greedy(args) -> int:
    instance = _load_instance(args.instance)
    start = time.perf_counter()
    result = solve_greedy(instance)
    payload = {
        "value": result.value,
        "assignment": result.assignment.to_dict(),
        "runtime_ms": round((time.perf_counter() - start) * 1000.0, 3),
        "timestamp": _now(),
    }
    _emit(args, payload)
    return 0


def cmd_generate(args) -> int:
    instance = generate_instance(args.kind, args.items, args.bins, args.seed,
                                 capacity_profile=args.profile)
    text = serialize_instance(instance)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    data = json.loads(_read(args.assignment))
    if isinstance(data, dict) and "assignment" in data:
        data = data["assignment"]
    assignment = Assignment.from_dict(data)
    verdict = check_feasible(instance, assignment)
    value = assignment_value(instance, assignment)
    if verdict:
        print(f"feasible (value {value:.6g})")
        return 0
    print(f"infeasible: {verdict.violation}")
    return 1


_BENCH_COLUMNS = [
    "instance", "seed", "opt", "pipeline_value", "greedy_value",
    "pipeline_ratio", "greedy_ratio", "exact_ms", "pipeline_ms", "greedy_ms",
    "oracle_calls",
]


def cmd_bench(args) -> int:
    paths = sorted(
        os.path.join(args.corpus, name)
        for name in os.listdir(args.corpus)
        if name.endswith(".json")
    )
    if not paths:
        raise InputError(f"no instance files in {args.corpus}")
    rows = []
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        instance = _load_instance(path)
        t0 = time.perf_counter()
        exact = solve_exact(instance)
        exact_ms = (time.perf_counter() - t0) * 1000.0
        t0 = time.perf_counter()
        baseline = solve_greedy(instance)
        greedy_ms = (time.perf_counter() - t0) * 1000.0
        for shift in range(args.seeds):
            run_args = argparse.Namespace(**vars(args))
            run_args.seed = args.seed + shift
            run_args.trace = None
            params = _build_params(run_args)
            fresh = parse_instance(_read(path))  # fresh oracle counter per run
            report = solve(fresh, params)
            opt = exact.value
            rows.append({
                "instance": name,
                "seed": run_args.seed,
                "opt": opt,
                "pipeline_value": report.best_value,
                "greedy_value": baseline.value,
                "pipeline_ratio": report.best_value / opt if opt > 0 else 1.0,
                "greedy_ratio": baseline.value / opt if opt > 0 else 1.0,
                "exact_ms": round(exact_ms, 3),
                "pipeline_ms": round(report.runtime_seconds * 1000.0, 3),
                "greedy_ms": round(greedy_ms, 3),
                "oracle_calls": report.oracle_calls,
            })
    mean_ratio = sum(r["pipeline_ratio"] for r in rows) / len(rows)
    mean_greedy = sum(r["greedy_ratio"] for r in rows) / len(rows)
    summary = {
        "instance": "summary",
        "seed": "",
        "opt": "",
        "pipeline_value": "",
        "greedy_value": "",
        "pipeline_ratio": round(mean_ratio, 6),
        "greedy_ratio": round(mean_greedy, 6),
        "exact_ms": "",
        "pipeline_ms": "",
        "greedy_ms": "",
        "oracle_calls": "",
    }
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=_BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        writer.writerow(summary)
    figures = render_bench_figures(rows, args.out)
    print(f"mean pipeline/OPT ratio: {mean_ratio:.4f} over {len(rows)} runs")
    for path in figures:
        print(f"figure: {path}")
    return 0


def _add_solver_flags(sub, bench: bool = False):
    sub.add_argument("--xi", type=int, default=2, help="enumeration size bound")
    sub.add_argument("--leveling-n", type=int, default=2, dest="leveling_n",
                     help="leveling base N")
    sub.add_argument("--mu", type=float, default=0.1, help="rounding slack")
    sub.add_argument("--delta", type=float, default=0.25,
                     help="smallness fraction for restricted bins")
    sub.add_argument("--repetitions", type=int, default=30,
                     help="independent rounding trials")
    sub.add_argument("--epsilon", type=float, default=None,
                     help="target gap (paper-faithful mode only)")
    sub.add_argument("--mode", choices=["practical", "paper-faithful"],
                     default="practical")
    sub.add_argument("--steps", type=int, default=12 if bench else 100,
                     help="continuous greedy steps")
    sub.add_argument("--samples", type=int, default=24 if bench else 200,
                     help="gradient samples per step")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sub.add_argument("--max-branches", type=int, default=1_000_000,
                     dest="max_branches")
    sub.add_argument("--config-cap", type=int, default=10 ** 6, dest="config_cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smkp",
        description="Submodular multiple knapsack solver",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("solve", help="run the approximation pipeline")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--out", default=None)
    sub.add_argument("--trace", default=None,
                     help="write the winning branch's per-step trace (LDJSON)")
    _add_solver_flags(sub)
    sub.set_defaults(func=cmd_solve)

    sub = subs.add_parser("exact", help="exhaustive optimum (desk scale)")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_exact)

    sub = subs.add_parser("greedy", help="density greedy baseline")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_greedy)

    sub = subs.add_parser("generate", help="write a random instance")
    sub.add_argument("--kind", required=True,
                     choices=["coverage", "modular", "group_saturation"])
    sub.add_argument("--items", type=int, required=True)
    sub.add_argument("--bins", type=int, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--profile", default="random",
                     choices=["uniform", "geometric", "random"])
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_generate)

    sub = subs.add_parser("validate", help="check an assignment against an instance")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--assignment", required=True)
    sub.set_defaults(func=cmd_validate)

    sub = subs.add_parser("bench", help="corpus sweep with CSV table and figures")
    sub.add_argument("--corpus", required=True, help="directory of instance JSONs")
    sub.add_argument("--seeds", type=int, default=3)
    sub.add_argument("--out", required=True, help="CSV output path")
    _add_solver_flags(sub, bench=True)
    sub.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SizeLimitError, ConfigurationBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
