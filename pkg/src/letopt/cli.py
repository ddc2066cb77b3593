"""Command-line entry points.

Subcommands:
  analyze   intervals, primary chains, and latencies of one task set
  optimize  dependency search + skip planning, optionally emitting the
            transformed periodic task set
  bench     generate/optimize batches and aggregate results into CSV
  generate  emit synthetic task sets from a profile

Exit codes: 0 success, 1 usage error, 2 parse/validation error,
3 infeasible task set, 4 internal-consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import report as rep
from .chains import analyze_chains
from .errors import ConsistencyError, InfeasibleError, LetOptError, SchemaError, UsageError
from .generator import BUILTIN_PROFILES, GeneratorProfile, generate_task_set, profile_from_dict
from .intervals import classic_intervals
from .model import normalize_priorities, parse_task_set, task_set_to_json
from .pipeline import classic_latencies, evaluate
from .search import ALL_CORES, SAME_CORE, SearchConfig, run_search
from .transform import split_and_assign, verify_equivalence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_CONSISTENCY = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_task_set(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(path, f"cannot read task set: {exc}") from None
    return parse_task_set(text)


def _parse_weights(text: str) -> tuple[Fraction, Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--weights expects three comma-separated values: u,m,a")
    try:
        return tuple(Fraction(p.strip()) for p in parts)  # type: ignore[return-value]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse weights {text!r}") from None


def _search_config(args) -> SearchConfig:
    if args.weights and args.lexicographic:
        raise UsageError("--weights and --lexicographic are mutually exclusive")
    weights = _parse_weights(args.weights) if args.weights else None
    return SearchConfig(
        timeout=args.timeout,
        max_nodes=args.max_nodes,
        lexicographic=weights is None,
        weights=weights,
        scope=args.scope,
        chain_order=args.chain_order,
        seed=args.seed,
    )


def _load_profile(name_or_path: str) -> GeneratorProfile:
    factory = BUILTIN_PROFILES.get(name_or_path)
    if factory is not None:
        return factory()
    try:
        data = json.loads(Path(name_or_path).read_text())
    except OSError as exc:
        raise UsageError(f"unknown profile {name_or_path!r} ({exc})") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(name_or_path, f"invalid profile JSON: {exc}") from None
    return profile_from_dict(data)


def cmd_analyze(args) -> int:
    ts = _load_task_set(args.taskset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation = evaluate(ts)  # also the feasibility gate for classic mode
    utilization = ts.system_utilization()
    schedule = evaluation.schedule
    if args.mode == "classic":
        intervals = classic_intervals(ts)
        primaries, latencies = analyze_chains(ts, intervals)
    else:
        intervals = evaluation.intervals
        primaries = evaluation.primaries
        latencies = evaluation.metrics.latencies
    rep.write_interval_json(intervals, out / "intervals.json")
    rep.write_json(rep.chain_report(primaries, latencies), out / "chains.json")
    rep.write_schedule_json(schedule, out / "schedule.json")
    rep.write_json({
        "mode": args.mode,
        "utilization": float(utilization),
        "utilization_exact": rep.frac_str(utilization),
        "mrt": {cid: latencies[cid][0] for cid in sorted(latencies)},
        "mda": {cid: latencies[cid][1] for cid in sorted(latencies)},
    }, out / "analysis.json")
    if args.figures:
        rep.render_schedule_figure(ts, schedule, out / "schedule.png",
                                   title=f"{Path(args.taskset).stem} ({args.mode})")
    print(f"mode={args.mode} utilization={float(utilization):.4f}")
    for cid in sorted(latencies):
        print(f"chain {cid}: MRT={latencies[cid][0]} MDA={latencies[cid][1]}")
    return EXIT_OK


def _optimize_one(ts, config: SearchConfig, *, emit_transformed: bool,
                  seed=None, gen_retries=None):
    classic = classic_latencies(ts)
    result = run_search(ts, config)
    best = result.best
    evaluation = best.evaluation
    transform_info = None
    transform_result = None
    if emit_transformed:
        transform_result = split_and_assign(evaluation.shifted, evaluation.intervals,
                                            evaluation.skip_plan, best.deps)
        check = verify_equivalence(evaluation.shifted, best.deps, evaluation.skip_plan,
                                   evaluation.intervals, transform_result)
        fallback = False
        if not check.equivalent:
            # The priority construction cannot reproduce this node's
            # schedule; fall back to the root, which always verifies.
            fallback = True
            best = result.root
            evaluation = best.evaluation
            transform_result = split_and_assign(evaluation.shifted, evaluation.intervals,
                                                evaluation.skip_plan, best.deps)
            check = verify_equivalence(evaluation.shifted, best.deps, evaluation.skip_plan,
                                       evaluation.intervals, transform_result)
        transform_info = {
            "equivalent": check.equivalent,
            "fallback_to_root": fallback,
            "split_tasks": {k: list(v) for k, v in sorted(transform_result.split_tasks.items())},
            "latencies": {k: list(v) for k, v in sorted(check.latencies.items())},
            "first_divergence": check.first_divergence,
        }
    run_report = rep.RunReport(
        unit=ts.unit,
        cores=len(ts.cores),
        tasks=len(ts.tasks),
        chains=len(ts.chains),
        baseline_utilization=ts.system_utilization(),
        classic_latencies={cid: v[0] for cid, v in classic.items()},
        schedule_aware_latencies={cid: v[0]
                                  for cid, v in result.root.metrics.latencies.items()},
        optimized_utilization=best.metrics.utilization,
        optimized_latencies={cid: v[0] for cid, v in best.metrics.latencies.items()},
        dependencies=[str(d) for d in best.deps.canonical()],
        skipped_per_window=evaluation.skip_plan.skipped_per_window(),
        nodes_evaluated=result.nodes_evaluated,
        nodes_expanded=result.nodes_expanded,
        stopped_by=result.stopped_by,
        wall_time_s=result.wall_time,
        transform=transform_info,
        gen_retries=gen_retries,
        seed=seed,
    )
    return run_report, result, best, evaluation, transform_result


def cmd_optimize(args) -> int:
    ts = _load_task_set(args.taskset)
    config = _search_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_report, result, best, evaluation, transform_result = _optimize_one(
        ts, config, emit_transformed=args.emit_transformed)

    rep.write_json(run_report.to_dict(), out / "run_report.json")
    rep.write_json([str(d) for d in best.deps.canonical()], out / "dependencies.json")
    rep.write_json(rep.skip_plan_report(evaluation.skip_plan, ts.system_utilization()),
                   out / "skip_plan.json")
    with (out / "audit.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "parent_id", "added", "utilization",
                         "total_mrt", "total_mda", "feasible_children", "best_objective"])
        for entry in result.audit:
            writer.writerow([entry.node_id, entry.parent_id, entry.added,
                             rep.frac_str(entry.utilization), entry.total_mrt,
                             entry.total_mda, entry.feasible_children,
                             "|".join(str(x) for x in entry.best_objective)])
    (out / "timing.json").write_text(json.dumps(
        {"wall_time_s": result.wall_time}, indent=2) + "\n")
    if args.emit_transformed and transform_result is not None:
        Path(out / "transformed_taskset.json").write_text(
            task_set_to_json(normalize_priorities(transform_result.task_set)))
        rep.write_json({
            "splits": transform_result.mapping,
            "chains": [{"id": c.id, "members": list(c.members)}
                       for c in transform_result.original_chains],
        }, out / "transform_mapping.json")
    if args.figures:
        rep.render_schedule_figure(ts, result.root.evaluation.schedule,
                                   out / "schedule_root.png", title="root schedule")
        rep.render_schedule_figure(ts, evaluation.schedule,
                                   out / "schedule_optimized.png", title="optimized schedule")

    d = run_report.to_dict()
    print(f"utilization {d['baseline_classic']['utilization']:.4f} -> "
          f"{d['optimized']['utilization']:.4f}")
    for cid in sorted(best.metrics.latencies):
        print(f"chain {cid}: MRT {run_report.classic_latencies[cid]} -> "
              f"{run_report.optimized_latencies[cid]}")
    if run_report.transform is not None:
        print(f"transform: equivalent={run_report.transform['equivalent']} "
              f"fallback={run_report.transform['fallback_to_root']}")
    return EXIT_OK


def cmd_bench(args) -> int:
    profile = _load_profile(args.profile)
    config = _search_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    failures = []
    t_start = time.monotonic()
    for n in range(args.count):
        seed = args.seed + n
        try:
            ts, retries = generate_task_set(profile, seed)
        except LetOptError as exc:
            failures.append({"seed": seed, "error": str(exc)})
            print(f"seed {seed}: generation failed ({exc})", file=sys.stderr)
            continue
        run_report, *_ = _optimize_one(ts, config, emit_transformed=args.emit_transformed,
                                       seed=seed, gen_retries=retries)
        rows.append(run_report.bench_row())
        print(f"seed {seed}: util {rows[-1]['util_baseline']} -> {rows[-1]['util_optimized']} "
              f"normMRT {rows[-1]['mrt_norm_classic_median']} "
              f"({time.monotonic() - t_start:.0f}s elapsed)", file=sys.stderr)
    rep.write_bench_csv(rows, out / "bench.csv")
    rep.write_json({"profile": profile.name, "count": args.count, "seed": args.seed,
                    "generation_failures": failures}, out / "bench_meta.json")
    (out / "timing.json").write_text(json.dumps(
        {"wall_time_s": time.monotonic() - t_start}, indent=2) + "\n")
    if args.figures and rows:
        rep.render_bench_figures(rows, out)
    print(f"wrote {len(rows)} rows to {out / 'bench.csv'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    profile = _load_profile(args.profile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(args.count):
        seed = args.seed + n
        ts, retries = generate_task_set(profile, seed)
        path = out / f"taskset_{profile.name}_{seed}.json"
        path.write_text(task_set_to_json(ts))
        print(f"seed {seed}: {len(ts.tasks)} tasks, {len(ts.chains)} chains, "
              f"{retries} retries -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="letopt", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_search_args(p):
        p.add_argument("--timeout", type=float, default=None,
                       help="wall-clock search budget in seconds")
        p.add_argument("--max-nodes", type=int, default=None,
                       help="evaluated-node budget (deterministic results)")
        p.add_argument("--weights", default=None,
                       help="objective weights u,m,a (enables weighted mode)")
        p.add_argument("--lexicographic", action="store_true",
                       help="lexicographic (utilization, MRT, MDA) objective (default)")
        p.add_argument("--scope", choices=[SAME_CORE, ALL_CORES], default=SAME_CORE)
        p.add_argument("--chain-order", choices=["descending", "ascending"],
                       default="descending")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--emit-transformed", action="store_true",
                       help="emit the equivalent purely periodic task set")
        p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("analyze", help="intervals, chains, latencies of a task set")
    p.add_argument("taskset")
    p.add_argument("--mode", choices=["classic", "schedule-aware"],
                   default="schedule-aware")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="search dependencies, plan skips")
    p.add_argument("taskset")
    add_search_args(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="generate and optimize batches")
    p.add_argument("--profile", default="automotive",
                   help="automotive | synthetic | path to a profile JSON")
    p.add_argument("--count", type=int, default=50)
    add_search_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="emit synthetic task sets")
    p.add_argument("--profile", default="automotive")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) in ("optimize", "bench"):
            if args.timeout is None and args.max_nodes is None:
                args.max_nodes = 5000
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConsistencyError as exc:
        print(f"internal consistency: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except LetOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
