"""Machine-readable reports and rendered figures.

JSON and CSV outputs are byte-deterministic for fixed inputs and seeds
(wall-clock timings go to a separate volatile file). Figures are rendered
alongside the delimited output for quick inspection; the CSV remains the
interface of record.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .intervals import interval_report  # noqa: E402
from .model import TaskSet  # noqa: E402
from .scheduler import Schedule, schedule_trace  # noqa: E402

BENCH_SCHEMA_VERSION = 1

BENCH_COLUMNS = [
    "schema_version", "seed", "gen_retries", "tasks", "chains",
    "util_baseline", "util_optimized", "util_reduction_pct",
    "mrt_norm_classic_median", "mrt_norm_classic_mean",
    "mrt_norm_schedaware_median", "mrt_norm_schedaware_mean",
    "dependencies", "skipped_per_window", "nodes_evaluated",
]

_FIG_METADATA = {"Software": "letopt"}


def frac_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def write_json(payload, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def chain_report(primaries, latencies) -> list[dict]:
    rows = []
    for chain_id in sorted(primaries):
        primary = primaries[chain_id]
        mrt, mda = latencies[chain_id]
        rows.append({
            "chain": chain_id,
            "window_start": primary.window_start,
            "window_length": primary.window_length,
            "primary_chains": [
                {
                    "jobs": [str(j) for j in c.jobs],
                    "sampling_instant": c.sampling_instant,
                    "output_instant": c.output_instant,
                }
                for c in primary.chains
            ],
            "mrt": mrt,
            "mda": mda,
        })
    return rows


def skip_plan_report(plan, baseline: Fraction | None = None) -> dict:
    payload = {
        "skipped_jobs_per_window": [str(j) for j in plan.skipped_jobs],
        "skipped_residues": {t: sorted(v) for t, v in plan.skipped_residues.items() if v},
        "task_windows": {t: {"window": w, "jobs_per_window": n}
                         for t, (w, n) in sorted(plan.task_windows.items())},
        "per_core_utilization": {c: float(u) for c, u in sorted(plan.per_core_utilization.items())},
        "per_core_utilization_exact": {c: frac_str(u)
                                       for c, u in sorted(plan.per_core_utilization.items())},
        "system_utilization": float(plan.system_utilization),
        "system_utilization_exact": frac_str(plan.system_utilization),
    }
    if baseline is not None:
        payload["system_utilization_before"] = float(baseline)
        payload["system_utilization_before_exact"] = frac_str(baseline)
    return payload


@dataclass
class RunReport:
    """Everything one optimization run reports about one task set."""

    unit: str
    cores: int
    tasks: int
    chains: int
    baseline_utilization: Fraction
    classic_latencies: dict[str, int]
    schedule_aware_latencies: dict[str, int]
    optimized_utilization: Fraction
    optimized_latencies: dict[str, int]
    dependencies: list[str]
    skipped_per_window: int
    nodes_evaluated: int
    nodes_expanded: int
    stopped_by: str
    wall_time_s: float
    transform: dict | None = None
    gen_retries: int | None = None
    seed: int | None = None

    def normalized_mrt(self, against: dict[str, int]) -> dict[str, float]:
        return {cid: self.optimized_latencies[cid] / against[cid]
                for cid in sorted(against) if against[cid]}

    def to_dict(self) -> dict:
        vs_classic = self.normalized_mrt(self.classic_latencies)
        vs_aware = self.normalized_mrt(self.schedule_aware_latencies)
        payload = {
            "task_set": {
                "unit": self.unit, "cores": self.cores,
                "tasks": self.tasks, "chains": self.chains,
            },
            "baseline_classic": {
                "utilization": float(self.baseline_utilization),
                "utilization_exact": frac_str(self.baseline_utilization),
                "mrt": dict(sorted(self.classic_latencies.items())),
            },
            "baseline_schedule_aware": {
                "utilization": float(self.baseline_utilization),
                "utilization_exact": frac_str(self.baseline_utilization),
                "mrt": dict(sorted(self.schedule_aware_latencies.items())),
            },
            "optimized": {
                "utilization": float(self.optimized_utilization),
                "utilization_exact": frac_str(self.optimized_utilization),
                "mrt": dict(sorted(self.optimized_latencies.items())),
                "dependencies": list(self.dependencies),
                "skipped_jobs_per_window": self.skipped_per_window,
            },
            "normalized_mrt": {
                "vs_classic": {k: round(v, 6) for k, v in vs_classic.items()},
                "vs_schedule_aware": {k: round(v, 6) for k, v in vs_aware.items()},
            },
            "search": {
                "nodes_evaluated": self.nodes_evaluated,
                "nodes_expanded": self.nodes_expanded,
                "stopped_by": self.stopped_by,
            },
        }
        if self.transform is not None:
            payload["transform"] = self.transform
        if self.seed is not None:
            payload["seed"] = self.seed
        if self.gen_retries is not None:
            payload["generation_retries"] = self.gen_retries
        return payload

    def bench_row(self) -> dict:
        vs_classic = list(self.normalized_mrt(self.classic_latencies).values())
        vs_aware = list(self.normalized_mrt(self.schedule_aware_latencies).values())
        reduction = 0.0
        if self.baseline_utilization:
            reduction = float(
                100 * (1 - self.optimized_utilization / self.baseline_utilization))
        return {
            "schema_version": BENCH_SCHEMA_VERSION,
            "seed": self.seed,
            "gen_retries": self.gen_retries,
            "tasks": self.tasks,
            "chains": self.chains,
            "util_baseline": f"{float(self.baseline_utilization):.6f}",
            "util_optimized": f"{float(self.optimized_utilization):.6f}",
            "util_reduction_pct": f"{reduction:.6f}",
            "mrt_norm_classic_median": f"{statistics.median(vs_classic):.6f}" if vs_classic else "",
            "mrt_norm_classic_mean": f"{statistics.fmean(vs_classic):.6f}" if vs_classic else "",
            "mrt_norm_schedaware_median": f"{statistics.median(vs_aware):.6f}" if vs_aware else "",
            "mrt_norm_schedaware_mean": f"{statistics.fmean(vs_aware):.6f}" if vs_aware else "",
            "dependencies": len(self.dependencies),
            "skipped_per_window": self.skipped_per_window,
            "nodes_evaluated": self.nodes_evaluated,
        }


def write_bench_csv(rows: list[dict], path: Path) -> None:
    """One row per task set ordered by seed, plus an aggregate summary row
    (median of the medians, mean of the means)."""
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        if rows:
            writer.writerow(_summary_row(rows))


def _summary_row(rows: list[dict]) -> dict:
    def col(name):
        return [float(r[name]) for r in rows if r[name] != ""]

    summary = {c: "" for c in BENCH_COLUMNS}
    summary["schema_version"] = BENCH_SCHEMA_VERSION
    summary["seed"] = "summary"
    summary["tasks"] = sum(int(r["tasks"]) for r in rows)
    summary["chains"] = sum(int(r["chains"]) for r in rows)
    for name in ("util_baseline", "util_optimized", "util_reduction_pct",
                 "mrt_norm_classic_median", "mrt_norm_schedaware_median"):
        values = col(name)
        summary[name] = f"{statistics.median(values):.6f}" if values else ""
    for name in ("mrt_norm_classic_mean", "mrt_norm_schedaware_mean"):
        values = col(name)
        summary[name] = f"{statistics.fmean(values):.6f}" if values else ""
    summary["dependencies"] = sum(int(r["dependencies"]) for r in rows)
    summary["skipped_per_window"] = sum(int(r["skipped_per_window"]) for r in rows)
    summary["nodes_evaluated"] = sum(int(r["nodes_evaluated"]) for r in rows)
    return summary


def write_interval_json(interval_map, path: Path) -> None:
    write_json(interval_report(interval_map), path)


def write_schedule_json(schedule: Schedule, path: Path) -> None:
    write_json(schedule_trace(schedule), path)


def render_schedule_figure(task_set: TaskSet, schedule: Schedule, path: Path,
                           window: tuple[int, int] | None = None,
                           title: str = "schedule") -> None:
    """Gantt-style rendering: one lane per core, one bar per execution
    slice, colored by task."""
    if window is None:
        lo = 0
        hi = min(schedule.horizon,
                 max((phi + h for phi, h in schedule.core_windows.values()), default=1))
    else:
        lo, hi = window
    cores = [c for c in task_set.cores if task_set.core_tasks[c]]
    # keep the figure renderable for very dense schedules
    starts = sorted(a for c in cores for _, a, _ in schedule.core_segments[c]
                    if lo <= a < hi)
    if len(starts) > 4000:
        hi = starts[4000]
    colors = plt.cm.tab20.colors
    task_color = {t.id: colors[i % len(colors)] for i, t in enumerate(task_set.tasks)}

    fig, ax = plt.subplots(figsize=(10, 1.2 + 0.8 * len(cores)))
    labeled = set()
    for lane, core in enumerate(cores):
        for job, a, b in schedule.core_segments[core]:
            if b <= lo or a >= hi:
                continue
            label = job.task if job.task not in labeled else None
            if label:
                labeled.add(job.task)
            ax.barh(lane, min(b, hi) - max(a, lo), left=max(a, lo), height=0.6,
                    color=task_color[job.task], edgecolor="black", linewidth=0.3,
                    label=label)
    ax.set_yticks(range(len(cores)), cores)
    ax.set_xlim(lo, hi)
    ax.set_xlabel(f"time [{task_set.unit}]")
    ax.set_title(title)
    if len(task_set.tasks) <= 12:
        ax.legend(loc="upper right", fontsize="x-small", ncols=4)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_FIG_METADATA)
    plt.close(fig)


def render_bench_figures(rows: list[dict], outdir: Path) -> list[Path]:
    """Distribution plots regenerable from the CSV: utilization reduction
    and normalized reaction time per task set."""
    out = []
    reductions = [float(r["util_reduction_pct"]) for r in rows if r["util_reduction_pct"] != ""]
    if reductions:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(reductions, bins=min(20, max(5, len(reductions) // 3)),
                color="tab:blue", edgecolor="black")
        ax.set_xlabel("system utilization reduction vs LET [%]")
        ax.set_ylabel("task sets")
        ax.set_title("Utilization reduction")
        fig.tight_layout()
        path = outdir / "util_reduction.png"
        fig.savefig(path, dpi=120, metadata=_FIG_METADATA)
        plt.close(fig)
        out.append(path)
    norms = [float(r["mrt_norm_classic_median"]) for r in rows
             if r["mrt_norm_classic_median"] != ""]
    if norms:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(norms, bins=min(20, max(5, len(norms) // 3)),
                color="tab:orange", edgecolor="black")
        ax.axvline(1.0, color="black", linestyle="--", linewidth=1)
        ax.set_xlabel("median normalized MRT vs LET (per set)")
        ax.set_ylabel("task sets")
        ax.set_title("Normalized maximum reaction time")
        fig.tight_layout()
        path = outdir / "normalized_mrt.png"
        fig.savefig(path, dpi=120, metadata=_FIG_METADATA)
        plt.close(fig)
        out.append(path)
    return out
