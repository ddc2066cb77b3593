"""Translate an optimized configuration into a purely periodic task set.

Skipping jobs makes a task's releases sporadic, and dependencies demand
per-job execution orderings that one static priority cannot express. Both
are resolved before runtime by splitting affected tasks: every retained
job of a task becomes its own task releasing once per skipping window at
the original release instant. A split task whose source job waited on a
dependency is ranked directly below the predecessor's task so the
priority order reproduces the waiting, with no runtime mechanism left.

The construction is heuristic (a static priority cannot always reproduce
a dependency-induced delay), so :func:`verify_equivalence` replays both
systems and confirms segment-for-segment identical execution and equal
chain latencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .chains import (
    ArithmeticSeries,
    MergedSeries,
    SkipPlan,
    latencies_excluding_skips,
    primary_chains_of_series,
    reaction_span,
)
from .errors import LetOptError
from .intervals import CommInterval, IntervalMap
from .model import JobRef, Task, TaskSet
from .scheduler import DependencySet, simulate


@dataclass(frozen=True)
class RetainedJobs:
    """The job set that survives skipping, per task and window."""

    task: str
    window: int
    jobs_per_window: int
    residues: tuple[int, ...]  # 0-based, sorted

    def indices(self) -> tuple[int, ...]:
        return tuple(r + 1 for r in self.residues)


def retained_jobs(plan: SkipPlan, task_id: str) -> RetainedJobs:
    window, per_window = plan.task_windows[task_id]
    residues = plan.retained_residues.get(task_id)
    if residues is None:
        residues = frozenset(range(per_window))
    return RetainedJobs(task_id, window, per_window, tuple(sorted(residues)))


def detect_offset_conflicts(plan: SkipPlan) -> frozenset[str]:
    """Tasks whose consecutive retained jobs are more than one index apart
    within the window, i.e. whose releases can no longer be equidistant."""
    conflicted = set()
    for task_id in plan.task_windows:
        kept = sorted(plan.retained_residues.get(task_id, ()))
        if any(b - a > 1 for a, b in zip(kept, kept[1:])):
            conflicted.add(task_id)
    return frozenset(conflicted)


def detect_priority_conflicts(task_set: TaskSet, plan: SkipPlan,
                              deps: DependencySet) -> dict[str, tuple[tuple[JobRef, JobRef], ...]]:
    """Retained jobs that hold a dependency, keyed by their task.

    Dependencies whose successor is skipped are vacuous, as are replicas
    whose predecessor job is skipped.
    """
    conflicts: dict[str, list[tuple[JobRef, JobRef]]] = {}
    for dep in deps.canonical():
        succ_task = task_set.task(dep.successor.task)
        pred_task = task_set.task(dep.predecessor.task)
        if succ_task.id not in plan.task_windows:
            raise LetOptError(
                f"dependency successor {dep.successor} belongs to no chain window")
        window, per_window = plan.task_windows[succ_task.id]
        cycle = math.lcm(pred_task.period, succ_task.period)
        succ_stride = cycle // succ_task.period
        pred_stride = cycle // pred_task.period
        # Walk replicas until the successor residue pattern repeats.
        span = math.lcm(cycle, window) // succ_task.period
        seen: set[int] = set()
        k = 0
        while dep.successor.index + k * succ_stride <= dep.successor.index + span:
            succ_index = dep.successor.index + k * succ_stride
            pred_index = dep.predecessor.index + k * pred_stride
            residue = (succ_index - 1) % per_window
            k += 1
            if residue in seen:
                continue
            seen.add(residue)
            if plan.is_skipped(succ_task.id, succ_index):
                continue
            if plan.is_skipped(pred_task.id, pred_index):
                continue
            conflicts.setdefault(succ_task.id, []).append(
                (JobRef(succ_task.id, succ_index), JobRef(pred_task.id, pred_index)))
    return {t: tuple(sorted(v, key=lambda p: p[0].index)) for t, v in conflicts.items()}


@dataclass(frozen=True)
class TransformResult:
    task_set: TaskSet                      # purely periodic, dense int priorities
    intervals: IntervalMap                 # intervals of the transformed set
    mapping: dict[str, dict]               # split task id -> source description
    split_tasks: dict[str, tuple[str, ...]]  # source task -> split ids (by residue)
    original_chains: tuple                 # chains of the source set


def split_and_assign(task_set: TaskSet, intervals: IntervalMap, plan: SkipPlan,
                     deps: DependencySet) -> TransformResult:
    """Build the transformed set: split every task with skipped jobs or a
    dependency-holding retained job; rank dependency holders directly
    below their predecessor's task; renormalize to dense priorities."""
    offset_conflicts = detect_offset_conflicts(plan)
    priority_conflicts = detect_priority_conflicts(task_set, plan, deps)
    to_split = set(offset_conflicts) | set(priority_conflicts)
    for task_id, skipped in plan.skipped_residues.items():
        if skipped:
            to_split.add(task_id)

    bound: dict[tuple[str, int], str] = {}  # (task, residue) -> lowest-priority pred task
    for task_id, pairs in priority_conflicts.items():
        _, per_window = plan.task_windows[task_id]
        for succ_job, pred_job in pairs:
            residue = (succ_job.index - 1) % per_window
            pred_task = task_set.task(pred_job.task)
            succ_task = task_set.task(task_id)
            if pred_task.core != succ_task.core:
                raise LetOptError(
                    f"cross-core dependency {pred_job}<{succ_job} cannot be resolved "
                    "by priority assignment")
            key = (task_id, residue)
            if key not in bound or pred_task.priority < task_set.task(bound[key]).priority:
                bound[key] = pred_task.id

    new_tasks: list[Task] = []
    new_intervals: dict[str, CommInterval] = {}
    mapping: dict[str, dict] = {}
    split_ids: dict[str, list[str]] = {}

    # Per core: original tasks ascending by priority form rank groups; a
    # split replaces its source inside the group; dependency holders are
    # pulled out and re-inserted directly below their predecessor's group.
    for core in task_set.cores:
        groups: list[list[Task]] = []
        below: list[list[Task]] = []
        group_of: dict[str, int] = {}
        ordered = sorted(task_set.core_tasks[core], key=lambda t: t.priority)
        for rank, source in enumerate(ordered):
            groups.append([])
            below.append([])
            group_of[source.id] = rank
        for rank, source in enumerate(ordered):
            if source.id not in to_split:
                groups[rank].append(source)
                new_intervals[source.id] = intervals[source.id]
                continue
            kept = retained_jobs(plan, source.id)
            split_ids[source.id] = []
            iv = intervals[source.id]
            for residue in kept.residues:
                split_id = f"{source.id}__j{residue + 1}"
                phase = (source.phase + residue * source.period) % kept.window
                split = replace(source, id=split_id, period=kept.window,
                                deadline=kept.window, phase=phase)
                new_intervals[split_id] = CommInterval(split_id, iv.begin, iv.end,
                                                       iv.applied_shift)
                mapping[split_id] = {
                    "source": source.id,
                    "residue": residue,
                    "job_index": residue + 1,
                    "window": kept.window,
                }
                split_ids[source.id].append(split_id)
                pred = bound.get((source.id, residue))
                if pred is not None:
                    below[group_of[pred]].append(split)
                else:
                    groups[rank].append(split)

        final: list[Task] = []
        for rank in range(len(groups)):
            final.extend(sorted(below[rank], key=lambda t: t.id))
            final.extend(groups[rank])
        for priority, task in enumerate(final, start=1):
            new_tasks.append(replace(task, priority=Fraction(priority)))

    order = {c: i for i, c in enumerate(task_set.cores)}
    new_tasks.sort(key=lambda t: (order[t.core], t.priority))
    transformed = TaskSet(unit=task_set.unit, cores=task_set.cores,
                          tasks=tuple(new_tasks), chains=())
    return TransformResult(
        task_set=transformed,
        intervals=IntervalMap(intervals.mode, new_intervals),
        mapping=mapping,
        split_tasks={k: tuple(v) for k, v in split_ids.items()},
        original_chains=task_set.chains,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    first_divergence: dict | None
    latencies: dict[str, tuple[int, int]]  # chain -> (optimized MRT, transformed MRT)

    def __bool__(self) -> bool:
        return self.equivalent


def _source_of(result: TransformResult, task_id: str) -> str:
    entry = result.mapping.get(task_id)
    return entry["source"] if entry else task_id


def _member_view(task_set: TaskSet, result: TransformResult, member: str):
    split = result.split_tasks.get(member)
    if not split:
        t = result.task_set.task(member)
        iv = result.intervals[member]
        return ArithmeticSeries(t.id, t.phase, t.period, iv.begin, iv.end)
    components = []
    for split_id in split:
        t = result.task_set.task(split_id)
        iv = result.intervals[split_id]
        components.append(ArithmeticSeries(t.id, t.phase, t.period, iv.begin, iv.end))
    return MergedSeries(components)


def transformed_latencies(result: TransformResult) -> dict[str, tuple[int, int]]:
    """Chain latencies of the transformed set, with split tasks merged
    back into their source member."""
    ts = result.task_set
    out = {}
    for chain in result.original_chains:
        views = [_member_view(ts, result, m) for m in chain.members]
        periods = []
        phases = []
        for view in views:
            comps = view.components if isinstance(view, MergedSeries) else [view]
            periods.extend(c.period for c in comps)
            phases.extend(c.phase for c in comps)
        h = math.lcm(*periods)
        phi = max(phases)
        repeats = max(1, -(-2 * sum(periods) // h))
        primary = primary_chains_of_series(views, chain.id, phi + repeats * h, h, None)
        pairs = [(c.sampling_instant, c.output_instant) for c in primary.chains]
        mrt = reaction_span(pairs, h)
        out[chain.id] = (mrt, mrt)
    return out


def verify_equivalence(task_set: TaskSet, deps: DependencySet, plan: SkipPlan,
                       intervals: IntervalMap, result: TransformResult) -> EquivalenceReport:
    """Replay the optimized configuration and the transformed set and
    compare: per-core execution slices must be identical (relabeling each
    split task to its source), and every chain's latency must match."""
    left_h = {c: task_set.core_hyperperiod(c) for c in task_set.cores if task_set.core_tasks[c]}
    right_h = {c: result.task_set.core_hyperperiod(c)
               for c in task_set.cores if result.task_set.core_tasks.get(c)}
    phi = max([task_set.core_phase(c) for c in left_h]
              + [result.task_set.core_phase(c) for c in right_h], default=0)
    spans = {c: math.lcm(left_h[c], right_h.get(c, 1)) for c in left_h}
    horizon = max((phi + 2 * span for span in spans.values()), default=1)

    left = simulate(task_set, deps, skip=plan, horizon=horizon)
    right = simulate(result.task_set, horizon=horizon)

    divergence = None
    for core in task_set.cores:
        if core not in spans:
            continue
        lo, hi = phi, phi + spans[core]
        left_segs = [(job.task, a, b) for job, a, b in left.core_segments[core]
                     if a < hi and b > lo]
        right_segs = [(_source_of(result, job.task), a, b)
                      for job, a, b in right.core_segments[core] if a < hi and b > lo]
        left_segs = [(t, max(a, lo), min(b, hi)) for t, a, b in left_segs]
        right_segs = [(t, max(a, lo), min(b, hi)) for t, a, b in right_segs]
        for ls, rs in zip(left_segs, right_segs):
            if ls != rs:
                divergence = {"core": core, "instant": min(ls[1], rs[1]),
                              "optimized": ls, "transformed": rs}
                break
        if divergence is None and len(left_segs) != len(right_segs):
            tail = left_segs[len(right_segs):] or right_segs[len(left_segs):]
            divergence = {"core": core, "instant": tail[0][1],
                          "optimized": None, "transformed": None}
        if divergence:
            break

    left_lat = latencies_excluding_skips(task_set, intervals, plan)
    right_lat = transformed_latencies(result)
    latencies = {cid: (left_lat[cid][0], right_lat[cid][0]) for cid in left_lat}
    lat_ok = all(a == b for a, b in latencies.values())
    return EquivalenceReport(divergence is None and lat_ok, divergence, latencies)
