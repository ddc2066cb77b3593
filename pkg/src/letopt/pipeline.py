"""One-stop evaluation of a task set under a dependency configuration.

Bundles the simulate -> shorten/shift -> enumerate chains -> skip plan
sequence used by the search, the CLI, and the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .chains import (
    PrimaryChainSet,
    SkipPlan,
    analyze_chains,
    compute_mrt_mda,
    compute_skip_plan,
    identify_primary_chains,
)
from .intervals import IntervalMap, classic_intervals, schedule_aware_intervals
from .model import TaskSet
from .scheduler import DependencySet, Schedule, default_horizon, empty_dependencies, simulate


@dataclass(frozen=True)
class Metrics:
    utilization: Fraction                      # system utilization after skipping
    latencies: dict[str, tuple[int, int]]      # chain id -> (MRT, MDA)

    @property
    def total_mrt(self) -> int:
        return sum(m for m, _ in self.latencies.values())

    @property
    def total_mda(self) -> int:
        return sum(d for _, d in self.latencies.values())


@dataclass(frozen=True)
class Evaluation:
    schedule: Schedule
    intervals: IntervalMap
    shifted: TaskSet
    primaries: dict[str, PrimaryChainSet]
    skip_plan: SkipPlan
    metrics: Metrics


def required_horizon(task_set: TaskSet, deps: DependencySet | None = None) -> int:
    """Simulation horizon covering the per-core steady-state assertion
    windows plus every chain's first repetition interval (dependency
    candidates are looked up one period past it)."""
    deps = deps if deps is not None else empty_dependencies(task_set)
    end = default_horizon(task_set, deps)
    for chain in task_set.chains:
        phi = task_set.chain_phase(chain)
        h = task_set.chain_hyperperiod(chain)
        pad = max(task_set.task(m).period for m in chain.members)
        end = max(end, phi + h + pad)
    return end


def evaluate(task_set: TaskSet, deps: DependencySet | None = None, *,
             horizon: int | None = None) -> Evaluation:
    """Simulate and analyze; raises InfeasibleError / ConsistencyError."""
    deps = deps if deps is not None else empty_dependencies(task_set)
    horizon = horizon if horizon is not None else required_horizon(task_set, deps)
    schedule = simulate(task_set, deps, horizon=horizon)
    intervals, shifted = schedule_aware_intervals(task_set, schedule)
    primaries, latencies = analyze_chains(shifted, intervals)
    plan = compute_skip_plan(shifted, intervals, primaries)
    metrics = Metrics(utilization=plan.system_utilization, latencies=latencies)
    return Evaluation(schedule, intervals, shifted, primaries, plan, metrics)


def evaluate_incremental(task_set: TaskSet, deps: DependencySet, base: Evaluation,
                         affected_cores: frozenset[str], *, horizon: int) -> Evaluation:
    """Re-evaluate after a dependency change confined to ``affected_cores``.

    Without cross-core dependencies the cores schedule independently, so
    only the affected cores are re-simulated and only the chains touching
    them re-analyzed; everything else is reused from ``base``. Falls back
    to a full evaluation when a dependency crosses cores.
    """
    if deps.is_cross_core():
        return evaluate(task_set, deps, horizon=horizon)

    records = dict(base.schedule.records)
    core_segments = dict(base.schedule.core_segments)
    core_windows = dict(base.schedule.core_windows)
    for core in sorted(affected_cores):
        reduced = TaskSet(unit=task_set.unit, cores=(core,),
                          tasks=task_set.core_tasks[core], chains=())
        reduced_deps = DependencySet(reduced, [
            d for d in deps.canonical()
            if task_set.task(d.predecessor.task).core == core
            and task_set.task(d.successor.task).core == core
        ])
        part = simulate(reduced, reduced_deps, horizon=horizon)
        records = {j: r for j, r in records.items() if r.core != core}
        records.update(part.records)
        core_segments[core] = part.core_segments[core]
        core_windows[core] = part.core_windows[core]
    schedule = Schedule(records=records, core_segments=core_segments,
                        core_windows=core_windows, horizon=horizon)

    interval_patch, shifted_patch = schedule_aware_intervals(
        TaskSet(unit=task_set.unit, cores=tuple(sorted(affected_cores)),
                tasks=tuple(t for t in task_set.tasks if t.core in affected_cores),
                chains=()),
        Schedule(records=records, core_segments=core_segments,
                 core_windows=core_windows, horizon=horizon))
    intervals = dict(base.intervals.intervals)
    intervals.update(interval_patch.intervals)
    interval_map = IntervalMap(base.intervals.mode, intervals)
    patched = {t.id: t for t in shifted_patch.tasks}
    shifted = task_set.with_tasks(patched.get(t.id, base.shifted.task(t.id))
                                  for t in task_set.tasks)

    primaries = {}
    latencies = {}
    for chain in task_set.chains:
        if any(task_set.task(m).core in affected_cores for m in chain.members):
            primary = identify_primary_chains(shifted, chain, interval_map)
        else:
            primary = base.primaries[chain.id]
        primaries[chain.id] = primary
        latencies[chain.id] = compute_mrt_mda(primary)
    plan = compute_skip_plan(shifted, interval_map, primaries)
    metrics = Metrics(utilization=plan.system_utilization, latencies=latencies)
    return Evaluation(schedule, interval_map, shifted, primaries, plan, metrics)


def classic_latencies(task_set: TaskSet) -> dict[str, tuple[int, int]]:
    """Chain latencies under classic whole-period intervals."""
    _, latencies = analyze_chains(task_set, classic_intervals(task_set))
    return latencies
