import random
from dataclasses import replace
from fractions import Fraction

import pytest

from conftest import make_tiny_task_set
from letopt.chains import SkipPlan
from letopt.errors import LetOptError
from letopt.model import JobRef, parse_task_set
from letopt.pipeline import evaluate
from letopt.scheduler import Dependency, DependencySet, empty_dependencies, is_schedulable
from letopt.search import SearchConfig, run_search
from letopt.transform import (
    detect_offset_conflicts,
    detect_priority_conflicts,
    retained_jobs,
    split_and_assign,
    transformed_latencies,
    verify_equivalence,
)


def _optimized_example1(example1, fig5_deps):
    ev = evaluate(example1, fig5_deps)
    return ev


def test_offset_conflict_detected_for_t2(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    # retained 2nd, 3rd, 5th: the 3 -> 5 gap breaks equidistant releases
    assert sorted(ev.skip_plan.retained_residues["t2"]) == [1, 2, 4]
    assert detect_offset_conflicts(ev.skip_plan) == frozenset({"t2"})


def test_no_skips_no_offset_conflict(example1):
    ev = evaluate(example1)
    plan = ev.skip_plan
    no_skip_plan = SkipPlan(
        task_windows=plan.task_windows,
        retained_residues={t: frozenset(range(n))
                           for t, (_, n) in plan.task_windows.items()},
        skipped_residues={t: frozenset() for t in plan.task_windows},
        skipped_jobs=(),
        per_core_utilization=plan.per_core_utilization,
        system_utilization=plan.system_utilization,
    )
    assert detect_offset_conflicts(no_skip_plan) == frozenset()


def test_single_retained_job_has_no_consecutive_pair():
    plan = SkipPlan(
        task_windows={"t": (20, 4)},
        retained_residues={"t": frozenset({0})},
        skipped_residues={"t": frozenset({1, 2, 3})},
        skipped_jobs=(JobRef("t", 2), JobRef("t", 3), JobRef("t", 4)),
        per_core_utilization={},
        system_utilization=Fraction(0),
    )
    # one job per window is strictly periodic already; no conflict by the
    # consecutive-pair rule (it is still split because jobs were skipped)
    assert detect_offset_conflicts(plan) == frozenset()


def test_priority_conflict_only_for_retained_dependency_holders(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    conflicts = detect_priority_conflicts(ev.shifted, ev.skip_plan, fig5_deps)
    # t2#1 is skipped, so only the t3#2 < t2#3 dependency binds
    assert set(conflicts) == {"t2"}
    assert conflicts["t2"] == ((JobRef("t2", 3), JobRef("t3", 2)),)


def test_no_dependencies_no_priority_conflicts(example1):
    ev = evaluate(example1)
    assert detect_priority_conflicts(ev.shifted, ev.skip_plan,
                                     empty_dependencies(example1)) == {}


def test_example1_split_into_three_periodic_tasks(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    assert result.split_tasks == {"t2": ("t2__j2", "t2__j3", "t2__j5")}
    for split_id in result.split_tasks["t2"]:
        t = result.task_set.task(split_id)
        assert t.period == 15
        assert t.deadline == 15
        assert t.wcet == 1
    # release instants replace the retained jobs
    assert result.task_set.task("t2__j2").phase == 3
    assert result.task_set.task("t2__j3").phase == 6
    assert result.task_set.task("t2__j5").phase == 12
    # the dependency holder sits directly below its predecessor's task
    prio = {t.id: t.priority for t in result.task_set.tasks}
    assert prio["t2__j3"] < prio["t3"]
    assert prio["t2__j2"] > prio["t1"] > prio["t3"]
    ok, _ = is_schedulable(result.task_set)
    assert ok


def test_unconflicted_tasks_pass_through(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    assert result.task_set.task("t1").period == 5
    assert result.task_set.task("t3").period == 5
    assert result.task_set.task("t3").phase == 1  # keeps the interval shift


def test_transformed_set_utilization_matches_skip_plan(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    assert result.task_set.system_utilization() == ev.skip_plan.system_utilization


def test_full_pipeline_equivalence_example1(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    report = verify_equivalence(ev.shifted, fig5_deps, ev.skip_plan,
                                ev.intervals, result)
    assert report.equivalent
    assert report.first_divergence is None
    assert report.latencies == {"e": (12, 12)}


def test_corrupted_phase_reported_at_divergence(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    broken_tasks = [
        replace(t, phase=t.phase + 1) if t.id == "t2__j2" else t
        for t in result.task_set.tasks
    ]
    broken = replace(result, task_set=result.task_set.with_tasks(broken_tasks))
    report = verify_equivalence(ev.shifted, fig5_deps, ev.skip_plan,
                                ev.intervals, broken)
    assert not report.equivalent
    assert report.first_divergence is not None


def test_identity_transform_trivially_equivalent(example1):
    ev = evaluate(example1)
    deps = empty_dependencies(example1)
    # pretend nothing is skipped: pass-through transform
    plan = SkipPlan(
        task_windows=ev.skip_plan.task_windows,
        retained_residues={t: frozenset(range(n))
                           for t, (_, n) in ev.skip_plan.task_windows.items()},
        skipped_residues={t: frozenset() for t in ev.skip_plan.task_windows},
        skipped_jobs=(),
        per_core_utilization={c: sum((t.utilization() for t in example1.core_tasks[c]),
                                     Fraction(0)) for c in example1.cores},
        system_utilization=example1.system_utilization(),
    )
    result = split_and_assign(ev.shifted, ev.intervals, plan, deps)
    assert result.split_tasks == {}
    report = verify_equivalence(ev.shifted, deps, plan, ev.intervals, result)
    assert report.equivalent


def test_cross_core_dependency_cannot_be_priority_resolved():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0", "c1"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
            {"id": "b", "core": "c1", "wcet": 1, "period": 8, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["a", "b"]}],
    })
    deps = DependencySet(ts, [Dependency(JobRef("a", 1), JobRef("b", 1))])
    ev = evaluate(ts, deps)
    with pytest.raises(LetOptError):
        split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, deps)


def test_retained_jobs_boundary_tasks_keep_everything(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    for tid in ("t1", "t3"):
        kept = retained_jobs(ev.skip_plan, tid)
        assert kept.residues == tuple(range(kept.jobs_per_window))


def test_strict_periodicity_of_split_releases(example1, fig5_deps):
    ev = _optimized_example1(example1, fig5_deps)
    result = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, fig5_deps)
    for split_id in result.split_tasks["t2"]:
        t = result.task_set.task(split_id)
        for i in range(1, 6):
            assert t.release(i + 1) - t.release(i) == t.period


def test_equivalence_on_optimized_random_sets():
    rng = random.Random("transform-props")
    checked = 0
    for _ in range(10):
        ts = make_tiny_task_set(rng)
        result = run_search(ts, SearchConfig(max_nodes=40))
        best = result.best
        ev = best.evaluation
        outcome = split_and_assign(ev.shifted, ev.intervals, ev.skip_plan, best.deps)
        report = verify_equivalence(ev.shifted, best.deps, ev.skip_plan,
                                    ev.intervals, outcome)
        assert report.equivalent, (
            f"divergence {report.first_divergence} latencies {report.latencies}")
        assert transformed_latencies(outcome) == ev.metrics.latencies
        checked += 1
    assert checked == 10
