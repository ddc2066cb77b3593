"""Communication intervals: classic LET and schedule-aware variants.

The classic interval of a task spans its whole period, so a job logically
reads at its release and writes at the end of its period. The schedule-aware
variant shortens the interval to the span actually covered by execution
(earliest relative start to latest relative finish across one steady-state
window) and converts the leading slack into an extra phase, leaving the
real execution order untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import LetOptError
from .model import JobRef, Task, TaskSet
from .scheduler import DependencySet, Schedule, simulate

CLASSIC = "classic"
SCHEDULE_AWARE = "schedule-aware"


@dataclass(frozen=True, slots=True)
class CommInterval:
    """Per-task read/write window relative to the (possibly shifted) release."""

    task: str
    begin: int
    end: int
    applied_shift: int

    @property
    def length(self) -> int:
        return self.end - self.begin


@dataclass(frozen=True)
class IntervalMap:
    mode: str
    intervals: dict[str, CommInterval]

    def __getitem__(self, task_id: str) -> CommInterval:
        return self.intervals[task_id]

    def read_instant(self, task: Task, index: int) -> int:
        return task.release(index) + self.intervals[task.id].begin

    def write_instant(self, task: Task, index: int) -> int:
        return task.release(index) + self.intervals[task.id].end


def classic_intervals(task_set: TaskSet) -> IntervalMap:
    """Every task gets [0, T] with no shift."""
    return IntervalMap(CLASSIC, {
        t.id: CommInterval(t.id, 0, t.period, 0) for t in task_set.tasks
    })


def earliest_start_latest_finish(task_set: TaskSet, schedule: Schedule,
                                 task: Task) -> tuple[int, int]:
    """(min relative start, max relative finish) over one steady window.

    Statistics are taken over the jobs released in ``[phi, phi + h)`` of the
    task's core; the scheduler's periodicity assertion makes this the
    min/max over all windows.
    """
    phi, h = schedule.core_windows[task.core]
    first = max(1, -(-(phi - task.phase) // task.period) + 1)
    count = h // task.period
    es = None
    lf = None
    for index in range(first, first + count):
        record = schedule.records.get(JobRef(task.id, index))
        if record is None:
            raise LetOptError(f"job {task.id}#{index} missing from schedule window")
        release = task.release(index)
        s = record.start - release
        f = record.finish - release
        es = s if es is None or s < es else es
        lf = f if lf is None or f > lf else lf
    if es is None:
        raise LetOptError(f"task {task.id} has no jobs in the analysis window")
    return es, lf


def schedule_aware_intervals(task_set: TaskSet, schedule: Schedule, *,
                             deps: DependencySet | None = None,
                             cross_check: bool = False) -> tuple[IntervalMap, TaskSet]:
    """Shorten and shift every task's interval from a feasible schedule.

    Each task's phase grows by its earliest relative start and its interval
    becomes [0, LF - ES]. Returns the map plus a copy of the task set with
    the updated phases. With ``cross_check`` the shifted set is re-simulated
    and the execution segments are verified to be identical.
    """
    intervals = {}
    shifted = []
    for t in task_set.tasks:
        es, lf = earliest_start_latest_finish(task_set, schedule, t)
        intervals[t.id] = CommInterval(t.id, 0, lf - es, es)
        shifted.append(replace(t, phase=t.phase + es))
    shifted_set = task_set.with_tasks(shifted)
    result = IntervalMap(SCHEDULE_AWARE, intervals)
    if cross_check:
        resim = simulate(shifted_set, _rebind(deps, shifted_set))
        upto = min(schedule.horizon, resim.horizon)
        if _clipped_signature(resim, upto) != _clipped_signature(schedule, upto):
            raise LetOptError("interval shift changed the execution order")
    return result, shifted_set


def _rebind(deps: DependencySet | None, task_set: TaskSet) -> DependencySet:
    if deps is None:
        return DependencySet(task_set, ())
    return DependencySet(task_set, deps.canonical())


def execution_signature(schedule: Schedule) -> dict[str, tuple]:
    """Per-core sequence of (task, index, from, to) execution slices."""
    return {core: tuple((job.task, job.index, a, b) for job, a, b in segs)
            for core, segs in schedule.core_segments.items()}


def _clipped_signature(schedule: Schedule, upto: int) -> dict[str, tuple]:
    return {core: tuple((job.task, job.index, a, min(b, upto))
                        for job, a, b in segs if a < upto)
            for core, segs in schedule.core_segments.items()}


def interval_report(interval_map: IntervalMap) -> list[dict]:
    rows = []
    for task_id in sorted(interval_map.intervals):
        iv = interval_map.intervals[task_id]
        rows.append({
            "task": task_id,
            "begin": iv.begin,
            "end": iv.end,
            "shift": iv.applied_shift,
            "mode": interval_map.mode,
        })
    return rows
