"""Fixed-priority preemptive schedule simulation with job-level dependencies.

The simulator is an exact integer-time event loop over all cores at once.
At every instant each core runs its highest-priority *eligible* released
job; a job is eligible only once all its dependency predecessors have
finished. Preemption is instantaneous and cost-free.

A dependency between two jobs is stored canonically (earliest instance
pair) and replicated with the period LCM(T_pred, T_succ), so the same
constraint recurs in every repetition interval of the schedule.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ConsistencyError, InfeasibleError, LetOptError
from .model import JobRef, TaskSet


@dataclass(frozen=True, slots=True)
class Dependency:
    """``predecessor`` must finish before ``successor`` may start."""

    predecessor: JobRef
    successor: JobRef

    def __str__(self) -> str:
        return f"{self.predecessor}<{self.successor}"


@dataclass(frozen=True, slots=True)
class _CanonicalDep:
    pred_task: str
    pred_index: int
    pred_stride: int
    succ_task: str
    succ_index: int
    succ_stride: int


class DependencySet:
    """An immutable set of job-level dependencies in canonical form.

    Canonical form anchors each dependency at the earliest instance pair
    with both indices >= 1; replicas follow every LCM of the two periods.
    """

    def __init__(self, task_set: TaskSet, deps: Iterable[Dependency] = ()):
        self._task_set = task_set
        canon = set()
        for dep in deps:
            canon.add(self._canonicalize(task_set, dep))
        self._canonical: tuple[_CanonicalDep, ...] = tuple(
            sorted(canon, key=lambda d: (d.pred_task, d.pred_index, d.succ_task, d.succ_index))
        )

    @staticmethod
    def _canonicalize(task_set: TaskSet, dep: Dependency) -> _CanonicalDep:
        pred = task_set.task(dep.predecessor.task)
        succ = task_set.task(dep.successor.task)
        if pred.id == succ.id:
            raise LetOptError(f"dependency within one task is not allowed: {dep}")
        if dep.predecessor.index < 1 or dep.successor.index < 1:
            raise LetOptError(f"dependency with non-positive job index: {dep}")
        cycle = math.lcm(pred.period, succ.period)
        pred_stride = cycle // pred.period
        succ_stride = cycle // succ.period
        back = min((dep.predecessor.index - 1) // pred_stride,
                   (dep.successor.index - 1) // succ_stride)
        return _CanonicalDep(
            pred.id, dep.predecessor.index - back * pred_stride, pred_stride,
            succ.id, dep.successor.index - back * succ_stride, succ_stride,
        )

    def __len__(self) -> int:
        return len(self._canonical)

    def __eq__(self, other) -> bool:
        return isinstance(other, DependencySet) and self._canonical == other._canonical

    def __hash__(self) -> int:
        return hash(self._canonical)

    def canonical(self) -> tuple[Dependency, ...]:
        return tuple(
            Dependency(JobRef(d.pred_task, d.pred_index), JobRef(d.succ_task, d.succ_index))
            for d in self._canonical
        )

    def add(self, dep: Dependency) -> "DependencySet":
        return DependencySet(self._task_set, self.canonical() + (dep,))

    def tasks_involved(self) -> set[str]:
        out = set()
        for d in self._canonical:
            out.add(d.pred_task)
            out.add(d.succ_task)
        return out

    def is_cross_core(self) -> bool:
        ts = self._task_set
        return any(ts.task(d.pred_task).core != ts.task(d.succ_task).core for d in self._canonical)

    def predecessors_of(self, job: JobRef) -> Iterator[JobRef]:
        for d in self._canonical:
            if d.succ_task != job.task:
                continue
            offset = job.index - d.succ_index
            if offset < 0 or offset % d.succ_stride:
                continue
            k = offset // d.succ_stride
            yield JobRef(d.pred_task, d.pred_index + k * d.pred_stride)

    def instance_edges(self, horizon: int) -> Iterator[tuple[JobRef, JobRef]]:
        """All replicated (predecessor, successor) pairs whose successor is
        released before ``horizon``."""
        ts = self._task_set
        for d in self._canonical:
            succ = ts.task(d.succ_task)
            k = 0
            while succ.release(d.succ_index + k * d.succ_stride) < horizon:
                yield (JobRef(d.pred_task, d.pred_index + k * d.pred_stride),
                       JobRef(d.succ_task, d.succ_index + k * d.succ_stride))
                k += 1

    def has_cycle(self) -> bool:
        """Topological test on the instance graph unrolled over two
        replication super-periods (a genuine cycle repeats inside one)."""
        if not self._canonical:
            return False
        ts = self._task_set
        cycle = math.lcm(*(ts.task(d.pred_task).period * d.pred_stride
                           for d in self._canonical))
        phases = [max(ts.task(d.pred_task).phase, ts.task(d.succ_task).phase)
                  for d in self._canonical]
        horizon = max(phases, default=0) + 2 * cycle
        adjacency: dict[JobRef, list[JobRef]] = {}
        indegree: dict[JobRef, int] = {}
        for pred, succ in self.instance_edges(horizon):
            adjacency.setdefault(pred, []).append(succ)
            indegree[succ] = indegree.get(succ, 0) + 1
            indegree.setdefault(pred, 0)
        queue = [n for n, deg in indegree.items() if deg == 0]
        seen = 0
        while queue:
            node = queue.pop()
            seen += 1
            for nxt in adjacency.get(node, ()):
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    queue.append(nxt)
        return seen != len(indegree)


def empty_dependencies(task_set: TaskSet) -> DependencySet:
    return DependencySet(task_set, ())


@dataclass(frozen=True, slots=True)
class ExecutionRecord:
    job: JobRef
    core: str
    start: int
    finish: int
    segments: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Schedule:
    """Simulated execution over ``[0, horizon)``.

    ``core_windows`` holds the (phase, hyperperiod) pair used for the
    steady-state periodicity assertion and for interval statistics.
    """

    records: dict[JobRef, ExecutionRecord]
    core_segments: dict[str, tuple[tuple[JobRef, int, int], ...]]
    core_windows: dict[str, tuple[int, int]]
    horizon: int

    def jobs_of(self, task_id: str) -> list[ExecutionRecord]:
        return [r for r in self.records.values() if r.job.task == task_id]


class _JobState:
    __slots__ = ("job", "core", "key", "release", "deadline", "remaining",
                 "pending", "successors", "released", "start", "segments")

    def __init__(self, job, core, key, release, deadline, wcet):
        self.job = job
        self.core = core          # core index
        self.key = key            # heap key: (-priority rank, release, seq)
        self.release = release
        self.deadline = deadline
        self.remaining = wcet
        self.pending = 0
        self.successors: list[_JobState] = []
        self.released = False
        self.start = -1
        self.segments: list[list[int]] = []


def _core_windows(task_set: TaskSet, deps: DependencySet,
                  skip=None) -> dict[str, tuple[int, int]]:
    windows = {}
    cross = deps.is_cross_core()
    if cross:
        phi = max((t.phase for t in task_set.tasks), default=0)
        h = math.lcm(*(t.period for t in task_set.tasks)) if task_set.tasks else 1
    for core in task_set.cores:
        tasks = task_set.core_tasks[core]
        if not tasks:
            windows[core] = (0, 1)
        elif cross:
            windows[core] = (phi, h)
        else:
            windows[core] = (task_set.core_phase(core), task_set.core_hyperperiod(core))
    if skip is not None:
        # A skip pattern repeats with its task's skipping window, which can
        # exceed the core hyperperiod when chains span cores.
        skip_windows = getattr(skip, "task_windows", {})
        skipped = getattr(skip, "skipped_residues", {})
        for core in task_set.cores:
            widen = [skip_windows[t.id][0] for t in task_set.core_tasks[core]
                     if skipped.get(t.id)]
            if widen:
                phi_c, h_c = windows[core]
                windows[core] = (phi_c, math.lcm(h_c, *widen))
    return windows


def default_horizon(task_set: TaskSet, deps: DependencySet | None = None,
                    skip=None) -> int:
    """Smallest horizon covering two steady-state windows per core. Jobs
    released inside the horizon always run to completion, so the window
    patterns are complete even at the boundary."""
    deps = deps if deps is not None else empty_dependencies(task_set)
    windows = _core_windows(task_set, deps, skip)
    return max((phi + 2 * h for phi, h in windows.values()), default=1)


def simulate(task_set: TaskSet, deps: DependencySet | None = None, *,
             skip=None, horizon: int | None = None) -> Schedule:
    """Run the fixed-priority preemptive simulation.

    ``skip`` is an optional object with ``is_skipped(task_id, index)``;
    skipped jobs are never released and dependencies on them are vacuous.
    Raises :class:`InfeasibleError` on the first deadline miss and
    :class:`ConsistencyError` when the steady-state windows do not repeat.
    """
    deps = deps if deps is not None else empty_dependencies(task_set)
    windows = _core_windows(task_set, deps, skip)
    end = horizon if horizon is not None else default_horizon(task_set, deps, skip)

    def skipped(job: JobRef) -> bool:
        return skip is not None and skip.is_skipped(job.task, job.index)

    core_ids = list(task_set.cores)
    core_index = {c: i for i, c in enumerate(core_ids)}
    n_cores = len(core_ids)
    rank: dict[str, int] = {}
    for core in core_ids:
        for i, t in enumerate(sorted(task_set.core_tasks[core], key=lambda x: x.priority)):
            rank[t.id] = -i  # heap is a min-heap; more negative = higher priority

    jobs: dict[JobRef, _JobState] = {}
    release_times: list[int] = []
    release_states: list[_JobState] = []
    seq = 0
    for t in task_set.tasks:
        release = t.phase
        index = 1
        heap_rank = rank[t.id]
        core = core_index[t.core]
        while release < end:
            job = JobRef(t.id, index)
            if not skipped(job):
                state = _JobState(job, core, (heap_rank, release, seq),
                                  release, release + t.deadline, t.wcet)
                jobs[job] = state
                seq += 1
            index += 1
            release += t.period
    # Dependency wiring. A predecessor released at or past the horizon is
    # materialized as an extra job: it executes outside every assertion
    # window but keeps its successor blocked exactly as in the unbounded
    # schedule, so boundary jobs do not distort the window patterns.
    for pred_ref, succ_ref in deps.instance_edges(end):
        succ = jobs.get(succ_ref)
        if succ is None or skipped(pred_ref):
            continue
        pred = jobs.get(pred_ref)
        if pred is None:
            t = task_set.task(pred_ref.task)
            if t.release(pred_ref.index) < end:
                raise LetOptError(f"dependency predecessor {pred_ref} outside simulation")
            pred = _JobState(pred_ref, core_index[t.core],
                             (rank[t.id], t.release(pred_ref.index), seq),
                             t.release(pred_ref.index),
                             t.release(pred_ref.index) + t.deadline, t.wcet)
            jobs[pred_ref] = pred
            seq += 1
        pred.successors.append(succ)
        succ.pending += 1

    states = sorted(jobs.values(), key=lambda s: (s.release, s.key))
    release_times = [s.release for s in states]
    release_states = states

    eligible: list[list] = [[] for _ in range(n_cores)]
    deadline_heap: list[tuple[int, int, _JobState]] = []
    current: list[_JobState | None] = [None] * n_cores
    finished: dict[JobRef, ExecutionRecord] = {}
    heappush = heapq.heappush
    heappop = heapq.heappop

    release_ptr = 0
    t_now = 0
    n_rel = len(release_states)

    while True:
        # Choose the running job per core and the next event instant.
        t_next = None
        if release_ptr < n_rel:
            t_next = release_times[release_ptr]
        running = []
        for ci in range(n_cores):
            heap = eligible[ci]
            while heap and heap[0][1].remaining == 0:
                heappop(heap)
            job = heap[0][1] if heap else None
            prev = current[ci]
            if job is not prev:
                if prev is not None and prev.segments[-1][1] == -1:
                    prev.segments[-1][1] = t_now
                if job is not None:
                    job.segments.append([t_now, -1])
                    if job.start < 0:
                        job.start = t_now
                current[ci] = job
            if job is not None:
                running.append(job)
                done_at = t_now + job.remaining
                if t_next is None or done_at < t_next:
                    t_next = done_at
        while deadline_heap and deadline_heap[0][2].remaining == 0:
            heappop(deadline_heap)
        if deadline_heap and (t_next is None or deadline_heap[0][0] < t_next):
            t_next = deadline_heap[0][0]
        if t_next is None:
            break

        if t_next > t_now:
            dt = t_next - t_now
            for job in running:
                job.remaining -= dt
            t_now = t_next

        # Completions before deadline checks: finishing exactly at the
        # deadline is allowed.
        for job in running:
            if job.remaining == 0:
                job.segments[-1][1] = t_now
                segs = []
                for a, b in job.segments:
                    if segs and segs[-1][1] == a:
                        segs[-1] = (segs[-1][0], b)
                    else:
                        segs.append((a, b))
                finished[job.job] = ExecutionRecord(
                    job.job, core_ids[job.core], job.start, t_now, tuple(segs))
                current[job.core] = None
                for succ in job.successors:
                    succ.pending -= 1
                    if succ.pending == 0 and succ.released:
                        heappush(eligible[succ.core], (succ.key, succ))

        while deadline_heap and deadline_heap[0][0] <= t_now:
            state = heappop(deadline_heap)[2]
            if state.remaining > 0:
                raise InfeasibleError(state.job, state.deadline)

        while release_ptr < n_rel and release_times[release_ptr] <= t_now:
            state = release_states[release_ptr]
            release_ptr += 1
            state.released = True
            if state.deadline <= end:
                heappush(deadline_heap, (state.deadline, release_ptr, state))
            if state.pending == 0:
                heappush(eligible[state.core], (state.key, state))

    for state in jobs.values():
        if state.remaining > 0 and state.deadline <= end:
            raise InfeasibleError(state.job, state.deadline)

    core_segments: dict[str, tuple] = {}
    for core in core_ids:
        segs = sorted(((rec.job, a, b) for rec in finished.values() if rec.core == core
                       for a, b in rec.segments), key=lambda s: s[1])
        core_segments[core] = tuple(segs)

    schedule = Schedule(
        records=finished,
        core_segments=core_segments,
        core_windows=windows,
        horizon=end,
    )
    _assert_steady_state(task_set, schedule)
    return schedule


def _window_pattern(task_set: TaskSet, schedule: Schedule, core: str,
                    start: int, length: int) -> frozenset:
    """Execution pattern of ``[start, start+length)`` with segments clipped
    to the window and job indices reduced modulo the jobs-per-window count."""
    out = []
    for job, a, b in schedule.core_segments[core]:
        lo = max(a, start)
        hi = min(b, start + length)
        if lo >= hi:
            continue
        period = task_set.task(job.task).period
        residue = (job.index - 1) % (length // period)
        out.append((job.task, residue, lo - start, hi - start))
    return frozenset(out)


def _assert_steady_state(task_set: TaskSet, schedule: Schedule) -> None:
    for core in task_set.cores:
        if not task_set.core_tasks[core]:
            continue
        phi, h = schedule.core_windows[core]
        first = _window_pattern(task_set, schedule, core, phi, h)
        second = _window_pattern(task_set, schedule, core, phi + h, h)
        if first != second:
            raise ConsistencyError(
                f"core {core!r}: schedule not periodic over [{phi}, {phi + 2 * h})")


def is_schedulable(task_set: TaskSet, deps: DependencySet | None = None, *,
                   skip=None, horizon: int | None = None):
    """True iff the simulation completes without a deadline miss.

    Returns ``(ok, first_miss)`` where ``first_miss`` is ``(job, instant)``.
    """
    try:
        simulate(task_set, deps, skip=skip, horizon=horizon)
    except InfeasibleError as exc:
        return False, (exc.job, exc.instant)
    return True, None


def relative_times(task_set: TaskSet, schedule: Schedule, job: JobRef) -> tuple[int, int]:
    """(start - release, finish - release) for one job in the schedule."""
    record = schedule.records.get(job)
    if record is None:
        raise LetOptError(f"job {job} not present in the simulated horizon")
    release = task_set.task(job.task).release(job.index)
    return record.start - release, record.finish - release


def schedule_trace(schedule: Schedule) -> list[dict]:
    """Debug/export form of a schedule: one row per execution record."""
    rows = []
    for job in sorted(schedule.records, key=lambda j: (j.task, j.index)):
        rec = schedule.records[job]
        rows.append({
            "core": rec.core,
            "task": job.task,
            "index": job.index,
            "start": rec.start,
            "finish": rec.finish,
            "segments": [list(s) for s in rec.segments],
        })
    return rows
