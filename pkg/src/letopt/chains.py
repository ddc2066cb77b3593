"""Job-chain enumeration, reaction-time analysis, and skip planning.

Under LET semantics a consumer job reads, at the begin of its interval,
the value most recently written (write instant <= read instant, the test
is inclusive). Walking backward from a job of the last chain member and
picking the latest producer at every hop yields the concrete data
propagation path for that output. Among the paths that share the same
first job, only the one with the earliest output matters for latencies;
those are the primary chains. Jobs of interior chain members that appear
in no primary chain of any chain never influence an output that survives
overwriting, so their execution can be skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import LetOptError
from .model import CauseEffectChain, JobRef, TaskSet
from .intervals import IntervalMap


class ArithmeticSeries:
    """Read/write instants of one periodic communication source.

    Job ``i`` (1-based) reads at ``phase + (i-1)*period + begin`` and
    writes at ``phase + (i-1)*period + end``.
    """

    __slots__ = ("task", "phase", "period", "begin", "end")

    def __init__(self, task: str, phase: int, period: int, begin: int, end: int):
        self.task = task
        self.phase = phase
        self.period = period
        self.begin = begin
        self.end = end

    def job(self, index: int) -> JobRef:
        return JobRef(self.task, index)

    def read_instant(self, job: JobRef) -> int:
        return self.phase + (job.index - 1) * self.period + self.begin

    def write_instant(self, job: JobRef) -> int:
        return self.phase + (job.index - 1) * self.period + self.end

    def latest_write_at_or_before(self, instant: int, available) -> JobRef | None:
        index = (instant - self.phase - self.end) // self.period + 1
        while index >= 1:
            job = self.job(index)
            if available is None or available(job):
                return job
            index -= 1
        return None

    def outputs_in(self, lo: int, hi: int, available) -> list[JobRef]:
        first = -(-(lo - self.phase - self.end) // self.period) + 1
        first = max(first, 1)
        out = []
        index = first
        while self.write_instant(self.job(index)) < hi:
            job = self.job(index)
            if available is None or available(job):
                out.append(job)
            index += 1
        return out


class MergedSeries:
    """Union of several arithmetic series acting as one chain member.

    Used when a chain member has been split into multiple periodic tasks:
    the merged read/write events must behave exactly like the original
    member. Write instants of the components never coincide.
    """

    __slots__ = ("components",)

    def __init__(self, components: list[ArithmeticSeries]):
        self.components = components

    def read_instant(self, job: JobRef) -> int:
        return self._component(job).read_instant(job)

    def write_instant(self, job: JobRef) -> int:
        return self._component(job).write_instant(job)

    def _component(self, job: JobRef) -> ArithmeticSeries:
        for c in self.components:
            if c.task == job.task:
                return c
        raise LetOptError(f"job {job} not produced by this member")

    def latest_write_at_or_before(self, instant: int, available) -> JobRef | None:
        best = None
        best_write = None
        for c in self.components:
            job = c.latest_write_at_or_before(instant, available)
            if job is None:
                continue
            w = c.write_instant(job)
            if best_write is None or w > best_write:
                best, best_write = job, w
        return best

    def outputs_in(self, lo: int, hi: int, available) -> list[JobRef]:
        out = []
        for c in self.components:
            out.extend(c.outputs_in(lo, hi, available))
        out.sort(key=lambda j: self.write_instant(j))
        return out


@dataclass(frozen=True, slots=True)
class JobChain:
    """One concrete data propagation path through a chain."""

    chain: str
    jobs: tuple[JobRef, ...]
    sampling_instant: int
    output_instant: int


@dataclass(frozen=True)
class PrimaryChainSet:
    chain: str
    window_start: int
    window_length: int
    chains: tuple[JobChain, ...]  # sorted by sampling instant

    @cached_property
    def by_first_job(self) -> dict[JobRef, JobChain]:
        return {c.jobs[0]: c for c in self.chains}

    def member_jobs(self, task_id: str) -> set[JobRef]:
        return {job for c in self.chains for job in c.jobs if job.task == task_id}


def member_series(task_set: TaskSet, intervals: IntervalMap, task_id: str) -> ArithmeticSeries:
    task = task_set.task(task_id)
    iv = intervals[task_id]
    return ArithmeticSeries(task.id, task.phase, task.period, iv.begin, iv.end)


def analysis_window(task_set: TaskSet, chain: CauseEffectChain) -> tuple[int, int]:
    """A repetition interval of the chain that backward walks cannot
    escape: far enough in that every producer instance exists."""
    h = task_set.chain_hyperperiod(chain)
    phi = task_set.chain_phase(chain)
    reach = 2 * sum(task_set.task(m).period for m in chain.members)
    repeats = max(1, -(-reach // h))
    return phi + repeats * h, h


def chain_walk(series: list, chain_id: str, last_job: JobRef, available=None) -> JobChain | None:
    """Backward walk from a job of the last member, taking the latest
    producer whose write does not pass the consumer's read (inclusive)."""
    jobs = [last_job]
    instant = series[-1].read_instant(last_job)
    for view in reversed(series[:-1]):
        producer = view.latest_write_at_or_before(instant, available)
        if producer is None:
            return None
        jobs.append(producer)
        instant = view.read_instant(producer)
    jobs.reverse()
    return JobChain(chain_id, tuple(jobs),
                    sampling_instant=series[0].read_instant(jobs[0]),
                    output_instant=series[-1].write_instant(jobs[-1]))


def find_job_chain(task_set: TaskSet, chain: CauseEffectChain, intervals: IntervalMap,
                   last_job: JobRef, available=None) -> JobChain | None:
    """The data propagation path ending at ``last_job``; None when a
    producer would have to lie before the start of time."""
    if last_job.task != chain.members[-1]:
        raise LetOptError(f"{last_job} is not an instance of the last member of {chain.id}")
    series = [member_series(task_set, intervals, m) for m in chain.members]
    return chain_walk(series, chain.id, last_job, available)


def primary_chains_of_series(series: list, chain_id: str, window_start: int,
                             window_length: int, available=None) -> PrimaryChainSet:
    chosen: dict = {}
    for last_job in series[-1].outputs_in(window_start, window_start + window_length, available):
        candidate = chain_walk(series, chain_id, last_job, available)
        if candidate is None:
            continue
        first = candidate.jobs[0]
        stored = chosen.get(first)
        if stored is None or candidate.output_instant < stored.output_instant:
            chosen[first] = candidate
    ordered = tuple(sorted(chosen.values(), key=lambda c: c.sampling_instant))
    return PrimaryChainSet(chain_id, window_start, window_length, ordered)


def identify_primary_chains(task_set: TaskSet, chain: CauseEffectChain,
                            intervals: IntervalMap, *, available=None,
                            window_start: int | None = None) -> PrimaryChainSet:
    """Primary chains whose outputs land in one repetition interval."""
    w0, h = analysis_window(task_set, chain)
    if window_start is not None:
        w0 = window_start
    series = [member_series(task_set, intervals, m) for m in chain.members]
    return primary_chains_of_series(series, chain.id, w0, h, available)


def reaction_span(pairs: list[tuple[int, int]], window_length: int) -> int:
    """Worst event-to-output span from (sampling, output) pairs of the
    primary chains of one window, wrapping the first chain into the next
    window. The worst event lands just after a sampling instant."""
    if not pairs:
        raise LetOptError("no primary chains: reaction time undefined")
    worst = 0
    for (sample_prev, _), (_, output_next) in zip(pairs, pairs[1:]):
        worst = max(worst, output_next - sample_prev)
    last_sample = pairs[-1][0]
    wrapped_output = pairs[0][1] + window_length
    return max(worst, wrapped_output - last_sample)


def compute_mrt_mda(primary: PrimaryChainSet) -> tuple[int, int]:
    """Maximum reaction time and maximum data age (equal by construction)."""
    pairs = [(c.sampling_instant, c.output_instant) for c in primary.chains]
    mrt = reaction_span(pairs, primary.window_length)
    return mrt, mrt


@dataclass(frozen=True)
class SkipPlan:
    """Which jobs of each hyperperiod window can be skipped, and the
    utilization left after skipping them."""

    task_windows: dict[str, tuple[int, int]]          # task -> (window, jobs per window)
    retained_residues: dict[str, frozenset[int]]      # 0-based job residues kept
    skipped_residues: dict[str, frozenset[int]]
    skipped_jobs: tuple[JobRef, ...]                  # representatives, first window
    per_core_utilization: dict[str, Fraction]
    system_utilization: Fraction

    def is_skipped(self, task_id: str, index: int) -> bool:
        residues = self.skipped_residues.get(task_id)
        if not residues:
            return False
        window, jobs_per_window = self.task_windows[task_id]
        return (index - 1) % jobs_per_window in residues

    def skipped_per_window(self) -> int:
        return len(self.skipped_jobs)


def compute_skip_plan(task_set: TaskSet, intervals: IntervalMap,
                      primaries: dict[str, PrimaryChainSet]) -> SkipPlan:
    """Mark jobs skippable when they serve no primary chain of any chain
    containing their task. Boundary members (first or last of any chain)
    are never skipped, nor are tasks outside every chain."""
    containing: dict[str, list[CauseEffectChain]] = {}
    boundary: set[str] = set()
    for chain in task_set.chains:
        for m in chain.members:
            containing.setdefault(m, []).append(chain)
        boundary.add(chain.members[0])
        boundary.add(chain.members[-1])

    task_windows: dict[str, tuple[int, int]] = {}
    retained: dict[str, frozenset[int]] = {}
    skipped: dict[str, frozenset[int]] = {}
    skipped_jobs: list[JobRef] = []

    for t in task_set.tasks:
        chains = containing.get(t.id, [])
        if not chains:
            continue
        window = math.lcm(*(task_set.chain_hyperperiod(c) for c in chains))
        jobs_per_window = window // t.period
        task_windows[t.id] = (window, jobs_per_window)
        if t.id in boundary:
            retained[t.id] = frozenset(range(jobs_per_window))
            skipped[t.id] = frozenset()
            continue
        kept: set[int] = set()
        for chain in chains:
            primary = primaries[chain.id]
            per_chain = primary.window_length // t.period
            kept_in_chain = {(job.index - 1) % per_chain
                             for job in primary.member_jobs(t.id)}
            for base_residue in kept_in_chain:
                kept.update(range(base_residue, jobs_per_window, per_chain))
        retained[t.id] = frozenset(kept)
        gone = frozenset(range(jobs_per_window)) - kept
        skipped[t.id] = gone
        skipped_jobs.extend(JobRef(t.id, r + 1) for r in sorted(gone))

    per_core: dict[str, Fraction] = {}
    for core in task_set.cores:
        util = Fraction(0)
        for t in task_set.core_tasks[core]:
            frac = Fraction(1)
            if t.id in skipped and skipped[t.id]:
                _, n = task_windows[t.id]
                frac = Fraction(len(retained[t.id]), n)
            util += t.utilization() * frac
        per_core[core] = util
    system = (sum(per_core.values(), Fraction(0)) / len(task_set.cores)
              if task_set.cores else Fraction(0))

    return SkipPlan(
        task_windows=task_windows,
        retained_residues=retained,
        skipped_residues=skipped,
        skipped_jobs=tuple(skipped_jobs),
        per_core_utilization=per_core,
        system_utilization=system,
    )


def analyze_chains(task_set: TaskSet, intervals: IntervalMap, *,
                   available=None) -> tuple[dict[str, PrimaryChainSet], dict[str, tuple[int, int]]]:
    """Primary chains and (MRT, MDA) per chain of the task set."""
    primaries = {}
    latencies = {}
    for chain in task_set.chains:
        primary = identify_primary_chains(task_set, chain, intervals, available=available)
        primaries[chain.id] = primary
        latencies[chain.id] = compute_mrt_mda(primary)
    return primaries, latencies


def latencies_excluding_skips(task_set: TaskSet, intervals: IntervalMap,
                              plan: SkipPlan) -> dict[str, tuple[int, int]]:
    """Chain latencies recomputed with the skipped jobs removed from the
    producer populations; must equal the latencies with all jobs present."""

    def available(job: JobRef) -> bool:
        return not plan.is_skipped(job.task, job.index)

    _, latencies = analyze_chains(task_set, intervals, available=available)
    return latencies
