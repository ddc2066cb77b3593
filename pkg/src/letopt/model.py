"""Domain model: periodic tasks, jobs, cause-effect chains, task sets.

All times are exact non-negative integers in the base unit declared by the
task-set document. Priorities are rationals (larger value = higher priority)
so that later transformation stages can insert priorities strictly between
existing ones without renumbering; exports renormalize to dense integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable

from .errors import SchemaError

DEFAULT_HYPERPERIOD_LIMIT = 10**9


@dataclass(frozen=True, slots=True)
class Task:
    """A periodic task with an implicit deadline (deadline == period)."""

    id: str
    core: str
    wcet: int
    period: int
    deadline: int
    phase: int
    priority: Fraction

    def release(self, index: int) -> int:
        """Release instant of the index-th job (1-based)."""
        return self.phase + (index - 1) * self.period

    def absolute_deadline(self, index: int) -> int:
        return self.release(index) + self.deadline

    def utilization(self) -> Fraction:
        return Fraction(self.wcet, self.period)


@dataclass(frozen=True, slots=True)
class JobRef:
    """The index-th instance of a task (index is 1-based)."""

    task: str
    index: int

    def __str__(self) -> str:
        return f"{self.task}#{self.index}"


@dataclass(frozen=True, slots=True)
class CauseEffectChain:
    """An ordered sequence of communicating tasks (producer to consumer)."""

    id: str
    members: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class TaskSet:
    unit: str
    cores: tuple[str, ...]
    tasks: tuple[Task, ...]
    chains: tuple[CauseEffectChain, ...]

    @cached_property
    def task_map(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def core_tasks(self) -> dict[str, tuple[Task, ...]]:
        by_core: dict[str, list[Task]] = {c: [] for c in self.cores}
        for t in self.tasks:
            by_core[t.core].append(t)
        return {c: tuple(ts) for c, ts in by_core.items()}

    def task(self, task_id: str) -> Task:
        return self.task_map[task_id]

    def core_hyperperiod(self, core: str) -> int:
        tasks = self.core_tasks.get(core, ())
        return hyperperiod(tasks) if tasks else 1

    def core_phase(self, core: str) -> int:
        tasks = self.core_tasks.get(core, ())
        return max((t.phase for t in tasks), default=0)

    def chain_hyperperiod(self, chain: CauseEffectChain) -> int:
        return math.lcm(*(self.task(m).period for m in chain.members))

    def chain_phase(self, chain: CauseEffectChain) -> int:
        return max(self.task(m).phase for m in chain.members)

    def system_utilization(self) -> Fraction:
        """Mean of the per-core utilizations over all declared cores."""
        if not self.cores:
            return Fraction(0)
        total = Fraction(0)
        for core in self.cores:
            total += sum((t.utilization() for t in self.core_tasks[core]), Fraction(0))
        return total / len(self.cores)

    def with_tasks(self, tasks: Iterable[Task]) -> "TaskSet":
        return replace(self, tasks=tuple(tasks))


def hyperperiod(tasks: Iterable[Task], limit: int | None = None) -> int:
    """LCM of the task periods. Raises on an empty set or past ``limit``."""
    periods = [t.period for t in tasks]
    if not periods:
        raise SchemaError("tasks", "hyperperiod of an empty task collection")
    value = math.lcm(*periods)
    if limit is not None and value > limit:
        raise SchemaError("tasks", f"hyperperiod {value} exceeds limit {limit}")
    return value


def _parse_priority(value, path: str) -> Fraction:
    if isinstance(value, bool):
        raise SchemaError(path, "priority must be an integer or a 'p/q' string")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise SchemaError(path, f"cannot parse priority {value!r}") from None
    raise SchemaError(path, f"priority must be an integer or a 'p/q' string, got {type(value).__name__}")


def _require_time(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer time value, got {value!r}")
    if value < minimum:
        raise SchemaError(path, f"time value {value} below minimum {minimum}")
    return value


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise SchemaError(path, message)


def parse_task_set(document, hyperperiod_limit: int = DEFAULT_HYPERPERIOD_LIMIT) -> TaskSet:
    """Parse and validate a task-set document (JSON text or a parsed dict).

    Schema: ``{unit, cores: [id], tasks: [{id, core, wcet, period,
    deadline?, phase?, priority}], chains: [{id, members: [task id, ...]}]}``.
    A missing deadline defaults to the period; a missing phase defaults to 0.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("document", f"invalid JSON: {exc}") from None
    _require(isinstance(document, dict), "document", "top level must be an object")

    unknown = set(document) - {"unit", "cores", "tasks", "chains"}
    _require(not unknown, "document", f"unknown keys: {sorted(unknown)}")

    unit = document.get("unit")
    _require(isinstance(unit, str) and unit != "", "unit", "unit must be a non-empty string")

    cores_raw = document.get("cores")
    _require(isinstance(cores_raw, list) and cores_raw, "cores", "cores must be a non-empty list")
    cores = tuple(str(c) for c in cores_raw)
    _require(len(set(cores)) == len(cores), "cores", "duplicate core ids")

    tasks_raw = document.get("tasks")
    _require(isinstance(tasks_raw, list), "tasks", "tasks must be a list")
    tasks = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(tasks_raw):
        path = f"tasks[{i}]"
        _require(isinstance(entry, dict), path, "task must be an object")
        unknown = set(entry) - {"id", "core", "wcet", "period", "deadline", "phase", "priority"}
        _require(not unknown, path, f"unknown keys: {sorted(unknown)}")
        tid = entry.get("id")
        _require(isinstance(tid, str) and tid != "", f"{path}.id", "task id must be a non-empty string")
        _require(tid not in seen_ids, f"{path}.id", f"duplicate task id {tid!r}")
        seen_ids.add(tid)
        core = str(entry.get("core"))
        _require(core in cores, f"{path}.core", f"unknown core {core!r}")
        wcet = _require_time(entry.get("wcet"), f"{path}.wcet", minimum=1)
        period = _require_time(entry.get("period"), f"{path}.period", minimum=1)
        deadline = _require_time(entry.get("deadline", period), f"{path}.deadline", minimum=1)
        _require(deadline == period, f"{path}.deadline",
                 f"implicit deadlines required (deadline {deadline} != period {period})")
        _require(wcet <= deadline, f"{path}.wcet", f"wcet {wcet} exceeds deadline {deadline}")
        phase = _require_time(entry.get("phase", 0), f"{path}.phase")
        priority = _parse_priority(entry.get("priority"), f"{path}.priority")
        tasks.append(Task(tid, core, wcet, period, deadline, phase, priority))

    # Unique priorities per core.
    by_core: dict[str, dict[Fraction, str]] = {}
    for i, t in enumerate(tasks):
        holder = by_core.setdefault(t.core, {})
        _require(t.priority not in holder, f"tasks[{i}].priority",
                 f"priority {t.priority} already used by {holder.get(t.priority)!r} on core {t.core!r}")
        holder[t.priority] = t.id

    chains_raw = document.get("chains", [])
    _require(isinstance(chains_raw, list), "chains", "chains must be a list")
    chains = []
    seen_chain_ids: set[str] = set()
    for i, entry in enumerate(chains_raw):
        path = f"chains[{i}]"
        _require(isinstance(entry, dict), path, "chain must be an object")
        unknown = set(entry) - {"id", "members"}
        _require(not unknown, path, f"unknown keys: {sorted(unknown)}")
        cid = entry.get("id")
        _require(isinstance(cid, str) and cid != "", f"{path}.id", "chain id must be a non-empty string")
        _require(cid not in seen_chain_ids, f"{path}.id", f"duplicate chain id {cid!r}")
        seen_chain_ids.add(cid)
        members_raw = entry.get("members")
        _require(isinstance(members_raw, list), f"{path}.members", "members must be a list")
        members = tuple(str(m) for m in members_raw)
        _require(len(members) >= 2, f"{path}.members", "a chain needs at least two members")
        for j, m in enumerate(members):
            _require(m in seen_ids, f"{path}.members[{j}]",
                     f"chain {cid!r} references unknown task {m!r}")
        _require(len(set(members)) == len(members), f"{path}.members",
                 f"chain {cid!r} repeats a task; repeated members are rejected")
        chains.append(CauseEffectChain(cid, members))

    ts = TaskSet(unit=unit, cores=cores, tasks=tuple(tasks), chains=tuple(chains))

    # Hyperperiod bounds keep downstream simulation tractable.
    for core in cores:
        if ts.core_tasks[core]:
            h = ts.core_hyperperiod(core)
            _require(h <= hyperperiod_limit, f"cores[{cores.index(core)}]",
                     f"core hyperperiod {h} exceeds limit {hyperperiod_limit}")
    for i, chain in enumerate(chains):
        h = ts.chain_hyperperiod(chain)
        _require(h <= hyperperiod_limit, f"chains[{i}]",
                 f"chain hyperperiod {h} exceeds limit {hyperperiod_limit}")
    return ts


def _priority_json(priority: Fraction):
    return int(priority) if priority.denominator == 1 else f"{priority.numerator}/{priority.denominator}"


def serialize_task_set(ts: TaskSet) -> dict:
    """Inverse of :func:`parse_task_set`; preserves values exactly."""
    return {
        "unit": ts.unit,
        "cores": list(ts.cores),
        "tasks": [
            {
                "id": t.id,
                "core": t.core,
                "wcet": t.wcet,
                "period": t.period,
                "deadline": t.deadline,
                "phase": t.phase,
                "priority": _priority_json(t.priority),
            }
            for t in ts.tasks
        ],
        "chains": [{"id": c.id, "members": list(c.members)} for c in ts.chains],
    }


def task_set_to_json(ts: TaskSet) -> str:
    return json.dumps(serialize_task_set(ts), indent=2, sort_keys=True) + "\n"


def normalize_priorities(ts: TaskSet) -> TaskSet:
    """Renormalize priorities to dense unique integers per core, preserving
    the relative order. Used when emitting transformed task sets whose
    internal priorities are rationals."""
    new_priority: dict[str, Fraction] = {}
    for core in ts.cores:
        ranked = sorted(ts.core_tasks[core], key=lambda t: t.priority)
        for rank, t in enumerate(ranked, start=1):
            new_priority[t.id] = Fraction(rank)
    return ts.with_tasks(replace(t, priority=new_priority[t.id]) for t in ts.tasks)
