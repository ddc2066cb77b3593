"""Anytime tree search over job-level dependency insertions.

Every node is a feasible schedule of the task set after adding a set of
dependencies. Expanding a node takes the next job from a fixed job
ordering, tries one new dependency per candidate predecessor, keeps the
schedulable children, re-analyzes intervals/chains/skips per child, and
sorts children by (system utilization, total MRT, total MDA). A
depth-first walk along the sorted children tracks the best node seen and
returns it on timeout or node-budget exhaustion; the result is never
worse than the root.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConsistencyError, InfeasibleError, LetOptError
from .model import JobRef, TaskSet
from .pipeline import Evaluation, evaluate, evaluate_incremental, required_horizon
from .scheduler import Dependency, DependencySet, empty_dependencies

SAME_CORE = "same-core"
ALL_CORES = "all"


@dataclass(frozen=True)
class SearchConfig:
    timeout: float | None = None          # wall-clock seconds
    max_nodes: int | None = None          # evaluated-node budget (deterministic)
    lexicographic: bool = True
    weights: tuple[Fraction, Fraction, Fraction] | None = None
    scope: str = SAME_CORE                # same-core | all
    chain_order: str = "descending"       # descending | ascending chain length
    seed: int = 0

    def __post_init__(self):
        if self.timeout is None and self.max_nodes is None:
            raise LetOptError("search needs a timeout and/or a node budget")
        if self.timeout is not None and self.timeout <= 0:
            raise LetOptError("timeout must be positive")
        if self.scope not in (SAME_CORE, ALL_CORES):
            raise LetOptError(f"unknown candidate scope {self.scope!r}")
        if self.chain_order not in ("descending", "ascending"):
            raise LetOptError(f"unknown chain order {self.chain_order!r}")
        if not self.lexicographic:
            if self.weights is None or all(w == 0 for w in self.weights):
                raise LetOptError("weighted objective needs non-zero weights")
            if any(w < 0 for w in self.weights):
                raise LetOptError("objective weights must be non-negative")


class SearchNode:
    """A point in the search tree: a dependency set plus its metrics.

    The full evaluation (schedule, intervals, chains, skip plan) is held
    only while needed; it is recomputed on demand since the pipeline is
    deterministic.
    """

    __slots__ = ("node_id", "parent_id", "deps", "metrics", "evaluation", "cursor", "added")

    def __init__(self, node_id, parent_id, deps, metrics, cursor, added,
                 evaluation: Evaluation | None = None):
        self.node_id: int = node_id
        self.parent_id: int | None = parent_id
        self.deps: DependencySet = deps
        self.metrics = metrics
        self.evaluation = evaluation
        self.cursor: int = cursor
        self.added: Dependency | None = added


@dataclass(frozen=True)
class AuditEntry:
    node_id: int
    parent_id: int | None
    added: str
    utilization: Fraction
    total_mrt: int
    total_mda: int
    feasible_children: int
    best_objective: tuple


@dataclass
class SearchResult:
    best: SearchNode
    root: SearchNode
    audit: list[AuditEntry] = field(default_factory=list)
    nodes_evaluated: int = 0
    nodes_expanded: int = 0
    wall_time: float = 0.0
    stopped_by: str = "exhausted"


def build_job_ordering(task_set: TaskSet, config: SearchConfig) -> list[JobRef]:
    """Jobs eligible to receive a dependency: for every chain (longest
    first by default), the member tasks' jobs released inside the chain's
    first repetition interval, in chain order. Dependencies canonicalize
    and replicate, so one interval's jobs reach every window."""
    if config.chain_order == "descending":
        chains = sorted(task_set.chains, key=lambda c: (-len(c.members), c.id))
    else:
        chains = sorted(task_set.chains, key=lambda c: (len(c.members), c.id))
    ordering: list[JobRef] = []
    seen: set[JobRef] = set()
    for chain in chains:
        phi = task_set.chain_phase(chain)
        h = task_set.chain_hyperperiod(chain)
        lo, hi = phi, phi + h
        for member in chain.members:
            t = task_set.task(member)
            first = max(1, -(-(lo - t.phase) // t.period) + 1)
            index = first
            while t.release(index) < hi:
                job = JobRef(t.id, index)
                if job not in seen:
                    seen.add(job)
                    ordering.append(job)
                index += 1
    return ordering


def _closure(edges: dict[JobRef, list[JobRef]], start: JobRef) -> set[JobRef]:
    out: set[JobRef] = set()
    stack = [start]
    while stack:
        node = stack.pop()
        for nxt in edges.get(node, ()):
            if nxt not in out:
                out.add(nxt)
                stack.append(nxt)
    return out


def candidate_jobs(task_set: TaskSet, node: SearchNode, job_x: JobRef,
                   config: SearchConfig, horizon: int) -> list[JobRef]:
    """Jobs of other tasks executing between the release and deadline of
    ``job_x`` in the node's schedule, minus candidates that are already
    ordered before it and candidates that would close a dependency cycle."""
    task = task_set.task(job_x.task)
    lo = task.release(job_x.index)
    hi = task.absolute_deadline(job_x.index)
    cores = ([task.core] if config.scope == SAME_CORE
             else list(task_set.cores))

    preds: dict[JobRef, list[JobRef]] = {}
    succs: dict[JobRef, list[JobRef]] = {}
    for pred, succ in node.deps.instance_edges(horizon):
        preds.setdefault(succ, []).append(pred)
        succs.setdefault(pred, []).append(succ)
    already_before = _closure(preds, job_x)
    after_job_x = _closure(succs, job_x)

    found: list[JobRef] = []
    seen: set[JobRef] = set()
    for core in cores:
        for job, a, b in node.evaluation.schedule.core_segments[core]:
            if b <= lo or a >= hi:
                continue
            if job.task == job_x.task or job in seen:
                continue
            seen.add(job)
            if job in already_before or job in after_job_x:
                continue
            found.append(job)
    found.sort(key=lambda j: (j.task, j.index))
    return found


def _objective(config: SearchConfig, root_metrics, metrics) -> tuple:
    if config.lexicographic:
        return (metrics.utilization, metrics.total_mrt, metrics.total_mda)
    wu, wm, wa = config.weights
    score = wu * metrics.utilization / max(root_metrics.utilization, Fraction(1, 10**9))
    if root_metrics.total_mrt:
        score += wm * Fraction(metrics.total_mrt, root_metrics.total_mrt)
    if root_metrics.total_mda:
        score += wa * Fraction(metrics.total_mda, root_metrics.total_mda)
    return (score,)


class _Budget:
    def __init__(self, config: SearchConfig, start: float):
        self.config = config
        self.start = start
        self.evaluated = 0

    def spent(self) -> bool:
        if self.config.max_nodes is not None and self.evaluated >= self.config.max_nodes:
            return True
        if self.config.timeout is not None and time.monotonic() - self.start > self.config.timeout:
            return True
        return False


def create_and_sort_children(task_set: TaskSet, node: SearchNode, job_ordering,
                             config: SearchConfig, root_metrics, budget: _Budget,
                             next_id, horizon: int) -> list[SearchNode]:
    """Children of one node: one per schedulable candidate dependency plus
    the mandatory no-change child, sorted by the heuristic objective with
    the canonical dependency encoding as the deterministic tie-break."""
    job_x = job_ordering[node.cursor]
    children: list[SearchNode] = []
    for candidate in candidate_jobs(task_set, node, job_x, config, horizon):
        if budget.spent():
            break
        new_deps = node.deps.add(Dependency(candidate, job_x))
        if new_deps.has_cycle():
            continue
        budget.evaluated += 1
        affected = frozenset({task_set.task(job_x.task).core,
                              task_set.task(candidate.task).core})
        try:
            evaluation = evaluate_incremental(task_set, new_deps, node.evaluation,
                                              affected, horizon=horizon)
        except (InfeasibleError, ConsistencyError):
            continue
        children.append(SearchNode(next_id(), node.node_id, new_deps, evaluation.metrics,
                                   node.cursor + 1, Dependency(candidate, job_x)))
    children.append(SearchNode(next_id(), node.node_id, node.deps, node.metrics,
                               node.cursor + 1, None))

    def sort_key(child: SearchNode):
        enc = "" if child.added is None else str(child.added)
        return (*_objective(config, root_metrics, child.metrics), enc)

    children.sort(key=sort_key)
    return children


def run_search(task_set: TaskSet, config: SearchConfig) -> SearchResult:
    """Depth-first anytime search; returns the best node found plus an
    audit trail with one entry per expanded node."""
    start = time.monotonic()
    deps0 = empty_dependencies(task_set)
    horizon = required_horizon(task_set, deps0)
    root_eval = evaluate(task_set, deps0, horizon=horizon)  # raises if root infeasible

    counter = [0]

    def next_id() -> int:
        counter[0] += 1
        return counter[0]

    root = SearchNode(0, None, deps0, root_eval.metrics, 0, None, evaluation=root_eval)
    job_ordering = build_job_ordering(task_set, config)
    budget = _Budget(config, start)

    result = SearchResult(best=root, root=root)
    best_key = _objective(config, root.metrics, root.metrics)

    if not job_ordering:
        result.audit.append(AuditEntry(0, None, "", root.metrics.utilization,
                                       root.metrics.total_mrt, root.metrics.total_mda,
                                       0, best_key))
        result.wall_time = time.monotonic() - start
        return result

    stack: list[SearchNode] = [root]
    stopped = "exhausted"
    while stack:
        if budget.spent():
            stopped = "budget"
            break
        node = stack.pop()
        if node.cursor >= len(job_ordering):
            node.evaluation = None
            continue
        if node.evaluation is None:
            budget.evaluated += 1
            node.evaluation = evaluate(task_set, node.deps, horizon=horizon)
        children = create_and_sort_children(task_set, node, job_ordering, config,
                                            root.metrics, budget, next_id, horizon)
        result.nodes_expanded += 1
        feasible_added = sum(1 for c in children if c.added is not None)
        for child in children:
            if child.added is None:
                continue
            key = _objective(config, root.metrics, child.metrics)
            if key < best_key:
                best_key = key
                result.best = child
        result.audit.append(AuditEntry(node.node_id, node.parent_id,
                                       "" if node.added is None else str(node.added),
                                       node.metrics.utilization, node.metrics.total_mrt,
                                       node.metrics.total_mda, feasible_added, best_key))
        if node is not root:
            node.evaluation = None
        stack.extend(reversed(children))

    if result.best.evaluation is None:
        result.best.evaluation = evaluate(task_set, result.best.deps, horizon=horizon)
    result.nodes_evaluated = budget.evaluated
    result.wall_time = time.monotonic() - start
    result.stopped_by = stopped
    return result
