import math
import random

import pytest

from letopt.model import JobRef, parse_task_set
from letopt.scheduler import Dependency, DependencySet, is_schedulable

EXAMPLE1_DOC = {
    "unit": "tu",
    "cores": ["c0"],
    "tasks": [
        {"id": "t1", "core": "c0", "wcet": 1, "period": 5, "priority": 2},
        {"id": "t2", "core": "c0", "wcet": 1, "period": 3, "priority": 3},
        {"id": "t3", "core": "c0", "wcet": 1, "period": 5, "priority": 1},
    ],
    "chains": [{"id": "e", "members": ["t1", "t2", "t3"]}],
}


@pytest.fixture
def example1():
    return parse_task_set(EXAMPLE1_DOC)


@pytest.fixture
def fig5_deps(example1):
    """First job of t2 waits for the first job of t3; third job of t2
    waits for the second job of t3."""
    return DependencySet(example1, [
        Dependency(JobRef("t3", 1), JobRef("t2", 1)),
        Dependency(JobRef("t3", 2), JobRef("t2", 3)),
    ])


TINY_PERIOD_POOL = [1, 2, 4, 5, 8, 10, 20, 25, 40, 50, 100, 200]


def make_tiny_task_set(rng: random.Random, max_tasks: int = 5,
                       max_hyperperiod: int = 200, cores: int = 1):
    """A small random schedulable task set with 1-2 chains, for oracle and
    property tests. Deterministic in the rng state."""
    for _ in range(200):
        n = rng.randint(2, max_tasks)
        periods = [rng.choice(TINY_PERIOD_POOL) for _ in range(n)]
        if math.lcm(*periods) > max_hyperperiod:
            continue
        core_of = [rng.randrange(cores) for _ in range(n)]
        budget = [0.75 / sum(1 for c in core_of if c == core_of[i]) for i in range(n)]
        tasks = []
        for i, period in enumerate(periods):
            wcet = max(1, int(period * rng.uniform(0.1, budget[i])))
            tasks.append({
                "id": f"t{i}", "core": f"c{core_of[i]}", "wcet": wcet,
                "period": period, "priority": 0,
            })
        order = list(range(n))
        rng.shuffle(order)
        by_core = {}
        for rank, i in enumerate(order):
            tasks[i]["priority"] = rank + 1
            by_core.setdefault(tasks[i]["core"], []).append(i)
        n_chains = rng.randint(1, 2)
        chains = []
        for c in range(n_chains):
            size = rng.randint(2, min(4, n))
            members = rng.sample(range(n), size)
            chains.append({"id": f"e{c}", "members": [f"t{i}" for i in members]})
        doc = {
            "unit": "tu",
            "cores": [f"c{k}" for k in range(cores)],
            "tasks": tasks,
            "chains": chains,
        }
        try:
            ts = parse_task_set(doc)
        except Exception:
            continue
        ok, _ = is_schedulable(ts)
        if ok:
            return ts
    raise RuntimeError("could not draw a schedulable tiny task set")
