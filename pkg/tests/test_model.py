import json
import math
import random
from fractions import Fraction

import pytest

from conftest import EXAMPLE1_DOC, make_tiny_task_set
from letopt.errors import SchemaError
from letopt.model import (
    hyperperiod,
    normalize_priorities,
    parse_task_set,
    serialize_task_set,
    task_set_to_json,
)

MS = 1000


def test_example1_parses_with_hyperperiod_15(example1):
    assert [t.id for t in example1.tasks] == ["t1", "t2", "t3"]
    chain = example1.chains[0]
    assert example1.chain_hyperperiod(chain) == 15
    assert example1.task("t2").priority > example1.task("t1").priority > example1.task("t3").priority


def test_single_task_no_chains_is_valid():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [{"id": "a", "core": "c0", "wcet": 1, "period": 7, "priority": 1}],
        "chains": [],
    })
    assert ts.chains == ()
    assert ts.task("a").deadline == 7


def test_chain_with_missing_task_reports_chain_and_id():
    doc = dict(EXAMPLE1_DOC, chains=[{"id": "bad", "members": ["t1", "ghost"]}])
    with pytest.raises(SchemaError) as err:
        parse_task_set(doc)
    assert "bad" in str(err.value)
    assert "ghost" in str(err.value)
    assert "chains[0]" in err.value.path


def test_hyperperiod_values(example1):
    assert hyperperiod(example1.tasks) == 15
    single = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [{"id": "a", "core": "c0", "wcet": 1, "period": 7, "priority": 1}],
    })
    assert hyperperiod(single.tasks) == 7
    bosch = [1 * MS, 2 * MS, 5 * MS, 10 * MS, 20 * MS, 50 * MS, 100 * MS, 200 * MS, 1000 * MS]
    assert math.lcm(*bosch) == 1000 * MS


def test_hyperperiod_limit_enforced():
    doc = {
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 9973, "priority": 1},
            {"id": "b", "core": "c0", "wcet": 1, "period": 10007, "priority": 2},
        ],
    }
    with pytest.raises(SchemaError):
        parse_task_set(doc, hyperperiod_limit=10**6)
    parse_task_set(doc)  # default limit admits it


def test_duplicate_priority_on_core_rejected():
    doc = {
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
            {"id": "b", "core": "c0", "wcet": 1, "period": 8, "priority": 1},
        ],
    }
    with pytest.raises(SchemaError) as err:
        parse_task_set(doc)
    assert "priority" in str(err.value)


def test_same_priority_allowed_on_different_cores():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0", "c1"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
            {"id": "b", "core": "c1", "wcet": 1, "period": 8, "priority": 1},
        ],
    })
    assert len(ts.tasks) == 2


def test_repeated_chain_member_rejected():
    doc = dict(EXAMPLE1_DOC, chains=[{"id": "loop", "members": ["t1", "t2", "t1"]}])
    with pytest.raises(SchemaError):
        parse_task_set(doc)


def test_non_implicit_deadline_rejected():
    doc = {
        "unit": "us", "cores": ["c0"],
        "tasks": [{"id": "a", "core": "c0", "wcet": 1, "period": 10,
                   "deadline": 8, "priority": 1}],
    }
    with pytest.raises(SchemaError) as err:
        parse_task_set(doc)
    assert "deadline" in err.value.path


def test_wcet_bounds():
    doc = {
        "unit": "us", "cores": ["c0"],
        "tasks": [{"id": "a", "core": "c0", "wcet": 11, "period": 10, "priority": 1}],
    }
    with pytest.raises(SchemaError):
        parse_task_set(doc)
    doc["tasks"][0]["wcet"] = 0
    with pytest.raises(SchemaError):
        parse_task_set(doc)


def test_fraction_priorities_accepted():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 4, "priority": "3/2"},
            {"id": "b", "core": "c0", "wcet": 1, "period": 8, "priority": 1},
        ],
    })
    assert ts.task("a").priority == Fraction(3, 2)


def test_round_trip_identity(example1):
    assert parse_task_set(serialize_task_set(example1)) == example1
    assert parse_task_set(task_set_to_json(example1)) == example1


def test_round_trip_property_random_sets():
    rng = random.Random("round-trip")
    for _ in range(25):
        ts = make_tiny_task_set(rng, cores=rng.choice([1, 1, 2]))
        assert parse_task_set(json.loads(task_set_to_json(ts))) == ts


def test_release_spacing_is_one_period(example1):
    for t in example1.tasks:
        for i in range(1, 10):
            assert t.release(i + 1) - t.release(i) == t.period


def test_normalize_priorities_dense_and_order_preserving():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 4, "priority": "7/3"},
            {"id": "b", "core": "c0", "wcet": 1, "period": 8, "priority": 10},
            {"id": "c", "core": "c0", "wcet": 1, "period": 8, "priority": "1/2"},
        ],
    })
    dense = normalize_priorities(ts)
    assert sorted(t.priority for t in dense.tasks) == [1, 2, 3]
    assert dense.task("c").priority < dense.task("a").priority < dense.task("b").priority
