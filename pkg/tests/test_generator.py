import random
from fractions import Fraction

import pytest

from letopt.errors import LetOptError
from letopt.generator import (
    GeneratorProfile,
    automotive_profile,
    draw_periods_per_chain,
    generate_automotive,
    generate_synthetic,
    generate_task_set,
    profile_from_dict,
    synthetic_profile,
)
from letopt.model import parse_task_set, serialize_task_set
from letopt.scheduler import is_schedulable


def test_automotive_core_utilization_near_target():
    for seed in (0, 1, 2):
        ts, _ = generate_automotive(seed)
        for core in ts.cores:
            util = float(sum(t.utilization() for t in ts.core_tasks[core]))
            assert abs(util - 0.71) <= 0.05
        assert len(ts.cores) == 4
        assert len(ts.chains) == 38


def test_synthetic_core_utilization_near_target():
    for seed in (0, 1, 2):
        ts, _ = generate_synthetic(seed)
        for core in ts.cores:
            util = float(sum(t.utilization() for t in ts.core_tasks[core]))
            assert abs(util - 0.80) <= 0.05
        assert 10 <= len(ts.chains) <= 20


def test_chain_shapes_respect_profile_bounds():
    ts, _ = generate_automotive(seed=5)
    for chain in ts.chains:
        assert 2 <= len(chain.members) <= 15
        periods = {ts.task(m).period for m in chain.members}
        assert 1 <= len(periods) <= 3
    ts, _ = generate_synthetic(seed=5)
    for chain in ts.chains:
        assert 2 <= len(chain.members) <= 25
        periods = {ts.task(m).period for m in chain.members}
        assert 1 <= len(periods) <= 5


def test_fixed_seed_reproduces_task_set():
    a, ra = generate_automotive(seed=7)
    b, rb = generate_automotive(seed=7)
    assert a == b
    assert ra == rb
    c, _ = generate_automotive(seed=8)
    assert c != a


def test_generated_sets_parse_and_are_schedulable():
    for seed in (0, 3):
        ts, _ = generate_automotive(seed)
        assert parse_task_set(serialize_task_set(ts)) == ts
        ok, _ = is_schedulable(ts)
        assert ok


def test_degenerate_profile_rejected():
    with pytest.raises(LetOptError):
        generate_task_set(automotive_profile(cores=1, tasks_per_core=1,
                                             chain_count=(1, 1), max_retries=3), seed=0)


def test_profile_validation():
    with pytest.raises(LetOptError):
        GeneratorProfile(name="x", periods=(1000,), period_weights=(Fraction(1), Fraction(1)))
    with pytest.raises(LetOptError):
        GeneratorProfile(name="x", chain_size=(1, 5))


def test_periods_per_chain_distribution_matches_weights():
    profile = synthetic_profile()
    rng = random.Random("dist-check")
    n = 10_000
    counts = {}
    for _ in range(n):
        k = draw_periods_per_chain(profile, rng)
        counts[k] = counts.get(k, 0) + 1
    expected = {1: 0.07, 2: 0.3575, 3: 0.2575, 4: 0.1575, 5: 0.1575}
    for k, p in expected.items():
        assert abs(counts.get(k, 0) / n - p) < 0.02


def test_profile_from_dict_overrides():
    profile = profile_from_dict({
        "base": "synthetic",
        "name": "custom",
        "tasks_per_core": 6,
        "target_core_utilization": "3/5",
        "chain_count": [4, 6],
    })
    assert profile.name == "custom"
    assert profile.tasks_per_core == 6
    assert profile.target_core_utilization == Fraction(3, 5)
    ts, _ = generate_task_set(profile, seed=1)
    assert 4 <= len(ts.chains) <= 6
    with pytest.raises(LetOptError):
        profile_from_dict({"base": "nonsense"})
    with pytest.raises(LetOptError):
        profile_from_dict({"bogus_key": 1})


def test_rate_monotonic_priorities_unique_per_core():
    ts, _ = generate_automotive(seed=2)
    for core in ts.cores:
        tasks = ts.core_tasks[core]
        priorities = [t.priority for t in tasks]
        assert len(set(priorities)) == len(priorities)
        for a in tasks:
            for b in tasks:
                if a.period < b.period:
                    assert a.priority > b.priority
