import random
from fractions import Fraction

import pytest

from conftest import make_tiny_task_set
from letopt.chains import (
    analysis_window,
    analyze_chains,
    compute_mrt_mda,
    compute_skip_plan,
    find_job_chain,
    identify_primary_chains,
    latencies_excluding_skips,
    reaction_span,
)
from letopt.errors import LetOptError
from letopt.intervals import classic_intervals, schedule_aware_intervals
from letopt.model import JobRef, parse_task_set
from letopt.pipeline import evaluate
from letopt.scheduler import simulate
from oracles import brute_force_primary_chains, event_injection_mrt


def _example1_context(example1, deps=None):
    sched = simulate(example1, deps)
    intervals, shifted = schedule_aware_intervals(example1, sched)
    return intervals, shifted


def test_example1_three_primary_chains(example1):
    intervals, shifted = _example1_context(example1)
    primary = identify_primary_chains(shifted, shifted.chains[0], intervals)
    assert len(primary.chains) == 3
    # the chain pattern repeats every 15 with 5-apart samplings
    samplings = [c.sampling_instant for c in primary.chains]
    assert samplings[1] - samplings[0] == 5
    assert samplings[2] - samplings[1] == 5


def test_example1_mrt_13(example1):
    intervals, shifted = _example1_context(example1)
    primary = identify_primary_chains(shifted, shifted.chains[0], intervals)
    assert compute_mrt_mda(primary) == (13, 13)


def test_example1_with_fig5_dependencies_mrt_12_and_new_skips(example1, fig5_deps):
    intervals, shifted = _example1_context(example1, fig5_deps)
    primary = identify_primary_chains(shifted, shifted.chains[0], intervals)
    assert compute_mrt_mda(primary) == (12, 12)
    plan = compute_skip_plan(shifted, intervals, {"e": primary})
    # two t2 jobs per window are not primary: the 1st and the 4th
    assert plan.skipped_residues["t2"] == frozenset({0, 3})


def test_single_rate_chain_walks_one_period_per_hop():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 4, "priority": 2},
            {"id": "r", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "r"]}],
    })
    intervals = classic_intervals(ts)
    chain = ts.chains[0]
    job = find_job_chain(ts, chain, intervals, JobRef("r", 9))
    assert job.jobs == (JobRef("w", 8), JobRef("r", 9))


def test_equal_write_and_read_instant_is_readable():
    # producer writes exactly when the consumer reads: inclusive test
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 5, "priority": 2},
            {"id": "r", "core": "c0", "wcet": 1, "period": 5, "phase": 0, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "r"]}],
    })
    sched = simulate(ts)
    intervals, shifted = schedule_aware_intervals(ts, sched)
    # w runs [0,1) -> L_w = [0,1]; r shifted by 1, reads at its release
    assert intervals["w"].end == 1
    assert shifted.task("r").phase == 1
    chain = find_job_chain(shifted, shifted.chains[0], intervals, JobRef("r", 3))
    # r#3 reads at 11; w#3 writes at 11: the same-instant write is taken
    assert chain.jobs[0] == JobRef("w", 3)


def test_walk_fails_before_start_of_time():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 4, "priority": 2},
            {"id": "r", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "r"]}],
    })
    intervals = classic_intervals(ts)
    assert find_job_chain(ts, ts.chains[0], intervals, JobRef("r", 1)) is None


def test_equal_period_chain_one_primary_per_window():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 4, "priority": 2},
            {"id": "r", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "r"]}],
    })
    intervals = classic_intervals(ts)
    chain = ts.chains[0]
    w0, h = analysis_window(ts, chain)
    primary = identify_primary_chains(ts, chain, intervals)
    assert len(primary.chains) == 1
    oracle = brute_force_primary_chains(ts, intervals, chain, w0, h)
    assert len(oracle) == 1
    (jobs, sampling, output), = oracle.values()
    got = primary.chains[0]
    assert tuple((j.task, j.index) for j in got.jobs) == jobs
    assert (got.sampling_instant, got.output_instant) == (sampling, output)


def test_two_member_equal_period_classic_mrt_is_three_periods():
    # writer publishes at the end of its period, the next reader samples at
    # its release: one period of sampling gap plus two of traversal
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 4, "priority": 2},
            {"id": "r", "core": "c0", "wcet": 1, "period": 4, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "r"]}],
    })
    intervals = classic_intervals(ts)
    primary = identify_primary_chains(ts, ts.chains[0], intervals)
    assert compute_mrt_mda(primary) == (12, 12)  # 3 * T with T = 4
    w0, h = analysis_window(ts, ts.chains[0])
    assert event_injection_mrt(ts, intervals, ts.chains[0], w0, 2 * h) == 12


def test_example1_skip_plan_utilization(example1):
    ev = evaluate(example1)
    plan = ev.skip_plan
    assert len(plan.skipped_jobs) == 2
    assert all(j.task == "t2" for j in plan.skipped_jobs)
    assert plan.system_utilization == Fraction(9, 15)
    assert example1.system_utilization() == Fraction(11, 15)


def test_task_outside_all_chains_never_skipped():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 4, "priority": 3},
            {"id": "m", "core": "c0", "wcet": 1, "period": 2, "priority": 4},
            {"id": "r", "core": "c0", "wcet": 1, "period": 8, "priority": 2},
            {"id": "x", "core": "c0", "wcet": 1, "period": 8, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["w", "m", "r"]}],
    })
    ev = evaluate(ts)
    assert "x" not in ev.skip_plan.skipped_residues
    assert not ev.skip_plan.is_skipped("x", 1)
    # x still contributes its full utilization
    assert ev.skip_plan.per_core_utilization["c0"] >= Fraction(1, 8)


def test_boundary_role_in_any_chain_blocks_skipping():
    # m is interior in e1 but the first member of e2: never skipped
    ts = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 8, "priority": 4},
            {"id": "m", "core": "c0", "wcet": 1, "period": 2, "priority": 3},
            {"id": "r", "core": "c0", "wcet": 1, "period": 8, "priority": 2},
            {"id": "z", "core": "c0", "wcet": 1, "period": 8, "priority": 1},
        ],
        "chains": [
            {"id": "e1", "members": ["w", "m", "r"]},
            {"id": "e2", "members": ["m", "z"]},
        ],
    })
    ev = evaluate(ts)
    assert ev.skip_plan.skipped_residues.get("m", frozenset()) == frozenset()
    # sanity: in e1 alone, m would have had skippable jobs
    solo = parse_task_set({
        "unit": "us", "cores": ["c0"],
        "tasks": [
            {"id": "w", "core": "c0", "wcet": 1, "period": 8, "priority": 4},
            {"id": "m", "core": "c0", "wcet": 1, "period": 2, "priority": 3},
            {"id": "r", "core": "c0", "wcet": 1, "period": 8, "priority": 2},
        ],
        "chains": [{"id": "e1", "members": ["w", "m", "r"]}],
    })
    ev_solo = evaluate(solo)
    assert ev_solo.skip_plan.skipped_residues["m"]


def test_no_primary_chain_is_an_error():
    with pytest.raises(LetOptError):
        reaction_span([], 10)


def test_system_utilization_is_mean_over_cores():
    ts = parse_task_set({
        "unit": "us", "cores": ["c0", "c1"],
        "tasks": [
            {"id": "a", "core": "c0", "wcet": 1, "period": 2, "priority": 1},
            {"id": "b", "core": "c1", "wcet": 1, "period": 4, "priority": 1},
        ],
        "chains": [{"id": "e", "members": ["a", "b"]}],
    })
    assert ts.system_utilization() == Fraction(3, 8)  # (1/2 + 1/4) / 2
    ev = evaluate(ts)
    assert ev.skip_plan.system_utilization == Fraction(3, 8)  # both boundary


def test_primary_chains_periodic_across_windows(example1):
    intervals, shifted = _example1_context(example1)
    chain = shifted.chains[0]
    w0, h = analysis_window(shifted, chain)
    first = identify_primary_chains(shifted, chain, intervals, window_start=w0)
    second = identify_primary_chains(shifted, chain, intervals, window_start=w0 + h)
    assert len(first.chains) == len(second.chains)
    for a, b in zip(first.chains, second.chains):
        assert b.sampling_instant - a.sampling_instant == h
        assert b.output_instant - a.output_instant == h
        for ja, jb in zip(a.jobs, b.jobs):
            period = shifted.task(ja.task).period
            assert jb.index - ja.index == h // period


def test_skip_soundness_no_primary_consumer_reads_skipped_value():
    rng = random.Random("skip-soundness")
    for _ in range(15):
        ts = make_tiny_task_set(rng)
        ev = evaluate(ts)
        for chain in ts.chains:
            for pchain in ev.primaries[chain.id].chains:
                for job in pchain.jobs:
                    assert not ev.skip_plan.is_skipped(job.task, job.index)


def test_latency_preserved_when_skipped_jobs_removed():
    rng = random.Random("skip-latency")
    for _ in range(15):
        ts = make_tiny_task_set(rng)
        ev = evaluate(ts)
        if not any(ev.skip_plan.skipped_residues.values()):
            continue
        again = latencies_excluding_skips(ev.shifted, ev.intervals, ev.skip_plan)
        assert again == ev.metrics.latencies


def test_brute_force_equivalence_small_random_sets():
    rng = random.Random("chain-oracle")
    for _ in range(20):
        ts = make_tiny_task_set(rng)
        sched = simulate(ts)
        intervals, shifted = schedule_aware_intervals(ts, sched)
        for chain in shifted.chains:
            w0, h = analysis_window(shifted, chain)
            got = identify_primary_chains(shifted, chain, intervals, window_start=w0)
            oracle = brute_force_primary_chains(shifted, intervals, chain, w0, h)
            ours = {tuple((j.task, j.index) for j in c.jobs): (c.sampling_instant, c.output_instant)
                    for c in got.chains}
            theirs = {jobs: (sampling, output)
                      for jobs, sampling, output in oracle.values()}
            assert ours == theirs


def test_mrt_matches_event_injection_oracle_small_sets():
    rng = random.Random("mrt-oracle")
    for _ in range(12):
        ts = make_tiny_task_set(rng)
        sched = simulate(ts)
        intervals, shifted = schedule_aware_intervals(ts, sched)
        _, latencies = analyze_chains(shifted, intervals)
        for chain in shifted.chains:
            w0, h = analysis_window(shifted, chain)
            oracle = event_injection_mrt(shifted, intervals, chain, w0, 2 * h)
            assert latencies[chain.id][0] == oracle
