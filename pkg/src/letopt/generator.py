"""Synthetic task-set generation in the style of automotive benchmarks.

Periods come from the nine classic engine-control values (milliseconds,
expressed in microseconds) with configurable draw probabilities; per-task
utilizations are drawn log-uniformly and rescaled so each core lands on
the target utilization. Chains pick a handful of distinct periods and a
few tasks per period. Every emitted set is schedulable at the root;
generation retries with derived seeds until it is.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import LetOptError
from .model import CauseEffectChain, Task, TaskSet, parse_task_set, serialize_task_set
from .scheduler import is_schedulable

MS = 1000  # microseconds per millisecond

AUTOMOTIVE_PERIODS_US = (1 * MS, 2 * MS, 5 * MS, 10 * MS, 20 * MS,
                         50 * MS, 100 * MS, 200 * MS, 1000 * MS)

# Period shares of the classic engine-control workload with the
# angle-synchronous share removed and the rest renormalized (divided by
# 0.85). Configurable through the profile.
AUTOMOTIVE_PERIOD_WEIGHTS = (
    Fraction(3, 85), Fraction(2, 85), Fraction(2, 85), Fraction(25, 85),
    Fraction(25, 85), Fraction(3, 85), Fraction(20, 85), Fraction(1, 85),
    Fraction(4, 85),
)

AUTOMOTIVE_PERIODS_PER_CHAIN = {1: Fraction(70, 100), 2: Fraction(20, 100), 3: Fraction(10, 100)}
SYNTHETIC_PERIODS_PER_CHAIN = {
    1: Fraction(700, 10000),
    2: Fraction(3575, 10000),
    3: Fraction(2575, 10000),
    4: Fraction(1575, 10000),
    5: Fraction(1575, 10000),
}

# Relative utilization weight per period class. Engine-control load sits
# mostly in the fast classes, so short periods carry more of the target
# utilization; the absolute scale cancels during per-core rescaling.
CLASS_UTILIZATION_BIAS = {
    1 * MS: 5.0, 2 * MS: 4.0, 5 * MS: 3.5, 10 * MS: 3.0, 20 * MS: 2.5,
    50 * MS: 1.5, 100 * MS: 1.0, 200 * MS: 0.7, 1000 * MS: 0.2,
}


@dataclass(frozen=True)
class GeneratorProfile:
    name: str
    unit: str = "us"
    cores: int = 4
    tasks_per_core: int = 15
    target_core_utilization: Fraction = Fraction(71, 100)
    periods: tuple[int, ...] = AUTOMOTIVE_PERIODS_US
    period_weights: tuple[Fraction, ...] = AUTOMOTIVE_PERIOD_WEIGHTS
    utilization_range: tuple[Fraction, Fraction] = (Fraction(1, 1000), Fraction(1, 10))
    class_utilization_bias: dict[int, float] = field(
        default_factory=lambda: dict(CLASS_UTILIZATION_BIAS))
    chain_count: tuple[int, int] = (38, 38)
    periods_per_chain: dict[int, Fraction] = field(
        default_factory=lambda: dict(AUTOMOTIVE_PERIODS_PER_CHAIN))
    tasks_per_period: tuple[int, int] = (2, 5)
    chain_size: tuple[int, int] = (2, 15)
    max_retries: int = 50

    def __post_init__(self):
        if len(self.periods) != len(self.period_weights):
            raise LetOptError("period weights must match the period list")
        total = sum(self.period_weights, Fraction(0))
        if total <= 0:
            raise LetOptError("period weights must sum to a positive value")
        if total != 1:
            object.__setattr__(self, "period_weights",
                               tuple(w / total for w in self.period_weights))
        share = sum(self.periods_per_chain.values(), Fraction(0))
        if share <= 0:
            raise LetOptError("periods-per-chain weights must be positive")
        if share != 1:
            object.__setattr__(self, "periods_per_chain",
                               {k: v / share for k, v in self.periods_per_chain.items()})
        if self.cores < 1 or self.tasks_per_core < 1:
            raise LetOptError("profile needs at least one core and one task per core")
        if self.chain_size[0] < 2:
            raise LetOptError("chains need at least two tasks")


def automotive_profile(**overrides) -> GeneratorProfile:
    overrides.setdefault("name", "automotive")
    return GeneratorProfile(**overrides)


def synthetic_profile(**overrides) -> GeneratorProfile:
    defaults = dict(
        name="synthetic",
        target_core_utilization=Fraction(80, 100),
        chain_count=(10, 20),
        periods_per_chain=dict(SYNTHETIC_PERIODS_PER_CHAIN),
        chain_size=(2, 25),
    )
    defaults.update(overrides)
    return GeneratorProfile(**defaults)


BUILTIN_PROFILES = {"automotive": automotive_profile, "synthetic": synthetic_profile}


def profile_from_dict(data: dict) -> GeneratorProfile:
    base = BUILTIN_PROFILES.get(data.get("base", "automotive"))
    if base is None:
        raise LetOptError(f"unknown base profile {data.get('base')!r}")
    kwargs = {}
    simple = {"name", "unit", "cores", "tasks_per_core", "max_retries"}
    for key, value in data.items():
        if key == "base":
            continue
        if key in simple:
            kwargs[key] = value
        elif key == "target_core_utilization":
            kwargs[key] = Fraction(value)
        elif key == "periods":
            kwargs[key] = tuple(int(p) for p in value)
        elif key == "period_weights":
            kwargs[key] = tuple(Fraction(w) for w in value)
        elif key == "utilization_range":
            kwargs[key] = (Fraction(value[0]), Fraction(value[1]))
        elif key == "class_utilization_bias":
            kwargs[key] = {int(k): float(v) for k, v in value.items()}
        elif key in ("chain_count", "tasks_per_period", "chain_size"):
            kwargs[key] = (int(value[0]), int(value[1]))
        elif key == "periods_per_chain":
            kwargs[key] = {int(k): Fraction(v) for k, v in value.items()}
        else:
            raise LetOptError(f"unknown profile key {key!r}")
    return base(**kwargs)


def draw_periods_per_chain(profile: GeneratorProfile, rng: random.Random) -> int:
    """Number of distinct periods of one chain, per the profile weights."""
    roll = rng.random()
    acc = 0.0
    choices = sorted(profile.periods_per_chain)
    for value in choices:
        acc += float(profile.periods_per_chain[value])
        if roll < acc:
            return value
    return choices[-1]


def _draw_period(profile: GeneratorProfile, rng: random.Random) -> int:
    roll = rng.random()
    acc = 0.0
    for period, weight in zip(profile.periods, profile.period_weights):
        acc += float(weight)
        if roll < acc:
            return period
    return profile.periods[-1]


def _draw_tasks(profile: GeneratorProfile, rng: random.Random) -> list[Task]:
    lo, hi = profile.utilization_range
    tasks = []
    for core_index in range(profile.cores):
        core = f"c{core_index}"
        raw = []
        for _ in range(profile.tasks_per_core):
            period = _draw_period(profile, rng)
            u = math.exp(rng.uniform(math.log(float(lo)), math.log(float(hi))))
            u *= profile.class_utilization_bias.get(period, 1.0)
            raw.append((period, u))
        scale = float(profile.target_core_utilization) / sum(u for _, u in raw)
        for n, (period, u) in enumerate(raw):
            wcet = max(1, round(u * scale * period))
            wcet = min(wcet, period)
            tasks.append(Task(
                id=f"t{core_index}_{n}", core=core, wcet=wcet, period=period,
                deadline=period, phase=0, priority=Fraction(0)))
    # Rate-monotonic priorities, unique per core: shorter period ranks
    # higher, sequence number breaks ties.
    out = []
    for core_index in range(profile.cores):
        core = f"c{core_index}"
        mine = [t for t in tasks if t.core == core]
        ranked = sorted(mine, key=lambda t: (-t.period, t.id))
        priorities = {t.id: Fraction(rank + 1) for rank, t in enumerate(ranked)}
        out.extend(replace(t, priority=priorities[t.id]) for t in mine)
    return out


def _draw_chains(profile: GeneratorProfile, rng: random.Random,
                 tasks: list[Task]) -> list[CauseEffectChain]:
    by_period: dict[int, list[Task]] = {}
    for t in tasks:
        by_period.setdefault(t.period, []).append(t)
    usable_periods = sorted(p for p, group in by_period.items() if len(group) >= 1)
    if not usable_periods:
        raise LetOptError("no periods available for chain construction")

    count = rng.randint(*profile.chain_count)
    chains = []
    for n in range(count):
        members = None
        for _ in range(50):
            n_periods = min(draw_periods_per_chain(profile, rng), len(usable_periods))
            periods = rng.sample(usable_periods, n_periods)
            picked: list[str] = []
            for period in periods:
                pool = by_period[period]
                take = rng.randint(*profile.tasks_per_period)
                take = min(take, len(pool))
                picked.extend(t.id for t in rng.sample(pool, take))
            if len(picked) > profile.chain_size[1]:
                picked = picked[:profile.chain_size[1]]
            if len(picked) >= max(2, profile.chain_size[0]):
                members = picked
                break
        if members is None:
            raise LetOptError("could not draw a chain within the size bounds")
        chains.append(CauseEffectChain(f"e{n}", tuple(members)))
    return chains


def generate_task_set(profile: GeneratorProfile, seed: int) -> tuple[TaskSet, int]:
    """A schedulable task set for the profile; deterministic in the seed.

    Returns (task set, retries used). Retries re-derive the stream from
    the seed, so a given seed always yields the same set.
    """
    for attempt in range(profile.max_retries):
        # String seeds hash stably across processes (unlike tuples).
        rng = random.Random(f"{profile.name}:{seed}:{attempt}")
        tasks = _draw_tasks(profile, rng)
        if any(sum(t.utilization() for t in tasks if t.core == f"c{i}") > 1
               for i in range(profile.cores)):
            continue
        chains = _draw_chains(profile, rng, tasks)
        document = serialize_task_set(TaskSet(
            unit=profile.unit,
            cores=tuple(f"c{i}" for i in range(profile.cores)),
            tasks=tuple(tasks),
            chains=tuple(chains),
        ))
        ts = parse_task_set(document)  # re-validate through the front door
        ok, _ = is_schedulable(ts)
        if ok:
            return ts, attempt
    raise LetOptError(
        f"seed {seed}: no schedulable {profile.name} set within {profile.max_retries} tries")


def generate_automotive(seed: int, **overrides) -> tuple[TaskSet, int]:
    return generate_task_set(automotive_profile(**overrides), seed)


def generate_synthetic(seed: int, **overrides) -> tuple[TaskSet, int]:
    return generate_task_set(synthetic_profile(**overrides), seed)
