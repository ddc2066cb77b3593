"""letopt: design-time optimizer for LET cause-effect chains.

Analyzes multi-rate cause-effect chains under logical-execution-time
communication, searches over job-level dependency insertions and job
skipping to cut system utilization and end-to-end latencies, and emits an
equivalent purely periodic task set.
"""

from .chains import (
    JobChain,
    PrimaryChainSet,
    SkipPlan,
    compute_mrt_mda,
    compute_skip_plan,
    find_job_chain,
    identify_primary_chains,
)
from .errors import ConsistencyError, InfeasibleError, LetOptError, SchemaError
from .intervals import (
    CommInterval,
    IntervalMap,
    classic_intervals,
    earliest_start_latest_finish,
    schedule_aware_intervals,
)
from .model import (
    CauseEffectChain,
    JobRef,
    Task,
    TaskSet,
    hyperperiod,
    normalize_priorities,
    parse_task_set,
    serialize_task_set,
)
from .pipeline import Evaluation, Metrics, classic_latencies, evaluate
from .scheduler import (
    Dependency,
    DependencySet,
    ExecutionRecord,
    Schedule,
    empty_dependencies,
    is_schedulable,
    relative_times,
    simulate,
)

__all__ = [
    "CauseEffectChain",
    "CommInterval",
    "ConsistencyError",
    "Dependency",
    "DependencySet",
    "Evaluation",
    "ExecutionRecord",
    "InfeasibleError",
    "IntervalMap",
    "JobChain",
    "JobRef",
    "LetOptError",
    "Metrics",
    "PrimaryChainSet",
    "SchemaError",
    "Schedule",
    "SkipPlan",
    "Task",
    "TaskSet",
    "classic_intervals",
    "classic_latencies",
    "compute_mrt_mda",
    "compute_skip_plan",
    "earliest_start_latest_finish",
    "empty_dependencies",
    "evaluate",
    "find_job_chain",
    "hyperperiod",
    "identify_primary_chains",
    "is_schedulable",
    "normalize_priorities",
    "parse_task_set",
    "relative_times",
    "schedule_aware_intervals",
    "serialize_task_set",
    "simulate",
]

__version__ = "0.1.0"
