"""Multicore thermal simulator with reinforcement-learning task allocation.

Subpackages by responsibility: ``simcore`` (chip physics), ``workload``
(tasks and arrivals), ``qfunc`` (Q-value network and SGD), ``agents``
(allocation policies), ``harness`` (episodes and metrics), ``cli``.
"""

from .agents import (
    AGENT_NAMES,
    DqnAgent,
    LtbAgent,
    ReletaAgent,
    RewardMode,
    baseline_allocate,
    build_state,
    compute_reward,
    make_agent,
    observe_dqn,
    observe_releta,
    select_action,
)
from .errors import (
    ArrivalsExhausted,
    ConfigParseError,
    DivergenceError,
    EpisodeError,
    SimError,
    StabilityError,
    ValidationError,
)
from .harness import (
    ComparisonSummary,
    ExperimentConfig,
    RunResult,
    SimWorld,
    compare,
    emit_csv,
    measure_overhead,
    run_episode,
)
from .qfunc import (
    Hyperparams,
    QNetwork,
    Transition,
    argmax_action,
    epsilon_at,
    forward,
    sgd_update,
    td_target,
)
from .simcore import (
    ChipSim,
    CoreState,
    GovernorConfig,
    Platform,
    PowerParams,
    SensorConfig,
    ThermalParams,
    governor_update,
    power_draw,
    sensor_read,
    thermal_step,
)
from .workload import (
    ArrivalConfig,
    ArrivalProcess,
    TaskInstance,
    TaskProfile,
    default_taskset,
    execute_tick,
    load_taskset,
)

__version__ = "0.1.0"
