"""Allocation policies.

``releta`` learns online with one SGD step per decision; ``dqn`` adds a
replay buffer and a lagged target network. The remaining policies are
baselines: ``ltb`` (temperature-vector state, threshold-referenced reward),
``dsm`` (joint core/p-state actions with a temperature+latency reward),
``linux`` (least-utilized core), ``roundrobin`` and ``random``.

Every policy implements ``decide(chip) -> Decision`` and
``learn(ctx) -> float`` (the recorded per-decision reward); the module-level
functions expose the individual operations directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
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
from .simcore import ChipSim, Platform, quantize
from .workload import TaskInstance, TaskProfile

AGENT_NAMES = ("releta", "dqn", "ltb", "dsm", "linux", "roundrobin", "random")

REWARD_VARIANTS = ("continuous", "ternary", "ltb")


@dataclass(frozen=True)
class RewardMode:
    """Reward-function selector. ``t_em`` (the estimated maximum
    temperature used as the reference) is required exactly for ``ltb``."""

    variant: str
    t_em: float | None = None

    def __post_init__(self):
        if self.variant not in REWARD_VARIANTS:
            raise ValidationError("reward", f"must be one of {REWARD_VARIANTS}")
        if self.variant == "ltb" and self.t_em is None:
            raise ValidationError("t_em", "required for the ltb reward")
        if self.variant != "ltb" and self.t_em is not None:
            raise ValidationError("t_em", "only meaningful for the ltb reward")


@dataclass
class Decision:
    """Outcome of one allocation decision. ``pin_freq`` is set only by
    policies that also pick a p-state for the chosen core."""

    core: int
    pin_freq: float | None = None


@dataclass
class DecisionContext:
    """Everything a policy may need when it observes the outcome of its
    latest decision: the chip (for the next state), quantized and raw
    temperature vectors sampled after the settle delay, and the task
    instances that completed since the previous decision."""

    chip: ChipSim
    temps_quant: np.ndarray
    temps_raw: np.ndarray
    completed: list[TaskInstance]


def build_state(chip: ChipSim) -> np.ndarray:
    """State vector of 2n entries: normalized frequencies f_i/f_max, then
    utilizations u_i."""
    f_max = chip.platform.governor.f_max
    freqs = [core.freq / f_max for core in chip.cores]
    utils = [core.util for core in chip.cores]
    return np.array(freqs + utils, dtype=float)


def compute_reward(
    mode: RewardMode, mean_prev: float, action_temp: float, t_max: float | None = None
) -> float:
    """Per-decision reward.

    continuous: mean_prev - action_temp
    ternary:    +10 cooler / 0 equal / -10 hotter than the previous mean
    ltb:        t_em - t_max
    """
    if mode.variant == "continuous":
        return float(mean_prev - action_temp)
    if mode.variant == "ternary":
        if action_temp < mean_prev:
            return 10.0
        if action_temp > mean_prev:
            return -10.0
        return 0.0
    if t_max is None:
        raise ValidationError("t_max", "required for the ltb reward")
    return float(mode.t_em - t_max)


def select_action(agent, state: np.ndarray) -> int:
    """Epsilon-greedy selection.

    Consumes exactly one RNG draw for the Bernoulli trial and one more only
    on the random branch. Sets ``agent.last_action_random`` so callers can
    separate exploratory from greedy picks.
    """
    eps = epsilon_at(agent.step_count, agent.hyper)
    explore = float(agent.rng.random()) < eps
    if explore:
        action = int(agent.rng.integers(agent.net.n_actions))
    else:
        action = argmax_action(forward(agent.net, state))
    agent.last_action_random = explore
    return action


def observe_releta(agent, transition: Transition, sensor_mean: float | None = None) -> float:
    """Online update: one TD target against the agent's own network, one
    SGD step. Returns the pre-update loss."""
    next_q = forward(agent.net, transition.next_state)
    target = td_target(transition.reward, next_q, agent.hyper.gamma, transition.terminal)
    loss = sgd_update(agent.net, transition.state, transition.action, target, agent.hyper.alpha)
    agent.step_count += 1
    if sensor_mean is not None:
        agent.prev_mean_temp = float(sensor_mean)
    return loss


class ReplayBuffer:
    """Fixed-capacity ring buffer; appending at capacity evicts the oldest."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValidationError("replay_capacity", "must be > 0")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def append(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
            self._next = (self._next + 1) % self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, idx: int) -> Transition:
        return self._items[idx]


def observe_dqn(agent, transition: Transition, sensor_mean: float | None = None) -> float | None:
    """Replay-buffer update: store the transition, then (once the buffer
    holds a minibatch) sample uniformly and take one SGD step per sample
    with targets from the target network. Every ``sync_period`` observe
    calls the target network is reset to a copy of the online network.
    Returns the mean minibatch loss, or None during warm-up."""
    agent.replay.append(transition)
    mean_loss = None
    if len(agent.replay) >= agent.minibatch:
        idx = agent.rng.choice(len(agent.replay), size=agent.minibatch, replace=False)
        losses = []
        for j in idx:
            sample = agent.replay[int(j)]
            next_q = forward(agent.target_net, sample.next_state)
            target = td_target(sample.reward, next_q, agent.hyper.gamma, sample.terminal)
            losses.append(
                sgd_update(agent.net, sample.state, sample.action, target, agent.hyper.alpha)
            )
        mean_loss = float(np.mean(losses))
    agent.step_count += 1
    agent.observe_count += 1
    if agent.observe_count % agent.sync_period == 0:
        agent.target_net = agent.net.copy()
        agent.sync_count += 1
    if sensor_mean is not None:
        agent.prev_mean_temp = float(sensor_mean)
    return mean_loss


class _PolicyBase:
    """Shared plumbing: reward bookkeeping and the decide/learn protocol."""

    name = "base"
    learns = False

    def __init__(self, reward_mode: RewardMode, sensor_resolution: float, raw_temps: bool):
        self.reward_mode = reward_mode
        self.sensor_resolution = sensor_resolution
        self.raw_temps = raw_temps
        self.prev_mean_temp: float | None = None
        self.last_action_random: bool | None = None
        self._pending: tuple[np.ndarray, int] | None = None

    def start_episode(self, mean_temp: float) -> None:
        self.prev_mean_temp = float(mean_temp)

    def _temps(self, ctx: DecisionContext) -> np.ndarray:
        return ctx.temps_raw if self.raw_temps else ctx.temps_quant

    def _reward_operands(self, ctx: DecisionContext, core: int) -> tuple[float, float, float]:
        """(mean_prev, action_temp, t_max) on the configured temperature
        source. For the ternary comparison the previous mean is put back on
        the sensor grid so the equality branch can actually fire."""
        temps = self._temps(ctx)
        mean_prev = self.prev_mean_temp if self.prev_mean_temp is not None else float(temps.mean())
        if self.reward_mode.variant == "ternary" and not self.raw_temps:
            mean_prev = float(quantize(np.array([mean_prev]), self.sensor_resolution)[0])
        return mean_prev, float(temps[core]), float(temps.max())

    def _state(self, chip: ChipSim) -> np.ndarray:
        return build_state(chip)

    def decide(self, chip: ChipSim) -> Decision:
        raise NotImplementedError

    def learn(self, ctx: DecisionContext) -> float:
        raise NotImplementedError


class _QPolicyBase(_PolicyBase):
    """Base for the learning policies: epsilon-greedy over a QNetwork."""

    learns = True

    def __init__(
        self,
        net: QNetwork,
        hyper: Hyperparams,
        rng: np.random.Generator,
        reward_mode: RewardMode,
        sensor_resolution: float,
        raw_temps: bool = False,
    ):
        super().__init__(reward_mode, sensor_resolution, raw_temps)
        self.net = net
        self.hyper = hyper
        self.rng = rng
        self.step_count = 0

    def act(self, state: np.ndarray) -> int:
        return select_action(self, state)

    def decide(self, chip: ChipSim) -> Decision:
        state = self._state(chip)
        action = self.act(state)
        self._pending = (state, action)
        return Decision(core=action)

    def _observe(self, transition: Transition, sensor_mean: float) -> None:
        observe_releta(self, transition, sensor_mean)

    def learn(self, ctx: DecisionContext) -> float:
        if self._pending is None:
            raise ValidationError("learn", "no pending decision to observe")
        state, action = self._pending
        self._pending = None
        core = self._action_core(action)
        mean_prev, action_temp, t_max = self._reward_operands(ctx, core)
        reward = self._reward(ctx, mean_prev, action_temp, t_max)
        next_state = self._state(ctx.chip)
        transition = Transition(state, action, reward, next_state, terminal=False)
        self._observe(transition, sensor_mean=float(self._temps(ctx).mean()))
        return reward

    def _action_core(self, action: int) -> int:
        return action

    def _reward(self, ctx: DecisionContext, mean_prev: float, action_temp: float, t_max: float) -> float:
        return compute_reward(self.reward_mode, mean_prev, action_temp, t_max)


class ReletaAgent(_QPolicyBase):
    """Online allocator: 2n state (normalized frequencies and utilizations),
    one action per core, one SGD step per decision."""

    name = "releta"


class DqnAgent(_QPolicyBase):
    """Replay/target-network variant of the allocator."""

    name = "dqn"

    def __init__(
        self,
        net: QNetwork,
        hyper: Hyperparams,
        rng: np.random.Generator,
        reward_mode: RewardMode,
        sensor_resolution: float,
        raw_temps: bool = False,
        replay_capacity: int = 10_000,
        minibatch: int = 32,
        sync_period: int = 100,
    ):
        super().__init__(net, hyper, rng, reward_mode, sensor_resolution, raw_temps)
        if minibatch <= 0:
            raise ValidationError("minibatch", "must be > 0")
        if sync_period <= 0:
            raise ValidationError("sync_period", "must be > 0")
        self.replay = ReplayBuffer(replay_capacity)
        self.minibatch = minibatch
        self.sync_period = sync_period
        self.target_net = net.copy()
        self.observe_count = 0
        self.sync_count = 0

    def _observe(self, transition: Transition, sensor_mean: float) -> None:
        observe_dqn(self, transition, sensor_mean)


class LtbAgent(_QPolicyBase):
    """Baseline learner that keeps only core temperatures as its state and
    rewards distance below a fixed temperature threshold (t_em - T_max).
    Temperatures are scaled by 1/100 so the inputs stay near [0, 1]."""

    name = "ltb"
    TEMP_SCALE = 100.0

    def _state(self, chip: ChipSim) -> np.ndarray:
        return chip.sensor_temps() / self.TEMP_SCALE


class DsmConfig:
    """Weights and latency bounds for the joint allocation + DVFS policy."""

    def __init__(
        self,
        weight_temp: float = 1.0,
        weight_latency: float = 1.0,
        latency_constraints: dict[str, float] | None = None,
    ):
        if weight_temp < 0 or weight_latency < 0:
            raise ValidationError("weight_temp/weight_latency", "must be >= 0")
        if weight_temp == 0 and weight_latency == 0:
            raise ValidationError("weight_temp/weight_latency", "must not both be zero")
        self.weight_temp = weight_temp
        self.weight_latency = weight_latency
        self.latency_constraints = dict(latency_constraints or {})


class DsmAgent(_QPolicyBase):
    """Joint-action learner: each action is a (core, p-state) pair and the
    chosen p-state pins that core's frequency, bypassing the governor.

    Reward: weight_temp * (mean_prev - action_temp)
            - weight_latency * max(0, latency - constraint), where the
    latency term uses the most recent constrained task completed since the
    previous decision (0 when none completed).
    """

    name = "dsm"

    def __init__(
        self,
        net: QNetwork,
        hyper: Hyperparams,
        rng: np.random.Generator,
        reward_mode: RewardMode,
        sensor_resolution: float,
        p_states: tuple[float, ...],
        dsm: DsmConfig,
        raw_temps: bool = False,
    ):
        super().__init__(net, hyper, rng, reward_mode, sensor_resolution, raw_temps)
        self.p_states = p_states
        self.dsm = dsm
        self.n_cores = net.n_actions // len(p_states)

    def _action_core(self, action: int) -> int:
        return action // len(self.p_states)

    def decide(self, chip: ChipSim) -> Decision:
        state = self._state(chip)
        action = self.act(state)
        self._pending = (state, action)
        core = action // len(self.p_states)
        freq = self.p_states[action % len(self.p_states)]
        return Decision(core=core, pin_freq=freq)

    def _constraint_for(self, profile: TaskProfile) -> float | None:
        if profile.name in self.dsm.latency_constraints:
            return self.dsm.latency_constraints[profile.name]
        return profile.latency_constraint

    def _latency_excess(self, ctx: DecisionContext) -> float:
        for inst in reversed(ctx.completed):
            bound = self._constraint_for(inst.profile)
            if bound is not None and inst.latency is not None:
                return max(0.0, inst.latency - bound)
        return 0.0

    def _reward(self, ctx: DecisionContext, mean_prev: float, action_temp: float, t_max: float) -> float:
        temp_term = self.dsm.weight_temp * (mean_prev - action_temp)
        latency_term = self.dsm.weight_latency * self._latency_excess(ctx)
        return float(temp_term - latency_term)


class _StaticPolicyBase(_PolicyBase):
    """Non-learning baselines. They still report the continuous reward so
    runs stay comparable, but never update anything."""

    def act(self, state: np.ndarray) -> int:
        raise NotImplementedError

    def decide(self, chip: ChipSim) -> Decision:
        state = self._state(chip)
        action = self.act(state)
        self._pending = (state, action)
        return Decision(core=action)

    def learn(self, ctx: DecisionContext) -> float:
        if self._pending is None:
            raise ValidationError("learn", "no pending decision to observe")
        _, action = self._pending
        self._pending = None
        mean_prev, action_temp, t_max = self._reward_operands(ctx, action)
        reward = compute_reward(self.reward_mode, mean_prev, action_temp, t_max)
        self.prev_mean_temp = float(self._temps(ctx).mean())
        return reward


class LinuxLikePolicy(_StaticPolicyBase):
    """Least-utilized core, ties to the lowest index."""

    name = "linux"

    def act(self, state: np.ndarray) -> int:
        n = state.shape[0] // 2
        return int(np.argmin(state[n:]))


class RoundRobinPolicy(_StaticPolicyBase):
    name = "roundrobin"

    def __init__(self, n_cores: int, reward_mode: RewardMode, sensor_resolution: float,
                 raw_temps: bool = False):
        super().__init__(reward_mode, sensor_resolution, raw_temps)
        self.n_cores = n_cores
        self._next = 0

    def act(self, state: np.ndarray) -> int:
        action = self._next
        self._next = (self._next + 1) % self.n_cores
        return action


class RandomPolicy(_StaticPolicyBase):
    name = "random"

    def __init__(self, n_cores: int, rng: np.random.Generator, reward_mode: RewardMode,
                 sensor_resolution: float, raw_temps: bool = False):
        super().__init__(reward_mode, sensor_resolution, raw_temps)
        self.n_cores = n_cores
        self.rng = rng

    def act(self, state: np.ndarray) -> int:
        return int(self.rng.integers(self.n_cores))


def baseline_allocate(policy, sim: ChipSim, rng: np.random.Generator | None = None):
    """Functional surface over the baseline policies: returns the chosen
    core index (or the (core, p-state index) pair for the joint policy).

    ``rng`` temporarily overrides the policy's own generator when given.
    """
    if rng is not None and hasattr(policy, "rng"):
        saved = policy.rng
        policy.rng = rng
        try:
            decision = policy.decide(sim)
        finally:
            policy.rng = saved
    else:
        decision = policy.decide(sim)
    if isinstance(policy, DsmAgent):
        return decision.core, policy.p_states.index(decision.pin_freq)
    return decision.core


# Factory operating defaults per policy. The Hyperparams dataclass carries
# the reference defaults (alpha 0.8, gamma 0.9); with this package's
# factor-2 squared-loss gradient convention those step sizes diverge within
# tens of decisions on degree-scale rewards, so the factory substitutes
# step sizes tuned for the shipped platform. Override per config at will;
# docs/config.md tabulates these.
_ALPHA_DEFAULTS = {"releta": 0.02, "dqn": 0.005, "ltb": 0.005, "dsm": 0.01}
_GAMMA_DEFAULT = 0.5
_REWARD_DEFAULTS = {"releta": "continuous", "dqn": "ternary"}
DEFAULT_T_EM = 90.0


def make_agent(
    name: str,
    platform: Platform,
    seed: int,
    params: dict | None = None,
    taskset: tuple[TaskProfile, ...] = (),
) -> _PolicyBase:
    """Build a policy by name, seeded so that weight initialization and
    action randomness are reproducible and independent streams."""
    if name not in AGENT_NAMES:
        raise ValidationError("agent.name", f"unknown agent {name!r}; choose from {AGENT_NAMES}")
    params = dict(params or {})
    n = platform.n
    resolution = platform.sensor.resolution
    raw_temps = bool(params.pop("reward_raw_temps", False))
    weight_rng, action_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)
    )

    hyper = Hyperparams(
        alpha=float(params.pop("alpha", _ALPHA_DEFAULTS.get(name, 0.02))),
        gamma=float(params.pop("gamma", _GAMMA_DEFAULT)),
        eps_start=float(params.pop("eps_start", 0.1)),
        eps_end=float(params.pop("eps_end", 0.03)),
        eps_decay_steps=int(params.pop("eps_decay_steps", 500)),
    )
    activation = str(params.pop("activation", "identity"))

    variant = str(params.pop("reward", _REWARD_DEFAULTS.get(name, "continuous")))
    t_em = params.pop("t_em", None)
    if name == "ltb":
        variant = "ltb"
    if variant == "ltb":
        reward_mode = RewardMode("ltb", t_em=float(t_em) if t_em is not None else DEFAULT_T_EM)
    else:
        reward_mode = RewardMode(variant)

    if name == "releta":
        agent: _PolicyBase = ReletaAgent(
            QNetwork.for_cores(n, weight_rng, activation),
            hyper, action_rng, reward_mode, resolution, raw_temps,
        )
    elif name == "dqn":
        agent = DqnAgent(
            QNetwork.for_cores(n, weight_rng, activation),
            hyper, action_rng, reward_mode, resolution, raw_temps,
            replay_capacity=int(params.pop("replay_capacity", 10_000)),
            minibatch=int(params.pop("minibatch", 32)),
            sync_period=int(params.pop("sync_period", 100)),
        )
    elif name == "ltb":
        net = QNetwork.initialized(n, 2 * n, n, weight_rng, activation)
        agent = LtbAgent(net, hyper, action_rng, reward_mode, resolution, raw_temps)
    elif name == "dsm":
        p_states = platform.governor.p_states
        constraints = {
            p.name: p.latency_constraint for p in taskset if p.latency_constraint is not None
        }
        dsm = DsmConfig(
            weight_temp=float(params.pop("weight_temp", 1.0)),
            weight_latency=float(params.pop("weight_latency", 1.0)),
            latency_constraints=constraints,
        )
        net = QNetwork.initialized(2 * n, 2 * n, n * len(p_states), weight_rng, activation)
        agent = DsmAgent(net, hyper, action_rng, reward_mode, resolution,
                         p_states, dsm, raw_temps)
    elif name == "linux":
        agent = LinuxLikePolicy(reward_mode, resolution, raw_temps)
    elif name == "roundrobin":
        agent = RoundRobinPolicy(n, reward_mode, resolution, raw_temps)
    else:
        agent = RandomPolicy(n, action_rng, reward_mode, resolution, raw_temps)

    unknown = sorted(params)
    if unknown:
        raise ValidationError("agent", f"unknown parameter(s) for {name}: {', '.join(unknown)}")
    return agent
