"""Episode runner and metrics pipeline.

An episode repeatedly releases tasks, lets the configured policy place
them, samples temperatures a fixed settle delay after each allocation and
feeds the outcome back to the policy. Everything stochastic hangs off the
experiment seed, so a run is bit-reproducible; wall-clock decision timing
is therefore opt-in (``measure_decision_overhead``) and the dedicated
``measure_overhead`` helper exists for timing studies.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .agents import DecisionContext, _PolicyBase, build_state, make_agent
from .errors import EpisodeError, SimError, ValidationError
from .qfunc import Transition, checkpoint_text
from .simcore import ChipSim, Platform
from .workload import ArrivalConfig, ArrivalProcess, TaskInstance, TaskProfile, execute_tick

_DRAIN_CAP_TICKS = 5_000_000


@dataclass(eq=False)
class ExperimentConfig:
    """One experiment: platform + arrivals + agent + sampling knobs.

    ``seed`` drives every stochastic element (weight init, epsilon draws,
    sensor noise; the arrival stream uses ``arrivals.seed``, which the
    config loader defaults to this seed).
    """

    platform: Platform
    arrivals: ArrivalConfig
    agent_name: str
    agent_params: dict = field(default_factory=dict)
    sample_settle_ticks: int = 30
    seed: int = 0
    output_path: str = "./results"
    name: str = "experiment"
    measure_decision_overhead: bool = False

    def __post_init__(self):
        if self.sample_settle_ticks < 0:
            raise ValidationError("settle_ticks", "must be >= 0")


@dataclass(eq=False)
class RunResult:
    """Per-release metric series for one episode.

    ``overhead_us`` is empty unless decision timing was requested; all
    other series have one entry per release.
    """

    agent_name: str
    seed: int
    peak_temps: list[float]
    mean_temps: list[float]
    rewards: list[float]
    actions: list[int]
    latencies: list[float]
    violations: list[bool | None]  # None = no latency constraint
    overhead_us: list[float]
    exploration: list[bool | None]
    release_times: list[float]
    profile_names: list[str]
    final_agent_state: str | None

    @property
    def total_releases(self) -> int:
        return len(self.peak_temps)

    def violation_rate(self) -> float:
        """Percent of constrained tasks that missed their bound."""
        constrained = [v for v in self.violations if v is not None]
        if not constrained:
            return 0.0
        return 100.0 * sum(constrained) / len(constrained)


class SimWorld:
    """A chip plus its resident tasks and clock. Cloneable, so tests and
    oracles can fork the world and try alternative allocations."""

    def __init__(self, platform: Platform, seed: int):
        sensor_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
        self.chip = ChipSim(platform, sensor_rng=sensor_rng)
        self.platform = platform
        self.clock = 0.0
        self.instances: dict[int, TaskInstance] = {}
        self.completed_log: list[int] = []
        self._next_id = 0

    def clone(self) -> "SimWorld":
        return copy.deepcopy(self)

    def release(self, profile: TaskProfile) -> TaskInstance:
        inst = TaskInstance(id=self._next_id, profile=profile, arrival=self.clock)
        self._next_id += 1
        self.instances[inst.id] = inst
        return inst

    def allocate(self, inst: TaskInstance, core: int, pin_freq: float | None = None) -> None:
        if inst.core is not None:
            raise ValidationError("core", f"instance {inst.id} is already allocated")
        inst.core = core
        self.chip.cores[core].queue.append(inst.id)
        if pin_freq is not None:
            self.chip.pin_frequency(core, pin_freq)

    def tick(self) -> None:
        dt = self.platform.thermal.dt
        f_nom = self.platform.governor.f_max
        for core in self.chip.cores:
            resident = [self.instances[i] for i in core.queue]
            done = execute_tick(core, resident, f_nom, dt, now=self.clock)
            self.completed_log.extend(inst.id for inst in done)
        self.chip.step()
        self.clock += dt

    def advance_ticks(self, ticks: int) -> None:
        for _ in range(ticks):
            self.tick()

    def advance_to(self, t: float) -> None:
        """Tick until the clock reaches ``t`` (no-op when already past)."""
        while self.clock < t - 1e-9:
            self.tick()

    def sensor(self) -> np.ndarray:
        return self.chip.sensor_temps()

    def temps(self) -> np.ndarray:
        return self.chip.temps()

    def unfinished(self) -> list[TaskInstance]:
        return [inst for inst in self.instances.values() if inst.finish is None]

    def drain(self) -> None:
        """Run until every released task has completed."""
        ticks = 0
        while self.unfinished():
            self.tick()
            ticks += 1
            if ticks > _DRAIN_CAP_TICKS:
                raise SimError("drain did not complete; workload cannot finish")


def settle_temps_per_core(world: SimWorld, profile: TaskProfile, settle_ticks: int) -> np.ndarray:
    """Brute-force oracle helper: fork the world once per core, allocate the
    task there, advance the settle delay and report the allocated core's
    quantized temperature for each choice."""
    temps = []
    for core in range(world.chip.n):
        trial = world.clone()
        inst = trial.release(profile)
        trial.allocate(inst, core)
        trial.advance_ticks(settle_ticks)
        temps.append(float(trial.sensor()[core]))
    return np.array(temps)


def run_episode(cfg: ExperimentConfig) -> RunResult:
    """Simulate the full arrival sequence under one policy.

    Per release: build the state, pick a core, allocate, advance the settle
    delay, sample temperatures, reward and update the policy. After the
    final release the simulation drains so every task has a latency.
    """
    world = SimWorld(cfg.platform, cfg.seed)
    agent = make_agent(
        cfg.agent_name, cfg.platform, seed=cfg.seed,
        params=cfg.agent_params, taskset=cfg.arrivals.taskset,
    )
    arrivals = ArrivalProcess(cfg.arrivals)
    agent.start_episode(float(world.sensor().mean()))

    peak_temps: list[float] = []
    mean_temps: list[float] = []
    rewards: list[float] = []
    actions: list[int] = []
    overhead_us: list[float] = []
    exploration: list[bool | None] = []
    release_times: list[float] = []
    profile_names: list[str] = []
    released: list[TaskInstance] = []

    next_release_t = 0.0
    completed_seen = 0
    for k in range(cfg.arrivals.total_releases):
        try:
            delta, profile = arrivals.next_arrival()
            next_release_t += delta
            world.advance_to(next_release_t)
            inst = world.release(profile)
            released.append(inst)
            release_times.append(world.clock)
            profile_names.append(profile.name)

            t0 = time.perf_counter_ns() if cfg.measure_decision_overhead else 0
            decision = agent.decide(world.chip)
            t1 = time.perf_counter_ns() if cfg.measure_decision_overhead else 0

            world.allocate(inst, decision.core, decision.pin_freq)
            world.advance_ticks(cfg.sample_settle_ticks)

            newly_done = [world.instances[i] for i in world.completed_log[completed_seen:]]
            completed_seen = len(world.completed_log)
            ctx = DecisionContext(
                chip=world.chip,
                temps_quant=world.sensor(),
                temps_raw=world.temps(),
                completed=newly_done,
            )
            t2 = time.perf_counter_ns() if cfg.measure_decision_overhead else 0
            reward = agent.learn(ctx)
            t3 = time.perf_counter_ns() if cfg.measure_decision_overhead else 0

            peak_temps.append(float(ctx.temps_quant.max()))
            mean_temps.append(float(ctx.temps_quant.mean()))
            rewards.append(float(reward))
            actions.append(decision.core)
            exploration.append(agent.last_action_random)
            if cfg.measure_decision_overhead:
                overhead_us.append(((t1 - t0) + (t3 - t2)) / 1000.0)
        except SimError as exc:
            raise EpisodeError(k, str(exc)) from exc

    world.drain()
    latencies: list[float] = []
    violations: list[bool | None] = []
    for inst in released:
        lat = inst.latency
        assert lat is not None  # drain guarantees completion
        latencies.append(float(lat))
        bound = inst.profile.latency_constraint
        violations.append(None if bound is None else lat > bound)

    final_state = checkpoint_text(agent.net) if hasattr(agent, "net") else None
    return RunResult(
        agent_name=cfg.agent_name,
        seed=cfg.seed,
        peak_temps=peak_temps,
        mean_temps=mean_temps,
        rewards=rewards,
        actions=actions,
        latencies=latencies,
        violations=violations,
        overhead_us=overhead_us,
        exploration=exploration,
        release_times=release_times,
        profile_names=profile_names,
        final_agent_state=final_state,
    )


@dataclass
class PolicyComparison:
    """One summary row. Diffs are (this policy - reference) peak
    temperature over the converged window, so positive means the reference
    ran cooler."""

    agent: str
    mean_peak: float
    avg_diff: float
    max_diff: float
    violation_rate: float
    mean_overhead_ms: float | None
    max_overhead_ms: float | None


@dataclass(eq=False)
class ComparisonSummary:
    reference: str
    rows: list[PolicyComparison]
    window_start: int
    results: list[RunResult]

    @property
    def avg_diff(self) -> float:
        """Average peak-temperature difference of the second policy against
        the reference (the canonical pairwise comparison)."""
        return self.rows[1].avg_diff if len(self.rows) > 1 else 0.0

    @property
    def max_diff(self) -> float:
        return self.rows[1].max_diff if len(self.rows) > 1 else 0.0

    @property
    def violation_rates(self) -> dict[str, float]:
        return {row.agent: row.violation_rate for row in self.rows}

    def table_text(self) -> str:
        header = (
            f"{'agent':<12} {'mean_peak':>10} {'avg_diff':>9} {'max_diff':>9} "
            f"{'viol_%':>7} {'mean_ovh_ms':>12} {'max_ovh_ms':>11}"
        )
        lines = [header, "-" * len(header)]
        for row in self.rows:
            ovh_mean = f"{row.mean_overhead_ms:.3f}" if row.mean_overhead_ms is not None else "-"
            ovh_max = f"{row.max_overhead_ms:.3f}" if row.max_overhead_ms is not None else "-"
            lines.append(
                f"{row.agent:<12} {row.mean_peak:>10.3f} {row.avg_diff:>9.3f} "
                f"{row.max_diff:>9.3f} {row.violation_rate:>7.2f} {ovh_mean:>12} {ovh_max:>11}"
            )
        return "\n".join(lines)

    def table_csv(self) -> str:
        lines = ["agent,mean_peak,avg_diff,max_diff,violation_rate,mean_overhead_ms,max_overhead_ms"]
        for row in self.rows:
            ovh_mean = repr(row.mean_overhead_ms) if row.mean_overhead_ms is not None else ""
            ovh_max = repr(row.max_overhead_ms) if row.max_overhead_ms is not None else ""
            lines.append(
                f"{row.agent},{row.mean_peak!r},{row.avg_diff!r},{row.max_diff!r},"
                f"{row.violation_rate!r},{ovh_mean},{ovh_max}"
            )
        return "\n".join(lines) + "\n"


def _same_trace_inputs(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    if a.arrivals != b.arrivals or a.seed != b.seed:
        return False
    ta, tb = a.platform.thermal, b.platform.thermal
    same_thermal = (
        ta.ambient_temp == tb.ambient_temp
        and ta.dt == tb.dt
        and np.array_equal(ta.r_th, tb.r_th)
        and np.array_equal(ta.c_th, tb.c_th)
        and np.array_equal(ta.coupling, tb.coupling)
    )
    return (
        same_thermal
        and a.platform.power == b.platform.power
        and a.platform.governor == b.platform.governor
        and a.platform.sensor == b.platform.sensor
        and a.sample_settle_ticks == b.sample_settle_ticks
    )


def _overhead_ms(result: RunResult) -> tuple[float | None, float | None]:
    if not result.overhead_us:
        return None, None
    arr = np.asarray(result.overhead_us)
    return float(arr.mean() / 1000.0), float(arr.max() / 1000.0)


def compare(cfgs: list[ExperimentConfig]) -> ComparisonSummary:
    """Run every config on the shared arrival trace and summarize peak
    temperatures against the first (reference) config over the converged
    window (second half of the episode by default)."""
    if len(cfgs) < 2:
        raise ValidationError("configs", "compare needs at least two configs")
    for other in cfgs[1:]:
        if not _same_trace_inputs(cfgs[0], other):
            raise ValidationError(
                "configs", "mismatched arrival sequences: compare configs may differ only in agent"
            )
    results = [run_episode(cfg) for cfg in cfgs]
    total = results[0].total_releases
    window_start = total // 2
    ref_window = np.asarray(results[0].peak_temps[window_start:])

    rows: list[PolicyComparison] = []
    for i, res in enumerate(results):
        window = np.asarray(res.peak_temps[window_start:])
        diff = window - ref_window
        mean_ovh, max_ovh = _overhead_ms(res)
        rows.append(
            PolicyComparison(
                agent=res.agent_name,
                mean_peak=float(window.mean()),
                avg_diff=0.0 if i == 0 else float(diff.mean()),
                max_diff=0.0 if i == 0 else float(diff.max()),
                violation_rate=res.violation_rate(),
                mean_overhead_ms=mean_ovh,
                max_overhead_ms=max_ovh,
            )
        )
    return ComparisonSummary(
        reference=results[0].agent_name, rows=rows, window_start=window_start, results=results
    )


def measure_overhead(
    agent: _PolicyBase, state: np.ndarray, repetitions: int
) -> tuple[float, float]:
    """Wall-clock cost of one decision (action selection plus the learning
    update) in microseconds: (mean, max) over ``repetitions``. Simulation
    stepping is excluded; the agent is copied so the caller's instance is
    untouched."""
    if repetitions < 100:
        raise ValidationError("repetitions", "must be >= 100")
    agent = copy.deepcopy(agent)
    state = np.asarray(state, dtype=float)
    samples = np.empty(repetitions)
    for i in range(repetitions):
        t0 = time.perf_counter_ns()
        action = agent.act(state)
        if agent.learns:
            transition = Transition(state, action, 0.0, state, terminal=False)
            agent._observe(transition, sensor_mean=0.0)
        samples[i] = (time.perf_counter_ns() - t0) / 1000.0
    return float(samples.mean()), float(samples.max())


CSV_HEADER = "release_index,peak_temp,mean_temp,reward,action,latency,violated,overhead_us"


def emit_csv(result: RunResult, path: str) -> None:
    """One row per release. Floats are written with ``repr`` so parsing the
    file back reproduces the in-memory values exactly; ``violated`` is
    empty for unconstrained tasks and ``overhead_us`` is empty when timing
    was not requested."""
    lines = [CSV_HEADER]
    for k in range(result.total_releases):
        violated = result.violations[k]
        violated_s = "" if violated is None else ("1" if violated else "0")
        overhead_s = repr(result.overhead_us[k]) if result.overhead_us else ""
        lines.append(
            f"{k},{result.peak_temps[k]!r},{result.mean_temps[k]!r},"
            f"{result.rewards[k]!r},{result.actions[k]},{result.latencies[k]!r},"
            f"{violated_s},{overhead_s}"
        )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise SimError(f"cannot write {path}: {exc}") from exc


def read_result_csv(path: str) -> dict[str, list]:
    """Parse a file produced by ``emit_csv`` back into column lists."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CSV_HEADER:
        raise SimError(f"{path}: unexpected CSV header")
    cols: dict[str, list] = {name: [] for name in CSV_HEADER.split(",")}
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise SimError(f"{path}: malformed row {line!r}")
        cols["release_index"].append(int(parts[0]))
        cols["peak_temp"].append(float(parts[1]))
        cols["mean_temp"].append(float(parts[2]))
        cols["reward"].append(float(parts[3]))
        cols["action"].append(int(parts[4]))
        cols["latency"].append(float(parts[5]))
        cols["violated"].append(None if parts[6] == "" else bool(int(parts[6])))
        cols["overhead_us"].append(None if parts[7] == "" else float(parts[7]))
    return cols
