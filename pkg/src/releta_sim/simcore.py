"""Deterministic discrete-time model of an n-core chip.

Covers per-core power draw, first-order RC thermal dynamics with optional
linear inter-core coupling, an ondemand-style frequency governor and a
quantized temperature sensor. All stepping is explicit forward Euler with a
fixed ``dt``; identical inputs produce bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StabilityError, ValidationError


@dataclass(eq=False)
class ThermalParams:
    """RC thermal network: per-core resistance/capacitance plus coupling.

    ``coupling[i][j]`` is the conductance (W/degC) between cores i and j;
    the matrix must be symmetric with a zero diagonal. The explicit update
    is stable only for ``dt < min_i(r_th[i] * c_th[i])``.
    """

    ambient_temp: float
    r_th: np.ndarray
    c_th: np.ndarray
    coupling: np.ndarray
    dt: float

    def __post_init__(self):
        self.r_th = np.asarray(self.r_th, dtype=float)
        self.c_th = np.asarray(self.c_th, dtype=float)
        self.coupling = np.asarray(self.coupling, dtype=float)
        n = self.r_th.shape[0]
        if self.r_th.ndim != 1 or self.c_th.shape != (n,):
            raise ValidationError("r_th/c_th", "must be 1-d vectors of equal length")
        if np.any(self.r_th <= 0):
            raise ValidationError("r_th", "all entries must be > 0")
        if np.any(self.c_th <= 0):
            raise ValidationError("c_th", "all entries must be > 0")
        if self.coupling.shape != (n, n):
            raise ValidationError("coupling", f"must be an {n}x{n} matrix")
        if np.any(self.coupling < 0):
            raise ValidationError("coupling", "entries must be >= 0")
        if np.any(np.diag(self.coupling) != 0):
            raise ValidationError("coupling", "diagonal must be zero")
        if not np.array_equal(self.coupling, self.coupling.T):
            raise ValidationError("coupling", "matrix must be symmetric")
        if not self.dt > 0:
            raise ValidationError("dt", "must be > 0")
        limit = float(np.min(self.r_th * self.c_th))
        if not self.dt < limit:
            raise ValidationError(
                "dt", f"must be < min(r_th*c_th) = {limit:g} s for a stable explicit update"
            )

    @property
    def n(self) -> int:
        return self.r_th.shape[0]


@dataclass
class PowerParams:
    """Cubic-in-frequency dynamic power plus constant static power.

    ``leak_coeff`` optionally adds a linear temperature-dependent leakage
    term (W per degC above ambient); it is applied by ``ChipSim.step``, not
    by ``power_draw``, so steady states stay closed-form when it is zero.
    """

    k_dyn: float
    exp: float = 3.0
    p_static: float = 0.0
    leak_coeff: float = 0.0

    def __post_init__(self):
        if self.k_dyn < 0:
            raise ValidationError("k_dyn", "must be >= 0")
        if self.p_static < 0:
            raise ValidationError("p_static", "must be >= 0")
        if self.exp < 1:
            raise ValidationError("exp", "must be >= 1")
        if self.leak_coeff < 0:
            raise ValidationError("leak_coeff", "must be >= 0")


@dataclass
class GovernorConfig:
    """Discrete frequency levels plus the ondemand-style jump threshold."""

    p_states: tuple[float, ...]
    up_threshold: float = 0.95

    def __post_init__(self):
        self.p_states = tuple(float(f) for f in self.p_states)
        if not self.p_states:
            raise ValidationError("p_states", "need at least one frequency level")
        if any(f <= 0 for f in self.p_states):
            raise ValidationError("p_states", "levels must be > 0")
        if list(self.p_states) != sorted(self.p_states):
            raise ValidationError("p_states", "levels must be sorted ascending")
        if not 0 < self.up_threshold <= 1:
            raise ValidationError("up_threshold", "must be in (0, 1]")

    @property
    def f_min(self) -> float:
        return self.p_states[0]

    @property
    def f_max(self) -> float:
        return self.p_states[-1]


@dataclass
class SensorConfig:
    """Sensor quantization (default 1 degC, like integer-reporting hardware)
    and optional Gaussian read noise."""

    resolution: float = 1.0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.resolution < 0:
            raise ValidationError("resolution", "must be >= 0")
        if self.noise_std < 0:
            raise ValidationError("noise_std", "must be >= 0")


@dataclass
class CoreState:
    """Mutable per-core state: temperature, frequency, utilization and the
    ordered queue of resident task-instance ids."""

    temperature: float
    freq: float
    util: float = 0.0
    queue: list[int] = field(default_factory=list)
    pinned: bool = False  # frequency pinned by a DVFS-capable policy


@dataclass(eq=False)
class Platform:
    """Everything that defines the simulated chip."""

    thermal: ThermalParams
    power: PowerParams
    governor: GovernorConfig
    sensor: SensorConfig

    @property
    def n(self) -> int:
        return self.thermal.n

    @staticmethod
    def default(n: int = 4) -> "Platform":
        """Four-core 3.6 GHz profile with deliberately heterogeneous r_th
        (+/-15%) so cores are thermally distinguishable."""
        spread = np.linspace(1.15, 0.85, n) if n > 1 else np.array([1.0])
        thermal = ThermalParams(
            ambient_temp=35.0,
            r_th=1.8 * spread,
            c_th=np.full(n, 0.6),
            coupling=np.zeros((n, n)),
            dt=0.05,
        )
        power = PowerParams(k_dyn=0.4, exp=3.0, p_static=1.0)
        governor = GovernorConfig(p_states=(0.8, 1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6))
        return Platform(thermal, power, governor, SensorConfig())


def power_draw(freq: float, util: float, p: PowerParams) -> float:
    """Instantaneous power in watts: p_static + k_dyn * util * freq**exp."""
    if not 0.0 <= util <= 1.0:
        raise ValidationError("util", f"must be in [0, 1], got {util!r}")
    if not freq > 0:
        raise ValidationError("freq", f"must be > 0, got {freq!r}")
    return p.p_static + p.k_dyn * util * freq**p.exp


def thermal_step(temps: np.ndarray, powers: np.ndarray, tp: ThermalParams) -> np.ndarray:
    """One explicit Euler step of the RC network.

    T_i' = T_i + (dt/c_i) * (P_i - (T_i - ambient)/r_i - sum_j K_ij (T_i - T_j))
    """
    temps = np.asarray(temps, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if temps.shape != (tp.n,) or powers.shape != (tp.n,):
        raise ValidationError("temps/powers", f"expected vectors of length {tp.n}")
    if not tp.dt < float(np.min(tp.r_th * tp.c_th)):
        raise StabilityError(
            f"dt={tp.dt:g} violates the explicit-update bound min(r_th*c_th)"
        )
    conduction = (temps - tp.ambient_temp) / tp.r_th
    transfer = temps * tp.coupling.sum(axis=1) - tp.coupling @ temps
    return temps + (tp.dt / tp.c_th) * (powers - conduction - transfer)


def governor_update(util: float, g: GovernorConfig) -> float:
    """Ondemand-style frequency choice for one core.

    Jumps to f_max at/above the up threshold; otherwise picks the smallest
    p-state covering util * f_max. Monotone nondecreasing in util.
    """
    if not 0.0 <= util <= 1.0:
        raise ValidationError("util", f"must be in [0, 1], got {util!r}")
    if util >= g.up_threshold:
        return g.f_max
    target = util * g.f_max
    for level in g.p_states:
        if level >= target - 1e-12:
            return level
    return g.f_max


def quantize(values: np.ndarray, resolution: float) -> np.ndarray:
    """Round to the nearest multiple of ``resolution`` (halves round up).
    Resolution 0 disables quantization."""
    values = np.asarray(values, dtype=float)
    if resolution <= 0:
        return values.copy()
    return np.floor(values / resolution + 0.5) * resolution


def sensor_read(
    temps: np.ndarray, cfg: SensorConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Sensor readout: optional Gaussian noise, then quantization."""
    temps = np.asarray(temps, dtype=float)
    if cfg.noise_std > 0:
        if rng is None:
            raise ValidationError("rng", "a generator is required when noise_std > 0")
        temps = temps + rng.normal(0.0, cfg.noise_std, size=temps.shape)
    return quantize(temps, cfg.resolution)


class ChipSim:
    """Mutable n-core chip. Single-threaded stepping; instances are
    self-contained and may be moved between threads, never shared."""

    def __init__(self, platform: Platform, sensor_rng: np.random.Generator | None = None):
        self.platform = platform
        self._sensor_rng = sensor_rng
        amb = platform.thermal.ambient_temp
        f_min = platform.governor.f_min
        self.cores = [CoreState(temperature=amb, freq=f_min) for _ in range(platform.n)]
        self._temps = np.full(platform.n, amb, dtype=float)

    @property
    def n(self) -> int:
        return self.platform.n

    def temps(self) -> np.ndarray:
        """Physical core temperatures (no sensor effects)."""
        return self._temps.copy()

    def sensor_temps(self) -> np.ndarray:
        return sensor_read(self._temps, self.platform.sensor, self._sensor_rng)

    def pin_frequency(self, core_idx: int, freq: float) -> None:
        """Pin one core to a fixed p-state, bypassing the governor."""
        if freq not in self.platform.governor.p_states:
            raise ValidationError("freq", f"{freq!r} is not a configured p-state")
        core = self.cores[core_idx]
        core.pinned = True
        core.freq = freq

    def step(self) -> None:
        """Advance one dt tick: governor, power draw, thermal update.

        Core utilizations are inputs here; the workload layer sets them
        before each step.
        """
        pp = self.platform.power
        gov = self.platform.governor
        for core in self.cores:
            if not core.pinned:
                core.freq = governor_update(core.util, gov)
        powers = np.array([power_draw(c.freq, c.util, pp) for c in self.cores])
        if pp.leak_coeff > 0:
            powers = powers + pp.leak_coeff * (self._temps - self.platform.thermal.ambient_temp)
        self._temps = thermal_step(self._temps, powers, self.platform.thermal)
        for i, core in enumerate(self.cores):
            core.temperature = float(self._temps[i])
