import numpy as np
import pytest

from releta_sim.errors import StabilityError, ValidationError
from releta_sim.simcore import (
    ChipSim,
    GovernorConfig,
    Platform,
    PowerParams,
    SensorConfig,
    ThermalParams,
    governor_update,
    power_draw,
    quantize,
    sensor_read,
    thermal_step,
)


def single_core_params(r=2.0, c=1.0, ambient=40.0, dt=0.05):
    return ThermalParams(ambient, np.array([r]), np.array([c]), np.zeros((1, 1)), dt)


class TestPowerDraw:
    def test_zero_util_leaves_static_power(self):
        p = PowerParams(k_dyn=1.0, exp=3.0, p_static=0.5)
        assert power_draw(2.0, 0.0, p) == 0.5

    def test_identity_case(self):
        p = PowerParams(k_dyn=1.0, exp=3.0, p_static=0.0)
        assert power_draw(1.0, 1.0, p) == 1.0

    def test_hand_evaluated_cubic(self):
        p = PowerParams(k_dyn=1.0, exp=3.0, p_static=0.0)
        assert power_draw(2.0, 0.5, p) == pytest.approx(4.0)

    def test_domain_errors(self):
        p = PowerParams(k_dyn=1.0)
        with pytest.raises(ValidationError):
            power_draw(2.0, 1.5, p)
        with pytest.raises(ValidationError):
            power_draw(2.0, -0.1, p)
        with pytest.raises(ValidationError):
            power_draw(0.0, 0.5, p)

    def test_monotone_in_freq_and_util(self):
        p = PowerParams(k_dyn=0.4, exp=3.0, p_static=1.0)
        freqs = np.linspace(0.5, 3.6, 13)
        utils = np.linspace(0.0, 1.0, 11)
        for u in utils:
            draws = [power_draw(f, u, p) for f in freqs]
            assert all(b >= a for a, b in zip(draws, draws[1:]))
        for f in freqs:
            draws = [power_draw(f, u, p) for u in utils]
            assert all(b >= a for a, b in zip(draws, draws[1:]))


class TestThermalStep:
    def test_equilibrium_at_ambient(self):
        tp = ThermalParams(40.0, np.array([2.0, 2.0]), np.array([1.0, 1.0]),
                           np.zeros((2, 2)), 0.05)
        temps = np.array([40.0, 40.0])
        out = thermal_step(temps, np.zeros(2), tp)
        assert np.array_equal(out, temps)

    def test_single_core_steady_state_closed_form(self):
        # ambient + r_th * P = 40 + 2*5 = 50
        tp = single_core_params(r=2.0, c=1.0, ambient=40.0)
        temps = np.array([40.0])
        for _ in range(5000):
            temps = thermal_step(temps, np.array([5.0]), tp)
        assert abs(temps[0] - 50.0) < 1e-6

    def test_symmetric_pair_stays_symmetric(self):
        coupling = np.array([[0.0, 0.5], [0.5, 0.0]])
        tp = ThermalParams(40.0, np.array([2.0, 2.0]), np.array([1.0, 1.0]), coupling, 0.05)
        temps = np.array([40.0, 40.0])
        powers = np.array([3.0, 3.0])
        for _ in range(1000):
            temps = thermal_step(temps, powers, tp)
            assert temps[0] == temps[1]

    def test_coupled_steady_state_satisfies_balance(self):
        coupling = np.array([[0.0, 0.4], [0.4, 0.0]])
        tp = ThermalParams(35.0, np.array([2.0, 1.0]), np.array([0.5, 0.5]), coupling, 0.02)
        temps = np.array([35.0, 35.0])
        powers = np.array([6.0, 1.0])
        for _ in range(20000):
            temps = thermal_step(temps, powers, tp)
        # P_i = (T_i - amb)/r_i + sum_j K_ij (T_i - T_j)
        for i in range(2):
            balance = (temps[i] - 35.0) / tp.r_th[i] + coupling[i].sum() * temps[i] - coupling[i] @ temps
            assert balance == pytest.approx(powers[i], abs=1e-8)

    def test_monotone_in_power(self):
        tp = ThermalParams(35.0, np.array([2.0, 1.5]), np.array([1.0, 1.0]),
                           np.array([[0.0, 0.2], [0.2, 0.0]]), 0.05)

        def steady(powers):
            temps = np.full(2, 35.0)
            for _ in range(20000):
                temps = thermal_step(temps, np.asarray(powers, float), tp)
            return temps

        base = steady([2.0, 3.0])
        bumped = steady([2.5, 3.0])
        assert np.all(bumped >= base - 1e-9)

    def test_unstable_dt_rejected_at_construction(self):
        with pytest.raises(ValidationError, match="dt"):
            ThermalParams(40.0, np.array([1.0]), np.array([1.0]), np.zeros((1, 1)), 1.0)

    def test_unstable_dt_rejected_at_step(self):
        tp = single_core_params(r=2.0, c=1.0, dt=0.05)
        tp.dt = 5.0  # corrupt after construction
        with pytest.raises(StabilityError):
            thermal_step(np.array([40.0]), np.array([1.0]), tp)

    def test_invariant_validation(self):
        with pytest.raises(ValidationError, match="r_th"):
            ThermalParams(40.0, np.array([-1.0]), np.array([1.0]), np.zeros((1, 1)), 0.05)
        with pytest.raises(ValidationError, match="coupling"):
            ThermalParams(40.0, np.array([2.0, 2.0]), np.array([1.0, 1.0]),
                          np.array([[0.0, 0.1], [0.2, 0.0]]), 0.05)


class TestGovernor:
    CFG = GovernorConfig(p_states=(1.0, 2.0, 3.0, 3.6), up_threshold=0.95)

    def test_idle_gets_f_min(self):
        assert governor_update(0.0, self.CFG) == 1.0

    def test_saturated_gets_f_max(self):
        assert governor_update(1.0, self.CFG) == 3.6

    def test_half_util_picks_covering_p_state(self):
        # smallest p_state >= 0.5 * 3.6 = 1.8 is 2.0
        assert governor_update(0.5, self.CFG) == 2.0

    def test_up_threshold_jumps_to_max(self):
        assert governor_update(0.95, self.CFG) == 3.6

    def test_monotone_in_util(self):
        utils = np.linspace(0.0, 1.0, 101)
        freqs = [governor_update(u, self.CFG) for u in utils]
        assert all(b >= a for a, b in zip(freqs, freqs[1:]))

    def test_config_validation(self):
        with pytest.raises(ValidationError, match="p_states"):
            GovernorConfig(p_states=(2.0, 1.0))
        with pytest.raises(ValidationError, match="up_threshold"):
            GovernorConfig(p_states=(1.0, 2.0), up_threshold=0.0)


class TestSensor:
    def test_quantizes_to_resolution(self):
        out = sensor_read(np.array([41.4, 52.6]), SensorConfig(resolution=1.0))
        assert list(out) == [41.0, 53.0]

    def test_resolution_zero_is_identity(self):
        out = sensor_read(np.array([41.4]), SensorConfig(resolution=0.0))
        assert list(out) == [41.4]

    def test_symmetry_preserved(self):
        for res in (0.0, 0.5, 1.0, 2.0):
            out = sensor_read(np.array([43.3, 43.3]), SensorConfig(resolution=res))
            assert out[0] == out[1]

    def test_noise_requires_rng(self):
        with pytest.raises(ValidationError):
            sensor_read(np.array([40.0]), SensorConfig(noise_std=0.5))

    def test_noise_is_seed_deterministic(self):
        cfg = SensorConfig(resolution=0.0, noise_std=0.5)
        a = sensor_read(np.array([40.0, 50.0]), cfg, np.random.default_rng(9))
        b = sensor_read(np.array([40.0, 50.0]), cfg, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_quantize_half_resolution(self):
        assert list(quantize(np.array([41.2, 41.3]), 0.5)) == [41.0, 41.5]


class TestChipSim:
    def test_default_platform_shape(self):
        platform = Platform.default()
        assert platform.n == 4
        assert platform.governor.f_max == 3.6
        spread = platform.thermal.r_th / 1.8
        assert spread.max() == pytest.approx(1.15)
        assert spread.min() == pytest.approx(0.85)

    def test_step_trajectories_are_deterministic(self):
        def trajectory():
            chip = ChipSim(Platform.default())
            chip.cores[0].util = 0.8
            chip.cores[2].util = 0.3
            out = []
            for _ in range(200):
                chip.step()
                out.append(chip.temps())
            return np.array(out)

        assert np.array_equal(trajectory(), trajectory())

    def test_pinned_core_bypasses_governor(self):
        chip = ChipSim(Platform.default())
        chip.pin_frequency(1, 2.4)
        chip.cores[1].util = 1.0
        chip.step()
        assert chip.cores[1].freq == 2.4
        # unpinned core at the same util goes to f_max
        chip.cores[0].util = 1.0
        chip.step()
        assert chip.cores[0].freq == 3.6

    def test_pin_rejects_non_p_state(self):
        chip = ChipSim(Platform.default())
        with pytest.raises(ValidationError):
            chip.pin_frequency(0, 1.1)

    def test_temperature_never_below_ambient(self):
        chip = ChipSim(Platform.default())
        chip.cores[3].util = 1.0
        for _ in range(500):
            chip.step()
        assert np.all(chip.temps() >= chip.platform.thermal.ambient_temp - 1e-9)
