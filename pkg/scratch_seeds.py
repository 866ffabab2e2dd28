"""Scratch multi-seed validation (not part of the package)."""
import sys
import numpy as np
from releta_sim.harness import ExperimentConfig, run_episode
from releta_sim.workload import ArrivalConfig, default_taskset
from releta_sim.simcore import Platform, ThermalParams, PowerParams, GovernorConfig, SensorConfig
from releta_sim.errors import EpisodeError


def make_platform(c_th, k_dyn):
    n = 4
    spread = np.linspace(1.15, 0.85, n)
    thermal = ThermalParams(35.0, 1.8 * spread, np.full(n, c_th), np.zeros((n, n)), 0.05)
    return Platform(thermal, PowerParams(k_dyn=k_dyn, exp=3.0, p_static=1.0),
                    GovernorConfig(p_states=(0.8, 1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6)),
                    SensorConfig())


def window_peak(cfg):
    r = run_episode(cfg)
    half = r.total_releases // 2
    return float(np.mean(r.peak_temps[half:]))


def main():
    releases = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    imin, imax = 2.0, 4.0
    for k_dyn in (0.4, 0.6):
        plat = make_platform(0.6, k_dyn)
        for settle in (20, 30):
            for seed in (42, 7, 123, 2024):
                arr = ArrivalConfig(seed=seed, interval_min=imin, interval_max=imax,
                                    total_releases=releases, taskset=default_taskset())
                vals = {}
                for name, params, tag in (
                        ('random', {}, 'rnd'), ('ltb', {}, 'ltb'),
                        ('releta', {'alpha': 0.02, 'gamma': 0.0}, 'rel-g0'),
                        ('releta', {'alpha': 0.02, 'gamma': 0.5}, 'rel-g05')):
                    cfg = ExperimentConfig(platform=plat, arrivals=arr, agent_name=name,
                                           agent_params=dict(params),
                                           sample_settle_ticks=settle, seed=seed)
                    try:
                        vals[tag] = window_peak(cfg)
                    except EpisodeError as e:
                        vals[tag] = float('nan')
                g0 = vals['rnd'] - vals['rel-g0'], vals['ltb'] - vals['rel-g0']
                g5 = vals['rnd'] - vals['rel-g05'], vals['ltb'] - vals['rel-g05']
                print(f"k={k_dyn} st={settle} seed={seed}: rnd={vals['rnd']:.2f} ltb={vals['ltb']:.2f} "
                      f"rel0={vals['rel-g0']:.2f} (gaps {g0[0]:+.2f}/{g0[1]:+.2f}) "
                      f"rel05={vals['rel-g05']:.2f} (gaps {g5[0]:+.2f}/{g5[1]:+.2f})", flush=True)


if __name__ == '__main__':
    main()
