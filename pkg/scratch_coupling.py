"""Scratch coupling/regime grid (not part of the package)."""
import sys
import numpy as np
from releta_sim.harness import ExperimentConfig, run_episode
from releta_sim.workload import ArrivalConfig, default_taskset
from releta_sim.simcore import Platform, ThermalParams, PowerParams, GovernorConfig, SensorConfig
from releta_sim.errors import EpisodeError


def make_platform(c_th, coupling_w):
    n = 4
    spread = np.linspace(1.15, 0.85, n)
    coup = np.full((n, n), coupling_w)
    np.fill_diagonal(coup, 0.0)
    thermal = ThermalParams(35.0, 1.8 * spread, np.full(n, c_th), coup, 0.05)
    return Platform(thermal, PowerParams(k_dyn=0.4, exp=3.0, p_static=1.0),
                    GovernorConfig(p_states=(0.8, 1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6)),
                    SensorConfig())


def run(agent, params, arr, plat, settle, seed):
    cfg = ExperimentConfig(platform=plat, arrivals=arr, agent_name=agent, agent_params=params,
                           sample_settle_ticks=settle, seed=seed)
    r = run_episode(cfg)
    half = r.total_releases // 2
    return float(np.mean(r.peak_temps[half:]))


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 42
    releases = int(sys.argv[2]) if len(sys.argv) > 2 else 1200
    imin, imax = 3.0, 6.0
    arr = ArrivalConfig(seed=seed, interval_min=imin, interval_max=imax,
                        total_releases=releases, taskset=default_taskset())
    for c_th in (0.6, 1.2):
        for cw in (0.0, 0.3, 0.6):
            plat = make_platform(c_th, cw)
            row = [f'c={c_th} K={cw}']
            for name, params in (('random', {}), ('ltb', {}),
                                 ('releta', {'alpha': 0.02, 'gamma': 0.0}),
                                 ('releta', {'alpha': 0.02, 'gamma': 0.5})):
                tag = name if not params else f"rel-g{params['gamma']}"
                try:
                    pk = run(name, dict(params), arr, plat, 30, seed)
                    row.append(f'{tag}={pk:.2f}')
                except EpisodeError as e:
                    row.append(f'{tag}=DIV@{e.release_index}')
            print('  '.join(row), flush=True)


if __name__ == '__main__':
    main()
