"""Scratch tuning script (not part of the package)."""
import sys
import numpy as np
from releta_sim.harness import ExperimentConfig, run_episode
from releta_sim.workload import ArrivalConfig, default_taskset
from releta_sim.simcore import Platform
from releta_sim.errors import EpisodeError


def episode(agent, params, arr, plat, seed=42):
    cfg = ExperimentConfig(platform=plat, arrivals=arr, agent_name=agent,
                           agent_params=params, seed=seed)
    return run_episode(cfg)


def window_peak(r):
    half = r.total_releases // 2
    return float(np.mean(r.peak_temps[half:]))


def main():
    imin, imax = float(sys.argv[1]), float(sys.argv[2])
    releases = int(sys.argv[3]) if len(sys.argv) > 3 else 2000
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 42
    arr = ArrivalConfig(seed=seed, interval_min=imin, interval_max=imax,
                        total_releases=releases, taskset=default_taskset())
    plat = Platform.default()
    base = {}
    for name in ('random', 'ltb', 'linux', 'roundrobin'):
        r = episode(name, dict(base), arr, plat, seed)
        print(f'{name:10s} peak2nd={window_peak(r):.3f} viol%={r.violation_rate():.1f}')
    for alpha in (0.05, 0.02, 0.01):
        for gamma in (0.0, 0.5, 0.9):
            try:
                r = episode('releta', {'alpha': alpha, 'gamma': gamma}, arr, plat, seed)
                half = releases // 2
                hist = np.bincount(r.actions[half:], minlength=plat.n)
                print(f'releta a={alpha} g={gamma}: peak2nd={window_peak(r):.3f} '
                      f'rew {np.mean(r.rewards[:half]):+.2f}->{np.mean(r.rewards[half:]):+.2f} acts={hist}')
            except EpisodeError as e:
                print(f'releta a={alpha} g={gamma}: DIVERGED @ {e.release_index}')


if __name__ == '__main__':
    main()
