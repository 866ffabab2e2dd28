import numpy as np
import pytest

from releta_sim.errors import ArrivalsExhausted, ValidationError
from releta_sim.simcore import CoreState
from releta_sim.workload import (
    ArrivalConfig,
    ArrivalProcess,
    TaskInstance,
    TaskProfile,
    default_taskset,
    execute_tick,
    load_taskset,
)

PARSEC_NAMES = [
    "bodytrack", "blackscholes", "canneal", "dedup",
    "facesim", "ferret", "fluidanimate", "freqmine",
]


def make_cfg(**kw):
    defaults = dict(seed=1, interval_min=1.0, interval_max=2.0, total_releases=10,
                    taskset=default_taskset())
    defaults.update(kw)
    return ArrivalConfig(**defaults)


class TestArrivalProcess:
    def test_degenerate_interval(self):
        proc = ArrivalProcess(make_cfg(interval_min=1.0, interval_max=1.0))
        for _ in range(10):
            delta, _ = proc.next_arrival()
            assert delta == 1.0

    def test_singleton_taskset(self):
        only = TaskProfile("solo", work=1.0, util_demand=0.5)
        proc = ArrivalProcess(make_cfg(taskset=(only,)))
        for _ in range(10):
            _, profile = proc.next_arrival()
            assert profile is only

    def test_seed_replay_identical(self):
        cfg = make_cfg(total_releases=100, seed=1234)
        seq_a = [ArrivalProcess(cfg).next_arrival() for _ in range(1)]  # warm check
        proc_a, proc_b = ArrivalProcess(cfg), ArrivalProcess(cfg)
        seq_a = [proc_a.next_arrival() for _ in range(100)]
        seq_b = [proc_b.next_arrival() for _ in range(100)]
        assert seq_a == seq_b

    def test_different_seeds_differ(self):
        a = ArrivalProcess(make_cfg(seed=1, total_releases=50))
        b = ArrivalProcess(make_cfg(seed=2, total_releases=50))
        assert [a.next_arrival()[0] for _ in range(50)] != [b.next_arrival()[0] for _ in range(50)]

    def test_exhaustion(self):
        proc = ArrivalProcess(make_cfg(total_releases=3))
        for _ in range(3):
            proc.next_arrival()
        with pytest.raises(ArrivalsExhausted):
            proc.next_arrival()

    def test_intervals_within_bounds(self):
        proc = ArrivalProcess(make_cfg(interval_min=1.5, interval_max=3.5, total_releases=200))
        deltas = [proc.next_arrival()[0] for _ in range(200)]
        assert min(deltas) >= 1.5 and max(deltas) <= 3.5

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            make_cfg(interval_min=2.0, interval_max=1.0)
        with pytest.raises(ValidationError):
            make_cfg(total_releases=0)
        with pytest.raises(ValidationError):
            make_cfg(taskset=())


class TestTaskProfile:
    def test_invariants(self):
        with pytest.raises(ValidationError, match="work"):
            TaskProfile("x", work=0.0, util_demand=0.5)
        with pytest.raises(ValidationError, match="util_demand"):
            TaskProfile("x", work=1.0, util_demand=1.5)
        with pytest.raises(ValidationError, match="latency_constraint"):
            TaskProfile("x", work=1.0, util_demand=0.5, latency_constraint=0.0)


class TestExecuteTick:
    def test_idle_core(self):
        core = CoreState(temperature=40.0, freq=2.0)
        done = execute_tick(core, [], f_nom=3.6, dt=0.5, now=0.0)
        assert done == [] and core.util == 0.0

    def test_two_tick_completion(self):
        profile = TaskProfile("t", work=2.0, util_demand=1.0)
        inst = TaskInstance(id=0, profile=profile, arrival=0.0, core=0)
        core = CoreState(temperature=40.0, freq=2.0, queue=[0])
        done = execute_tick(core, [inst], f_nom=2.0, dt=0.5, now=0.0)
        assert done == [] and inst.work_done == pytest.approx(1.0)
        done = execute_tick(core, [inst], f_nom=2.0, dt=0.5, now=0.5)
        assert done == [inst]
        assert inst.finish == pytest.approx(1.0)
        assert inst.work_done == profile.work

    def test_util_clamped(self):
        p1 = TaskProfile("a", work=10.0, util_demand=0.6)
        p2 = TaskProfile("b", work=10.0, util_demand=0.7)
        i1 = TaskInstance(id=0, profile=p1, arrival=0.0, core=0)
        i2 = TaskInstance(id=1, profile=p2, arrival=0.0, core=0)
        core = CoreState(temperature=40.0, freq=2.0, queue=[0, 1])
        execute_tick(core, [i1, i2], f_nom=3.6, dt=0.1, now=0.0)
        assert core.util == 1.0

    def test_head_gets_full_demand_rest_share_leftover(self):
        head = TaskInstance(id=0, profile=TaskProfile("h", 10.0, 0.6), arrival=0.0, core=0)
        rest_a = TaskInstance(id=1, profile=TaskProfile("a", 10.0, 0.6), arrival=0.0, core=0)
        rest_b = TaskInstance(id=2, profile=TaskProfile("b", 10.0, 0.2), arrival=0.0, core=0)
        core = CoreState(temperature=40.0, freq=1.0, queue=[0, 1, 2])
        execute_tick(core, [head, rest_a, rest_b], f_nom=3.6, dt=1.0, now=0.0)
        assert head.work_done == pytest.approx(0.6)
        # leftover 0.4 split over demands (0.6, 0.2) -> scale 0.5
        assert rest_a.work_done == pytest.approx(0.3)
        assert rest_b.work_done == pytest.approx(0.1)

    def test_work_never_exceeds_profile(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            work = float(rng.uniform(0.2, 3.0))
            demand = float(rng.uniform(0.1, 1.0))
            profile = TaskProfile("w", work=work, util_demand=demand)
            inst = TaskInstance(id=0, profile=profile, arrival=0.0, core=0)
            core = CoreState(temperature=40.0, freq=float(rng.uniform(0.8, 3.6)), queue=[0])
            t = 0.0
            while inst.finish is None:
                execute_tick(core, [inst], f_nom=3.6, dt=0.05, now=t)
                t += 0.05
                assert inst.work_done <= profile.work + 1e-12
            assert inst.work_done == profile.work
            assert inst.latency is not None and inst.latency >= 0.0

    def test_completion_removes_from_queue(self):
        profile = TaskProfile("t", work=0.05, util_demand=1.0)
        inst = TaskInstance(id=7, profile=profile, arrival=0.0, core=0)
        core = CoreState(temperature=40.0, freq=2.0, queue=[7])
        execute_tick(core, [inst], f_nom=2.0, dt=0.5, now=0.0)
        assert core.queue == [] and core.util == 0.0


class TestLoadTaskset:
    def test_round_trip_three_profiles(self, tmp_path):
        text = """
[arrivals]
seed = 9
interval_min = 1.0
interval_max = 2.0
total_releases = 30

[taskset.alpha]
work = 1.5
util_demand = 0.4

[taskset.beta]
work = 2.5
util_demand = 0.9
latency_constraint = 3.0

[taskset.gamma]
work = 0.5
util_demand = 1.0
"""
        path = tmp_path / "tasks.cfg"
        path.write_text(text)
        cfg = load_taskset(str(path))
        assert [p.name for p in cfg.taskset] == ["alpha", "beta", "gamma"]
        assert cfg.taskset[1].latency_constraint == 3.0
        assert cfg.seed == 9 and cfg.total_releases == 30

    def test_invariant_violation_names_field(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[taskset.bad]\nwork = 1.0\nutil_demand = 1.5\n")
        with pytest.raises(ValidationError, match="util_demand"):
            load_taskset(str(path))

    def test_eight_profile_file_loads(self, tmp_path):
        body = "\n".join(f"[taskset.{name}]\nwork = 2.0\nutil_demand = 0.5" for name in PARSEC_NAMES)
        path = tmp_path / "eight.cfg"
        path.write_text("[arrivals]\ntotal_releases = 100\n" + body + "\n")
        cfg = load_taskset(str(path))
        assert [p.name for p in cfg.taskset] == PARSEC_NAMES

    def test_default_taskset_names(self):
        assert [p.name for p in default_taskset()] == PARSEC_NAMES

    def test_default_taskset_subset(self):
        subset = default_taskset(["canneal", "dedup", "facesim"])
        assert [p.name for p in subset] == ["canneal", "dedup", "facesim"]
        with pytest.raises(ValidationError):
            default_taskset(["nope"])

    def test_builtin_profile_fields_inherited(self, tmp_path):
        path = tmp_path / "inherit.cfg"
        path.write_text("[arrivals]\ntotal_releases = 5\n[taskset.canneal]\nwork = 9.0\n")
        cfg = load_taskset(str(path))
        assert cfg.taskset[0].work == 9.0
        assert cfg.taskset[0].latency_constraint == 2.0  # builtin default kept
