"""Command-line entry point: config parsing/validation, experiment
execution, comparison sweeps and CSV emission.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 config parse
error, 4 validation (invariant) error. The config grammar and the defaults
table live in docs/config.md.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agents import AGENT_NAMES, build_state, make_agent
from .configtext import SectionView, parse_sections
from .errors import ConfigParseError, EpisodeError, SimError, ValidationError
from .harness import (
    ComparisonSummary,
    ExperimentConfig,
    RunResult,
    compare,
    emit_csv,
    measure_overhead,
    run_episode,
)
from .simcore import (
    ChipSim,
    GovernorConfig,
    Platform,
    PowerParams,
    SensorConfig,
    ThermalParams,
)
from .workload import arrivals_from_sections

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4

_KNOWN_SECTIONS = ("platform", "arrivals", "agent", "experiment", "sweep")

# Typed view of every supported [agent] key besides "name".
_AGENT_PARAM_TYPES: dict[str, type] = {
    "alpha": float,
    "gamma": float,
    "eps_start": float,
    "eps_end": float,
    "eps_decay_steps": int,
    "reward": str,
    "reward_raw_temps": bool,
    "t_em": float,
    "replay_capacity": int,
    "minibatch": int,
    "sync_period": int,
    "weight_temp": float,
    "weight_latency": float,
    "activation": str,
}


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="releta-sim",
        description="Thermal-aware task-allocation experiments on a simulated multicore chip.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, repeat_config: bool = False) -> None:
        if repeat_config:
            p.add_argument(
                "--config", action="append", required=True, metavar="PATH",
                help="experiment config file (repeat once per policy)",
            )
        else:
            p.add_argument("--config", required=True, metavar="PATH", help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the config's seed")
        p.add_argument("--out", default="./results", metavar="DIR", help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_run = sub.add_parser("run", help="run one experiment and emit its CSV")
    add_common(p_run)
    p_run.add_argument(
        "--measure-overhead", action="store_true",
        help="record wall-clock per-decision overhead (makes the CSV non-reproducible)",
    )

    p_cmp = sub.add_parser("compare", help="run several configs on the same trace and summarize")
    add_common(p_cmp, repeat_config=True)
    p_cmp.add_argument("--measure-overhead", action="store_true",
                       help="record wall-clock per-decision overhead in each run")

    p_sweep = sub.add_parser("sweep", help="grid over the [sweep] section's hyperparameter values")
    add_common(p_sweep)

    p_val = sub.add_parser("validate", help="check a config against every invariant")
    p_val.add_argument("--config", required=True, metavar="PATH")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.add_argument("--quiet", action="store_true")

    p_ovh = sub.add_parser("overhead", help="time per-decision cost of every policy")
    p_ovh.add_argument("--config", required=True, metavar="PATH")
    p_ovh.add_argument("--seed", type=int, default=None)
    p_ovh.add_argument("--reps", type=int, default=10_000, help="decisions to time per policy")
    p_ovh.add_argument("--quiet", action="store_true")

    return parser.parse_args(argv)


def _platform_from(view: SectionView) -> Platform:
    n = view.get_int("cores", 4)
    if n < 1:
        raise ValidationError("platform.cores", "must be >= 1")

    def per_core(key: str, default: list[float]) -> np.ndarray:
        values = view.get_float_list(key, default)
        if len(values) == 1:
            return np.full(n, values[0])
        if len(values) != n:
            raise ValidationError(f"platform.{key}", f"expected 1 or {n} values, got {len(values)}")
        return np.asarray(values)

    spread = np.linspace(1.15, 0.85, n) if n > 1 else np.array([1.0])
    r_th = per_core("r_th", list(1.8 * spread))
    c_th = per_core("c_th", [2.2])
    coupling_w = view.get_float("coupling", 0.0)
    coupling = np.full((n, n), coupling_w)
    np.fill_diagonal(coupling, 0.0)

    thermal = ThermalParams(
        ambient_temp=view.get_float("ambient_temp", 35.0),
        r_th=r_th,
        c_th=c_th,
        coupling=coupling,
        dt=view.get_float("dt", 0.05),
    )
    power = PowerParams(
        k_dyn=view.get_float("k_dyn", 0.4),
        exp=view.get_float("exp", 3.0),
        p_static=view.get_float("p_static", 1.0),
        leak_coeff=view.get_float("leak_coeff", 0.0),
    )
    governor = GovernorConfig(
        p_states=tuple(view.get_float_list("p_states", [0.8, 1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6])),
        up_threshold=view.get_float("up_threshold", 0.95),
    )
    sensor = SensorConfig(
        resolution=view.get_float("sensor_resolution", 1.0),
        noise_std=view.get_float("sensor_noise_std", 0.0),
    )
    unknown = view.unknown_keys()
    if unknown:
        raise ValidationError("platform", f"unknown key(s): {', '.join(unknown)}")
    return Platform(thermal, power, governor, sensor)


def _agent_from(view: SectionView) -> tuple[str, dict]:
    name = view.get_str("name", "releta")
    if name not in AGENT_NAMES:
        raise ValidationError("agent.name", f"unknown agent {name!r}; choose from {AGENT_NAMES}")
    params: dict = {}
    for key, kind in _AGENT_PARAM_TYPES.items():
        if not view.has(key):
            continue
        if kind is float:
            params[key] = view.get_float(key)
        elif kind is int:
            params[key] = view.get_int(key)
        elif kind is bool:
            params[key] = view.get_bool(key, False)
        else:
            params[key] = view.get_str(key)
    unknown = view.unknown_keys()
    if unknown:
        raise ValidationError("agent", f"unknown key(s): {', '.join(unknown)}")
    return name, params


def load_config(
    path: str, seed_override: int | None = None, out_override: str | None = None
) -> ExperimentConfig:
    """Parse and validate one experiment config file.

    ``--seed`` replaces the [experiment] seed before anything derives from
    it; an explicit [arrivals] seed still wins for the arrival stream.
    """
    sections = parse_sections(path)
    for sect in sections:
        if sect not in _KNOWN_SECTIONS and not sect.startswith("taskset."):
            raise ValidationError("config", f"unknown section [{sect}]")

    exp = SectionView("experiment", sections.get("experiment", {}))
    seed = exp.get_int("seed", 0)
    if seed_override is not None:
        seed = seed_override
    settle = exp.get_int("settle_ticks", 10)
    if settle < 0:
        raise ValidationError("experiment.settle_ticks", "must be >= 0")
    output = exp.get_str("output", "./results")
    unknown = exp.unknown_keys()
    if unknown:
        raise ValidationError("experiment", f"unknown key(s): {', '.join(unknown)}")
    if out_override is not None:
        output = out_override

    platform = _platform_from(SectionView("platform", sections.get("platform", {})))
    arrivals = arrivals_from_sections(sections, default_seed=seed)
    agent_name, agent_params = _agent_from(SectionView("agent", sections.get("agent", {})))

    return ExperimentConfig(
        platform=platform,
        arrivals=arrivals,
        agent_name=agent_name,
        agent_params=agent_params,
        sample_settle_ticks=settle,
        seed=seed,
        output_path=output,
        name=Path(path).stem,
    )


def _say(args: argparse.Namespace, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(getattr(args, "out", "./results"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summarize(result: RunResult) -> str:
    window = result.peak_temps[result.total_releases // 2:]
    return (
        f"{result.agent_name}: {result.total_releases} releases, "
        f"second-half mean peak {np.mean(window):.3f} C, "
        f"violation rate {result.violation_rate():.2f}%"
    )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    cfg.measure_decision_overhead = bool(getattr(args, "measure_overhead", False))
    result = run_episode(cfg)
    out = _outdir(args) / f"{cfg.name}.csv"
    emit_csv(result, str(out))
    _say(args, _summarize(result))
    _say(args, f"wrote {out}")
    return EXIT_OK


def _write_summary(summary: ComparisonSummary, outdir: Path, stem: str) -> tuple[Path, Path]:
    txt = outdir / f"{stem}_summary.txt"
    csvp = outdir / f"{stem}_summary.csv"
    txt.write_text(summary.table_text() + "\n", encoding="utf-8")
    csvp.write_text(summary.table_csv(), encoding="utf-8")
    return txt, csvp


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.config) < 2:
        raise ValidationError("--config", "compare needs at least two config files")
    cfgs = [load_config(p, seed_override=args.seed) for p in args.config]
    for cfg in cfgs:
        cfg.measure_decision_overhead = bool(getattr(args, "measure_overhead", False))
    names = [cfg.name for cfg in cfgs]
    if len(set(names)) != len(names):
        raise ValidationError("--config", "config file names must be distinct")
    summary = compare(cfgs)
    outdir = _outdir(args)
    for cfg, result in zip(cfgs, summary.results):
        emit_csv(result, str(outdir / f"{cfg.name}.csv"))
    txt, _ = _write_summary(summary, outdir, cfgs[0].name + "_compare")
    _say(args, summary.table_text())
    _say(args, f"wrote {txt}")
    return EXIT_OK


def _sweep_grid(section: dict[str, str]) -> tuple[list[str], list[dict]]:
    if not section:
        raise ValidationError("sweep", "sweep needs a non-empty [sweep] section")
    keys = list(section)
    value_lists: list[list] = []
    for key in keys:
        if key not in _AGENT_PARAM_TYPES:
            raise ValidationError(
                "sweep", f"unknown hyperparameter {key!r}; sweepable: {sorted(_AGENT_PARAM_TYPES)}"
            )
        kind = _AGENT_PARAM_TYPES[key]
        items = [part.strip() for part in section[key].split(",") if part.strip()]
        if not items:
            raise ValidationError(f"sweep.{key}", "expected a comma-separated value list")
        try:
            if kind is float:
                value_lists.append([float(v) for v in items])
            elif kind is int:
                value_lists.append([int(v) for v in items])
            elif kind is bool:
                value_lists.append([v.lower() in ("true", "1", "yes", "on") for v in items])
            else:
                value_lists.append(items)
        except ValueError:
            raise ValidationError(f"sweep.{key}", f"bad value list {section[key]!r}") from None
    combos = [dict(zip(keys, values)) for values in itertools.product(*value_lists)]
    return keys, combos


def _run_sweep_point(cfg: ExperimentConfig) -> RunResult:
    return run_episode(cfg)


def cmd_sweep(args: argparse.Namespace) -> int:
    base = load_config(args.config, seed_override=args.seed)
    sections = parse_sections(args.config)
    keys, combos = _sweep_grid(sections.get("sweep", {}))
    outdir = _outdir(args)

    cfgs: list[ExperimentConfig] = []
    for combo in combos:
        params = dict(base.agent_params)
        params.update(combo)
        tag = "_".join(f"{k}-{combo[k]}" for k in keys)
        cfgs.append(
            ExperimentConfig(
                platform=base.platform,
                arrivals=base.arrivals,
                agent_name=base.agent_name,
                agent_params=params,
                sample_settle_ticks=base.sample_settle_ticks,
                seed=base.seed,
                output_path=base.output_path,
                name=f"{base.name}__{tag}",
            )
        )

    workers = int(os.environ.get("RELETA_SIM_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_sweep_point, cfgs))
    else:
        results = [_run_sweep_point(cfg) for cfg in cfgs]

    index_lines = ["run," + ",".join(keys) + ",csv,window_mean_peak,mean_reward"]
    for cfg, combo, result in zip(cfgs, combos, results):
        csv_path = outdir / f"{cfg.name}.csv"
        emit_csv(result, str(csv_path))
        window = result.peak_temps[result.total_releases // 2:]
        index_lines.append(
            f"{cfg.name},"
            + ",".join(str(combo[k]) for k in keys)
            + f",{csv_path.name},{float(np.mean(window))!r},{float(np.mean(result.rewards))!r}"
        )
        _say(args, f"{cfg.name}: window mean peak {np.mean(window):.3f} C")
    index = outdir / f"{base.name}_sweep_index.csv"
    index.write_text("\n".join(index_lines) + "\n", encoding="utf-8")
    _say(args, f"wrote {index}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    # Instantiating the agent catches parameter errors the parser cannot see.
    make_agent(cfg.agent_name, cfg.platform, seed=cfg.seed,
               params=cfg.agent_params, taskset=cfg.arrivals.taskset)
    _say(args, f"config ok: {cfg.name}")
    _say(args, f"  platform: {cfg.platform.n} cores, f_max {cfg.platform.governor.f_max} GHz, "
               f"dt {cfg.platform.thermal.dt} s")
    _say(args, f"  arrivals: {cfg.arrivals.total_releases} releases of "
               f"{len(cfg.arrivals.taskset)} profiles, seed {cfg.arrivals.seed}")
    _say(args, f"  agent: {cfg.agent_name}")
    return EXIT_OK


def cmd_overhead(args: argparse.Namespace) -> int:
    if args.reps < 100:
        raise ValidationError("--reps", "must be >= 100")
    cfg = load_config(args.config, seed_override=args.seed)
    chip = ChipSim(cfg.platform)
    state = build_state(chip)
    rows = [f"{'agent':<12} {'mean_us':>10} {'max_us':>10}"]
    ordered = [cfg.agent_name] + [n for n in AGENT_NAMES if n != cfg.agent_name]
    for name in ordered:
        params = cfg.agent_params if name == cfg.agent_name else {}
        agent = make_agent(name, cfg.platform, seed=cfg.seed,
                           params=params, taskset=cfg.arrivals.taskset)
        agent.start_episode(cfg.platform.thermal.ambient_temp)
        probe = state if not hasattr(agent, "net") else (
            state if agent.net.in_dim == state.shape[0] else np.zeros(agent.net.in_dim)
        )
        mean_us, max_us = measure_overhead(agent, probe, args.reps)
        rows.append(f"{name:<12} {mean_us:>10.2f} {max_us:>10.2f}")
    print("\n".join(rows))
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "overhead": cmd_overhead,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:  # argparse handles usage errors (exit 2) and --help (0)
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EpisodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def console_main() -> None:
    sys.exit(main())
