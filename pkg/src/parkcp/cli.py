"""Command-line entry point: scenario generation, simulation, coverage.

Configuration lives in a JSON file whose sections mirror the run-config
dataclasses; command-line flags override file values. Unknown keys are
rejected so typos fail fast. All randomness flows from a single seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .channel import CommZone, NoiseModel
from .coverage import (
    coverage_report,
    dsrc_radius,
    format_coverage_csv,
    parse_area,
    parse_points,
)
from .errors import ConfigError, ParkCPError
from .harness import (
    Algorithm,
    RunConfig,
    ensemble,
    format_results_csv,
    format_steps_csv,
    summary_rows,
)
from .localize import EkfParams, GcpsoParams
from .model import MotionKind, Position2D
from .policy import Mode, PolicyConfig
from .scenario import (
    TRACE_HEADER,
    ChokePoint,
    ScenarioConfig,
    generate,
    parse_trace,
    serialize_trace,
)

_TOP_KEYS = {
    "seed", "n_runs", "algorithm", "zone", "noise", "policy", "gcpso", "ekf",
    "scenario", "coverage",
}
_ZONE_KEYS = {"radius", "drop_probability"}
_NOISE_KEYS = {"range_std", "gps_std", "velocity_std"}
_POLICY_KEYS = {
    "anchor_accuracy_threshold", "gnss_window", "gps_reset_interval", "mode",
    "anchors_preloaded",
}
_GCPSO_KEYS = {
    "particles", "iterations", "success_limit", "failure_limit", "initial_radius",
    "cognitive", "social", "inertia_start", "inertia_end", "fitness_stop",
}
_EKF_KEYS = {"range_std", "process_std", "velocity_std", "step_seconds"}
_SCENARIO_KEYS = {
    "seed", "kind", "duration", "step_seconds", "area", "n_moving", "n_parked",
    "n_entering", "entry_interval", "parked_spacing", "parked_offset", "speed",
    "circuit", "choke_points",
}
_COVERAGE_KEYS = {"cell_size"}


def _check_keys(section: dict, allowed: set[str], context: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {context} keys: {', '.join(sorted(unknown))}")


def load_config(path: str) -> dict:
    """Read and structurally validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "top-level")
    for key, allowed in (
        ("zone", _ZONE_KEYS),
        ("noise", _NOISE_KEYS),
        ("policy", _POLICY_KEYS),
        ("gcpso", _GCPSO_KEYS),
        ("ekf", _EKF_KEYS),
        ("scenario", _SCENARIO_KEYS),
        ("coverage", _COVERAGE_KEYS),
    ):
        if key in raw:
            if not isinstance(raw[key], dict):
                raise ConfigError(f"config section {key!r} must be an object")
            _check_keys(raw[key], allowed, key)
    return raw


def scenario_from_config(raw: dict) -> ScenarioConfig:
    section = dict(raw.get("scenario", {}))
    if "circuit" in section:
        section["circuit"] = tuple(Position2D(float(x), float(y)) for x, y in section["circuit"])
    if "area" in section:
        section["area"] = tuple(float(v) for v in section["area"])
    if "choke_points" in section:
        section["choke_points"] = tuple(
            ChokePoint(float(x), float(y), float(r), int(h))
            for x, y, r, h in section["choke_points"]
        )
    cfg = ScenarioConfig(**section)
    cfg.validate()
    return cfg


def run_config_from_config(
    raw: dict,
    algorithm: Algorithm,
    range_std: float,
    zone_radius: float | None,
    n_runs: int | None,
    seed: int | None,
) -> RunConfig:
    scenario = scenario_from_config(raw)
    noise_section = dict(raw.get("noise", {}))
    noise_section["range_std"] = range_std
    noise = NoiseModel(**noise_section)
    zone_section = dict(raw.get("zone", {}))
    if zone_radius is not None:
        zone_section["radius"] = zone_radius
    zone = CommZone(**zone_section) if zone_section else CommZone(15.0)
    policy_section = dict(raw.get("policy", {}))
    if "mode" in policy_section:
        policy_section["mode"] = Mode(policy_section["mode"])
    policy = PolicyConfig(**policy_section)
    gcpso = GcpsoParams(**raw.get("gcpso", {}))
    ekf_section = dict(raw.get("ekf", {}))
    if "range_std" not in ekf_section:
        ekf_section["range_std"] = max(range_std, 1e-3)
    if "step_seconds" not in ekf_section:
        ekf_section["step_seconds"] = scenario.step_seconds
    ekf = EkfParams(**ekf_section)
    run_seed = seed if seed is not None else int(raw.get("seed", 0))
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    return RunConfig(
        scenario=scenario,
        zone=zone,
        noise=noise,
        algorithm=algorithm,
        policy=policy,
        gcpso=gcpso,
        ekf=ekf,
        n_runs=n_runs if n_runs is not None else int(raw.get("n_runs", 40)),
        seed=run_seed,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    raw = load_config(args.config)
    scenario = scenario_from_config(raw)
    if args.kind is not None:
        scenario = replace(scenario, kind=args.kind)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    scenario.validate()
    records = generate(scenario)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_trace(records))
    kinds = {k: sum(1 for r in records if r.kind is k) for k in MotionKind}
    print(
        f"wrote {args.out}: {len(records)} vehicles "
        f"(moving={kinds[MotionKind.MOVING]} queued={kinds[MotionKind.QUEUED]} "
        f"parked={kinds[MotionKind.PARKED]})"
    )
    return 0


def _requested_modes(mode_flag: str) -> list[Mode]:
    if mode_flag == "both":
        return [Mode.TRADITIONAL, Mode.PROPOSED]
    return [Mode(mode_flag)]


def cmd_sim(args) -> int:
    raw = load_config(args.config)
    algorithms = (
        [Algorithm.GCPSO, Algorithm.EKF]
        if args.algorithm == "both"
        else [Algorithm(args.algorithm)]
    )
    sigmas = args.sigma_r if args.sigma_r else [float(raw.get("noise", {}).get("range_std", 4.0))]
    modes = _requested_modes(args.mode)

    records = None
    if args.trace is not None:
        with open(args.trace, "r", encoding="utf-8") as fh:
            records = parse_trace(fh.read())

    all_rows = []
    step_entries = []
    for algorithm in algorithms:
        for sigma in sigmas:
            cfg = run_config_from_config(
                raw, algorithm, sigma, args.zone, args.n_runs, args.seed
            )
            summary = ensemble(cfg, records, jobs=args.jobs, keep_episodes=args.dump_steps)
            all_rows.extend(r for r in summary_rows(summary) if r.mode in modes)
            if args.dump_steps:
                step_entries.append((algorithm, sigma, summary))

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(format_results_csv(all_rows))
    if args.dump_steps:
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        steps_path = stem + ".steps.csv"
        with open(steps_path, "w", encoding="utf-8") as fh:
            fh.write(format_steps_csv(step_entries))
        print(f"wrote per-step dump {steps_path}")

    print(f"{'algorithm':<10}{'sigma_r':>8}  {'vehicle':>7}  "
          f"{'mode':<12}{'rmse':>8}{'std':>8}  improvement")
    for r in all_rows:
        imp = "" if r.improvement_pct is None else f"{r.improvement_pct:.2f}%"
        print(
            f"{r.algorithm.value:<10}{r.range_std:>8.2f}  {r.vehicle_id:>7}  "
            f"{r.mode.value:<12}{r.rmse_mean:>8.3f}{r.rmse_std:>8.3f}  {imp}"
        )
    print(f"wrote {args.out}")
    return 0


def _load_parked(path: str) -> list[Position2D]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line == TRACE_HEADER:
            records = parse_trace(text)
            return [r.positions[0] for r in records if r.kind is MotionKind.PARKED]
        return parse_points(text)
    raise ConfigError(f"parked file {path} is empty")


def cmd_coverage(args) -> int:
    radii = [float(r) for r in args.radius or []]
    radii.extend(dsrc_radius(c) for c in args.device_class or [])
    if not radii:
        raise ConfigError("give at least one --radius or --class")
    cell_size = args.cell_size
    if cell_size is None and args.config is not None:
        cell_size = load_config(args.config).get("coverage", {}).get("cell_size")
    if cell_size is None:
        cell_size = 1.0
    with open(args.area, "r", encoding="utf-8") as fh:
        area = parse_area(fh.read(), cell_size=float(cell_size))
    parked = _load_parked(args.parked)
    rows = [(radius, coverage_report(area, parked, radius)) for radius in radii]
    text = format_coverage_csv(rows)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parkcp",
        description="Cooperative-positioning simulator with stationary-vehicle anchors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic mobility trace")
    p_gen.add_argument("--config", required=True, help="JSON config file")
    p_gen.add_argument("--out", required=True, help="trace CSV to write")
    p_gen.add_argument("--kind", choices=("circuit", "town"))
    p_gen.add_argument("--seed", type=int)
    p_gen.set_defaults(func=cmd_gen)

    p_sim = sub.add_parser("sim", help="run paired localisation ensembles")
    p_sim.add_argument("--config", required=True, help="JSON config file")
    p_sim.add_argument("--trace", help="trace CSV (generated from config when omitted)")
    p_sim.add_argument("--out", required=True, help="results CSV to write")
    p_sim.add_argument("--algorithm", choices=("gcpso", "ekf", "both"), default="both")
    p_sim.add_argument("--mode", choices=("traditional", "proposed", "both"), default="both")
    p_sim.add_argument("--sigma-r", type=float, action="append",
                       help="ranging noise std; repeatable")
    p_sim.add_argument("--zone", type=float, help="communication radius in meters")
    p_sim.add_argument("--n-runs", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.add_argument("--dump-steps", action="store_true",
                       help="also write a per-step error CSV")
    p_sim.set_defaults(func=cmd_sim)

    p_cov = sub.add_parser("coverage", help="stationary-vehicle area coverage report")
    p_cov.add_argument("--area", required=True, help="transit-area polygon CSV")
    p_cov.add_argument("--parked", required=True, help="parked positions (x,y or trace CSV)")
    p_cov.add_argument("--radius", type=float, action="append", help="repeatable")
    p_cov.add_argument("--class", dest="device_class", choices=tuple("ABCD"),
                       action="append", help="DSRC device class; repeatable")
    p_cov.add_argument("--config", help="JSON config (coverage.cell_size)")
    p_cov.add_argument("--cell-size", type=float,
                       help="raster cell in meters (default 1.0)")
    p_cov.add_argument("--out", required=True, help="coverage CSV to write")
    p_cov.set_defaults(func=cmd_coverage)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParkCPError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
