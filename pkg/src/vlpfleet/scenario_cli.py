"""Command-line entry point.

Subcommands:
  simulate <config.json>           headless run, metrics CSV + summary JSON
  serve <config.json>              live host + console feed + operator goals
  decode <files...>                decode PGM frames to JSON lines
  experiment coverage-handoff      the builtin two-robot experiment

Exit codes: 0 success, 1 partial failure, 2 config error. The env var
VLP_FLEET_SEED overrides the config seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob as globmod
import json
import os
import sys

from . import scenario
from .camera_synth import FrameImage
from .pgm import PgmError
from .scenario import BUILTIN_SCENARIOS, ConfigError, ScenarioConfig
from .vlp_decoder import decode_frame_report

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _apply_seed_override(config: ScenarioConfig) -> ScenarioConfig:
    env = os.environ.get("VLP_FLEET_SEED")
    if env is None:
        return config
    try:
        seed = int(env)
    except ValueError as err:
        raise ConfigError(f"VLP_FLEET_SEED: {err}") from err
    return dataclasses.replace(config, seed=seed)


def _summary_dict(result: scenario.ScenarioResult) -> dict:
    robots = {}
    for rid, summary in sorted(result.robots.items()):
        robots[rid] = {
            "entry_t_s": summary.entry_t,
            "entry_error_m": summary.entry_error_m,
            "fixes_to_5cm": summary.fixes_to_5cm,
            "exit_t_s": summary.exit_t,
            "exit_error_m": summary.exit_error_m,
            "accepted_fixes": summary.accepted_fixes,
            "rejected_fixes": summary.rejected_fixes,
            "decode_attempts": summary.decode_attempts,
            "decode_successes": summary.decode_successes,
            "mean_speed_in_mps": summary.mean_speed_in,
            "mean_speed_out_mps": summary.mean_speed_out,
            "window_boundary_contrib_m": summary.window_contrib,
            "post2m_boundary_contrib_m": summary.post2m_contrib,
            "goals_reached": summary.goals_reached,
        }
    return {
        "seed": result.config.seed,
        "ticks": result.ticks,
        "both_window_ticks": result.both_window_ticks,
        "both_window_peak_m": result.both_window_peak,
        "speed_parity_gap": result.speed_parity_gap(),
        "robots": robots,
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _apply_seed_override(scenario.load_config(args.config))
    result = scenario.run_scenario(config, metrics_path=args.metrics)
    print(json.dumps(_summary_dict(result), indent=2))
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    builder = BUILTIN_SCENARIOS.get(args.name)
    if builder is None:
        known = ", ".join(sorted(BUILTIN_SCENARIOS))
        raise ConfigError(f"experiment: unknown scenario {args.name!r} (have: {known})")
    config = _apply_seed_override(scenario.parse_config(builder(seed=args.seed)))
    result = scenario.run_scenario(config, metrics_path=args.metrics)
    print(json.dumps(_summary_dict(result), indent=2))
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    paths: list[str] = []
    for pattern in args.files:
        hits = sorted(globmod.glob(pattern))
        if hits:
            paths.extend(hits)
        elif not any(ch in pattern for ch in "*?["):
            paths.append(pattern)  # literal path; load reports the error
    failed = False
    for path in paths:
        try:
            frame = FrameImage.load_pgm(path)
        except (PgmError, OSError) as err:
            print(json.dumps({"file": path, "error": str(err)}))
            failed = True
            continue
        report = decode_frame_report(frame)
        detection = report.detection
        roi = report.roi
        print(json.dumps({
            "file": path,
            "led_id": detection.led_id if detection else None,
            "u": roi.center_u if roi else None,
            "v": roi.center_v if roi else None,
            "quality": detection.quality if detection else 0.0,
            "diagnostic": report.diagnostic,
        }))
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import asyncio

    from .serve import run_serve

    config = _apply_seed_override(scenario.load_config(args.config))
    static_dir = args.static_dir
    if static_dir is None:
        bundled = os.path.join(os.path.dirname(os.path.dirname(
            os.path.dirname(os.path.abspath(__file__)))), "frontend", "dist")
        if os.path.isdir(bundled):
            static_dir = bundled
    print(f"robot protocol on tcp://{args.bind}:{args.robot_port}, "
          f"console on http://{args.bind}:{args.console_port}/", file=sys.stderr)
    try:
        asyncio.run(run_serve(config, bind=args.bind, robot_port=args.robot_port,
                              console_port=args.console_port, static_dir=static_dir,
                              metrics_path=args.metrics))
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlpfleet", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario headless")
    p_sim.add_argument("config")
    p_sim.add_argument("--metrics", default="metrics.csv")
    p_sim.set_defaults(func=cmd_simulate)

    p_serve = sub.add_parser("serve", help="run sim + host + console feed")
    p_serve.add_argument("config")
    p_serve.add_argument("--bind", default="127.0.0.1")
    p_serve.add_argument("--robot-port", type=int, default=7801)
    p_serve.add_argument("--console-port", type=int, default=7800)
    p_serve.add_argument("--static-dir", default=None)
    p_serve.add_argument("--metrics", default="metrics.csv")
    p_serve.set_defaults(func=cmd_serve)

    p_dec = sub.add_parser("decode", help="decode PGM frames to JSON lines")
    p_dec.add_argument("files", nargs="*", help="PGM paths or globs")
    p_dec.set_defaults(func=cmd_decode)

    p_exp = sub.add_parser("experiment", help="run a builtin experiment")
    p_exp.add_argument("name", choices=sorted(BUILTIN_SCENARIOS))
    p_exp.add_argument("--seed", type=int, default=7)
    p_exp.add_argument("--metrics", default="metrics.csv")
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
