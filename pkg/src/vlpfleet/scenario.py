"""Scenario configs and the deterministic headless runner.

A scenario is a JSON document: arena, LED map, camera, noise levels, seed,
and per-robot start poses plus scripted goals. The runner steps the world
at the control rate, drives each robot's agent pipeline, and produces both
the per-tick metrics CSV and an end-of-run summary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .agent import RobotAgent
from .beacon_codec import LedBeacon
from .camera_synth import CameraModel, NoiseParams
from .fusion import ProcessNoise
from .geometry import Pose2D
from .host_service import MetricsLog
from .navigation import Goal
from .pose_estimator import LedMap
from .sim_world import (BUILTIN_ARENAS, NoCommonBoundary, OccupancyGrid, World,
                        boundary_disagreement, default_beacon,
                        perceived_displacement, raycast_scan, scan_endpoints)

DEFAULT_CONTROL_HZ = 10.0
# The boundary peak is scored over ticks where both robots sit still in
# coverage and decode, after a short settle. Transit phases are covered by
# their own measurements (error at entry, fixes to convergence, post-exit
# drift), so the window isolates the steady joint-coverage regime.
BOTH_WINDOW_SETTLE_TICKS = 20


class ConfigError(ValueError):
    """Scenario config rejected; the message names the offending field."""


@dataclass
class RobotSpec:
    robot_id: str
    start: Pose2D
    goals: list[tuple[Goal, float]] = field(default_factory=list)
    operator: bool = False
    v_scale: float = 1.0
    omega_bias: float = 0.0
    est_start: Pose2D | None = None   # odometry frame offset carried in from before t=0
    est_sigma_xy: float = 1e-3
    est_sigma_theta: float = 1e-3


@dataclass
class ScenarioConfig:
    seed: int
    duration_s: float
    control_hz: float
    grid: OccupancyGrid
    led_map: LedMap
    camera: CameraModel
    sigma_v: float
    sigma_omega: float
    sigma_px: float
    q_inflation: float
    robots: list[RobotSpec]

    @property
    def dt(self) -> float:
        return 1.0 / self.control_hz


def _require(raw: dict, key: str, where: str):
    if key not in raw:
        raise ConfigError(f"{where}.{key}: missing")
    return raw[key]


def parse_config(raw: dict, base_dir: str = ".") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: must be a JSON object")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    duration = raw.get("duration_s", 30.0)
    if not isinstance(duration, (int, float)) or duration <= 0:
        raise ConfigError("duration_s: must be a positive number")
    control_hz = raw.get("control_hz", DEFAULT_CONTROL_HZ)
    if not isinstance(control_hz, (int, float)) or control_hz <= 0:
        raise ConfigError("control_hz: must be a positive number")

    arena = raw.get("arena", "default")
    if isinstance(arena, str) and arena in BUILTIN_ARENAS:
        grid = BUILTIN_ARENAS[arena]()
    elif isinstance(arena, dict) and "pgm" in arena:
        import os
        try:
            grid = OccupancyGrid.load(os.path.join(base_dir, arena["pgm"]))
        except OSError as err:
            raise ConfigError(f"arena.pgm: {err}") from err
    else:
        names = ", ".join(sorted(BUILTIN_ARENAS))
        raise ConfigError(f"arena: must be one of {names} or {{'pgm': path}}")

    led_raw = raw.get("led_map", "default")
    if led_raw == "default":
        led_map = LedMap([default_beacon()])
    elif isinstance(led_raw, dict) and "path" in led_raw:
        import os
        try:
            led_map = LedMap.from_json_file(os.path.join(base_dir, led_raw["path"]))
        except OSError as err:
            raise ConfigError(f"led_map.path: {err}") from err
    elif isinstance(led_raw, dict) and "beacons" in led_raw:
        led_map = LedMap.from_dict(led_raw)
    else:
        raise ConfigError("led_map: must be 'default', {'path': ...} or {'beacons': [...]}")
    if len(led_map) == 0:
        raise ConfigError("led_map: needs at least one beacon")

    cam_raw = raw.get("camera", {})
    if not isinstance(cam_raw, dict):
        raise ConfigError("camera: must be an object")
    try:
        camera = CameraModel(**cam_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"camera: {err}") from err

    noise = raw.get("noise", {})
    if not isinstance(noise, dict):
        raise ConfigError("noise: must be an object")
    sigma_v = float(noise.get("sigma_v", 0.02))
    sigma_omega = float(noise.get("sigma_omega", 0.03))
    sigma_px = float(noise.get("sigma_px", 8.0))
    q_inflation = float(noise.get("q_inflation", 1.0))

    robots_raw = _require(raw, "robots", "config")
    if not isinstance(robots_raw, list) or not robots_raw:
        raise ConfigError("robots: must be a non-empty list")
    robots = []
    seen_ids = set()
    for i, entry in enumerate(robots_raw):
        where = f"robots[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be an object")
        robot_id = _require(entry, "id", where)
        if not isinstance(robot_id, str) or not robot_id:
            raise ConfigError(f"{where}.id: must be a non-empty string")
        if robot_id in seen_ids:
            raise ConfigError(f"{where}.id: duplicate robot id {robot_id!r}")
        seen_ids.add(robot_id)
        start_raw = _require(entry, "start", where)
        if (not isinstance(start_raw, list) or len(start_raw) != 3
                or not all(isinstance(v, (int, float)) for v in start_raw)):
            raise ConfigError(f"{where}.start: must be [x, y, theta]")
        start = Pose2D(float(start_raw[0]), float(start_raw[1]), float(start_raw[2]))
        if grid.occupied_at(start.x, start.y):
            raise ConfigError(f"{where}.start: pose is inside an occupied cell")
        goals_raw = entry.get("goals", [])
        operator = goals_raw == "operator"
        goals: list[tuple[Goal, float]] = []
        if not operator:
            if not isinstance(goals_raw, list):
                raise ConfigError(f"{where}.goals: must be a list or 'operator'")
            for j, goal_raw in enumerate(goals_raw):
                gwhere = f"{where}.goals[{j}]"
                if not isinstance(goal_raw, dict):
                    raise ConfigError(f"{gwhere}: must be an object")
                try:
                    goal = Goal(x=float(goal_raw["x"]), y=float(goal_raw["y"]),
                                tolerance=float(goal_raw.get("tolerance", 0.05)))
                except (KeyError, TypeError, ValueError) as err:
                    raise ConfigError(f"{gwhere}: {err}") from err
                goals.append((goal, float(goal_raw.get("after_s", 0.0))))
        est_start = None
        if "est_start" in entry:
            est_raw = entry["est_start"]
            if (not isinstance(est_raw, list) or len(est_raw) != 3
                    or not all(isinstance(v, (int, float)) for v in est_raw)):
                raise ConfigError(f"{where}.est_start: must be [x, y, theta]")
            est_start = Pose2D(float(est_raw[0]), float(est_raw[1]), float(est_raw[2]))
        robots.append(RobotSpec(robot_id=robot_id, start=start, goals=goals,
                                operator=operator,
                                v_scale=float(entry.get("v_scale", 1.0)),
                                omega_bias=float(entry.get("omega_bias", 0.0)),
                                est_start=est_start,
                                est_sigma_xy=float(entry.get("est_sigma_xy", 1e-3)),
                                est_sigma_theta=float(entry.get("est_sigma_theta", 1e-3))))

    return ScenarioConfig(seed=seed, duration_s=float(duration),
                          control_hz=float(control_hz), grid=grid, led_map=led_map,
                          camera=camera, sigma_v=sigma_v, sigma_omega=sigma_omega,
                          sigma_px=sigma_px, q_inflation=q_inflation, robots=robots)


def load_config(path: str) -> ScenarioConfig:
    import os
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"config file: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file: invalid JSON: {err}") from err
    return parse_config(raw, base_dir=os.path.dirname(path) or ".")


def coverage_handoff_config(seed: int = 7) -> dict:
    """The two-robot experiment: A arrives from outside LED coverage carrying
    accumulated odometry error and is corrected on entry; B waits under the
    LED through the joint measurement window, then drives out and drifts."""
    return {
        "seed": seed,
        "duration_s": 40.0,
        "control_hz": 10.0,
        "arena": "handoff",
        "led_map": "default",
        "noise": {"sigma_v": 0.02, "sigma_omega": 0.03, "sigma_px": 8.0},
        "robots": [
            {"id": "A", "start": [3.55, 2.40, 0.0],
             "est_start": [3.445, 2.40, 0.0],
             "est_sigma_xy": 0.07, "est_sigma_theta": 0.02,
             "goals": [{"x": 4.05, "y": 2.40}]},
            {"id": "B", "start": [4.40, 2.52, 0.0],
             "goals": [{"x": 6.90, "y": 2.40, "after_s": 26.0}]},
        ],
    }


BUILTIN_SCENARIOS = {"coverage-handoff": coverage_handoff_config}


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


@dataclass
class RobotTickRow:
    truth: Pose2D
    est: Pose2D
    err: float
    in_coverage: bool
    decoded: bool
    fix_applied: bool
    fix_accepted: bool
    commanded_v: float
    has_goal: bool
    boundary_contrib: float | None


@dataclass
class RobotSummary:
    robot_id: str
    entry_t: float | None = None
    entry_error_m: float | None = None
    fixes_to_5cm: int | None = None
    exit_t: float | None = None
    exit_error_m: float | None = None
    accepted_fixes: int = 0
    rejected_fixes: int = 0
    decode_attempts: int = 0
    decode_successes: int = 0
    mean_speed_in: float | None = None
    mean_speed_out: float | None = None
    window_contrib: float | None = None
    post2m_contrib: float | None = None
    goals_reached: int = 0


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    ticks: int
    robots: dict[str, RobotSummary]
    both_window_ticks: int
    both_window_peak: float | None
    rows: list  # (t, {robot_id: RobotTickRow}, boundary_peak)

    def speed_parity_gap(self) -> float | None:
        """Relative gap between pooled mean commanded speed in vs out of coverage.

        Only driving ticks count: the stop command that ends a goal is the
        goal ending, not the controller slowing down.
        """
        v_in: list[float] = []
        v_out: list[float] = []
        for _, per_robot, _ in self.rows:
            for row in per_robot.values():
                if not row.has_goal or row.commanded_v == 0.0:
                    continue
                (v_in if row.in_coverage else v_out).append(row.commanded_v)
        if not v_in or not v_out:
            return None
        mean_in = sum(v_in) / len(v_in)
        mean_out = sum(v_out) / len(v_out)
        if mean_out == 0:
            return None
        return abs(mean_in - mean_out) / mean_out


def run_scenario(config: ScenarioConfig, metrics_path: str | None = None) -> ScenarioResult:
    """Step the scenario to completion; deterministic for a fixed config."""
    world = World(config.grid, seed=config.seed, sigma_v=config.sigma_v,
                  sigma_omega=config.sigma_omega)
    q = ProcessNoise(sigma_v=config.sigma_v, sigma_omega=config.sigma_omega,
                     inflation=config.q_inflation)
    frame_noise = NoiseParams(sigma_px=config.sigma_px)
    agents: dict[str, RobotAgent] = {}
    robot_index: dict[str, int] = {}
    for idx, spec in enumerate(config.robots):
        world.add_robot(spec.robot_id, spec.start, v_scale=spec.v_scale,
                        omega_bias=spec.omega_bias)
        agent = RobotAgent(spec.robot_id, spec.start, config.grid, config.camera,
                           config.led_map, process_noise=q, frame_noise=frame_noise,
                           est_start=spec.est_start, est_sigma_xy=spec.est_sigma_xy,
                           est_sigma_theta=spec.est_sigma_theta)
        for goal, after_s in spec.goals:
            agent.queue_goal(goal, after_s)
        agents[spec.robot_id] = agent
        robot_index[spec.robot_id] = idx

    metrics = MetricsLog(metrics_path)
    beacons = config.led_map.beacons
    order = sorted(agents)
    summaries = {rid: RobotSummary(robot_id=rid) for rid in order}
    prev_in_coverage = {
        rid: any(_visible(world.robots[rid].pose, config.camera, b) for b in beacons)
        for rid in order
    }
    post_exit_dist = {rid: None for rid in order}
    last_truth = {rid: world.robots[rid].pose for rid in order}
    pending_entry: dict[str, tuple[float, int]] = {}

    rows = []
    fix_times: dict[str, list[float]] = {rid: [] for rid in order}
    n_ticks = int(round(config.duration_s * config.control_hz))
    dt = config.dt

    for tick in range(n_ticks):
        t = tick * dt
        # Phase 1: fuse queued fixes, manage goals, choose commands.
        decisions = {}
        for rid in order:
            agent = agents[rid]
            decision = agent.decide_command(t)
            decisions[rid] = decision
            if decision.fix_accepted:
                summary = summaries[rid]
                if rid in pending_entry:
                    entry_t, count = pending_entry[rid]
                    count += 1
                    err_now = _pose_err(world.robots[rid].pose, agent.est_pose())
                    if err_now < 0.05:
                        summary.fixes_to_5cm = count
                        del pending_entry[rid]
                    else:
                        pending_entry[rid] = (entry_t, count)
            if decision.goal_event == "reached":
                summaries[rid].goals_reached += 1
            world.command(rid, decision.v, decision.omega)

        # Phase 2: physics.
        world.step(dt)
        t_now = t + dt

        # Phase 3: predict + sense.
        tick_rows: dict[str, RobotTickRow] = {}
        for rid in order:
            agent = agents[rid]
            agent.predict(dt)
            truth = world.robots[rid].pose
            covered, decoded, _diag = agent.sense(
                truth, _pick_beacon(truth, config.camera, beacons), t_now,
                render_seed=[config.seed, robot_index[rid], tick])
            if covered:
                summaries[rid].decode_attempts += 1
                if decoded:
                    summaries[rid].decode_successes += 1
                    fix_times[rid].append(t_now)
            est = agent.est_pose()
            err = _pose_err(truth, est)
            if covered and not prev_in_coverage[rid]:
                summaries[rid].entry_t = t_now
                summaries[rid].entry_error_m = err
                pending_entry[rid] = (t_now, 0)
            if not covered and prev_in_coverage[rid]:
                summaries[rid].exit_t = t_now
                summaries[rid].exit_error_m = err
                post_exit_dist[rid] = 0.0
            if post_exit_dist[rid] is not None and not covered:
                step_len = math.hypot(truth.x - last_truth[rid].x,
                                      truth.y - last_truth[rid].y)
                post_exit_dist[rid] += step_len
            prev_in_coverage[rid] = covered
            last_truth[rid] = truth
            tick_rows[rid] = RobotTickRow(
                truth=truth, est=est, err=err, in_coverage=covered, decoded=decoded,
                fix_applied=decisions[rid].fix_applied,
                fix_accepted=decisions[rid].fix_accepted,
                commanded_v=decisions[rid].v,
                has_goal=agents[rid].active_goal is not None
                or decisions[rid].goal_event == "reached",
                boundary_contrib=None)

        # Phase 4: scans, boundary metric, CSV.
        boundary_peak = None
        scans = {rid: raycast_scan(world.robots[rid].pose, config.grid)
                 for rid in order}
        for rid in order:
            truth = world.robots[rid].pose
            pts = scan_endpoints(scans[rid], truth)
            if len(pts):
                disp = perceived_displacement(pts, truth, tick_rows[rid].est)
                tick_rows[rid].boundary_contrib = float(
                    np.sqrt(np.max(np.einsum("ij,ij->i", disp, disp))))
        if len(order) == 2:
            a, b = order
            try:
                boundary_peak = boundary_disagreement(
                    scans[a], world.robots[a].pose, tick_rows[a].est,
                    scans[b], world.robots[b].pose, tick_rows[b].est)
            except NoCommonBoundary:
                boundary_peak = None

        t_ms = int(round(t_now * 1000))
        for rid in order:
            row = tick_rows[rid]
            recent = [ft for ft in fix_times[rid] if ft >= t_now - 5.0]
            fix_times[rid] = recent
            metrics.write_row(t_ms, rid, (row.truth.x, row.truth.y),
                              (row.est.x, row.est.y), row.in_coverage,
                              len(recent) / 5.0, boundary_peak)
        rows.append((t_now, tick_rows, boundary_peak))

    metrics.close()

    for rid in order:
        summaries[rid].accepted_fixes = agents[rid].accepted_fixes
        summaries[rid].rejected_fixes = agents[rid].rejected_fixes
        _fill_speed_stats(summaries[rid], rid, rows)

    both_ticks, both_peak = _both_window_stats(order, rows)
    _fill_contributions(order, rows, summaries, post_exit_dist)
    return ScenarioResult(config=config, ticks=n_ticks, robots=summaries,
                          both_window_ticks=both_ticks, both_window_peak=both_peak,
                          rows=rows)


def _visible(pose: Pose2D, camera, beacon) -> bool:
    from .sim_world import in_coverage as _in
    return _in(pose, camera, beacon)


def _pick_beacon(truth: Pose2D, camera, beacons: list[LedBeacon]) -> LedBeacon:
    for beacon in beacons:
        if _visible(truth, camera, beacon):
            return beacon
    return beacons[0]


def _pose_err(truth: Pose2D, est: Pose2D) -> float:
    return math.hypot(truth.x - est.x, truth.y - est.y)


def _fill_speed_stats(summary: RobotSummary, rid: str, rows: list) -> None:
    v_in: list[float] = []
    v_out: list[float] = []
    for _, per_robot, _ in rows:
        row = per_robot[rid]
        if not row.has_goal or row.commanded_v == 0.0:
            continue
        (v_in if row.in_coverage else v_out).append(row.commanded_v)
    if v_in:
        summary.mean_speed_in = sum(v_in) / len(v_in)
    if v_out:
        summary.mean_speed_out = sum(v_out) / len(v_out)


def _both_settled(per_robot, a: str, b: str) -> bool:
    """Both robots in coverage, decoding, and holding still."""
    return all(per_robot[r].in_coverage and per_robot[r].decoded
               and per_robot[r].commanded_v == 0.0 for r in (a, b))


def _both_window_stats(order: list[str], rows: list) -> tuple[int, float | None]:
    """Peak boundary disagreement over the settled both-in-coverage window."""
    if len(order) != 2:
        return 0, None
    a, b = order
    peak = None
    count = 0
    run = 0
    for _, per_robot, boundary in rows:
        if not _both_settled(per_robot, a, b):
            run = 0
            continue
        run += 1
        if run <= BOTH_WINDOW_SETTLE_TICKS or boundary is None:
            continue
        count += 1
        peak = boundary if peak is None else max(peak, boundary)
    return count, peak


def _fill_contributions(order: list[str], rows: list,
                        summaries: dict[str, RobotSummary],
                        post_exit_dist: dict[str, float | None]) -> None:
    """Each robot's own perceived-boundary error, inside the settled window
    and again after it has driven 2 m beyond coverage."""
    if len(order) != 2:
        return
    a, b = order
    run = 0
    for t, per_robot, _ in rows:
        run = run + 1 if _both_settled(per_robot, a, b) else 0
        if run <= BOTH_WINDOW_SETTLE_TICKS:
            continue
        for rid in order:
            contrib = per_robot[rid].boundary_contrib
            if contrib is None:
                continue
            summary = summaries[rid]
            summary.window_contrib = (contrib if summary.window_contrib is None
                                      else max(summary.window_contrib, contrib))
    # Post-exit contribution needs the travelled distance at each tick, so
    # re-walk the rows accumulating it per robot.
    for rid in order:
        summary = summaries[rid]
        if summary.exit_t is None:
            continue
        dist = 0.0
        prev_truth = None
        for t, per_robot, _ in rows:
            row = per_robot[rid]
            if t < summary.exit_t:
                prev_truth = row.truth
                continue
            if prev_truth is not None:
                dist += math.hypot(row.truth.x - prev_truth.x,
                                   row.truth.y - prev_truth.y)
            prev_truth = row.truth
            if dist >= 2.0 and row.boundary_contrib is not None:
                summary.post2m_contrib = (row.boundary_contrib
                                          if summary.post2m_contrib is None
                                          else max(summary.post2m_contrib,
                                                   row.boundary_contrib))
