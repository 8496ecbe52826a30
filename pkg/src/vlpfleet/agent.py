"""Per-robot pipeline: odometry EKF, VLP decode with one-tick latency,
goal queue, and pure-pursuit following with jump replanning.

The agent never reads the true pose; it sees only commanded odometry and
the camera frames the simulator renders for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import fusion, navigation
from .beacon_codec import LedBeacon
from .camera_synth import CameraModel, NoiseParams, render_frame
from .fusion import FusedState, OdometryDelta, ProcessNoise
from .geometry import Pose2D
from .navigation import Goal, Path
from .pose_estimator import LedMap, UnknownLedId, lookup_led, position_from_detection
from .sim_world import OccupancyGrid, in_coverage
from .vlp_decoder import decode_frame_report

REPLAN_JUMP_M = 0.25

GOAL_ACTIVE = "active"
GOAL_REACHED = "reached"
GOAL_NO_PATH = "no_path"


@dataclass
class ScriptedGoal:
    goal: Goal
    after_s: float = 0.0


@dataclass
class CommandDecision:
    v: float
    omega: float
    goal_event: str | None
    fix_applied: bool
    fix_accepted: bool


class RobotAgent:
    def __init__(self, robot_id: str, start: Pose2D, grid: OccupancyGrid,
                 camera: CameraModel, led_map: LedMap,
                 process_noise: ProcessNoise = ProcessNoise(),
                 robot_radius: float = navigation.DEFAULT_ROBOT_RADIUS_M,
                 frame_noise: NoiseParams = NoiseParams(),
                 lookahead: float = navigation.DEFAULT_LOOKAHEAD_M,
                 v_max: float = navigation.DEFAULT_V_MAX,
                 omega_max: float = navigation.DEFAULT_OMEGA_MAX,
                 est_start: Pose2D | None = None,
                 est_sigma_xy: float = 1e-3,
                 est_sigma_theta: float = 1e-3):
        self.robot_id = robot_id
        self.grid = grid
        self.camera = camera
        self.led_map = led_map
        self.process_noise = process_noise
        self.robot_radius = robot_radius
        self.frame_noise = frame_noise
        self.lookahead = lookahead
        self.v_max = v_max
        self.omega_max = omega_max

        est = est_start if est_start is not None else start
        self.state = FusedState.at(est.x, est.y, est.theta,
                                   sigma_xy=est_sigma_xy, sigma_theta=est_sigma_theta)
        self.scripted: list[ScriptedGoal] = []
        self.active_goal: Goal | None = None
        self.path: Path | None = None
        self.pending: tuple | None = None   # (detection, capture time)
        self.last_fix = None                # most recent PositionFix applied
        self.last_fix_quality = 0.0
        self.accepted_fixes = 0
        self.rejected_fixes = 0
        self.unknown_id_fixes = 0
        self.last_command: tuple[float, float] = (0.0, 0.0)

    def est_pose(self) -> Pose2D:
        return Pose2D(self.state.x, self.state.y, self.state.theta)

    # -- goals ------------------------------------------------------------

    def queue_goal(self, goal: Goal, after_s: float = 0.0) -> None:
        self.scripted.append(ScriptedGoal(goal=goal, after_s=after_s))

    def set_goal(self, goal: Goal) -> str:
        """Adopt a goal now (operator or scripted); returns a status string."""
        try:
            self.path = navigation.plan_path(self.grid, self.robot_radius,
                                             self.est_pose(), goal)
        except (navigation.NoPath, navigation.GoalInObstacle):
            self.active_goal = None
            self.path = None
            return GOAL_NO_PATH
        self.active_goal = goal
        return GOAL_ACTIVE

    # -- per-tick pipeline --------------------------------------------------

    def decide_command(self, t: float) -> CommandDecision:
        """Fuse the queued fix, manage the goal queue, emit the drive command."""
        fix_applied, fix_accepted = self._apply_pending_fix()
        goal_event = None
        if self.active_goal is None and self.scripted and t >= self.scripted[0].after_s:
            nxt = self.scripted.pop(0)
            goal_event = self.set_goal(nxt.goal)
        elif (fix_applied and fix_accepted and self.path is not None
              and self.active_goal is not None
              and navigation.path_deviation(self.est_pose(), self.path) > REPLAN_JUMP_M):
            goal_event = self.set_goal(self.active_goal)

        v, omega = 0.0, 0.0
        if self.active_goal is not None and self.path is not None:
            command = navigation.steer(self.est_pose(), self.path,
                                       lookahead=self.lookahead, v_max=self.v_max,
                                       omega_max=self.omega_max,
                                       goal_tolerance=self.active_goal.tolerance)
            if command is None:
                self.active_goal = None
                self.path = None
                goal_event = GOAL_REACHED
            else:
                v, omega = command
        self.last_command = (v, omega)
        return CommandDecision(v=v, omega=omega, goal_event=goal_event,
                               fix_applied=fix_applied, fix_accepted=fix_accepted)

    def predict(self, dt: float) -> None:
        v, omega = self.last_command
        self.state = fusion.predict(self.state,
                                    OdometryDelta(v=v, omega=omega, dt=dt),
                                    self.process_noise)

    def sense(self, truth: Pose2D, beacon: LedBeacon, t: float,
              render_seed) -> tuple[bool, bool, str | None]:
        """Render + decode when the LED is visible from the true pose.

        Returns (in_coverage, decoded, diagnostic); a detection is queued
        and fused at the start of the next tick (one-tick decode latency,
        which never throttles the controller).
        """
        covered = in_coverage(truth, self.camera, beacon)
        if not covered:
            return False, False, None
        frame = render_frame(truth, self.camera, beacon, t0=t,
                             noise=self.frame_noise, seed=render_seed)
        report = decode_frame_report(frame)
        if report.detection is None:
            return True, False, report.diagnostic
        self.pending = (report.detection, t)
        return True, True, report.diagnostic

    def _apply_pending_fix(self) -> tuple[bool, bool]:
        if self.pending is None:
            return False, False
        detection, t = self.pending
        self.pending = None
        try:
            beacon = lookup_led(detection.led_id, self.led_map)
        except UnknownLedId:
            self.unknown_id_fixes += 1
            return False, False
        heading_sigma = math.sqrt(max(0.0, float(self.state.cov[2, 2])))
        fix = position_from_detection(detection, self.camera, beacon,
                                      heading=self.state.theta, t=t,
                                      heading_sigma=heading_sigma)
        self.state, accepted = fusion.update_vlp(self.state, fix)
        self.last_fix = fix
        self.last_fix_quality = float(detection.quality)
        if accepted:
            self.accepted_fixes += 1
        else:
            self.rejected_fixes += 1
        return True, accepted
