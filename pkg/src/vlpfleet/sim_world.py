"""Deterministic 2-D arena: noisy unicycle robots, grid LiDAR, LED coverage,
and the two-robot boundary-disagreement metric.

Everything the simulation does is a pure function of (initial state,
command log, seed): robots own seeded generators and are stepped in sorted
id order, so runs replay bit-identically.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .beacon_codec import LedBeacon
from .camera_synth import CameraModel, project_led
from .geometry import Pose2D, wrap_angle
from .pgm import read_pgm, write_pgm

DEFAULT_RESOLUTION_M = 0.05
DEFAULT_N_BEAMS = 360
DEFAULT_MAX_RANGE_M = 3.5
COLLISION_SUBSTEPS = 10

ARENA_FREE_CELLS_X = 166   # ~8.3 m of free space inside the walls
ARENA_FREE_CELLS_Y = 96    # ~4.8 m
DEFAULT_BEACON_XY = (4.16, 2.40)


class PoseInOccupiedCell(ValueError):
    """Ray-cast origin lies inside an occupied cell."""


class NoCommonBoundary(ValueError):
    """The two scans share no wall points within the match radius."""


@dataclass
class OccupancyGrid:
    resolution: float
    origin_x: float
    origin_y: float
    occupied: np.ndarray  # (ny, nx) bool

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.occupied = np.asarray(self.occupied, dtype=bool)

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin_x) / self.resolution))
        iy = int(math.floor((y - self.origin_y) / self.resolution))
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin_x + (ix + 0.5) * self.resolution,
                self.origin_y + (iy + 0.5) * self.resolution)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def occupied_at(self, x: float, y: float) -> bool:
        """Occupancy at a world point; anything off the grid counts occupied."""
        ix, iy = self.cell_of(x, y)
        if not self.in_bounds(ix, iy):
            return True
        return bool(self.occupied[iy, ix])

    def save(self, pgm_path: str) -> None:
        """Write PGM (0 = occupied, 255 = free) plus a JSON geometry sidecar."""
        write_pgm(pgm_path, np.where(self.occupied, 0, 255).astype(np.uint8))
        sidecar = os.path.splitext(pgm_path)[0] + ".json"
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump({"resolution_m": self.resolution,
                       "origin_x_m": self.origin_x,
                       "origin_y_m": self.origin_y}, fh)
            fh.write("\n")

    @classmethod
    def load(cls, pgm_path: str) -> "OccupancyGrid":
        pixels = read_pgm(pgm_path)
        sidecar = os.path.splitext(pgm_path)[0] + ".json"
        with open(sidecar, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        return cls(resolution=float(meta["resolution_m"]),
                   origin_x=float(meta["origin_x_m"]),
                   origin_y=float(meta["origin_y_m"]),
                   occupied=pixels < 128)


def default_arena(resolution: float = DEFAULT_RESOLUTION_M) -> OccupancyGrid:
    """Walled rectangular arena around ~8.3 x 4.8 m of free space."""
    nx = ARENA_FREE_CELLS_X + 2
    ny = ARENA_FREE_CELLS_Y + 2
    occupied = np.zeros((ny, nx), dtype=bool)
    occupied[0, :] = True
    occupied[-1, :] = True
    occupied[:, 0] = True
    occupied[:, -1] = True
    return OccupancyGrid(resolution=resolution, origin_x=0.0, origin_y=0.0,
                         occupied=occupied)


def fill_rect(grid: OccupancyGrid, x0: float, y0: float, x1: float, y1: float) -> None:
    """Mark every cell whose center lies in [x0, x1] x [y0, y1] occupied."""
    for iy in range(grid.height):
        for ix in range(grid.width):
            cx, cy = grid.cell_center(ix, iy)
            if x0 <= cx <= x1 and y0 <= cy <= y1:
                grid.occupied[iy, ix] = True


def handoff_arena(resolution: float = DEFAULT_RESOLUTION_M) -> OccupancyGrid:
    """Default arena plus two barrier rows flanking the LED area.

    The barriers model the cluttered platform around the measurement zone:
    they keep the LiDAR boundary points the two robots share within about
    a meter instead of the bare 2.4-3.5 m walls, so the relative-boundary
    comparison reads localization error, not lever-arm amplification.
    """
    grid = default_arena(resolution)
    fill_rect(grid, 3.26, 2.70, 4.85, 3.00)
    fill_rect(grid, 3.26, 1.80, 4.85, 2.10)
    return grid


BUILTIN_ARENAS = {"default": default_arena, "handoff": handoff_arena}


def default_beacon(led_id: int = 1) -> LedBeacon:
    return LedBeacon(id=led_id, position_xy=DEFAULT_BEACON_XY)


@dataclass
class RobotTruth:
    pose: Pose2D
    v_cmd: float = 0.0
    omega_cmd: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    v_scale: float = 1.0       # systematic actuation bias, scenario-level
    omega_bias: float = 0.0    # rad/s added while moving
    collided: bool = False


@dataclass(frozen=True)
class Scan:
    n_beams: int
    angles: np.ndarray   # sensor-frame bearings, evenly spaced over 2*pi
    ranges: np.ndarray
    max_range: float

    def hit_mask(self) -> np.ndarray:
        return self.ranges < self.max_range


class World:
    """Owns the grid, the robots, actuation noise, and simulation time."""

    def __init__(self, grid: OccupancyGrid, seed: int = 0,
                 sigma_v: float = 0.02, sigma_omega: float = 0.03):
        self.grid = grid
        self.seed = seed
        self.sigma_v = sigma_v
        self.sigma_omega = sigma_omega
        self.robots: dict[str, RobotTruth] = {}
        self.time = 0.0

    def add_robot(self, robot_id: str, pose: Pose2D,
                  v_scale: float = 1.0, omega_bias: float = 0.0) -> RobotTruth:
        if robot_id in self.robots:
            raise ValueError(f"duplicate robot id {robot_id!r}")
        if self.grid.occupied_at(pose.x, pose.y):
            raise ValueError(f"robot {robot_id!r} starts in an occupied cell")
        rng = np.random.default_rng([self.seed, len(self.robots)])
        robot = RobotTruth(pose=pose, rng=rng, v_scale=v_scale, omega_bias=omega_bias)
        self.robots[robot_id] = robot
        return robot

    def command(self, robot_id: str, v: float, omega: float) -> None:
        robot = self.robots[robot_id]
        robot.v_cmd = v
        robot.omega_cmd = omega

    def step(self, dt: float) -> None:
        """Advance every robot by dt with noisy actuation and wall stops."""
        if not 0.0 < dt <= 0.1:
            raise ValueError("dt must be in (0, 0.1]")
        for robot_id in sorted(self.robots):
            self._step_robot(self.robots[robot_id], dt)
        self.time += dt

    def _step_robot(self, robot: RobotTruth, dt: float) -> None:
        moving = robot.v_cmd != 0.0 or robot.omega_cmd != 0.0
        if not moving:
            return
        v = robot.v_cmd * robot.v_scale + robot.rng.normal(0.0, self.sigma_v)
        omega = robot.omega_cmd + robot.omega_bias + robot.rng.normal(0.0, self.sigma_omega)
        robot.collided = False
        sub = dt / COLLISION_SUBSTEPS
        pose = robot.pose
        for _ in range(COLLISION_SUBSTEPS):
            theta = pose.theta
            nx = pose.x + v * sub * math.cos(theta)
            ny = pose.y + v * sub * math.sin(theta)
            if self.grid.occupied_at(nx, ny):
                robot.collided = True
                break
            pose = Pose2D(nx, ny, wrap_angle(theta + omega * sub))
        robot.pose = pose


def raycast_scan(pose: Pose2D, grid: OccupancyGrid,
                 n_beams: int = DEFAULT_N_BEAMS,
                 max_range: float = DEFAULT_MAX_RANGE_M) -> Scan:
    """Grid-traversal LiDAR: per-beam range to the first occupied cell edge.

    All beams advance together through the DDA in lock-step numpy ops.
    """
    if grid.occupied_at(pose.x, pose.y):
        raise PoseInOccupiedCell(f"({pose.x:.3f}, {pose.y:.3f})")
    res = grid.resolution
    bearings = np.arange(n_beams) * (2.0 * math.pi / n_beams)
    world_ang = pose.theta + bearings
    dx = np.cos(world_ang)
    dy = np.sin(world_ang)
    tiny = 1e-12
    dx = np.where(np.abs(dx) < tiny, np.where(dx >= 0, tiny, -tiny), dx)
    dy = np.where(np.abs(dy) < tiny, np.where(dy >= 0, tiny, -tiny), dy)

    ix0, iy0 = grid.cell_of(pose.x, pose.y)
    ix = np.full(n_beams, ix0, dtype=int)
    iy = np.full(n_beams, iy0, dtype=int)
    step_x = np.where(dx > 0, 1, -1)
    step_y = np.where(dy > 0, 1, -1)
    next_gx = grid.origin_x + (ix + (step_x > 0)) * res
    next_gy = grid.origin_y + (iy + (step_y > 0)) * res
    t_max_x = (next_gx - pose.x) / dx
    t_max_y = (next_gy - pose.y) / dy
    t_delta_x = res / np.abs(dx)
    t_delta_y = res / np.abs(dy)

    ranges = np.full(n_beams, max_range)
    active = np.ones(n_beams, dtype=bool)
    while active.any():
        take_x = t_max_x <= t_max_y
        t_next = np.where(take_x, t_max_x, t_max_y)
        out_of_range = active & (t_next > max_range)
        active &= ~out_of_range

        adv_x = active & take_x
        adv_y = active & ~take_x
        ix[adv_x] += step_x[adv_x]
        t_max_x[adv_x] += t_delta_x[adv_x]
        iy[adv_y] += step_y[adv_y]
        t_max_y[adv_y] += t_delta_y[adv_y]

        inside = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
        occ = np.ones(n_beams, dtype=bool)
        occ[inside] = grid.occupied[iy[inside], ix[inside]]
        hit = active & occ
        ranges[hit] = t_next[hit]
        active &= ~hit
    return Scan(n_beams=n_beams, angles=bearings, ranges=ranges, max_range=max_range)


def in_coverage(pose: Pose2D, camera: CameraModel, beacon: LedBeacon) -> bool:
    """True when the LED disk projects fully inside the image."""
    return project_led(pose, camera, beacon) is not None


def coverage_radius(camera: CameraModel, beacon: LedBeacon) -> float:
    """Analytic coverage boundary along the camera x-axis at heading 0."""
    h = beacon.height - camera.mount_height
    return (h / camera.fx) * min(camera.cx, camera.width - 1 - camera.cx) - beacon.diameter / 2.0


def coverage_radius_min(camera: CameraModel, beacon: LedBeacon) -> float:
    """Conservative coverage radius: inside this disk every heading sees the LED."""
    h = beacon.height - camera.mount_height
    ext_x = (h / camera.fx) * min(camera.cx, camera.width - 1 - camera.cx)
    ext_y = (h / camera.fy) * min(camera.cy, camera.height - 1 - camera.cy)
    return min(ext_x, ext_y) - beacon.diameter / 2.0


def scan_endpoints(scan: Scan, truth: Pose2D) -> np.ndarray:
    """World coordinates of the wall points the beams actually hit."""
    hits = scan.hit_mask()
    ang = truth.theta + scan.angles[hits]
    r = scan.ranges[hits]
    return np.stack([truth.x + r * np.cos(ang), truth.y + r * np.sin(ang)], axis=1)


def perceived_displacement(points: np.ndarray, truth: Pose2D, est: Pose2D) -> np.ndarray:
    """How far each true wall point moves when re-anchored at the estimate.

    A point sensed from the true pose is believed to sit at
    T(est) * T(truth)^-1 * p; the displacement is that belief minus p.
    """
    d_theta = est.theta - truth.theta
    c, s = math.cos(d_theta), math.sin(d_theta)
    rel_x = points[:, 0] - truth.x
    rel_y = points[:, 1] - truth.y
    px = est.x + c * rel_x - s * rel_y
    py = est.y + s * rel_x + c * rel_y
    return np.stack([px - points[:, 0], py - points[:, 1]], axis=1)


def boundary_disagreement(scan_a: Scan, truth_a: Pose2D, est_a: Pose2D,
                          scan_b: Scan, truth_b: Pose2D, est_b: Pose2D,
                          match_radius: float = 0.05) -> float:
    """Peak disagreement between the robots' perceived wall locations.

    Wall points both robots observed (true endpoints within match_radius)
    are compared through each robot's perceived displacement; matching on
    true endpoints and differencing displacements keeps the metric exactly
    zero when both estimates equal their truths.
    """
    pts_a = scan_endpoints(scan_a, truth_a)
    pts_b = scan_endpoints(scan_b, truth_b)
    if len(pts_a) == 0 or len(pts_b) == 0:
        raise NoCommonBoundary("a scan has no wall hits")
    diff = pts_a[:, None, :] - pts_b[None, :, :]
    close = np.einsum("ijk,ijk->ij", diff, diff) <= match_radius ** 2
    ia, ib = np.nonzero(close)
    if len(ia) == 0:
        raise NoCommonBoundary("no shared wall points within match radius")
    disp_a = perceived_displacement(pts_a, truth_a, est_a)
    disp_b = perceived_displacement(pts_b, truth_b, est_b)
    gap = disp_a[ia] - disp_b[ib]
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", gap, gap))))
