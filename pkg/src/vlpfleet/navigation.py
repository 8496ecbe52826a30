"""Global A* on the inflated grid plus a pure-pursuit path follower."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, wrap_angle
from .sim_world import OccupancyGrid

DEFAULT_ROBOT_RADIUS_M = 0.11
DEFAULT_LOOKAHEAD_M = 0.3
DEFAULT_V_MAX = 0.22
DEFAULT_OMEGA_MAX = 2.84
DEFAULT_GOAL_TOLERANCE_M = 0.05
SQRT2 = math.sqrt(2.0)


class NoPath(ValueError):
    """Goal unreachable from the start on the inflated grid."""


class GoalInObstacle(ValueError):
    """Goal cell is occupied after inflation."""


@dataclass(frozen=True)
class Goal:
    x: float
    y: float
    tolerance: float = DEFAULT_GOAL_TOLERANCE_M


@dataclass(frozen=True)
class Path:
    waypoints: list[tuple[float, float]]
    total_length: float

    def end(self) -> tuple[float, float]:
        return self.waypoints[-1]


def inflate(grid: OccupancyGrid, robot_radius: float) -> np.ndarray:
    """Occupied mask grown by the robot radius (Euclidean, cell centers)."""
    cells = int(math.floor(robot_radius / grid.resolution + 1e-9))
    occ = grid.occupied
    out = occ.copy()
    r_sq = (robot_radius / grid.resolution) ** 2
    for ox in range(-cells, cells + 1):
        for oy in range(-cells, cells + 1):
            if ox == 0 and oy == 0:
                continue
            if ox * ox + oy * oy > r_sq:
                continue
            shifted = np.zeros_like(occ)
            src_y = slice(max(0, -oy), occ.shape[0] - max(0, oy))
            dst_y = slice(max(0, oy), occ.shape[0] - max(0, -oy))
            src_x = slice(max(0, -ox), occ.shape[1] - max(0, ox))
            dst_x = slice(max(0, ox), occ.shape[1] - max(0, -ox))
            shifted[dst_y, dst_x] = occ[src_y, src_x]
            out |= shifted
    return out


def _octile(dx: int, dy: int) -> float:
    lo, hi = sorted((abs(dx), abs(dy)))
    return hi + (SQRT2 - 1.0) * lo


_MOVES = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2)]


def astar_cells(blocked: np.ndarray, start: tuple[int, int],
                goal: tuple[int, int]) -> tuple[list[tuple[int, int]], float] | None:
    """A* over an 8-connected cell grid; returns (cells, cost) or None.

    Diagonal moves may not cut corners. Ties break on lower f, then lower
    heuristic, then row-major cell order, so plans are reproducible.
    """
    ny, nx = blocked.shape

    def free(ix: int, iy: int) -> bool:
        return 0 <= ix < nx and 0 <= iy < ny and not blocked[iy, ix]

    start_idx = start[1] * nx + start[0]
    g_cost = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = _octile(goal[0] - start[0], goal[1] - start[1])
    frontier: list[tuple[float, float, int, tuple[int, int]]] = [(h0, h0, start_idx, start)]
    closed: set[tuple[int, int]] = set()
    while frontier:
        _, _, _, cell = heapq.heappop(frontier)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal:
            cells = [cell]
            while cell in parent:
                cell = parent[cell]
                cells.append(cell)
            cells.reverse()
            return cells, g_cost[goal]
        cx, cy = cell
        for mx, my, move_cost in _MOVES:
            nxx, nyy = cx + mx, cy + my
            if not free(nxx, nyy):
                continue
            if mx != 0 and my != 0 and not (free(cx + mx, cy) and free(cx, cy + my)):
                continue
            tentative = g_cost[cell] + move_cost
            neighbor = (nxx, nyy)
            if tentative < g_cost.get(neighbor, math.inf) - 1e-12:
                g_cost[neighbor] = tentative
                parent[neighbor] = cell
                h = _octile(goal[0] - nxx, goal[1] - nyy)
                heapq.heappush(frontier, (tentative + h, h, nyy * nx + nxx, neighbor))
    return None


def plan_path(grid: OccupancyGrid, robot_radius: float, start: Pose2D,
              goal: Goal) -> Path:
    """Shortest 8-connected path from start to goal on the inflated grid."""
    blocked = inflate(grid, robot_radius)
    goal_cell = grid.cell_of(goal.x, goal.y)
    if not grid.in_bounds(*goal_cell) or blocked[goal_cell[1], goal_cell[0]]:
        raise GoalInObstacle(f"goal ({goal.x:.2f}, {goal.y:.2f}) inside inflated obstacle")
    start_cell = _nearest_free_cell(grid, blocked, start.x, start.y)
    if start_cell is None:
        raise NoPath("start has no nearby inflated-free cell")
    result = astar_cells(blocked, start_cell, goal_cell)
    if result is None:
        raise NoPath(f"no route to ({goal.x:.2f}, {goal.y:.2f})")
    cells, cost = result
    waypoints = [grid.cell_center(ix, iy) for ix, iy in cells]
    return Path(waypoints=waypoints, total_length=cost * grid.resolution)


def _nearest_free_cell(grid: OccupancyGrid, blocked: np.ndarray,
                       x: float, y: float, max_cells: int = 6) -> tuple[int, int] | None:
    """The start cell, or the closest inflated-free cell within a few cells.

    A fused-pose jump can momentarily leave the estimate inside the
    inflated band; snapping keeps replanning alive instead of failing.
    """
    ix0, iy0 = grid.cell_of(x, y)
    if grid.in_bounds(ix0, iy0) and not blocked[iy0, ix0]:
        return ix0, iy0
    best = None
    best_key = None
    for radius in range(1, max_cells + 1):
        for oy in range(-radius, radius + 1):
            for ox in range(-radius, radius + 1):
                if max(abs(ox), abs(oy)) != radius:
                    continue
                ix, iy = ix0 + ox, iy0 + oy
                if grid.in_bounds(ix, iy) and not blocked[iy, ix]:
                    key = (ox * ox + oy * oy, iy * grid.width + ix)
                    if best_key is None or key < best_key:
                        best_key = key
                        best = (ix, iy)
        if best is not None:
            return best
    return None


def steer(pose: Pose2D, path: Path, lookahead: float = DEFAULT_LOOKAHEAD_M,
          v_max: float = DEFAULT_V_MAX, omega_max: float = DEFAULT_OMEGA_MAX,
          goal_tolerance: float = DEFAULT_GOAL_TOLERANCE_M) -> tuple[float, float] | None:
    """Pure-pursuit command toward the path; None once the goal is reached."""
    if not path.waypoints:
        raise ValueError("path is empty")
    end_x, end_y = path.end()
    if math.hypot(end_x - pose.x, end_y - pose.y) <= goal_tolerance:
        return None
    points = np.asarray(path.waypoints)
    d_sq = (points[:, 0] - pose.x) ** 2 + (points[:, 1] - pose.y) ** 2
    nearest = int(np.argmin(d_sq))
    target = path.waypoints[-1]
    for i in range(nearest, len(path.waypoints)):
        wx, wy = path.waypoints[i]
        if math.hypot(wx - pose.x, wy - pose.y) >= lookahead:
            target = (wx, wy)
            break
    alpha = wrap_angle(math.atan2(target[1] - pose.y, target[0] - pose.x) - pose.theta)
    dist = math.hypot(target[0] - pose.x, target[1] - pose.y)
    v = v_max
    if abs(alpha) > math.pi / 4:
        v = v_max * (math.pi / 4) / abs(alpha)
    if dist < 1e-9:
        return v, 0.0
    curvature = 2.0 * math.sin(alpha) / dist
    omega = max(-omega_max, min(omega_max, v * curvature))
    return v, omega


def path_deviation(pose: Pose2D, path: Path) -> float:
    """Distance from the pose to the nearest path waypoint."""
    points = np.asarray(path.waypoints)
    d_sq = (points[:, 0] - pose.x) ** 2 + (points[:, 1] - pose.y) ** 2
    return float(np.sqrt(np.min(d_sq)))
