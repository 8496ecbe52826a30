"""Planar pose math shared by the simulator, estimator, and controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def rot2(theta: float, x: float, y: float) -> tuple[float, float]:
    """Rotate (x, y) by theta radians."""
    c, s = math.cos(theta), math.sin(theta)
    return c * x - s * y, s * x + c * y


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def transform_point(self, px: float, py: float) -> tuple[float, float]:
        """Map a point from this pose's local frame into the world frame."""
        wx, wy = rot2(self.theta, px, py)
        return self.x + wx, self.y + wy

    def inverse_transform_point(self, wx: float, wy: float) -> tuple[float, float]:
        """Map a world point into this pose's local frame."""
        return rot2(-self.theta, wx - self.x, wy - self.y)
