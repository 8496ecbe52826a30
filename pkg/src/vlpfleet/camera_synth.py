"""Rolling-shutter frame synthesis of a modulated ceiling LED.

The upward-facing camera is a pinhole at mount_height looking straight up;
each image row is point-sampled at its own readout time, so the blinking
LED disk renders as horizontal stripes. This is both the simulator's
sensor feed and the golden oracle for the stripe decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beacon_codec import ChipFrame, LedBeacon, encode_id, level_at
from .geometry import Pose2D, rot2
from .pgm import read_pgm, write_pgm

I_BG = 10
I_ON = 230
I_OFF = 25
DEFAULT_NOISE_SIGMA_PX = 8.0

# fx is sized so the 0.18 m disk at a 2.0 m relative height spans ~119 rows:
# enough for a complete 48-row chip frame at every stripe phase, with margin
# over the ROI detector's 96-row minimum.
DEFAULT_FX = 1320.0
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_ROW_READOUT_S = 60e-6
DEFAULT_MOUNT_HEIGHT_M = 0.20


@dataclass(frozen=True)
class CameraModel:
    fx: float = DEFAULT_FX
    fy: float = DEFAULT_FX
    cx: float = DEFAULT_WIDTH / 2
    cy: float = DEFAULT_HEIGHT / 2
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    row_readout_time: float = DEFAULT_ROW_READOUT_S
    mount_height: float = DEFAULT_MOUNT_HEIGHT_M
    mount_yaw: float = 0.0

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.row_readout_time <= 0:
            raise ValueError("row_readout_time must be positive")


@dataclass(frozen=True)
class NoiseParams:
    sigma_px: float = DEFAULT_NOISE_SIGMA_PX


@dataclass(frozen=True)
class FrameImage:
    """8-bit grayscale rolling-shutter capture."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8
    t0: float
    row_readout_time: float

    def row_time(self, row: int) -> float:
        """Midpoint sample time of an image row."""
        return self.t0 + (row + 0.5) * self.row_readout_time

    def save_pgm(self, path: str) -> None:
        write_pgm(path, self.pixels)

    @classmethod
    def load_pgm(cls, path: str, t0: float = 0.0,
                 row_readout_time: float = DEFAULT_ROW_READOUT_S) -> "FrameImage":
        pixels = read_pgm(path)
        height, width = pixels.shape
        return cls(width=width, height=height, pixels=pixels, t0=t0,
                   row_readout_time=row_readout_time)


def project_led(robot_pose: Pose2D, camera: CameraModel,
                beacon: LedBeacon) -> tuple[float, float, float] | None:
    """Project the LED disk onto the image plane.

    Returns (u, v, radius) in pixels, or None when the disk is not fully
    inside the image (the center must be at least one radius from every
    border).
    """
    h = beacon.height - camera.mount_height
    if h <= 0:
        raise ValueError("beacon must be above the camera mount")
    dx = beacon.position_xy[0] - robot_pose.x
    dy = beacon.position_xy[1] - robot_pose.y
    ox, oy = rot2(-(robot_pose.theta + camera.mount_yaw), dx, dy)
    u = camera.cx + camera.fx * ox / h
    v = camera.cy + camera.fy * oy / h
    radius = camera.fx * (beacon.diameter / 2.0) / h
    if not (radius <= u <= camera.width - 1 - radius):
        return None
    if not (radius <= v <= camera.height - 1 - radius):
        return None
    return u, v, radius


def render_frame(robot_pose: Pose2D, camera: CameraModel, beacon: LedBeacon,
                 t0: float, noise: NoiseParams = NoiseParams(),
                 seed: int = 0) -> FrameImage:
    """Render one rolling-shutter frame of the scene at capture time t0.

    Rows are sampled at their midpoint readout times; pixels inside the
    projected disk take the LED's on/off intensity for that row, everything
    else is flat background. Additive Gaussian noise comes from a generator
    seeded with `seed`, so identical inputs give bit-identical images.
    """
    img = np.full((camera.height, camera.width), float(I_BG))
    projection = project_led(robot_pose, camera, beacon)
    if projection is not None:
        u_c, v_c, radius = projection
        frame = encode_id(beacon.id)
        row_lo = max(0, int(math.ceil(v_c - radius)))
        row_hi = min(camera.height - 1, int(math.floor(v_c + radius)))
        cols = np.arange(camera.width)
        for row in range(row_lo, row_hi + 1):
            half = radius * radius - (row - v_c) ** 2
            if half < 0:
                continue
            half = math.sqrt(half)
            t_row = t0 + (row + 0.5) * camera.row_readout_time
            level = level_at(frame, t_row, beacon.chip_period)
            value = I_ON if level else I_OFF
            inside = np.abs(cols - u_c) <= half
            img[row, inside] = value
    if noise.sigma_px > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, noise.sigma_px, size=img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return FrameImage(width=camera.width, height=camera.height, pixels=pixels,
                      t0=t0, row_readout_time=camera.row_readout_time)
