import numpy as np
import pytest

from vlpfleet.beacon_codec import LedBeacon
from vlpfleet.camera_synth import CameraModel
from vlpfleet.geometry import Pose2D, rot2
from vlpfleet.sim_world import default_arena


@pytest.fixture(scope="session")
def camera():
    return CameraModel()


@pytest.fixture(scope="session")
def beacon():
    return LedBeacon(id=42, position_xy=(4.16, 2.40))


@pytest.fixture(scope="session")
def arena():
    return default_arena()


def coverage_extents(camera, beacon):
    """Half-extents of the camera-frame offset rectangle where the LED disk
    projects fully inside the image."""
    h = beacon.height - camera.mount_height
    r_px = camera.fx * beacon.diameter / 2.0 / h
    ext_u = (min(camera.cx, camera.width - 1 - camera.cx) - r_px) * h / camera.fx
    ext_v = (min(camera.cy, camera.height - 1 - camera.cy) - r_px) * h / camera.fy
    return ext_u, ext_v


def pose_in_coverage(rng, camera, beacon, margin=0.99):
    """Uniformly sample a robot pose whose camera sees the full LED disk."""
    ext_u, ext_v = coverage_extents(camera, beacon)
    theta = float(rng.uniform(-np.pi, np.pi))
    ox = float(rng.uniform(-ext_u, ext_u)) * margin
    oy = float(rng.uniform(-ext_v, ext_v)) * margin
    wx, wy = rot2(theta, ox, oy)
    return Pose2D(beacon.position_xy[0] - wx, beacon.position_xy[1] - wy, theta)
