import math

import numpy as np
import pytest

from vlpfleet.beacon_codec import LedBeacon, encode_id, level_at
from vlpfleet.camera_synth import (I_BG, I_OFF, I_ON, CameraModel, FrameImage,
                                   NoiseParams, project_led, render_frame)
from vlpfleet.geometry import Pose2D
from vlpfleet.pgm import read_pgm


def test_project_under_led_hits_principal_point(camera, beacon):
    pose = Pose2D(*beacon.position_xy, 0.0)
    u, v, radius = project_led(pose, camera, beacon)
    assert u == pytest.approx(camera.cx)
    assert v == pytest.approx(camera.cy)
    h = beacon.height - camera.mount_height
    assert radius == pytest.approx(camera.fx * 0.09 / h)


def test_project_radius_formula():
    # fx 600, diameter 0.18 m, relative height 2.0 m -> radius 27 px
    cam = CameraModel(fx=600.0, fy=600.0, cx=320, cy=240, width=640, height=480)
    beacon = LedBeacon(id=1, position_xy=(0.0, 0.0))
    _, _, radius = project_led(Pose2D(0.0, 0.0, 0.0), cam, beacon)
    assert radius == pytest.approx(600.0 * 0.09 / 2.0)
    assert radius == pytest.approx(27.0)


def test_project_far_away_absent(camera, beacon):
    assert project_led(Pose2D(beacon.position_xy[0] - 10.0, beacon.position_xy[1], 0.0),
                       camera, beacon) is None


def test_project_requires_led_above_camera(camera):
    low = LedBeacon(id=1, position_xy=(0.0, 0.0), height=0.1)
    with pytest.raises(ValueError):
        project_led(Pose2D(0.0, 0.0, 0.0), camera, low)


def test_render_background_only(camera, beacon):
    pose = Pose2D(0.5, 0.5, 0.0)
    frame = render_frame(pose, camera, beacon, t0=0.0, noise=NoiseParams(0.0), seed=0)
    assert frame.pixels.min() == I_BG and frame.pixels.max() == I_BG

    noisy = render_frame(pose, camera, beacon, t0=0.0, noise=NoiseParams(8.0), seed=0)
    # no pixel anywhere near the stripe intensities
    assert noisy.pixels.max() < I_ON - 100


def test_render_stripe_bands_match_chip_stream(camera, beacon):
    pose = Pose2D(*beacon.position_xy, 0.0)
    frame = render_frame(pose, camera, beacon, t0=0.0, noise=NoiseParams(0.0), seed=0)
    chips = encode_id(beacon.id)
    _, v_c, radius = project_led(pose, camera, beacon)
    v0 = int(math.ceil(v_c - radius))
    v1 = int(math.floor(v_c + radius))
    u_center = int(camera.cx)
    for row in range(v0 + 1, v1 - 1):
        level = level_at(chips, frame.row_time(row), beacon.chip_period)
        expected = I_ON if level else I_OFF
        assert frame.pixels[row, u_center] == expected


def test_render_band_height_matches_timing(camera, beacon):
    # vertical run lengths of the on/off pattern are multiples of
    # chip_period / row_readout_time, within one row
    pose = Pose2D(*beacon.position_xy, 0.0)
    frame = render_frame(pose, camera, beacon, t0=17e-6, noise=NoiseParams(0.0), seed=0)
    rows_per_chip = beacon.chip_period / camera.row_readout_time
    column = frame.pixels[:, int(camera.cx)]
    lit = np.where(column > I_BG)[0]
    values = column[lit[0] : lit[-1] + 1] == I_ON
    runs = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            runs.append(i - start)
            start = i
    for run in runs[1:-1]:
        nearest = round(run / rows_per_chip) * rows_per_chip
        assert abs(run - nearest) <= 1.0


def test_render_deterministic(camera, beacon):
    pose = Pose2D(4.0, 2.3, 0.4)
    one = render_frame(pose, camera, beacon, t0=0.5, noise=NoiseParams(8.0), seed=77)
    two = render_frame(pose, camera, beacon, t0=0.5, noise=NoiseParams(8.0), seed=77)
    assert np.array_equal(one.pixels, two.pixels)
    other = render_frame(pose, camera, beacon, t0=0.5, noise=NoiseParams(8.0), seed=78)
    assert not np.array_equal(one.pixels, other.pixels)


def test_pgm_roundtrip(tmp_path, camera, beacon):
    pose = Pose2D(*beacon.position_xy, 0.0)
    frame = render_frame(pose, camera, beacon, t0=0.0, noise=NoiseParams(8.0), seed=3)
    path = str(tmp_path / "frame.pgm")
    frame.save_pgm(path)
    loaded = read_pgm(path)
    assert np.array_equal(loaded, frame.pixels)
    reloaded = FrameImage.load_pgm(path)
    assert reloaded.width == camera.width and reloaded.height == camera.height


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(fx=-1.0)
    with pytest.raises(ValueError):
        CameraModel(cx=900.0)
    with pytest.raises(ValueError):
        CameraModel(row_readout_time=0.0)
