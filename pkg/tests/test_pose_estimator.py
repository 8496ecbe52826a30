import json
import math

import numpy as np
import pytest

from vlpfleet.beacon_codec import LedBeacon
from vlpfleet.camera_synth import CameraModel, project_led
from vlpfleet.geometry import Pose2D
from vlpfleet.pose_estimator import (LedMap, LedMapError, UnknownLedId, lookup_led,
                                     position_from_detection)
from vlpfleet.vlp_decoder import RoiCircle, VlpDetection

from conftest import pose_in_coverage


def detection_at(u, v, led_id=42):
    return VlpDetection(led_id=led_id, roi=RoiCircle(u, v, 50.0, 0, 0), quality=1.0)


def test_lookup_led(beacon):
    led_map = LedMap([beacon])
    assert lookup_led(beacon.id, led_map) is beacon
    with pytest.raises(UnknownLedId):
        lookup_led(9, led_map)


def test_duplicate_ids_rejected_at_load(beacon):
    with pytest.raises(LedMapError):
        LedMap([beacon, LedBeacon(id=beacon.id, position_xy=(1.0, 1.0))])


def test_map_json_roundtrip(tmp_path, beacon):
    led_map = LedMap([beacon])
    path = tmp_path / "leds.json"
    path.write_text(json.dumps(led_map.to_dict()))
    loaded = LedMap.from_json_file(str(path))
    assert len(loaded) == 1
    b = lookup_led(beacon.id, loaded)
    assert b.position_xy == beacon.position_xy
    assert b.chip_period == beacon.chip_period


def test_map_json_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"beacons": [{"id": 1, "x_m": 0.0}]}))
    with pytest.raises(LedMapError):
        LedMap.from_json_file(str(path))


def test_fix_at_principal_point_is_beacon_position(camera, beacon):
    det = detection_at(camera.cx, camera.cy, beacon.id)
    for heading in (0.0, 0.7, -2.1):
        fix = position_from_detection(det, camera, beacon, heading=heading)
        assert fix.x == pytest.approx(beacon.position_xy[0])
        assert fix.y == pytest.approx(beacon.position_xy[1])


def test_exact_inversion_of_projection(camera, beacon):
    rng = np.random.default_rng(3)
    for _ in range(100):
        pose = pose_in_coverage(rng, camera, beacon)
        u, v, _ = project_led(pose, camera, beacon)
        fix = position_from_detection(detection_at(u, v, beacon.id), camera, beacon,
                                      heading=pose.theta)
        assert math.hypot(fix.x - pose.x, fix.y - pose.y) < 1e-9


def test_heading_error_leak_magnitude(beacon):
    # +5 degrees heading error at 0.8 m horizontal offset:
    # error = 2 sin(2.5 deg) * 0.8 = 0.0698 m
    cam = CameraModel(fx=600.0, fy=600.0, cx=1000.0, cy=1000.0, width=2000, height=2000)
    pose = Pose2D(beacon.position_xy[0] - 0.8, beacon.position_xy[1], 0.0)
    u, v, _ = project_led(pose, cam, beacon)
    fix = position_from_detection(detection_at(u, v, beacon.id), cam, beacon,
                                  heading=math.radians(5.0))
    err = math.hypot(fix.x - pose.x, fix.y - pose.y)
    assert err == pytest.approx(2.0 * math.sin(math.radians(2.5)) * 0.8, abs=1e-6)


def test_fix_error_monotone_in_heading_error(camera, beacon):
    cam = CameraModel(fx=600.0, fy=600.0, cx=1000.0, cy=1000.0, width=2000, height=2000)
    pose = Pose2D(beacon.position_xy[0] - 0.6, beacon.position_xy[1] + 0.2, 0.0)
    u, v, _ = project_led(pose, cam, beacon)
    det = detection_at(u, v, beacon.id)
    errs = []
    for deg in (0.0, 1.0, 2.0, 5.0, 10.0, 20.0):
        fix = position_from_detection(det, cam, beacon, heading=math.radians(deg))
        errs.append(math.hypot(fix.x - pose.x, fix.y - pose.y))
    assert all(b >= a - 1e-12 for a, b in zip(errs, errs[1:]))


def test_sigma_positive_and_grows_with_offset(camera, beacon):
    near = position_from_detection(detection_at(camera.cx, camera.cy, beacon.id),
                                   camera, beacon, heading=0.0, heading_sigma=0.05)
    far = position_from_detection(detection_at(camera.cx + 200, camera.cy, beacon.id),
                                  camera, beacon, heading=0.0, heading_sigma=0.05)
    assert near.sigma > 0
    assert far.sigma > near.sigma
