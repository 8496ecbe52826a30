import asyncio
import csv
import io
import json

import numpy as np
import pytest

from vlpfleet import wire
from vlpfleet.host_service import (DEST_CONSOLE, DEST_REPLY, FleetHost, MetricsLog,
                                   SessionState, build_map_payload)
from vlpfleet.pose_estimator import LedMap
from vlpfleet.sim_world import default_arena, default_beacon
from vlpfleet.camera_synth import CameraModel
from vlpfleet.wire import WireMessage


def msg(mtype, robot_id="A", seq=1, t_ms=0, **payload):
    return WireMessage(type=mtype, robot_id=robot_id, seq=seq, t_ms=t_ms,
                       payload=payload)


def pose_payload(x=1.0, y=2.0, **extra):
    payload = {"x": x, "y": y, "theta": 0.0, "cov": [0.0] * 9, "in_coverage": False}
    payload.update(extra)
    return payload


@pytest.fixture()
def host():
    grid = default_arena()
    led_map = LedMap([default_beacon()])
    return FleetHost(map_payload=build_map_payload(grid, led_map, CameraModel()))


def test_hello_registers_and_replies_map(host):
    session = SessionState()
    out = host.handle_session_message(session, msg("HELLO"))
    assert [dest for dest, _ in out] == [DEST_REPLY]
    assert out[0][1].type == "MAP"
    assert "rows" in out[0][1].payload
    assert "A" in host.robots


def test_map_req_after_hello_returns_map(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    out = host.handle_session_message(session, msg("MAP_REQ", seq=2))
    assert out[0][0] == DEST_REPLY
    assert out[0][1].type == "MAP"


def test_pose_before_hello_is_error(host):
    session = SessionState()
    out = host.handle_session_message(session, msg("POSE", **pose_payload()))
    assert out[0][0] == DEST_REPLY
    assert out[0][1].type == "ERROR"
    assert out[0][1].payload["code"] == "not_registered"


def test_pose_updates_fleet(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    out = host.handle_session_message(session, msg("POSE", seq=2, t_ms=100,
                                                   **pose_payload(x=3.0, y=1.0)))
    assert out == [(DEST_CONSOLE, msg("POSE", seq=2, t_ms=100,
                                      **pose_payload(x=3.0, y=1.0)))]
    record = host.robots["A"]
    assert record.est_xy_theta[0] == 3.0
    assert len(record.trajectory) == 1


def test_stale_seq_dropped_and_counted(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    host.handle_session_message(session, msg("POSE", seq=5, **pose_payload(x=1.0)))
    out = host.handle_session_message(session, msg("POSE", seq=5, **pose_payload(x=9.0)))
    assert out == []
    out = host.handle_session_message(session, msg("POSE", seq=4, **pose_payload(x=9.0)))
    assert out == []
    assert host.robots["A"].stale_drops == 2
    assert host.robots["A"].est_xy_theta[0] == 1.0


def test_in_order_messages_all_update(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    for seq in range(2, 52):
        host.handle_session_message(session, msg("POSE", seq=seq, t_ms=seq,
                                                 **pose_payload(x=float(seq))))
    record = host.robots["A"]
    assert len(record.trajectory) == 50
    assert record.stale_drops == 0
    seqs = [t for t, _, _ in record.trajectory]
    assert seqs == sorted(seqs)


def test_goal_routing_to_robot(host):
    robot_session = SessionState()
    host.handle_session_message(robot_session, msg("HELLO"))
    console = SessionState()
    out = host.handle_console_message(console, msg("GOAL", x=1.0, y=2.0))
    assert out == [("A", msg("GOAL", x=1.0, y=2.0))]


def test_goal_to_unknown_robot_is_error(host):
    console = SessionState()
    out = host.handle_console_message(console, msg("GOAL", robot_id="Z", x=1.0, y=2.0))
    assert out[0][0] == DEST_REPLY
    assert out[0][1].type == "ERROR"
    assert out[0][1].payload["code"] == "unknown_robot"


def test_vlp_fix_rate_window(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    seq = 2
    for t_ms in range(0, 3000, 100):
        host.handle_session_message(session, msg("VLP_FIX", seq=seq, t_ms=t_ms,
                                                 x=0.0, y=0.0, sigma=0.01,
                                                 led_id=1, quality=1.0))
        seq += 1
    rate = host.robots["A"].fix_rate(3000)
    assert rate == pytest.approx(30 / 5.0)
    assert host.robots["A"].fix_rate(60_000) == 0.0


def test_metric_updates_boundary_peak(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    host.handle_session_message(session, msg("METRIC", seq=2,
                                             name="boundary_peak_m", value=0.012))
    assert host.boundary_peak_m == pytest.approx(0.012)


def test_disconnect_keeps_history(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    host.handle_session_message(session, msg("POSE", seq=2, **pose_payload()))
    host.handle_disconnect(session)
    assert not host.robots["A"].connected
    assert len(host.robots["A"].trajectory) == 1
    # reconnection with a fresh connection restarts seq
    session2 = SessionState()
    host.handle_session_message(session2, msg("HELLO", seq=1))
    out = host.handle_session_message(session2, msg("POSE", seq=2, **pose_payload(x=7.0)))
    assert out[0][0] == DEST_CONSOLE
    assert host.robots["A"].est_xy_theta[0] == 7.0
    assert len(host.robots["A"].trajectory) == 2


def test_metrics_csv_schema(tmp_path, host):
    path = str(tmp_path / "metrics.csv")
    host.metrics = MetricsLog(path)
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    host.handle_session_message(session, msg(
        "POSE", seq=2, t_ms=100,
        **pose_payload(x=1.0, y=2.0, true_x=1.01, true_y=2.02, true_theta=0.0)))
    host.metrics.close()
    with open(path) as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    assert reader.fieldnames == ["t_ms", "robot_id", "true_x", "true_y", "est_x",
                                 "est_y", "err_m", "in_coverage", "fix_rate",
                                 "boundary_peak_m"]
    assert len(rows) == 1
    assert rows[0]["robot_id"] == "A"
    assert float(rows[0]["err_m"]) == pytest.approx((0.01 ** 2 + 0.02 ** 2) ** 0.5, abs=1e-6)


def test_console_snapshot_contains_map_and_poses(host):
    session = SessionState()
    host.handle_session_message(session, msg("HELLO"))
    host.handle_session_message(session, msg("POSE", seq=2, **pose_payload()))
    console = SessionState()
    snapshot = host.console_snapshot(console)
    assert snapshot[0].type == "MAP"
    assert any(m.type == "POSE" and m.robot_id == "A" for m in snapshot)
