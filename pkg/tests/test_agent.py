import math

import numpy as np
import pytest

from vlpfleet.agent import GOAL_ACTIVE, GOAL_NO_PATH, GOAL_REACHED, RobotAgent
from vlpfleet.camera_synth import NoiseParams
from vlpfleet.geometry import Pose2D
from vlpfleet.navigation import Goal
from vlpfleet.pose_estimator import LedMap
from vlpfleet.sim_world import default_beacon


def make_agent(arena, camera, start=Pose2D(3.9, 2.4, 0.0), beacons=None, **kwargs):
    led_map = LedMap(beacons if beacons is not None else [default_beacon()])
    return RobotAgent("A", start, arena, camera, led_map,
                      frame_noise=NoiseParams(sigma_px=0.0), **kwargs)


def test_goal_lifecycle(arena, camera):
    agent = make_agent(arena, camera)
    agent.queue_goal(Goal(4.1, 2.4), after_s=1.0)
    decision = agent.decide_command(0.0)
    assert decision.goal_event is None  # not due yet
    assert decision.v == 0.0
    decision = agent.decide_command(1.0)
    assert decision.goal_event == GOAL_ACTIVE
    assert decision.v > 0.0


def test_unreachable_goal_reports_no_path(arena, camera):
    agent = make_agent(arena, camera)
    assert agent.set_goal(Goal(0.0, 0.0)) == GOAL_NO_PATH
    assert agent.active_goal is None


def test_arrival_emits_reached(arena, camera):
    agent = make_agent(arena, camera, start=Pose2D(4.05, 2.4, 0.0))
    agent.set_goal(Goal(4.08, 2.4))
    decision = agent.decide_command(0.0)
    assert decision.goal_event == GOAL_REACHED
    assert decision.v == 0.0


def test_decode_latency_one_tick(arena, camera, beacon):
    agent = make_agent(arena, camera, start=Pose2D(*beacon.position_xy, 0.0),
                       beacons=[beacon])
    truth = Pose2D(*beacon.position_xy, 0.0)
    covered, decoded, diag = agent.sense(truth, beacon, t=0.1, render_seed=1)
    assert covered and decoded and diag == "ok"
    assert agent.pending is not None
    assert agent.accepted_fixes == 0  # not yet fused
    decision = agent.decide_command(0.2)
    assert decision.fix_applied
    assert agent.accepted_fixes == 1
    assert agent.pending is None


def test_unknown_led_id_discarded_and_counted(arena, camera):
    from vlpfleet.beacon_codec import LedBeacon

    stranger = LedBeacon(id=200, position_xy=(4.16, 2.40))
    agent = make_agent(arena, camera, start=Pose2D(4.16, 2.40, 0.0))
    agent.sense(Pose2D(4.16, 2.40, 0.0), stranger, t=0.1, render_seed=1)
    decision = agent.decide_command(0.2)
    assert not decision.fix_applied
    assert agent.unknown_id_fixes == 1
    assert agent.accepted_fixes == 0


def test_no_decode_outside_coverage(arena, camera, beacon):
    agent = make_agent(arena, camera, start=Pose2D(1.0, 1.0, 0.0))
    covered, decoded, diag = agent.sense(Pose2D(1.0, 1.0, 0.0), beacon,
                                         t=0.1, render_seed=1)
    assert not covered and not decoded and diag is None


def test_est_start_offset_respected(arena, camera):
    agent = make_agent(arena, camera, start=Pose2D(3.9, 2.4, 0.0),
                       est_start=Pose2D(3.8, 2.35, 0.0), est_sigma_xy=0.07)
    assert agent.est_pose() == Pose2D(3.8, 2.35, 0.0)
    assert agent.state.cov[0, 0] == pytest.approx(0.07 ** 2)


def test_big_fix_jump_triggers_replan(arena, camera, beacon):
    # estimate 0.4 m off truth: the accepted fix jumps the pose beyond the
    # replan threshold and the path is rebuilt from the corrected estimate
    # lateral offset, so the corrected estimate lands off the planned line
    agent = make_agent(arena, camera, start=Pose2D(4.16, 2.40, 0.0),
                       beacons=[beacon],
                       est_start=Pose2D(4.16, 2.00, 0.0), est_sigma_xy=0.2)
    agent.set_goal(Goal(6.5, 2.0))
    path_before = agent.path
    agent.sense(Pose2D(4.16, 2.40, 0.0), beacon, t=0.1, render_seed=1)
    decision = agent.decide_command(0.2)
    assert decision.fix_applied and decision.fix_accepted
    assert decision.goal_event == GOAL_ACTIVE  # replanned
    assert agent.path is not path_before
    start_y = agent.path.waypoints[0][1]
    assert abs(start_y - 2.40) < 0.1
