"""Live mode: simulator, robot agents, fleet host, and console feed.

The agents talk to the host over real TCP connections with the wire
protocol, exactly as separate-process robots would; the simulator just
happens to run in the same event loop and paces itself to wall time.
"""

from __future__ import annotations

import asyncio

import numpy as np

from . import wire
from .agent import RobotAgent
from .fusion import ProcessNoise
from .camera_synth import NoiseParams
from .host_service import FleetHost, HostServer, MetricsLog, build_map_payload
from .navigation import Goal
from .scenario import ScenarioConfig, _pick_beacon
from .sim_world import (NoCommonBoundary, World, boundary_disagreement, raycast_scan)
from .wire import WireMessage


class AgentLink:
    """One robot's TCP client: HELLO on connect, GOALs in, telemetry out."""

    def __init__(self, agent: RobotAgent, host: str, port: int):
        self.agent = agent
        self.host = host
        self.port = port
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None
        self.seq = 0
        self.goal_events: list[tuple[str, Goal | None]] = []
        self._reader_task: asyncio.Task | None = None

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(self.host, self.port)
        await self.send(wire.MSG_HELLO, 0, {"version": "1"})
        self._reader_task = asyncio.create_task(self._read_loop())

    async def send(self, msg_type: str, t_ms: int, payload: dict) -> None:
        if self.writer is None:
            return
        msg = WireMessage(type=msg_type, robot_id=self.agent.robot_id,
                          seq=self.next_seq(), t_ms=t_ms, payload=payload)
        self.writer.write(wire.encode_message(msg))
        await self.writer.drain()

    async def _read_loop(self) -> None:
        assembler = wire.FrameAssembler()
        try:
            while True:
                data = await self.reader.read(4096)
                if not data:
                    return
                for body in assembler.feed(data):
                    try:
                        msg = wire.decode_body(body)
                    except wire.WireError:
                        continue
                    if msg.type == wire.MSG_GOAL:
                        goal = Goal(x=float(msg.payload["x"]),
                                    y=float(msg.payload["y"]),
                                    tolerance=float(msg.payload.get("tolerance", 0.05)))
                        status = self.agent.set_goal(goal)
                        self.goal_events.append((status, goal))
        except (ConnectionResetError, asyncio.CancelledError):
            return

    async def close(self) -> None:
        if self._reader_task is not None:
            self._reader_task.cancel()
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass


async def run_serve(config: ScenarioConfig, bind: str = "127.0.0.1",
                    robot_port: int = 7801, console_port: int = 7800,
                    static_dir: str | None = None,
                    metrics_path: str | None = "metrics.csv",
                    realtime: bool = True,
                    max_ticks: int | None = None) -> None:
    """Run host + sim until cancelled (or max_ticks, for tests)."""
    brain = FleetHost(map_payload=build_map_payload(config.grid, config.led_map,
                                                    config.camera),
                      metrics=MetricsLog(metrics_path))
    server = HostServer(brain, bind=bind, robot_port=robot_port,
                        console_port=console_port, static_dir=static_dir)
    await server.start()

    world = World(config.grid, seed=config.seed, sigma_v=config.sigma_v,
                  sigma_omega=config.sigma_omega)
    q = ProcessNoise(sigma_v=config.sigma_v, sigma_omega=config.sigma_omega,
                     inflation=config.q_inflation)
    links: dict[str, AgentLink] = {}
    robot_index: dict[str, int] = {}
    for idx, spec in enumerate(config.robots):
        world.add_robot(spec.robot_id, spec.start, v_scale=spec.v_scale,
                        omega_bias=spec.omega_bias)
        agent = RobotAgent(spec.robot_id, spec.start, config.grid, config.camera,
                           config.led_map, process_noise=q,
                           frame_noise=NoiseParams(sigma_px=config.sigma_px))
        for goal, after_s in spec.goals:
            agent.queue_goal(goal, after_s)
        link = AgentLink(agent, bind, robot_port)
        await link.connect()
        links[spec.robot_id] = link
        robot_index[spec.robot_id] = idx

    beacons = config.led_map.beacons
    order = sorted(links)
    dt = config.dt
    tick = 0
    try:
        while max_ticks is None or tick < max_ticks:
            t = tick * dt
            fix_reports: dict[str, tuple] = {}
            for rid in order:
                link = links[rid]
                decision = link.agent.decide_command(t)
                world.command(rid, decision.v, decision.omega)
                if decision.fix_applied and link.agent.last_fix is not None:
                    fix_reports[rid] = (link.agent.last_fix, link.agent.last_fix_quality)
                if decision.goal_event is not None:
                    payload = {"status": decision.goal_event}
                    if link.agent.active_goal is not None:
                        payload.update({"x": link.agent.active_goal.x,
                                        "y": link.agent.active_goal.y})
                    await link.send(wire.MSG_GOAL_STATUS, int(t * 1000), payload)
                for status, goal in link.goal_events:
                    payload = {"status": status}
                    if goal is not None:
                        payload.update({"x": goal.x, "y": goal.y})
                    await link.send(wire.MSG_GOAL_STATUS, int(t * 1000), payload)
                link.goal_events.clear()

            world.step(dt)
            t_now = t + dt
            t_ms = int(round(t_now * 1000))

            for rid in order:
                link = links[rid]
                link.agent.predict(dt)
                truth = world.robots[rid].pose
                covered, _decoded, _diag = link.agent.sense(
                    truth, _pick_beacon(truth, config.camera, beacons), t_now,
                    render_seed=[config.seed, robot_index[rid], tick])
                est = link.agent.est_pose()
                await link.send(wire.MSG_POSE, t_ms, {
                    "x": est.x, "y": est.y, "theta": est.theta,
                    "cov": [float(v) for v in np.asarray(link.agent.state.cov).ravel()],
                    "in_coverage": covered,
                    "true_x": truth.x, "true_y": truth.y, "true_theta": truth.theta,
                })
                if rid in fix_reports:
                    fix, quality = fix_reports[rid]
                    await link.send(wire.MSG_VLP_FIX, t_ms, {
                        "x": fix.x, "y": fix.y, "sigma": fix.sigma,
                        "led_id": int(fix.led_id), "quality": quality,
                    })

            if len(order) == 2:
                a, b = order
                try:
                    peak = boundary_disagreement(
                        raycast_scan(world.robots[a].pose, config.grid),
                        world.robots[a].pose, links[a].agent.est_pose(),
                        raycast_scan(world.robots[b].pose, config.grid),
                        world.robots[b].pose, links[b].agent.est_pose())
                    await links[a].send(wire.MSG_METRIC, t_ms,
                                        {"name": "boundary_peak_m", "value": peak})
                except NoCommonBoundary:
                    pass

            tick += 1
            if realtime:
                await asyncio.sleep(dt)
    finally:
        for link in links.values():
            await link.close()
        await server.close()
