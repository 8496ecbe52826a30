"""Fleet host: robot sessions over TCP frames, operator console over
HTTP/WebSocket, fleet state tracking, and the metrics CSV log.

Message handling is a pure-ish state machine (`FleetHost.handle_session_message`)
so the protocol behavior is testable without sockets; the asyncio servers
are thin transport shims around it.
"""

from __future__ import annotations

import asyncio
import collections
import json
import math
import os
from dataclasses import dataclass, field

from . import wire
from .wire import WireMessage

DEFAULT_ROBOT_PORT = 7801
DEFAULT_CONSOLE_PORT = 7800
FIX_RATE_WINDOW_MS = 5000
TRAJECTORY_RING = 10000

METRICS_COLUMNS = ["t_ms", "robot_id", "true_x", "true_y", "est_x", "est_y",
                   "err_m", "in_coverage", "fix_rate", "boundary_peak_m"]

DEST_REPLY = "reply"
DEST_CONSOLE = "console"


def _fmt(value: float) -> str:
    return f"{value:.6f}"


@dataclass
class RobotRecord:
    robot_id: str
    last_seq: int = -1
    connected: bool = True
    t_ms: int = 0
    est_xy_theta: tuple[float, float, float] | None = None
    cov: list | None = None
    true_xy_theta: tuple[float, float, float] | None = None
    in_coverage: bool = False
    goal_status: dict = field(default_factory=dict)
    fix_times_ms: collections.deque = field(default_factory=collections.deque)
    trajectory: collections.deque = field(
        default_factory=lambda: collections.deque(maxlen=TRAJECTORY_RING))
    stale_drops: int = 0

    def fix_rate(self, now_ms: int) -> float:
        while self.fix_times_ms and self.fix_times_ms[0] < now_ms - FIX_RATE_WINDOW_MS:
            self.fix_times_ms.popleft()
        return len(self.fix_times_ms) / (FIX_RATE_WINDOW_MS / 1000.0)


@dataclass
class SessionState:
    """Per-connection state; a connection speaks for at most one robot."""

    robot_id: str | None = None
    out_seq: int = 0

    def next_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq


class MetricsLog:
    """Append-only CSV with one row per POSE update."""

    def __init__(self, path: str | None):
        self.path = path
        self._fh = None
        if path:
            new = not os.path.exists(path) or os.path.getsize(path) == 0
            self._fh = open(path, "a", encoding="utf-8")
            if new:
                self._fh.write(",".join(METRICS_COLUMNS) + "\n")

    def write_row(self, t_ms: int, robot_id: str, true_xy: tuple[float, float],
                  est_xy: tuple[float, float], in_coverage: bool,
                  fix_rate: float, boundary_peak_m: float | None) -> None:
        if self._fh is None:
            return
        err = math.hypot(true_xy[0] - est_xy[0], true_xy[1] - est_xy[1])
        peak = _fmt(boundary_peak_m) if boundary_peak_m is not None else ""
        row = [str(t_ms), robot_id, _fmt(true_xy[0]), _fmt(true_xy[1]),
               _fmt(est_xy[0]), _fmt(est_xy[1]), _fmt(err),
               str(int(in_coverage)), _fmt(fix_rate), peak]
        self._fh.write(",".join(row) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
            self._fh = None


class FleetHost:
    """Protocol brain: consumes decoded messages, owns FleetState."""

    def __init__(self, map_payload: dict | None = None,
                 metrics: MetricsLog | None = None):
        self.robots: dict[str, RobotRecord] = {}
        self.map_payload = map_payload or {}
        self.metrics = metrics or MetricsLog(None)
        self.boundary_peak_m: float | None = None
        self.unknown_goal_drops = 0

    # -- session protocol ---------------------------------------------------

    def handle_session_message(self, session: SessionState,
                               msg: WireMessage) -> list[tuple[str, WireMessage]]:
        """Apply one robot-connection message; returns (destination, message)s.

        Destinations are DEST_REPLY (same connection), DEST_CONSOLE
        (broadcast to every console), or a robot id.
        """
        if msg.type == wire.MSG_HELLO:
            return self._handle_hello(session, msg)
        if session.robot_id is None:
            return [(DEST_REPLY, self._error(session, msg.robot_id,
                                             "not_registered",
                                             f"{msg.type} before HELLO"))]
        record = self.robots[session.robot_id]
        if msg.type == wire.MSG_MAP_REQ:
            return [(DEST_REPLY, self._map_message(session, session.robot_id))]
        if msg.seq <= record.last_seq:
            record.stale_drops += 1
            return []
        record.last_seq = msg.seq
        if msg.type == wire.MSG_POSE:
            return self._handle_pose(record, msg)
        if msg.type == wire.MSG_VLP_FIX:
            record.fix_times_ms.append(msg.t_ms)
            record.t_ms = max(record.t_ms, msg.t_ms)
            return [(DEST_CONSOLE, msg)]
        if msg.type == wire.MSG_METRIC:
            if msg.payload["name"] == "boundary_peak_m":
                self.boundary_peak_m = float(msg.payload["value"])
            return [(DEST_CONSOLE, msg)]
        if msg.type == wire.MSG_GOAL_STATUS:
            record.goal_status = dict(msg.payload)
            return [(DEST_CONSOLE, msg)]
        if msg.type == wire.MSG_ERROR:
            return [(DEST_CONSOLE, msg)]
        return [(DEST_REPLY, self._error(session, session.robot_id, "unexpected_type",
                                         f"robots do not send {msg.type}"))]

    def _handle_hello(self, session: SessionState,
                      msg: WireMessage) -> list[tuple[str, WireMessage]]:
        if not msg.robot_id:
            return [(DEST_REPLY, self._error(session, "", "bad_hello",
                                             "HELLO requires a robot_id"))]
        session.robot_id = msg.robot_id
        record = self.robots.get(msg.robot_id)
        if record is None:
            record = RobotRecord(robot_id=msg.robot_id)
            self.robots[msg.robot_id] = record
        else:
            # Reconnection: sequence numbering restarts per connection,
            # trajectory history survives.
            record.last_seq = -1
            record.connected = True
        record.last_seq = max(record.last_seq, msg.seq)
        return [(DEST_REPLY, self._map_message(session, msg.robot_id))]

    def _handle_pose(self, record: RobotRecord,
                     msg: WireMessage) -> list[tuple[str, WireMessage]]:
        p = msg.payload
        record.t_ms = msg.t_ms
        record.est_xy_theta = (float(p["x"]), float(p["y"]), float(p["theta"]))
        record.cov = p["cov"]
        record.in_coverage = bool(p["in_coverage"])
        record.trajectory.append((msg.t_ms, float(p["x"]), float(p["y"])))
        if "true_x" in p and "true_y" in p:
            record.true_xy_theta = (float(p["true_x"]), float(p["true_y"]),
                                    float(p.get("true_theta", 0.0)))
            self.metrics.write_row(
                msg.t_ms, record.robot_id,
                (record.true_xy_theta[0], record.true_xy_theta[1]),
                (record.est_xy_theta[0], record.est_xy_theta[1]),
                record.in_coverage, record.fix_rate(msg.t_ms),
                self.boundary_peak_m)
        return [(DEST_CONSOLE, msg)]

    def handle_disconnect(self, session: SessionState) -> None:
        if session.robot_id and session.robot_id in self.robots:
            self.robots[session.robot_id].connected = False

    # -- console ------------------------------------------------------------

    def handle_console_message(self, session: SessionState,
                               msg: WireMessage) -> list[tuple[str, WireMessage]]:
        """Console messages: GOAL routed to the addressed robot."""
        if msg.type != wire.MSG_GOAL:
            return [(DEST_REPLY, self._error(session, msg.robot_id, "unexpected_type",
                                             f"console sends GOAL, not {msg.type}"))]
        if msg.robot_id not in self.robots or not self.robots[msg.robot_id].connected:
            self.unknown_goal_drops += 1
            return [(DEST_REPLY, self._error(session, msg.robot_id, "unknown_robot",
                                             f"no connected robot {msg.robot_id!r}"))]
        return [(msg.robot_id, msg)]

    def console_snapshot(self, session: SessionState) -> list[WireMessage]:
        """MAP plus the latest pose of every robot, for a console that just joined."""
        messages = [self._map_message(session, "")]
        for robot_id in sorted(self.robots):
            record = self.robots[robot_id]
            if record.est_xy_theta is None:
                continue
            x, y, theta = record.est_xy_theta
            payload = {"x": x, "y": y, "theta": theta,
                       "cov": record.cov or [0.0] * 9,
                       "in_coverage": record.in_coverage}
            if record.true_xy_theta is not None:
                payload["true_x"] = record.true_xy_theta[0]
                payload["true_y"] = record.true_xy_theta[1]
                payload["true_theta"] = record.true_xy_theta[2]
            messages.append(WireMessage(type=wire.MSG_POSE, robot_id=robot_id,
                                        seq=session.next_seq(), t_ms=record.t_ms,
                                        payload=payload))
        return messages

    # -- helpers ------------------------------------------------------------

    def _map_message(self, session: SessionState, robot_id: str) -> WireMessage:
        return WireMessage(type=wire.MSG_MAP, robot_id=robot_id,
                           seq=session.next_seq(), t_ms=0, payload=self.map_payload)

    def _error(self, session: SessionState, robot_id: str, code: str,
               detail: str) -> WireMessage:
        return WireMessage(type=wire.MSG_ERROR, robot_id=robot_id,
                           seq=session.next_seq(), t_ms=0,
                           payload={"code": code, "detail": detail})


def build_map_payload(grid, led_map, camera) -> dict:
    """MAP payload: arena raster as '0'/'1' row strings plus the LED map."""
    from .sim_world import coverage_radius_min

    rows = ["".join("1" if cell else "0" for cell in row) for row in grid.occupied]
    beacons = led_map.to_dict()["beacons"]
    cov_r = 0.0
    if beacons:
        cov_r = coverage_radius_min(camera, led_map.beacons[0])
    return {
        "resolution_m": grid.resolution,
        "origin_x_m": grid.origin_x,
        "origin_y_m": grid.origin_y,
        "width": grid.width,
        "height": grid.height,
        "rows": rows,
        "beacons": beacons,
        "coverage_radius_m": cov_r,
    }


# ---------------------------------------------------------------------------
# asyncio transport
# ---------------------------------------------------------------------------


class HostServer:
    """TCP robot listener plus HTTP/WebSocket console server."""

    def __init__(self, host_brain: FleetHost, bind: str = "127.0.0.1",
                 robot_port: int = DEFAULT_ROBOT_PORT,
                 console_port: int = DEFAULT_CONSOLE_PORT,
                 static_dir: str | None = None):
        self.brain = host_brain
        self.bind = bind
        self.robot_port = robot_port
        self.console_port = console_port
        self.static_dir = static_dir
        self._robot_writers: dict[str, asyncio.StreamWriter] = {}
        self._consoles: set = set()
        self._servers: list = []

    async def start(self) -> None:
        tcp = await asyncio.start_server(self._serve_robot, self.bind, self.robot_port)
        self._servers.append(tcp)
        ws_server = await self._start_console()
        self._servers.append(ws_server)

    async def close(self) -> None:
        for server in self._servers:
            server.close()
            waiter = getattr(server, "wait_closed", None)
            if waiter is not None:
                await waiter()
        self.brain.metrics.close()

    # -- robot TCP ----------------------------------------------------------

    async def _serve_robot(self, reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> None:
        session = SessionState()
        assembler = wire.FrameAssembler()
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                try:
                    bodies = assembler.feed(data)
                except wire.PayloadTooLarge:
                    # Framing is unrecoverable once the prefix is insane.
                    break
                for body in bodies:
                    try:
                        msg = wire.decode_body(body)
                    except wire.WireError as err:
                        reply = self.brain._error(session, "", type(err).__name__,
                                                  str(err))
                        await self._send_frame(writer, reply)
                        continue
                    outbound = self.brain.handle_session_message(session, msg)
                    if session.robot_id is not None:
                        self._robot_writers[session.robot_id] = writer
                    await self._dispatch(outbound, writer)
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self.brain.handle_disconnect(session)
            if session.robot_id is not None:
                self._robot_writers.pop(session.robot_id, None)
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def _send_frame(self, writer: asyncio.StreamWriter, msg: WireMessage) -> None:
        writer.write(wire.encode_message(msg))
        await writer.drain()

    async def _dispatch(self, outbound: list[tuple[str, WireMessage]],
                        reply_writer: asyncio.StreamWriter | None) -> None:
        for dest, msg in outbound:
            if dest == DEST_REPLY:
                if reply_writer is not None:
                    await self._send_frame(reply_writer, msg)
            elif dest == DEST_CONSOLE:
                await self._broadcast_console(msg)
            else:
                writer = self._robot_writers.get(dest)
                if writer is not None:
                    await self._send_frame(writer, msg)

    # -- console HTTP + WebSocket --------------------------------------------

    async def _start_console(self):
        import http

        from websockets.asyncio.server import serve

        async def ws_handler(connection) -> None:
            session = SessionState()
            self._consoles.add(connection)
            try:
                for msg in self.brain.console_snapshot(session):
                    await connection.send(_ws_encode(msg))
                async for text in connection:
                    try:
                        msg = wire.decode_body(
                            text.encode("utf-8") if isinstance(text, str) else text)
                    except wire.WireError as err:
                        reply = self.brain._error(session, "", type(err).__name__,
                                                  str(err))
                        await connection.send(_ws_encode(reply))
                        continue
                    outbound = self.brain.handle_console_message(session, msg)
                    for dest, out in outbound:
                        if dest == DEST_REPLY:
                            await connection.send(_ws_encode(out))
                        elif dest == DEST_CONSOLE:
                            await self._broadcast_console(out)
                        else:
                            writer = self._robot_writers.get(dest)
                            if writer is not None:
                                await self._send_frame(writer, out)
            finally:
                self._consoles.discard(connection)

        def process_request(connection, request):
            if request.path == "/ws":
                return None
            return self._static_response(connection, request)

        return await serve(ws_handler, self.bind, self.console_port,
                           process_request=process_request)

    def _static_response(self, connection, request):
        import http

        path = request.path.split("?", 1)[0]
        if path == "/":
            path = "/index.html"
        body: bytes | None = None
        if self.static_dir is not None:
            root = os.path.abspath(self.static_dir)
            full = os.path.abspath(os.path.join(root, path.lstrip("/")))
            if full.startswith(root + os.sep) and os.path.isfile(full):
                with open(full, "rb") as fh:
                    body = fh.read()
        if body is None and path == "/index.html":
            body = FALLBACK_PAGE.encode("utf-8")
        if body is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        response = connection.respond(http.HTTPStatus.OK, "")
        del response.headers["Content-Type"]
        response.headers["Content-Type"] = _content_type(path)
        response.body = body
        return response

    async def _broadcast_console(self, msg: WireMessage) -> None:
        if not self._consoles:
            return
        text = _ws_encode(msg)
        for connection in list(self._consoles):
            try:
                await connection.send(text)
            except Exception:
                self._consoles.discard(connection)


def _ws_encode(msg: WireMessage) -> str:
    """WebSocket frames carry the same JSON object, no length prefix."""
    return json.dumps({"type": msg.type, "robot_id": msg.robot_id, "seq": msg.seq,
                       "t_ms": msg.t_ms, "payload": msg.payload},
                      separators=(",", ":"))


def _content_type(path: str) -> str:
    if path.endswith(".html"):
        return "text/html; charset=utf-8"
    if path.endswith(".js"):
        return "text/javascript; charset=utf-8"
    if path.endswith(".css"):
        return "text/css; charset=utf-8"
    if path.endswith(".json"):
        return "application/json"
    return "application/octet-stream"


FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>vlpfleet console</title></head>
<body><p>Console assets not built. Run the frontend build and pass
--static-dir, or connect to /ws directly.</p></body></html>
"""
