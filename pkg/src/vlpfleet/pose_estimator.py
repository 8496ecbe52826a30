"""Absolute position fixes from LED detections and the surveyed LED map.

The LED disk is rotationally symmetric, so a single detection carries no
bearing: the caller supplies the current heading estimate and the fix
uncertainty grows with both the pixel quantization floor and how much a
heading error would smear the camera-frame offset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .beacon_codec import DEFAULT_CHIP_PERIOD_S, LedBeacon
from .camera_synth import CameraModel
from .geometry import rot2
from .vlp_decoder import VlpDetection

PIXEL_SIGMA_PX = 2.0
HEADING_LEAK_GAIN = 1.0


class UnknownLedId(KeyError):
    """Decoded an ID that is not in this arena's LED map."""


class LedMapError(ValueError):
    """LED map file is malformed or violates its invariants."""


@dataclass(frozen=True)
class PositionFix:
    x: float
    y: float
    sigma: float
    t: float
    led_id: int


class LedMap:
    """Surveyed beacons keyed by ID."""

    def __init__(self, beacons: list[LedBeacon]):
        self._by_id: dict[int, LedBeacon] = {}
        for beacon in beacons:
            if beacon.id in self._by_id:
                raise LedMapError(f"duplicate LED id {beacon.id}")
            self._by_id[beacon.id] = beacon

    def __len__(self) -> int:
        return len(self._by_id)

    @property
    def beacons(self) -> list[LedBeacon]:
        return list(self._by_id.values())

    @classmethod
    def from_json_file(cls, path: str) -> "LedMap":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "LedMap":
        if not isinstance(raw, dict) or "beacons" not in raw:
            raise LedMapError("LED map must be an object with a 'beacons' list")
        beacons = []
        for entry in raw["beacons"]:
            try:
                beacons.append(LedBeacon(
                    id=int(entry["id"]),
                    position_xy=(float(entry["x_m"]), float(entry["y_m"])),
                    height=float(entry["height_m"]),
                    diameter=float(entry["diameter_m"]),
                    chip_period=float(entry.get("chip_period_s", DEFAULT_CHIP_PERIOD_S)),
                ))
            except (KeyError, TypeError, ValueError) as err:
                raise LedMapError(f"bad beacon entry {entry!r}: {err}") from err
        return cls(beacons)

    def to_dict(self) -> dict:
        return {"beacons": [
            {"id": b.id, "x_m": b.position_xy[0], "y_m": b.position_xy[1],
             "height_m": b.height, "diameter_m": b.diameter,
             "chip_period_s": b.chip_period}
            for b in self.beacons
        ]}


def lookup_led(led_id: int, led_map: LedMap) -> LedBeacon:
    beacon = led_map._by_id.get(led_id)
    if beacon is None:
        raise UnknownLedId(f"LED id {led_id} not in map")
    return beacon


def position_from_detection(det: VlpDetection, camera: CameraModel,
                            beacon: LedBeacon, heading: float, t: float = 0.0,
                            heading_sigma: float = 0.0) -> PositionFix:
    """Invert the projection: where must the robot be to see the LED here.

    Exact inverse of the pinhole projection when `heading` is the true
    heading; a heading error of delta leaks into the fix as roughly
    delta * |camera-frame offset|.
    """
    h = beacon.height - camera.mount_height
    if h <= 0:
        raise ValueError("beacon must be above the camera mount")
    ox = (det.roi.center_u - camera.cx) / camera.fx * h
    oy = (det.roi.center_v - camera.cy) / camera.fy * h
    wx, wy = rot2(heading + camera.mount_yaw, ox, oy)
    offset = math.hypot(ox, oy)
    sigma = (PIXEL_SIGMA_PX / camera.fx) * h + HEADING_LEAK_GAIN * abs(heading_sigma) * offset
    return PositionFix(
        x=beacon.position_xy[0] - wx,
        y=beacon.position_xy[1] - wy,
        sigma=sigma,
        t=t,
        led_id=det.led_id,
    )
