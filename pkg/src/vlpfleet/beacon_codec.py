"""Optical ID frame transmitted by a ceiling LED.

A frame is 24 on/off chips repeated forever: a `1 1 1 0 0 0` preamble,
the 8-bit LED ID as 16 Manchester chips (MSB first, bit 0 -> `0 1`,
bit 1 -> `1 0`), and one even-parity bit as a final Manchester pair.
Manchester runs never exceed two chips, so the preamble's run of three
is unambiguous at any cyclic offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

PREAMBLE = (1, 1, 1, 0, 0, 0)
FRAME_CHIPS = 24
ID_BITS = 8

DEFAULT_CHIP_PERIOD_S = 120e-6
DEFAULT_LED_HEIGHT_M = 2.20
DEFAULT_LED_DIAMETER_M = 0.18


class InvalidId(ValueError):
    """LED ID outside 0..255."""


class ChipDecodeError(ValueError):
    """Base class for chip-stream decode failures."""


class NoPreamble(ChipDecodeError):
    """No `1 1 1 0 0 0` preamble with a complete frame after it."""


class ManchesterViolation(ChipDecodeError):
    """A Manchester chip pair was `0 0` or `1 1`."""


class ParityMismatch(ChipDecodeError):
    """Decoded ID bits disagree with the transmitted parity bit."""


@dataclass(frozen=True)
class LedBeacon:
    """A ceiling LED: identity, world position, and modulation timing."""

    id: int
    position_xy: tuple[float, float]
    height: float = DEFAULT_LED_HEIGHT_M
    diameter: float = DEFAULT_LED_DIAMETER_M
    chip_period: float = DEFAULT_CHIP_PERIOD_S

    def __post_init__(self) -> None:
        if not 0 <= self.id <= 255:
            raise InvalidId(f"LED id {self.id} outside 0..255")
        if self.height <= 0 or self.diameter <= 0 or self.chip_period <= 0:
            raise ValueError("height, diameter and chip_period must be positive")


@dataclass(frozen=True)
class ChipFrame:
    chips: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.chips) != FRAME_CHIPS:
            raise ValueError(f"frame must have {FRAME_CHIPS} chips")
        if any(c not in (0, 1) for c in self.chips):
            raise ValueError("chips must be 0 or 1")


def _manchester_pair(bit: int) -> tuple[int, int]:
    return (1, 0) if bit else (0, 1)


def encode_id(led_id: int) -> ChipFrame:
    """Build the 24-chip frame for an 8-bit LED ID."""
    if not isinstance(led_id, int) or not 0 <= led_id <= 255:
        raise InvalidId(f"LED id {led_id!r} outside 0..255")
    chips: list[int] = list(PREAMBLE)
    parity = 0
    for shift in range(ID_BITS - 1, -1, -1):
        bit = (led_id >> shift) & 1
        parity ^= bit
        chips.extend(_manchester_pair(bit))
    chips.extend(_manchester_pair(parity))
    return ChipFrame(tuple(chips))


def _decode_at(chips: Sequence[int], start: int) -> int:
    """Decode the frame whose preamble begins at `start`; raises on failure."""
    payload = chips[start + len(PREAMBLE) : start + FRAME_CHIPS]
    bits: list[int] = []
    for i in range(0, len(payload), 2):
        pair = (payload[i], payload[i + 1])
        if pair == (0, 1):
            bits.append(0)
        elif pair == (1, 0):
            bits.append(1)
        else:
            raise ManchesterViolation(f"pair {pair} at chip offset {start + 6 + i}")
    led_id = 0
    for bit in bits[:ID_BITS]:
        led_id = (led_id << 1) | bit
    parity = bits[ID_BITS]
    expected = 0
    for bit in bits[:ID_BITS]:
        expected ^= bit
    if parity != expected:
        raise ParityMismatch(f"id {led_id} parity {parity}, expected {expected}")
    return led_id


def find_preambles(chips: Sequence[int]) -> list[int]:
    """Offsets where a preamble starts with a complete frame available."""
    starts = []
    limit = len(chips) - FRAME_CHIPS
    for i in range(limit + 1):
        if tuple(chips[i : i + len(PREAMBLE)]) == PREAMBLE:
            starts.append(i)
    return starts


def decode_copies(chips: Sequence[int]) -> tuple[list[int], int]:
    """Decode every complete frame copy in a chip stream.

    Returns (ids of copies that decoded cleanly, number of copies attempted).
    Raises NoPreamble when no complete copy exists at all.
    """
    starts = find_preambles(chips)
    if not starts:
        raise NoPreamble(f"no preamble in {len(chips)} chips")
    ids = []
    first_error: ChipDecodeError | None = None
    for start in starts:
        try:
            ids.append(_decode_at(chips, start))
        except ChipDecodeError as err:
            if first_error is None:
                first_error = err
    if not ids and first_error is not None:
        raise first_error
    return ids, len(starts)


def decode_chips(chips: Sequence[int]) -> int:
    """Recover the LED ID from a chip stream that may start mid-frame.

    Tries every complete frame copy and returns the first that passes the
    Manchester and parity checks.
    """
    if len(chips) < FRAME_CHIPS:
        raise NoPreamble(f"need at least {FRAME_CHIPS} chips, got {len(chips)}")
    ids, _ = decode_copies(chips)
    return ids[0]


def level_at(frame: ChipFrame, t: float, chip_period: float) -> int:
    """LED on/off level at time t; the frame repeats forever."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return frame.chips[int(math.floor(t / chip_period)) % FRAME_CHIPS]
