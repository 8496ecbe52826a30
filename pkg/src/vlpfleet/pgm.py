"""Binary PGM (P5, maxval 255) read/write for frames and arena maps."""

from __future__ import annotations

import numpy as np


class PgmError(ValueError):
    """File is not a parseable binary P5 image."""


def write_pgm(path: str, pixels: np.ndarray) -> None:
    """Write a (height, width) uint8 array as binary PGM."""
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("pixels must be a 2-D array")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: str) -> np.ndarray:
    """Read a binary PGM into a (height, width) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise PgmError(f"{path}: not a binary P5 file")
    # Header is magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comment lines allowed between them.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as err:
            raise PgmError(f"{path}: bad header token {data[start:pos]!r}") from err
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise PgmError(f"{path}: maxval {maxval} unsupported (want 255)")
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise PgmError(f"{path}: expected {width * height} pixel bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()
