"""LED ID and ROI recovery from a rolling-shutter grayscale frame.

Pipeline: threshold and vertically bridge the striped disk into one bright
component (detect_roi), reduce the ROI to one bit per row (binarize_rows),
collapse row runs into chips (chips_from_rows), then Manchester-decode
every complete frame copy and require the copies to agree (decode_frame).
All failures collapse to "no detection" with a diagnostic code; a wrong ID
must never come out.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import beacon_codec
from .camera_synth import I_BG, FrameImage

ROI_THRESHOLD = I_BG + 40
# Longest dark run inside the disk is 4 chips (preamble zeros + a Manchester
# zero) = 8 rows at default timing; 10 gives margin without bridging to
# unrelated blobs.
ROI_CLOSE_GAP_ROWS = 10
ROI_ASPECT_RANGE = (0.6, 1.67)
ROI_MIN_AREA_RATIO = 0.5
ROI_MIN_BOX_HEIGHT = 96
MIN_CHORD_PX = 3
MIN_USABLE_ROWS = 48
DEGENERATE_SPREAD = 60.0

DIAG_OK = "ok"
DIAG_NO_ROI = "no_roi"
DIAG_DEGENERATE_ROI = "degenerate_roi"
DIAG_UNSTABLE_CHIPS = "unstable_chips"
DIAG_NO_PREAMBLE = "no_preamble"
DIAG_MANCHESTER = "manchester_violation"
DIAG_PARITY = "parity_mismatch"
DIAG_DISAGREEMENT = "id_disagreement"


class DegenerateRoi(ValueError):
    """ROI has too few usable rows to hold a chip frame."""


class UnstableChipEstimate(ValueError):
    """Stripe run lengths do not agree on a single rows-per-chip."""


@dataclass(frozen=True)
class RoiCircle:
    center_u: float
    center_v: float
    radius: float
    row_min: int
    row_max: int


@dataclass(frozen=True)
class VlpDetection:
    led_id: int
    roi: RoiCircle
    quality: float


@dataclass(frozen=True)
class DecodeReport:
    detection: VlpDetection | None
    diagnostic: str
    roi: RoiCircle | None = None


def _close_vertical_gaps(mask: np.ndarray, max_gap: int) -> np.ndarray:
    """Fill dark runs of at most max_gap rows between bright pixels per column."""
    height = mask.shape[0]
    rows = np.arange(height, dtype=float)[:, None]
    above = np.where(mask, rows, -np.inf)
    above = np.maximum.accumulate(above, axis=0)
    below = np.where(mask, rows, np.inf)
    below = np.minimum.accumulate(below[::-1], axis=0)[::-1]
    gap_ok = (below - above - 1) <= max_gap
    return mask | (~mask & np.isfinite(above) & np.isfinite(below) & gap_ok)


def _fit_center_v(rows: np.ndarray, counts: np.ndarray) -> float | None:
    """Estimate the disk's vertical center from per-row chord widths.

    For a circle, (chord/2)^2 + v^2 is linear in v with slope 2*v_c, so a
    least-squares line over the wide rows recovers the center without the
    stripe-pattern bias an intensity centroid picks up.
    """
    keep = counts >= 0.5 * counts.max()
    if keep.sum() < 8:
        return None
    v = rows[keep].astype(float)
    w = counts[keep].astype(float) / 2.0
    y = w * w + v * v
    design = np.stack([v, np.ones_like(v)], axis=1)
    try:
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    except np.linalg.LinAlgError:
        return None
    return float(coef[0] / 2.0)


def detect_roi(frame: FrameImage) -> RoiCircle | None:
    """Find the striped LED disk; None when nothing disk-like is bright.

    The aspect-ratio, fill-ratio, and minimum-height gates reject ambient
    blobs (windows, reflections) that are bright but not a stripeable disk.
    """
    mask = frame.pixels >= ROI_THRESHOLD
    bright_rows, bright_cols = np.nonzero(mask)
    if len(bright_rows) == 0:
        return None
    # Work on the bright-pixel bounding box only; everything dark outside it
    # is irrelevant to closing and labeling.
    pad = ROI_CLOSE_GAP_ROWS + 1
    r0 = max(0, int(bright_rows.min()) - pad)
    r1 = min(frame.height - 1, int(bright_rows.max()) + pad)
    c0 = max(0, int(bright_cols.min()) - 1)
    c1 = min(frame.width - 1, int(bright_cols.max()) + 1)
    sub_mask = mask[r0 : r1 + 1, c0 : c1 + 1]
    closed = _close_vertical_gaps(sub_mask, ROI_CLOSE_GAP_ROWS)
    labels, count = ndimage.label(closed)
    if count == 0:
        return None
    sizes = ndimage.sum_labels(closed, labels, index=np.arange(1, count + 1))
    component = labels == (int(np.argmax(sizes)) + 1)

    comp_rows, comp_cols = np.nonzero(component)
    comp_rows = comp_rows + r0
    comp_cols = comp_cols + c0
    row_min, row_max = int(comp_rows.min()), int(comp_rows.max())
    col_min, col_max = int(comp_cols.min()), int(comp_cols.max())
    box_h = row_max - row_min + 1
    box_w = col_max - col_min + 1
    aspect = box_h / box_w
    if not (ROI_ASPECT_RANGE[0] <= aspect <= ROI_ASPECT_RANGE[1]):
        return None
    if component.sum() < ROI_MIN_AREA_RATIO * box_h * box_w:
        return None
    if box_h < ROI_MIN_BOX_HEIGHT:
        return None

    bright = component & sub_mask
    b_rows, b_cols = np.nonzero(bright)
    b_rows = b_rows + r0
    b_cols = b_cols + c0
    weights = frame.pixels[b_rows, b_cols].astype(float)
    center_u = float(np.sum(b_cols * weights) / np.sum(weights))
    center_v = float(np.sum(b_rows * weights) / np.sum(weights))
    rows, counts = np.unique(b_rows, return_counts=True)
    fitted_v = _fit_center_v(rows, counts)
    if fitted_v is not None and row_min <= fitted_v <= row_max:
        center_v = fitted_v
    radius = (box_w + box_h) / 4.0
    return RoiCircle(center_u=center_u, center_v=center_v, radius=radius,
                     row_min=row_min, row_max=row_max)


def binarize_rows(frame: FrameImage, roi: RoiCircle) -> np.ndarray:
    """One bit per usable ROI row: 1 where the row's chord mean is bright.

    Rows whose chord through the ROI circle is narrower than MIN_CHORD_PX
    (the disk's tips) are skipped. A degenerate intensity spread (ambient
    blob, no stripes) yields all zeros, which downstream decoding rejects
    as having no preamble.
    """
    means = []
    for row in usable_rows(roi):
        half = np.sqrt(roi.radius ** 2 - (row - roi.center_v) ** 2)
        lo = max(0, int(np.ceil(roi.center_u - half)))
        hi = min(frame.width - 1, int(np.floor(roi.center_u + half)))
        means.append(float(frame.pixels[row, lo : hi + 1].mean()))
    if len(means) < MIN_USABLE_ROWS:
        raise DegenerateRoi(f"only {len(means)} usable rows, need {MIN_USABLE_ROWS}")
    means_arr = np.array(means)
    spread = means_arr.max() - means_arr.min()
    if spread < DEGENERATE_SPREAD:
        return np.zeros(len(means), dtype=int)
    threshold = (means_arr.max() + means_arr.min()) / 2.0
    return (means_arr >= threshold).astype(int)


def usable_rows(roi: RoiCircle) -> list[int]:
    """ROI rows whose chord is wide enough to average (skips the disk tips)."""
    rows = []
    for row in range(roi.row_min, roi.row_max + 1):
        dy_sq = (row - roi.center_v) ** 2
        if dy_sq >= roi.radius ** 2:
            continue
        if 2.0 * np.sqrt(roi.radius ** 2 - dy_sq) >= MIN_CHORD_PX:
            rows.append(row)
    return rows


def _run_lengths(bits: np.ndarray) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    start = 0
    for i in range(1, len(bits) + 1):
        if i == len(bits) or bits[i] != bits[start]:
            runs.append((int(bits[start]), i - start))
            start = i
    return runs


def chip_size_candidates(row_bits: np.ndarray) -> list[int]:
    """Plausible rows-per-chip values, coarsest first.

    Candidates are the divisors of the modal run length that explain every
    run away from the stream edges (the first and last chips are usually
    truncated by the ROI boundary, so a two-run margin at each end is left
    out of the fit). Some IDs produce runs that are all even multiples of
    the chip, which is why more than one candidate can survive; a wrong
    candidate can never decode to a full valid frame, so the caller simply
    tries them in order.
    """
    runs = _run_lengths(np.asarray(row_bits))
    if len(runs) < 3:
        return []
    fit_runs = runs[2:-2] if len(runs) >= 7 else runs[1:-1]
    counts = Counter(length for _, length in fit_runs)
    if not counts:
        return []
    candidate = min(sorted(counts), key=lambda length: (-counts[length], length))
    top = counts[candidate]
    for length, count in sorted(counts.items()):
        if length == candidate or count < 0.9 * top:
            continue
        if candidate > 1 and math.gcd(candidate, length) == 1:
            raise UnstableChipEstimate(
                f"tied modal run lengths {candidate} and {length} share no chip size")
    divisors = []
    for div in range(candidate, 0, -1):
        if candidate % div != 0:
            continue
        tol = max(0.3 * div, 0.5)
        ok = True
        for _, length in fit_runs:
            copies = round(length / div)
            if copies < 1 or abs(length - copies * div) > tol:
                ok = False
                break
        if ok:
            divisors.append(div)
    return divisors


def chips_from_rows(row_bits: np.ndarray, rows_per_chip: int | None = None) -> list[int]:
    """Collapse per-row stripe bits into the transmitted chip sequence.

    Rows-per-chip defaults to the coarsest run-length-consistent estimate
    from chip_size_candidates. Runs shorter than half a chip are treated
    as speckle and merged away; truncated edge chips round to zero copies
    and drop out.
    """
    if len(row_bits) < MIN_USABLE_ROWS:
        raise ValueError(f"need at least {MIN_USABLE_ROWS} rows")
    runs = _run_lengths(np.asarray(row_bits))
    if len(runs) < 3:
        # Constant or near-constant input: emit it as-is; the chip decoder
        # will report the missing preamble.
        return [level for level, _ in runs]
    if rows_per_chip is None:
        candidates = chip_size_candidates(row_bits)
        if not candidates:
            raise UnstableChipEstimate("no rows-per-chip explains the stripe runs")
        rows_per_chip = candidates[0]

    merged = _despeckle(runs, rows_per_chip)
    chips: list[int] = []
    for level, length in merged:
        chips.extend([level] * round(length / rows_per_chip))
    return chips


def _despeckle(runs: list[tuple[int, int]], rows_per_chip: int) -> list[tuple[int, int]]:
    """Merge interior runs shorter than half a chip into their neighbors."""
    runs = list(runs)
    changed = True
    while changed and len(runs) >= 3:
        changed = False
        for i in range(1, len(runs) - 1):
            level, length = runs[i]
            if length < rows_per_chip / 2.0:
                prev_level, prev_len = runs[i - 1]
                _, next_len = runs[i + 1]
                runs[i - 1 : i + 2] = [(prev_level, prev_len + length + next_len)]
                changed = True
                break
    return runs


_CHIP_ERROR_DIAGS = {
    beacon_codec.NoPreamble: DIAG_NO_PREAMBLE,
    beacon_codec.ManchesterViolation: DIAG_MANCHESTER,
    beacon_codec.ParityMismatch: DIAG_PARITY,
}


def decode_frame_report(frame: FrameImage) -> DecodeReport:
    """Full decode with a diagnostic code for every failure path.

    Every run-length-consistent rows-per-chip candidate is tried in turn;
    only the true chip size can yield a complete valid frame, so the first
    full decode wins and candidate misfires stay erasures.
    """
    roi = detect_roi(frame)
    if roi is None:
        return DecodeReport(None, DIAG_NO_ROI)
    try:
        row_bits = binarize_rows(frame, roi)
    except DegenerateRoi:
        return DecodeReport(None, DIAG_DEGENERATE_ROI, roi)
    try:
        candidates = chip_size_candidates(row_bits)
    except UnstableChipEstimate:
        return DecodeReport(None, DIAG_UNSTABLE_CHIPS, roi)
    if not candidates:
        if len(set(np.asarray(row_bits).tolist())) <= 1:
            return DecodeReport(None, DIAG_NO_PREAMBLE, roi)
        return DecodeReport(None, DIAG_UNSTABLE_CHIPS, roi)
    failure = DIAG_UNSTABLE_CHIPS
    for i, rows_per_chip in enumerate(candidates):
        chips = chips_from_rows(row_bits, rows_per_chip)
        try:
            ids, attempted = beacon_codec.decode_copies(chips)
        except tuple(_CHIP_ERROR_DIAGS) as err:
            if i == 0:
                failure = _CHIP_ERROR_DIAGS[type(err)]
            continue
        if len(set(ids)) != 1:
            if i == 0:
                failure = DIAG_DISAGREEMENT
            continue
        quality = len(ids) / attempted
        detection = VlpDetection(led_id=ids[0], roi=roi, quality=quality)
        return DecodeReport(detection, DIAG_OK, roi)
    return DecodeReport(None, failure, roi)


def decode_frame(frame: FrameImage) -> VlpDetection | None:
    """Recover the LED ID and ROI from a frame; None when undecodable."""
    return decode_frame_report(frame).detection
