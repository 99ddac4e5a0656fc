"""Self-calibration of scanned captures and the depth-disparity line.

A patch tracked across a circularly scanned frame sequence traces a circle
in shift space whose radius scales with the patch's disparity.  Fitting
that circle and the phase along it recovers the per-frame view offsets
without any hardware synchronization; the scan frequency itself is assumed
known from the drive signal.  A separate linear fit maps disparity to
metric depth from a handful of known-depth measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CalibrationError, DegenerateInputError, ValidationError
from .plenoptic import FrameSequence, ViewOffset


class PatchShift(NamedTuple):
    """Measured displacement of the tracked patch in one frame."""

    frame: int
    dx: float
    dy: float
    score: float


@dataclass
class ShiftTrack:
    """Template-matching track of one reference patch across frames."""

    reference_patch: tuple[int, int, int, int]  # (x, y, w, h)
    shifts: list[PatchShift]

    def as_arrays(self):
        dx = np.array([s.dx for s in self.shifts])
        dy = np.array([s.dy for s in self.shifts])
        return dx, dy

    @property
    def mean_score(self) -> float:
        return float(np.mean([s.score for s in self.shifts]))


class CircleFit(NamedTuple):
    center: tuple[float, float]
    radius: float
    rms_residual: float


@dataclass
class DepthDisparityFit:
    """Least-squares line mapping disparity (px) to depth (scene units)."""

    slope: float
    intercept: float
    residual_rms: float
    disparity_range: tuple[float, float]


@dataclass
class CalibrationResult:
    """Recovered scan geometry in shift space plus optional depth line."""

    circle_center: tuple[float, float]
    radius: float
    phase_offset: float
    per_frame_views: list[ViewOffset]
    direction: int = 1
    depth_fit: DepthDisparityFit | None = None


def _zncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalized cross-correlation of two equal-shape patches."""
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float((a * a).sum()) * float((b * b).sum()))
    if denom == 0.0:
        return 0.0
    return float((a * b).sum() / denom)


def _parabolic_offset(c_minus: float, c_0: float, c_plus: float) -> float:
    """Sub-sample peak offset from three samples around a maximum."""
    denom = c_minus - 2.0 * c_0 + c_plus
    if denom >= 0.0:
        return 0.0
    off = 0.5 * (c_minus - c_plus) / denom
    return float(np.clip(off, -0.5, 0.5))


def match_template(patch: np.ndarray, frame: np.ndarray,
                   search_radius: int) -> tuple[float, float, float]:
    """Locate ``patch`` inside ``frame`` by normalized cross-correlation.

    Integer offsets span a square of ``+- search_radius`` around the
    centered placement; partial overlaps are scored on the overlap region.
    The integer peak is refined per axis by a parabola over its neighbors.
    Returns ``(dx, dy, score)`` with the score taken at the integer peak.
    """
    patch = np.asarray(patch, dtype=np.float64)
    frame = np.asarray(frame, dtype=np.float64)
    ph, pw = patch.shape
    fh, fw = frame.shape
    if ph > fh or pw > fw:
        raise ValidationError(f"patch {patch.shape} larger than frame {frame.shape}")
    if float(patch.std()) == 0.0:
        raise DegenerateInputError("patch has zero variance, nothing to match")
    base_x = (fw - pw) // 2
    base_y = (fh - ph) // 2
    r = int(search_radius)
    size = 2 * r + 1
    scores = np.full((size, size), -np.inf)
    for jy, dy in enumerate(range(-r, r + 1)):
        y0 = base_y + dy
        fy0, fy1 = max(0, y0), min(fh, y0 + ph)
        if fy1 - fy0 < 2:
            continue
        for jx, dx in enumerate(range(-r, r + 1)):
            x0 = base_x + dx
            fx0, fx1 = max(0, x0), min(fw, x0 + pw)
            if fx1 - fx0 < 2:
                continue
            sub_p = patch[fy0 - y0:fy1 - y0, fx0 - x0:fx1 - x0]
            sub_f = frame[fy0:fy1, fx0:fx1]
            scores[jy, jx] = _zncc(sub_p, sub_f)
    peak = np.unravel_index(np.argmax(scores), scores.shape)
    score = float(scores[peak])
    if not np.isfinite(score):
        raise DegenerateInputError("no valid overlap inside the search window")
    py, px = peak
    dx = float(px - r)
    dy = float(py - r)
    if score < 1.0 - 1e-12:
        # a peak of exactly 1 is the global NCC maximum, nothing to refine
        if 0 < px < size - 1 and np.all(np.isfinite(scores[py, px - 1:px + 2])):
            dx += _parabolic_offset(scores[py, px - 1], scores[py, px], scores[py, px + 1])
        if 0 < py < size - 1 and np.all(np.isfinite(scores[py - 1:py + 2, px])):
            dy += _parabolic_offset(scores[py - 1, px], scores[py, px], scores[py + 1, px])
    return dx, dy, score


def track_patch(frames: FrameSequence, rect: tuple[int, int, int, int],
                search_radius: int, reference: int = 0) -> ShiftTrack:
    """Track one patch across every frame relative to a reference frame.

    ``rect`` is (x, y, w, h) in the reference frame; the search window is
    the rect inflated by the radius, which must stay inside the frame.
    """
    x, y, w, h = rect
    n, fh, fw = frames.frames.shape[:3]
    r = int(search_radius)
    if x - r < 0 or y - r < 0 or x + w + r > fw or y + h + r > fh:
        raise ValidationError(
            f"rect {rect} inflated by radius {r} leaves the {fw}x{fh} frame")
    patch = frames.frames[reference, y:y + h, x:x + w]
    shifts = []
    for k in range(n):
        window = frames.frames[k, y - r:y + h + r, x - r:x + w + r]
        dx, dy, score = match_template(patch, window, r)
        shifts.append(PatchShift(frame=k, dx=dx, dy=dy, score=score))
    return ShiftTrack(reference_patch=tuple(rect), shifts=shifts)


def fit_circle(points) -> CircleFit:
    """Algebraic least-squares circle through 2-D points.

    Solves ``x^2 + y^2 + D x + E y + F = 0`` linearly; needs at least three
    non-collinear points.  The residual is the RMS radial error.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegenerateInputError(f"circle fit needs >= 3 points, got {pts.shape}")
    x, y = pts[:, 0], pts[:, 1]
    m = np.column_stack([x, y, np.ones_like(x)])
    rhs = -(x * x + y * y)
    sol, _, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
    if rank < 3:
        raise DegenerateInputError("circle fit points are collinear or coincident")
    d_c, e_c, f_c = sol
    cx, cy = -d_c / 2.0, -e_c / 2.0
    r_sq = cx * cx + cy * cy - f_c
    if r_sq <= 0:
        raise DegenerateInputError("circle fit collapsed to zero radius")
    radius = math.sqrt(r_sq)
    radial = np.hypot(x - cx, y - cy) - radius
    return CircleFit(center=(float(cx), float(cy)), radius=float(radius),
                     rms_residual=float(np.sqrt(np.mean(radial * radial))))


def assign_views(track: ShiftTrack, fit: CircleFit, scan_frequency: float,
                 frame_times, residual_limit: float = 1.0) -> CalibrationResult:
    """Place every tracked frame on the fitted scan circle.

    With the drive frequency known, only the phase of the first frame is
    free.  The summed squared distance between measured shifts and circle
    points at phases ``2 pi f t_k + phi`` is minimized in closed form
    (both traversal directions are tried, the better one wins).  Views come
    back in shift-space pixels; their sign convention follows the tracked
    patch's disparity, so a patch behind the focus plane reports the phase
    shifted by pi.
    """
    if scan_frequency <= 0:
        raise DegenerateInputError(f"scan frequency must be positive, got {scan_frequency}")
    if fit.rms_residual > residual_limit:
        raise CalibrationError(
            f"circle fit residual {fit.rms_residual:.3f} px exceeds limit {residual_limit}")
    t = np.asarray(frame_times, dtype=np.float64)
    dx, dy = track.as_arrays()
    if t.shape[0] != dx.shape[0]:
        raise ValidationError("frame times do not match the track length")
    u = dx - fit.center[0]
    v = dy - fit.center[1]
    best = None
    for direction in (1, -1):
        theta = direction * 2.0 * np.pi * scan_frequency * t
        p = float(np.sum(u * np.sin(theta) + v * np.cos(theta)))
        q = float(np.sum(u * np.cos(theta) - v * np.sin(theta)))
        gain = math.hypot(p, q)
        if best is None or gain > best[0]:
            best = (gain, direction, math.atan2(q, p))
    _, direction, phi = best
    theta = direction * 2.0 * np.pi * scan_frequency * t + phi
    views = [ViewOffset(fit.radius * math.sin(a), fit.radius * math.cos(a)) for a in theta]
    phi = math.remainder(phi, 2.0 * math.pi)
    return CalibrationResult(
        circle_center=fit.center, radius=fit.radius, phase_offset=phi,
        per_frame_views=views, direction=direction,
    )


def fit_depth_disparity(pairs) -> DepthDisparityFit:
    """Ordinary least squares of depth on disparity.

    ``pairs`` iterates (disparity_px, depth_units); at least two distinct
    disparities are required.
    """
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise DegenerateInputError("need at least two (disparity, depth) pairs")
    disp, depth = arr[:, 0], arr[:, 1]
    if np.all(disp == disp[0]):
        raise DegenerateInputError("all disparities are equal, line is undetermined")
    slope, intercept = np.polyfit(disp, depth, 1)
    residual = depth - (slope * disp + intercept)
    return DepthDisparityFit(
        slope=float(slope), intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(residual * residual))),
        disparity_range=(float(disp.min()), float(disp.max())),
    )
