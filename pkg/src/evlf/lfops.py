"""Post-capture light field operations: refocus, focal stacks, depth from focus.

Refocusing is shift-and-add: view ``(s, t)`` is translated by
``-delta(d) * (s, t)`` with ``delta = A * (1/d - 1/d0)`` and the stack is
averaged.  Content at depth ``d`` aligns across views and stays sharp;
everything else blurs.  Sweeping ``d`` builds a focal stack, and each
pixel's sharpest slice gives its depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ValidationError
from .plenoptic import LightField, bilinear_sample, integrate_aperture, layer_disparity


@dataclass
class FocalStack:
    """Refocused slices at strictly increasing depths."""

    depths: np.ndarray
    slices: np.ndarray  # (S, H, W)

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float64)
        self.slices = np.asarray(self.slices, dtype=np.float64)
        if self.depths.shape[0] != self.slices.shape[0]:
            raise ValidationError("depth count does not match slice count")
        if np.any(np.diff(self.depths) <= 0):
            raise ValidationError("focal stack depths must be strictly increasing")

    def __len__(self):
        return self.depths.shape[0]


@dataclass
class DepthMap:
    """Per-pixel depth (NaN where invalid) with confidence in [0, 1]."""

    depth: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        if self.depth.shape != self.confidence.shape:
            raise ValidationError("depth and confidence shapes differ")

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


def shift_image(img: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Translate by a float offset with bilinear resampling, edge-clamped.

    A zero shift returns the input untouched so aligned paths stay bit-exact.
    """
    if dx == 0.0 and dy == 0.0:
        return img
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return bilinear_sample(img, xx - dx, yy - dy)


def refocus(lf: LightField, d: float, d0: float, A: float) -> np.ndarray:
    """Synthesize the photograph focused at depth ``d``."""
    if len(lf) == 0:
        raise ValidationError("light field has no views")
    delta = layer_disparity(d, d0, A)
    if delta == 0.0:
        return integrate_aperture(lf)
    shifted = np.stack([
        shift_image(lf.data[i], -delta * v.s, -delta * v.t)
        for i, v in enumerate(lf.views)
    ])
    return shifted.mean(axis=0)


def refocus_shifts(lf: LightField, shifts: np.ndarray) -> np.ndarray:
    """Shift-and-add with per-view pixel shifts measured directly.

    For unstructured captures where the view offsets are unknown: ``shifts``
    is (V, 2) as (dx, dy), the displacement content at the target plane
    shows in each view; every view is shifted back by it and averaged.
    """
    shifts = np.asarray(shifts, dtype=np.float64)
    if shifts.shape != (len(lf), 2):
        raise ValidationError(f"shifts must be ({len(lf)}, 2), got {shifts.shape}")
    shifted = np.stack([
        shift_image(lf.data[i], -shifts[i, 0], -shifts[i, 1])
        for i in range(len(lf))
    ])
    return shifted.mean(axis=0)


def focal_stack(lf: LightField, depths, d0: float, A: float) -> FocalStack:
    """Refocus at every depth in an ascending sweep."""
    depths = np.asarray(depths, dtype=np.float64)
    if np.any(np.diff(depths) <= 0):
        raise ValidationError("depths must be sorted ascending and distinct")
    return FocalStack(depths=depths,
                      slices=np.stack([refocus(lf, float(d), d0, A) for d in depths]))


def sharpness(img: np.ndarray, window: int = 7) -> np.ndarray:
    """Focus measure: local variance of the 3x3 Laplacian response.

    ``window`` is the odd side length of the variance neighborhood.
    Invariant to constant offsets; zero on constant images.
    """
    if window < 3 or window % 2 == 0:
        raise ValidationError(f"window must be odd and >= 3, got {window}")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=2)
    h, w = img.shape
    if window > min(h, w):
        raise ValidationError(f"window {window} larger than image {img.shape}")
    padded = np.pad(img, 1, mode="edge")
    lap = (padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2]
           + padded[1:-1, 2:] - 4.0 * img)
    mean = uniform_filter(lap, size=window, mode="nearest")
    mean_sq = uniform_filter(lap * lap, size=window, mode="nearest")
    return np.maximum(mean_sq - mean * mean, 0.0)


def depth_from_focus(stack: FocalStack, min_contrast: float = 1e-6,
                     window: int = 7) -> DepthMap:
    """Assign each pixel the depth of its sharpest focal slice.

    The argmax is refined by a three-point parabola over log depth (the
    calibrated regime is near-linear there); ties break toward the nearest
    slice.  Confidence is ``1 - second_best / best``; pixels whose best
    sharpness falls below ``min_contrast`` are marked invalid.
    """
    if len(stack) < 2:
        raise ValidationError("depth from focus needs at least two slices")
    scores = np.stack([sharpness(s, window) for s in stack.slices])
    best_idx = np.argmax(scores, axis=0)
    sorted_scores = np.sort(scores, axis=0)
    best = sorted_scores[-1]
    second = sorted_scores[-2]
    with np.errstate(invalid="ignore", divide="ignore"):
        confidence = np.where(best > 0, 1.0 - second / np.where(best > 0, best, 1.0), 0.0)
    confidence = np.clip(confidence, 0.0, 1.0)

    log_d = np.log(stack.depths)
    depth = stack.depths[best_idx].astype(np.float64)
    interior = (best_idx > 0) & (best_idx < len(stack) - 1)
    if np.any(interior):
        iy, ix = np.nonzero(interior)
        i = best_idx[interior]
        x1, x2, x3 = log_d[i - 1], log_d[i], log_d[i + 1]
        y1 = scores[i - 1, iy, ix]
        y2 = scores[i, iy, ix]
        y3 = scores[i + 1, iy, ix]
        denom = (x2 - x1) * (y2 - y3) - (x2 - x3) * (y2 - y1)
        num = (x2 - x1) ** 2 * (y2 - y3) - (x2 - x3) ** 2 * (y2 - y1)
        with np.errstate(invalid="ignore", divide="ignore"):
            vertex = x2 - 0.5 * num / denom
        # denom > 0 means the three points bend downward (a genuine peak)
        vertex = np.where(denom > 0, np.clip(vertex, x1, x3), x2)
        depth[iy, ix] = np.exp(vertex)

    invalid = best < min_contrast
    depth[invalid] = np.nan
    confidence[invalid] = 0.0
    return DepthMap(depth=depth, confidence=confidence)


def disparity_to_depth(disparity: float, fit, disparity_range=None):
    """Convert a measured disparity to depth along the calibrated line.

    ``fit`` is ``(slope, intercept)`` or an object with those attributes.
    Returns ``(depth, in_range)``; ``in_range`` is False when the disparity
    falls outside the calibrated interval (extrapolation is untrusted).
    """
    slope = getattr(fit, "slope", None)
    if slope is None:
        slope, intercept = fit[0], fit[1]
    else:
        intercept = fit.intercept
    if disparity_range is None:
        disparity_range = getattr(fit, "disparity_range", None)
    depth = slope * disparity + intercept
    if disparity_range is None:
        return depth, True
    lo, hi = disparity_range
    return depth, bool(lo <= disparity <= hi)
