"""Layered plenoptic scene model and light field rendering.

A scene is an ordered stack of fronto-parallel textured layers composited
over an opaque background.  Viewing the scene from an off-axis aperture
position shifts each layer in the image plane by its disparity, which is
proportional to ``1/depth - 1/focus_distance``; layers sitting exactly on
the focus plane are view-invariant.  Rendering a list of aperture offsets
yields a discretized light field; averaging the views synthesizes the
photograph a full-aperture camera would record.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ValidationError


class ViewOffset(NamedTuple):
    """Aperture-plane coordinates of a single view, dimensionless units."""

    s: float
    t: float


def layer_disparity(layer_depth: float, d0: float, A: float) -> float:
    """Image shift in pixels per unit aperture offset for a layer at ``layer_depth``.

    Thin-lens relation: ``delta = A * (1/layer_depth - 1/d0)``.  Zero exactly
    on the focus plane, positive in front of it, negative behind it.
    """
    if layer_depth <= 0:
        raise ValidationError(f"layer depth must be positive, got {layer_depth}")
    if d0 <= 0:
        raise ValidationError(f"focus distance must be positive, got {d0}")
    return A * (1.0 / layer_depth - 1.0 / d0)


@dataclass
class SceneLayer:
    """One fronto-parallel textured layer.

    ``texture`` is per-pixel radiance, (H, W) or (H, W, 3), finite and >= 0.
    ``alpha`` is coverage in [0, 1] with the same (H, W).  Motion is a
    constant ``velocity`` in pixels/second plus an optional rotation
    ``angular_velocity`` in radians/second about ``rotation_center``
    (pixel coordinates; defaults to the texture center).
    """

    texture: np.ndarray
    alpha: np.ndarray
    depth: float
    velocity: tuple[float, float] = (0.0, 0.0)
    angular_velocity: float = 0.0
    rotation_center: tuple[float, float] | None = None

    def __post_init__(self):
        self.texture = np.asarray(self.texture, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.texture.ndim not in (2, 3) or (self.texture.ndim == 3 and self.texture.shape[2] != 3):
            raise ValidationError(f"texture must be (H, W) or (H, W, 3), got {self.texture.shape}")
        if self.alpha.shape != self.texture.shape[:2]:
            raise ValidationError(
                f"alpha shape {self.alpha.shape} does not match texture {self.texture.shape[:2]}"
            )
        if self.depth <= 0:
            raise ValidationError(f"layer depth must be positive, got {self.depth}")
        if not np.all(np.isfinite(self.texture)) or np.any(self.texture < 0):
            raise ValidationError("texture radiance must be finite and non-negative")
        if np.any(self.alpha < 0) or np.any(self.alpha > 1):
            raise ValidationError("alpha values must lie in [0, 1]")

    @property
    def channels(self) -> int:
        return 1 if self.texture.ndim == 2 else self.texture.shape[2]


@dataclass
class LayeredScene:
    """Ordered layer stack (front to back) over an opaque background.

    ``focus_distance`` is the depth that renders with zero disparity and
    ``disparity_constant`` converts inverse-depth offsets into pixels of
    shift per unit aperture offset.
    """

    layers: list[SceneLayer]
    background: SceneLayer
    focus_distance: float
    disparity_constant: float
    sensor_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        w, h = self.sensor_size
        if w <= 0 or h <= 0:
            raise ValidationError(f"sensor size must be positive, got {self.sensor_size}")
        if self.focus_distance <= 0:
            raise ValidationError(f"focus distance must be positive, got {self.focus_distance}")
        if not np.all(self.background.alpha == 1.0):
            raise ValidationError("background alpha must be 1 everywhere")
        for layer in [*self.layers, self.background]:
            if layer.texture.shape[:2] != (h, w):
                raise ValidationError(
                    f"layer texture {layer.texture.shape[:2]} does not match sensor (h, w)=({h}, {w})"
                )
            if layer.channels != self.background.channels:
                raise ValidationError("all layers must share the background's channel count")

    @property
    def all_layers(self) -> list[SceneLayer]:
        """Layers front to back, background last."""
        return [*self.layers, self.background]


@dataclass
class LightField:
    """Discretized light field: one image per aperture offset."""

    views: list[ViewOffset]
    data: np.ndarray  # (V, H, W) or (V, H, W, 3)
    timestamp: float | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if len(self.views) != self.data.shape[0]:
            raise ValidationError(
                f"{len(self.views)} views but data has {self.data.shape[0]} slices"
            )

    def __len__(self):
        return len(self.views)


@dataclass
class FrameSequence:
    """Timestamped image sequence; times in seconds, strictly increasing."""

    times: np.ndarray
    frames: np.ndarray  # (N, H, W) or (N, H, W, 3)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.times.ndim != 1 or self.times.shape[0] != self.frames.shape[0]:
            raise ValidationError("times and frames lengths differ")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValidationError("frame times must be strictly increasing")

    def __len__(self):
        return self.times.shape[0]


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``img`` at float coordinates with bilinear weights, edge-clamped.

    Integer coordinates reproduce stored values exactly.
    """
    h, w = img.shape[:2]
    xf = np.clip(xs, 0.0, w - 1.0)
    yf = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xf).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yf).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = xf - x0
    wy = yf - y0
    if img.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    top = img[y0, x0] * (1.0 - wx) + img[y0, x1] * wx
    bot = img[y1, x0] * (1.0 - wx) + img[y1, x1] * wx
    return top * (1.0 - wy) + bot * wy


def _warp_layer(layer: SceneLayer, dx: float, dy: float, theta: float,
                out_shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Resample a layer translated by (dx, dy) px and rotated by theta rad."""
    h, w = out_shape
    if dx == 0.0 and dy == 0.0 and theta == 0.0:
        return layer.texture, layer.alpha
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = xx - dx
    ys = yy - dy
    if theta != 0.0:
        if layer.rotation_center is None:
            cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        else:
            cx, cy = layer.rotation_center
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        rx = xs - cx
        ry = ys - cy
        xs = cos_t * rx + sin_t * ry + cx
        ys = -sin_t * rx + cos_t * ry + cy
    tex = bilinear_sample(layer.texture, xs, ys)
    alpha = bilinear_sample(layer.alpha, xs, ys)
    return tex, alpha


def render_view(scene: LayeredScene, view: ViewOffset, time: float = 0.0) -> np.ndarray:
    """Render one aperture offset at a scene time.

    Each layer is shifted by its motion at ``time`` plus disparity times the
    view offset, then the stack is composited front to back with alpha-over.
    """
    w, h = scene.sensor_size
    acc = None
    for layer in reversed(scene.all_layers):
        delta = layer_disparity(layer.depth, scene.focus_distance, scene.disparity_constant)
        dx = layer.velocity[0] * time + delta * view.s
        dy = layer.velocity[1] * time + delta * view.t
        theta = layer.angular_velocity * time
        tex, alpha = _warp_layer(layer, dx, dy, theta, (h, w))
        if acc is None:
            acc = tex.copy()
            continue
        a = alpha[..., None] if tex.ndim == 3 else alpha
        acc = a * tex + (1.0 - a) * acc
    return acc


def render_lightfield(scene: LayeredScene, views: Sequence[ViewOffset],
                      time: float = 0.0, threads: int = 1) -> LightField:
    """Render every view offset at one scene time into a LightField."""
    if len(views) == 0:
        raise ValidationError("view list is empty")
    views = [ViewOffset(*v) for v in views]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slices = list(pool.map(lambda v: render_view(scene, v, time), views))
    else:
        slices = [render_view(scene, v, time) for v in views]
    return LightField(views=views, data=np.stack(slices), timestamp=time)


def integrate_aperture(lf: LightField) -> np.ndarray:
    """Synthesize a photograph: pixelwise mean over the views."""
    if len(lf) == 0:
        raise ValidationError("light field has no views")
    return lf.data.mean(axis=0)


def grid_views(n: tuple[int, int], spacing: float = 1.0) -> list[ViewOffset]:
    """Row-major (nx x ny) grid of view offsets centered on the optical axis."""
    nx, ny = n
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    return [ViewOffset((i - cx) * spacing, (j - cy) * spacing)
            for j in range(ny) for i in range(nx)]
