"""Procedurally built scenes for the shipped scenarios.

Every builder takes geometry at a 256 px reference resolution and scales
rectangles, velocities, and the disparity constant with the requested
size, so the same scene renders consistently at full sensor resolution
for a scanned capture and at tile resolution behind a mosaic.  Builders
return ``(scene, info)`` where ``info`` carries the region rectangles and
masks the scenario metrics evaluate on.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ValidationError
from .plenoptic import LayeredScene, SceneLayer

_REF = 256.0


def smooth_noise(shape, rng, sigma: float = 2.0, lo: float = 0.2, hi: float = 1.0):
    """Band-limited noise texture in [lo, hi]; wrap filtering keeps stats flat."""
    tex = gaussian_filter(rng.random(shape), sigma, mode="wrap")
    t0, t1 = tex.min(), tex.max()
    return (tex - t0) / ((t1 - t0) or 1.0) * (hi - lo) + lo


def block_mask(shape, rect) -> np.ndarray:
    x, y, w, h = rect
    mask = np.zeros(shape)
    mask[y:y + h, x:x + w] = 1.0
    return mask


def _rect(rect_ref, sc: float) -> tuple[int, int, int, int]:
    x, y, w, h = rect_ref
    return (int(round(x * sc)), int(round(y * sc)),
            max(1, int(round(w * sc))), max(1, int(round(h * sc))))


def _uniform_layer(shape, value: float, depth: float) -> SceneLayer:
    return SceneLayer(texture=np.full(shape, value), alpha=np.ones(shape), depth=depth)


def single_plane(size: int, seed: int = 0, depth: float = 2.0, d0: float = 3.0,
                 A: float = 8.0, sigma: float = 2.0, lo: float = 0.2, hi: float = 1.0):
    """One textured plane off the focus plane; the self-calibration target."""
    sc = size / _REF
    rng = np.random.default_rng(seed)
    shape = (size, size)
    bg = SceneLayer(texture=smooth_noise(shape, rng, sigma * max(sc, 0.25), lo, hi),
                    alpha=np.ones(shape), depth=depth)
    scene = LayeredScene(layers=[], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    return scene, {"patch_rect": _rect((96, 96, 64, 64), sc)}


def two_plane(size: int, seed: int = 0, front_depth: float = 2.0,
              back_depth: float = 6.0, d0: float = 3.0, A: float = 8.0,
              front_rect=(64, 64, 128, 128)):
    """Textured block floating in front of a textured backdrop."""
    sc = size / _REF
    rng = np.random.default_rng(seed)
    shape = (size, size)
    rect = _rect(front_rect, sc)
    front = SceneLayer(texture=smooth_noise(shape, rng, 1.2 * max(sc, 0.25), 0.25, 1.0),
                       alpha=block_mask(shape, rect), depth=front_depth)
    bg = SceneLayer(texture=smooth_noise(shape, rng, 1.2 * max(sc, 0.25), 0.2, 0.9),
                    alpha=np.ones(shape), depth=back_depth)
    scene = LayeredScene(layers=[front], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    border = max(2, int(round(6 * sc)))
    margin = max(2, int(round(5 * sc)))
    front_mask = block_mask(shape, rect).astype(bool)
    front_core = block_mask(shape, (rect[0] + margin, rect[1] + margin,
                                    rect[2] - 2 * margin, rect[3] - 2 * margin)).astype(bool)
    dilated = block_mask(shape, (rect[0] - margin, rect[1] - margin,
                                 rect[2] + 2 * margin, rect[3] + 2 * margin)).astype(bool)
    interior = np.zeros(shape, dtype=bool)
    interior[border:size - border, border:size - border] = True
    return scene, {
        "front_rect": rect,
        "front_mask": front_core & interior,
        "back_mask": ~dilated & interior,
        "front_depth": front_depth,
        "back_depth": back_depth,
    }


def motion_compare(size: int, seed: int = 0, d0: float = 3.0, A: float = 8.0,
                   scene_depth: float = 2.0, box_rect=(156, 156, 64, 64),
                   object_rect=(28, 100, 28, 28), object_speed: float = 625.0):
    """Static textured box plus a translating object over a quiet backdrop.

    The backdrop sits on the focus plane so neither design fires on it;
    the box and object share one depth so a single refocus serves both.
    """
    sc = size / _REF
    rng = np.random.default_rng(seed)
    shape = (size, size)
    brect = _rect(box_rect, sc)
    orect = _rect(object_rect, sc)
    box = SceneLayer(texture=smooth_noise(shape, rng, 1.0 * max(sc, 0.25), 0.2, 1.0),
                     alpha=block_mask(shape, brect), depth=scene_depth)
    obj = SceneLayer(texture=smooth_noise(shape, rng, 1.0 * max(sc, 0.25), 0.2, 1.0),
                     alpha=block_mask(shape, orect), depth=scene_depth,
                     velocity=(object_speed * sc, 0.0))
    bg = _uniform_layer(shape, 0.5, d0)
    scene = LayeredScene(layers=[obj, box], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    return scene, {
        "box_rect": brect,
        "object_rect": orect,
        "object_speed_px": object_speed * sc,
        "depth": scene_depth,
    }


def line_grid(size: int, seed: int = 0, d0: float = 3.0, A: float = 8.0,
              depth: float = 2.0, spacing: int = 32, thickness: int = 4,
              speed: float = 375.0, on: float = 2.0, off: float = 0.5):
    """Full-span horizontal and vertical lines translating horizontally."""
    sc = size / _REF
    shape = (size, size)
    sp = max(2, int(round(spacing * sc)))
    th = max(1, int(round(thickness * sc)))
    mask = np.zeros(shape)
    for start in range(sp // 2, size, sp):
        mask[start:start + th, :] = 1.0
        mask[:, start:start + th] = 1.0
    grid = SceneLayer(texture=np.full(shape, on), alpha=mask, depth=depth,
                      velocity=(speed * sc, 0.0))
    bg = _uniform_layer(shape, off, d0)
    scene = LayeredScene(layers=[grid], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    return scene, {"depth": depth, "speed_px": speed * sc}


def hdr_scene(size: int = 128, seed: int = 0, d0: float = 3.0, A: float = 8.0,
              depth: float = 2.0, ratio: float = 1e4,
              velocity=(300.0, 180.0),
              emitter_rects=((40, 40, 56, 56), (150, 130, 64, 64))):
    """Bright textured emitters over a dark textured backdrop, both moving.

    ``ratio`` is the emitter-to-backdrop radiance ratio; geometry at the
    256 px reference.
    """
    sc = size / _REF
    rng = np.random.default_rng(seed)
    shape = (size, size)
    rects = [_rect(r, sc) for r in emitter_rects]
    emitter_alpha = np.zeros(shape)
    for r in rects:
        emitter_alpha = np.maximum(emitter_alpha, block_mask(shape, r))
    vel = (velocity[0] * sc, velocity[1] * sc)
    emitters = SceneLayer(
        texture=smooth_noise(shape, rng, 1.5 * max(sc, 0.25), 0.3, 1.0) * ratio,
        alpha=emitter_alpha, depth=depth, velocity=vel)
    bg = SceneLayer(texture=smooth_noise(shape, rng, 1.5 * max(sc, 0.25), 0.3, 1.0),
                    alpha=np.ones(shape), depth=depth, velocity=vel)
    scene = LayeredScene(layers=[emitters], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    margin = max(3, int(round(10 * sc)))
    border = max(4, int(round(16 * sc)))
    bright = np.zeros(shape, dtype=bool)
    guard = np.zeros(shape, dtype=bool)
    for r in rects:
        bright |= block_mask(shape, (r[0] + margin, r[1] + margin,
                                     r[2] - 2 * margin, r[3] - 2 * margin)).astype(bool)
        guard |= block_mask(shape, (r[0] - margin, r[1] - margin,
                                    r[2] + 2 * margin, r[3] + 2 * margin)).astype(bool)
    interior = np.zeros(shape, dtype=bool)
    interior[border:size - border, border:size - border] = True
    return scene, {
        "bright_mask": bright & interior,
        "dark_mask": ~guard & interior,
        "ratio": ratio,
    }


def fan_scene(size: int = 256, seed: int = 0, d0: float = 3.0, A: float = 8.0,
              static_depth: float = 2.0, disc_depth: float = 2.5,
              static_rect=(28, 96, 56, 56), disc_center=(176.0, 128.0),
              disc_radius: float = 52.0, spokes: int = 8,
              rpm: float = 480.0):
    """Static textured block plus a spinning spoked disc, quiet backdrop."""
    sc = size / _REF
    rng = np.random.default_rng(seed)
    shape = (size, size)
    srect = _rect(static_rect, sc)
    static = SceneLayer(texture=smooth_noise(shape, rng, 1.0 * max(sc, 0.25), 0.2, 1.0),
                        alpha=block_mask(shape, srect), depth=static_depth)
    cx, cy = disc_center[0] * sc, disc_center[1] * sc
    radius = disc_radius * sc
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    rr = np.hypot(xx - cx, yy - cy)
    angle = np.arctan2(yy - cy, xx - cx)
    spoke_tex = np.where(np.sin(spokes * angle) > 0.0, 1.0, 0.2)
    disc = SceneLayer(texture=spoke_tex, alpha=(rr <= radius).astype(np.float64),
                      depth=disc_depth, angular_velocity=rpm * 2.0 * np.pi / 60.0,
                      rotation_center=(cx, cy))
    bg = _uniform_layer(shape, 0.5, d0)
    scene = LayeredScene(layers=[disc, static], background=bg, focus_distance=d0,
                         disparity_constant=A * sc, sensor_size=(size, size))
    half = int(round(radius / np.sqrt(2.0))) - 1
    disc_rect = (int(round(cx)) - half, int(round(cy)) - half, 2 * half, 2 * half)
    return scene, {
        "static_rect": srect,
        "disc_rect": disc_rect,
        "static_depth": static_depth,
        "disc_depth": disc_depth,
    }


_BUILDERS = {
    "single_plane": single_plane,
    "two_plane": two_plane,
    "motion_compare": motion_compare,
    "line_grid": line_grid,
    "hdr": hdr_scene,
    "fan": fan_scene,
}


def build_scene(spec: dict, size: int):
    """Instantiate a builtin scene spec ``{"builtin": name, ...params}``."""
    if "builtin" not in spec:
        raise ValidationError("scene spec lacks a 'builtin' name")
    name = spec["builtin"]
    if name not in _BUILDERS:
        raise ValidationError(f"unknown builtin scene {name!r}; have {sorted(_BUILDERS)}")
    params = {k: v for k, v in spec.items() if k != "builtin"}
    return _BUILDERS[name](size=size, **params)
