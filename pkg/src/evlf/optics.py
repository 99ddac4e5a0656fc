"""Angular multiplexing optics: mirror-mosaic layouts and aperture scanning.

Two ways of squeezing angular views through a single sensor:

* spatial mosaics (kaleidoscope mirror tube or microlens array) pack the
  views into disjoint pixel sets of one frame, trading spatial resolution;
* temporal scanning steers the effective viewpoint along a periodic
  Lissajous curve, trading temporal resolution.

Kaleidoscope tiles hold whole sub-images, mirrored once per mirror bounce;
microlens layouts interleave the views pixel by pixel.  Both mappings are
exact bijections and invert bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .plenoptic import FrameSequence, LayeredScene, LightField, ViewOffset, render_view

KALEIDOSCOPE = "kaleidoscope"
MICROLENS = "microlens"


def default_flip_pattern(n: tuple[int, int]) -> np.ndarray:
    """Mirror flags per tile, shape (ny, nx, 2) as (flip_x, flip_y).

    A tile is mirrored horizontally when its column index is odd relative to
    the center tile, vertically when its row index is, matching one
    reflection per mirror bounce.
    """
    nx, ny = n
    cx, cy = nx // 2, ny // 2
    pattern = np.zeros((ny, nx, 2), dtype=bool)
    for j in range(ny):
        for i in range(nx):
            pattern[j, i, 0] = (i - cx) % 2 == 1
            pattern[j, i, 1] = (j - cy) % 2 == 1
    return pattern


@dataclass
class MosaicLayout:
    """Tile geometry of a spatial-multiplexing design.

    ``n`` = (nx, ny) angular views per axis, ``r`` = (rx, ry) sensor
    resolution; ``r`` must be an integer multiple of ``n`` per axis.
    ``flip_pattern`` applies to kaleidoscope layouts only.
    """

    kind: str
    n: tuple[int, int]
    r: tuple[int, int]
    flip_pattern: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (KALEIDOSCOPE, MICROLENS):
            raise ValidationError(f"unknown mosaic kind {self.kind!r}")
        nx, ny = self.n
        rx, ry = self.r
        if nx <= 0 or ny <= 0 or rx <= 0 or ry <= 0:
            raise ValidationError("mosaic dimensions must be positive")
        if rx % nx or ry % ny:
            raise ValidationError(f"resolution {self.r} not divisible by views {self.n}")
        if self.kind == KALEIDOSCOPE:
            if self.flip_pattern is None:
                self.flip_pattern = default_flip_pattern(self.n)
            self.flip_pattern = np.asarray(self.flip_pattern, dtype=bool)
            if self.flip_pattern.shape != (ny, nx, 2):
                raise ValidationError(
                    f"flip pattern shape {self.flip_pattern.shape} != {(ny, nx, 2)}"
                )
        elif self.flip_pattern is not None:
            raise ValidationError("flip pattern applies to kaleidoscope layouts only")

    @property
    def view_count(self) -> int:
        return self.n[0] * self.n[1]

    @property
    def tile_size(self) -> tuple[int, int]:
        """(tw, th): per-view image dimensions."""
        return self.r[0] // self.n[0], self.r[1] // self.n[1]


@dataclass
class ScanCurve:
    """Periodic Lissajous aperture trajectory.

    ``eval`` returns ``(a_s sin(2 pi f_s t + phi_s), a_t sin(2 pi f_t t + phi_t))``.
    Both frequencies must complete a whole number of cycles per period so the
    curve closes.
    """

    amplitude: tuple[float, float]
    frequency: tuple[float, float]
    phase: tuple[float, float]
    period: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValidationError(f"period must be positive, got {self.period}")
        for f in self.frequency:
            cycles = f * self.period
            if abs(cycles - round(cycles)) > 1e-9:
                raise ValidationError(
                    f"frequency {f} Hz does not complete whole cycles in period {self.period}"
                )

    @classmethod
    def circle(cls, amplitude: float, frequency: float, phase: float = 0.0) -> "ScanCurve":
        """Circular scan: equal amplitudes and frequencies, quadrature phase."""
        if frequency <= 0:
            raise ValidationError(f"circle frequency must be positive, got {frequency}")
        return cls(
            amplitude=(amplitude, amplitude),
            frequency=(frequency, frequency),
            phase=(phase, phase + math.pi / 2.0),
            period=1.0 / frequency,
        )


def scan_eval(curve: ScanCurve, t):
    """Aperture offset at time ``t`` (scalar or array, seconds).

    The argument is reduced modulo the period before the sine so large
    ``|t|`` keeps full precision; scalar input returns a ViewOffset.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    t_red = np.fmod(t_arr, curve.period)
    s = curve.amplitude[0] * np.sin(
        2.0 * np.pi * curve.frequency[0] * t_red + curve.phase[0])
    v = curve.amplitude[1] * np.sin(
        2.0 * np.pi * curve.frequency[1] * t_red + curve.phase[1])
    if t_arr.ndim == 0:
        return ViewOffset(float(s), float(v))
    return np.stack([s, v], axis=-1)


def _apply_flips(tiles: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Mirror each (ny, nx, th, tw, ...) tile per its (flip_x, flip_y) flags."""
    out = tiles.copy()
    ny, nx = pattern.shape[:2]
    for j in range(ny):
        for i in range(nx):
            sub = out[j, i]
            if pattern[j, i, 0]:
                sub = sub[:, ::-1]
            if pattern[j, i, 1]:
                sub = sub[::-1, :]
            out[j, i] = sub
    return out


def spatial_mux(lf: LightField, layout: MosaicLayout) -> np.ndarray:
    """Fold a light field into a single mosaic frame.

    Views must be ordered row-major over the tile grid.  For kaleidoscope
    layouts the output pixel ``x`` holds view ``x // (r/n)`` at intra-tile
    coordinate ``x mod (r/n)`` (flips applied per tile); microlens layouts
    put view ``x mod n`` at coordinate ``x // n``.
    """
    nx, ny = layout.n
    rx, ry = layout.r
    tw, th = layout.tile_size
    if len(lf) != layout.view_count:
        raise ValidationError(f"{len(lf)} views but layout expects {layout.view_count}")
    if lf.data.shape[1:3] != (th, tw):
        raise ValidationError(
            f"view images {lf.data.shape[1:3]} do not match tile size ({th}, {tw})"
        )
    extra = lf.data.shape[3:]
    tiles = lf.data.reshape(ny, nx, th, tw, *extra)
    if layout.kind == KALEIDOSCOPE:
        tiles = _apply_flips(tiles, layout.flip_pattern)
        mosaic = tiles.transpose(0, 2, 1, 3, *range(4, tiles.ndim))
        return np.ascontiguousarray(mosaic.reshape(ry, rx, *extra))
    # microlens: interleave views pixel by pixel
    mosaic = tiles.transpose(2, 0, 3, 1, *range(4, tiles.ndim))
    return np.ascontiguousarray(mosaic.reshape(ry, rx, *extra))


def spatial_demux(mosaic: np.ndarray, layout: MosaicLayout,
                  views: list[ViewOffset] | None = None) -> LightField:
    """Unfold a mosaic frame back into its views; exact inverse of spatial_mux."""
    nx, ny = layout.n
    rx, ry = layout.r
    tw, th = layout.tile_size
    if mosaic.shape[:2] != (ry, rx):
        raise ValidationError(f"mosaic shape {mosaic.shape[:2]} does not match layout ({ry}, {rx})")
    mosaic = np.asarray(mosaic, dtype=np.float64)
    extra = mosaic.shape[2:]
    if layout.kind == KALEIDOSCOPE:
        tiles = mosaic.reshape(ny, th, nx, tw, *extra).transpose(0, 2, 1, 3, *range(4, 4 + len(extra)))
        tiles = _apply_flips(np.ascontiguousarray(tiles), layout.flip_pattern)
    else:
        tiles = mosaic.reshape(th, ny, tw, nx, *extra).transpose(1, 3, 0, 2, *range(4, 4 + len(extra)))
    data = np.ascontiguousarray(tiles).reshape(layout.view_count, th, tw, *extra)
    if views is None:
        views = [ViewOffset(float(i), float(j)) for j in range(ny) for i in range(nx)]
    return LightField(views=list(views), data=data)


def temporal_mux(scene: LayeredScene, curve: ScanCurve, t0: float, t1: float,
                 sample_rate: float, threads: int = 1) -> FrameSequence:
    """Render the scene through a scanning aperture.

    Frame ``k`` is taken at ``t_k = t0 + k / sample_rate`` from the view
    offset the curve reaches at that instant; sampling runs through ``t1``
    inclusive.  Frames are independent, so ``threads`` may fan the renders
    out without changing the result.
    """
    if t1 <= t0:
        raise ValidationError(f"need t1 > t0, got [{t0}, {t1}]")
    if sample_rate <= 0:
        raise ValidationError(f"sample rate must be positive, got {sample_rate}")
    count = int(np.floor((t1 - t0) * sample_rate + 1e-9)) + 1
    times = t0 + np.arange(count) / sample_rate
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(
                lambda t: render_view(scene, scan_eval(curve, t), t), times))
    else:
        frames = [render_view(scene, scan_eval(curve, t), t) for t in times]
    return FrameSequence(times=times, frames=np.stack(frames))
