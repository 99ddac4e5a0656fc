"""Log level-crossing event sensor model.

Each pixel tracks log brightness against a per-pixel reference.  Whenever
the interpolated signal rises through ``reference + c_pos`` (or falls
through ``reference - c_neg``) an event with the corresponding polarity is
emitted at the crossing time and the reference steps by one threshold.
Crossings inside the refractory window after a pixel's previous event are
suppressed and the reference does not move, so those events are simply
lost.  Log sensing makes the stream invariant to global radiance gain.

Brightness between frames is interpolated linearly in time, so crossing
timestamps are exact for piecewise-linear input.  Timestamps are integer
microseconds (the crossing time rounded up) and per-pixel sequences are
strictly increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .plenoptic import FrameSequence

class Event(NamedTuple):
    """One polarity spike: time in microseconds, pixel, sign."""

    t: int
    x: int
    y: int
    polarity: int


@dataclass
class SensorConfig:
    """Event sensor parameters.

    Thresholds are natural-log units (0.1 is roughly a 10.5% contrast
    step).  ``bandwidth_cap`` is events/second sustained, ``None`` for
    unlimited; ``bandwidth_window_us`` sets the enforcement granularity.
    """

    c_pos: float = 0.1
    c_neg: float = 0.1
    refractory_us: int = 0
    log_floor: float = 1e-4
    noise_rate: float = 0.0
    bandwidth_cap: float | None = None
    bandwidth_window_us: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.c_pos <= 0 or self.c_neg <= 0:
            raise ValidationError("contrast thresholds must be positive")
        if self.refractory_us < 0:
            raise ValidationError("refractory period must be >= 0")
        if self.log_floor <= 0:
            raise ValidationError("log floor must be positive")
        if self.noise_rate < 0:
            raise ValidationError("noise rate must be >= 0")
        if self.bandwidth_cap is not None and self.bandwidth_cap <= 0:
            raise ValidationError("bandwidth cap must be positive or None")


@dataclass
class EventStream:
    """Struct-of-arrays event container, globally time sorted.

    ``t`` int64 microseconds, ``x``/``y`` uint16, ``p`` int8 in {+1, -1}.
    ``metadata`` may carry provenance (scan curve, mosaic layout) as plain
    JSON-compatible values.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int
    threshold: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.uint16)
        self.y = np.asarray(self.y, dtype=np.uint16)
        self.p = np.asarray(self.p, dtype=np.int8)
        n = self.t.shape[0]
        if not (self.x.shape[0] == self.y.shape[0] == self.p.shape[0] == n):
            raise ValidationError("event arrays have mismatched lengths")

    def __len__(self):
        return self.t.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    @classmethod
    def empty(cls, width: int, height: int, threshold: float, metadata: dict | None = None):
        return cls(t=np.zeros(0, np.int64), x=np.zeros(0, np.uint16),
                   y=np.zeros(0, np.uint16), p=np.zeros(0, np.int8),
                   width=width, height=height, threshold=threshold,
                   metadata=metadata or {})

    def validate(self):
        """Check stream invariants; raises ValidationError on violation."""
        if len(self) == 0:
            return
        if np.any(self.t[1:] < self.t[:-1]):
            raise ValidationError("event timestamps are not globally non-decreasing")
        if np.any(self.x >= self.width) or np.any(self.y >= self.height):
            raise ValidationError("event coordinates out of bounds")
        if not np.all(np.abs(self.p) == 1):
            raise ValidationError("polarities must be +1 or -1")
        pix = self.y.astype(np.int64) * self.width + self.x.astype(np.int64)
        order = np.argsort(pix, kind="stable")
        same = pix[order][1:] == pix[order][:-1]
        if np.any(self.t[order][1:][same] <= self.t[order][:-1][same]):
            raise ValidationError("per-pixel timestamps are not strictly increasing")

    def pixel_index(self) -> np.ndarray:
        return self.y.astype(np.int64) * self.width + self.x.astype(np.int64)


def brightness(img: np.ndarray, log_floor: float = 1e-4) -> np.ndarray:
    """Log response: ``ln(max(log_floor, radiance))`` elementwise."""
    if log_floor <= 0:
        raise ValidationError("log floor must be positive")
    return np.log(np.maximum(np.asarray(img, dtype=np.float64), log_floor))


def _strictly_increasing_per_pixel(t_us: np.ndarray, pix: np.ndarray) -> np.ndarray:
    """Bump quantized timestamps minimally so each pixel's times are strict.

    Events must already be chronological within each pixel; quantization to
    whole microseconds can leave equal stamps.  Only offending pixel groups
    are touched, using ``t'_i = i + max_{j<=i}(t_j - j)`` within the group.
    """
    n = t_us.shape[0]
    if n < 2:
        return t_us
    order = np.argsort(pix, kind="stable")
    t_g = t_us[order]
    pix_g = pix[order]
    dup = np.flatnonzero((pix_g[1:] == pix_g[:-1]) & (t_g[1:] <= t_g[:-1]))
    if dup.size == 0:
        return t_us
    starts = np.flatnonzero(np.concatenate(([True], pix_g[1:] != pix_g[:-1])))
    bounds = np.append(starts, n)
    for g in np.unique(np.searchsorted(starts, dup + 1) - 1):
        lo, hi = bounds[g], bounds[g + 1]
        idx = np.arange(hi - lo)
        t_g[lo:hi] = idx + np.maximum.accumulate(t_g[lo:hi] - idx)
    out = t_us.copy()
    out[order] = t_g
    return out


def generate_events(frames: FrameSequence, cfg: SensorConfig) -> EventStream:
    """Convert a brightness (log) frame sequence into an event stream.

    The per-pixel reference starts at the first frame.  Within each frame
    interval the signal is linear, so every threshold crossing has a closed
    form time; emitted events advance the reference by one threshold and
    refractory-suppressed crossings are dropped without moving it.  The
    result is globally time sorted with stable per-pixel order.
    """
    if len(frames) < 2:
        raise ValidationError("need at least two frames to generate events")
    h, w = frames.frames.shape[1:3]
    if frames.frames.ndim != 3:
        raise ValidationError("event generation expects single-channel brightness frames")
    n_px = h * w
    times_us = frames.times * 1e6
    grids = frames.frames.reshape(len(frames), n_px)

    ref = grids[0].astype(np.float64).copy()
    t_last = np.full(n_px, -np.inf)
    refractory = float(cfg.refractory_us)

    out_t: list[np.ndarray] = []
    out_pix: list[np.ndarray] = []
    out_pol: list[np.ndarray] = []

    for k in range(len(frames) - 1):
        b0 = grids[k]
        b1 = grids[k + 1]
        t0 = times_us[k]
        t1 = times_us[k + 1]
        span = t1 - t0
        for sign, thr in ((1, cfg.c_pos), (-1, cfg.c_neg)):
            active = np.flatnonzero(sign * (b1 - b0) > 0)
            first = True
            while active.size:
                level = ref[active] + sign * thr
                if first:
                    crossed = (sign * (level - b0[active]) > 0) & (sign * (b1[active] - level) >= 0)
                    first = False
                else:
                    crossed = sign * (b1[active] - level) >= 0
                active = active[crossed]
                if not active.size:
                    break
                level = ref[active] + sign * thr
                tau = t0 + (level - b0[active]) / (b1[active] - b0[active]) * span
                np.clip(tau, t0, t1, out=tau)
                fired = tau - t_last[active] >= refractory
                emit = active[fired]
                if emit.size:
                    tau_e = tau[fired]
                    out_t.append(tau_e)
                    out_pix.append(emit)
                    out_pol.append(np.full(emit.size, sign, dtype=np.int8))
                    ref[emit] += sign * thr
                    t_last[emit] = tau_e
                active = emit

    if not out_t:
        return EventStream.empty(w, h, cfg.c_pos)

    tau_all = np.concatenate(out_t)
    pix_all = np.concatenate(out_pix)
    pol_all = np.concatenate(out_pol)
    # quantize up to whole microseconds: a dense integer-tick simulation
    # would report the first tick at or after the crossing
    t_int = np.ceil(tau_all - 1e-6).astype(np.int64)
    np.maximum(t_int, 0, out=t_int)
    t_int = _strictly_increasing_per_pixel(t_int, pix_all)
    order = np.argsort(t_int, kind="stable")
    return EventStream(
        t=t_int[order],
        x=(pix_all[order] % w).astype(np.uint16),
        y=(pix_all[order] // w).astype(np.uint16),
        p=pol_all[order],
        width=w, height=h, threshold=cfg.c_pos,
    )


def final_reference(frames: FrameSequence, cfg: SensorConfig) -> np.ndarray:
    """Reference grid the sensor holds after the last frame.

    Convenience for tests and reconstruction bounds: replays the stream the
    same way generate_events does, returning only the end state.
    """
    stream = generate_events(frames, cfg)
    h, w = frames.frames.shape[1:3]
    ref = frames.frames[0].astype(np.float64).copy().reshape(-1)
    np.add.at(ref, stream.pixel_index(),
              np.where(stream.p > 0, cfg.c_pos, -cfg.c_neg))
    return ref.reshape(h, w)


def add_noise(stream: EventStream, cfg: SensorConfig,
              t0_us: int | None = None, t1_us: int | None = None) -> EventStream:
    """Inject background-activity noise: per-pixel Poisson spurious events.

    Counts follow ``Poisson(noise_rate * duration)`` per pixel with uniform
    times and random polarity over ``[t0_us, t1_us)`` (defaulting to the
    stream's own extent).  Deterministic for a given seed.
    """
    if cfg.noise_rate == 0.0:
        return stream
    if t0_us is None or t1_us is None:
        if len(stream) == 0:
            raise ValidationError("empty stream needs an explicit noise window")
        t0_us = int(stream.t[0]) if t0_us is None else t0_us
        t1_us = int(stream.t[-1]) + 1 if t1_us is None else t1_us
    if t1_us <= t0_us:
        raise ValidationError(f"need t1_us > t0_us, got [{t0_us}, {t1_us})")
    n_px = stream.width * stream.height
    duration_s = (t1_us - t0_us) * 1e-6
    rng = np.random.default_rng(cfg.seed)
    counts = rng.poisson(cfg.noise_rate * duration_s, size=n_px)
    total = int(counts.sum())
    pix = np.repeat(np.arange(n_px, dtype=np.int64), counts)
    t_noise = rng.integers(t0_us, t1_us, size=total, dtype=np.int64)
    pol = (rng.integers(0, 2, size=total, dtype=np.int64) * 2 - 1).astype(np.int8)

    t_all = np.concatenate([stream.t, t_noise])
    pix_all = np.concatenate([stream.pixel_index(), pix])
    pol_all = np.concatenate([stream.p, pol])
    order = np.argsort(t_all, kind="stable")
    t_all = _strictly_increasing_per_pixel(t_all[order], pix_all[order])
    # the repair can nudge equal-time events; restore global order
    order2 = np.argsort(t_all, kind="stable")
    pix_o = pix_all[order][order2]
    return EventStream(
        t=t_all[order2],
        x=(pix_o % stream.width).astype(np.uint16),
        y=(pix_o // stream.width).astype(np.uint16),
        p=pol_all[order][order2],
        width=stream.width, height=stream.height,
        threshold=stream.threshold, metadata=dict(stream.metadata),
    )


def apply_bandwidth_limit(stream: EventStream, cfg: SensorConfig) -> EventStream:
    """Drop events beyond the readout budget.

    Time is cut into fixed windows (``bandwidth_window_us``); any window
    whose count exceeds the per-window budget keeps a seeded uniformly
    random subset of exactly that size.  Relative order is preserved.
    """
    if cfg.bandwidth_cap is None or len(stream) == 0:
        return stream
    window = cfg.bandwidth_window_us
    budget = int(cfg.bandwidth_cap * window / 1e6)
    win = stream.t // window
    uniq, counts = np.unique(win, return_counts=True)
    if np.all(counts <= budget):
        return stream
    rng = np.random.default_rng(cfg.seed)
    keys = rng.random(len(stream))
    order = np.lexsort((keys, win))
    starts = np.flatnonzero(np.concatenate(([True], win[order][1:] != win[order][:-1])))
    sizes = np.diff(np.append(starts, len(stream)))
    rank = np.arange(len(stream)) - np.repeat(starts, sizes)
    keep = np.sort(order[rank < budget])
    return EventStream(
        t=stream.t[keep], x=stream.x[keep], y=stream.y[keep], p=stream.p[keep],
        width=stream.width, height=stream.height,
        threshold=stream.threshold, metadata=dict(stream.metadata),
    )
