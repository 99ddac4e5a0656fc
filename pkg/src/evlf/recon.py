"""Event-to-frame reconstruction and scan-synchronized light field assembly.

Reconstruction inverts the level-crossing rule directly: every event steps
its pixel by one threshold, optionally with a leaky-integrator decay
applied continuously between events.  With zero decay and the true initial
brightness this replays the sensor's internal reference exactly, which
bounds the reconstruction error by one threshold.  Absolute levels are
unknown in real captures, so the default zero initialization yields
relative brightness; refocusing and depth recovery only consume contrast
and are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .optics import ScanCurve, scan_eval
from .plenoptic import FrameSequence, LightField, ViewOffset
from .sensor import EventStream


@dataclass
class FrameRequest:
    """Reconstruction sampling plan: sorted microsecond timestamps."""

    timestamps_us: np.ndarray
    decay: float = 0.0
    initial: np.ndarray | None = None  # None = zeros

    def __post_init__(self):
        self.timestamps_us = np.asarray(self.timestamps_us, dtype=np.int64)
        if self.timestamps_us.ndim != 1 or self.timestamps_us.size == 0:
            raise ValidationError("timestamps_us must be a non-empty 1-D array")
        if np.any(np.diff(self.timestamps_us) <= 0):
            raise ValidationError("timestamps must be sorted and distinct")
        if self.decay < 0:
            raise ValidationError("decay must be >= 0")


@dataclass
class LightFieldVideo:
    """One light field per scan period, all sharing the same view list."""

    lightfields: list[LightField]
    views_per_period: int

    def __post_init__(self):
        if not self.lightfields:
            raise ValidationError("light field video is empty")
        ref = self.lightfields[0].views
        for lf in self.lightfields[1:]:
            if lf.views != ref:
                raise ValidationError("periods disagree on the view list")

    def __len__(self):
        return len(self.lightfields)


def integrate_events(stream: EventStream, req: FrameRequest,
                     c_pos: float | None = None,
                     c_neg: float | None = None) -> FrameSequence:
    """Accumulate threshold steps into brightness frames at requested times.

    ``B(t) = B0 * exp(-decay * t) + sum_{events <= t} step_k * exp(-decay * (t - t_k))``
    with ``step_k = +c_pos`` or ``-c_neg`` (both default to the stream
    threshold).  Decay rates are per second; event times are microseconds.
    """
    if len(stream) and np.any(np.diff(stream.t) < 0):
        raise ValidationError("event stream is not time sorted")
    c_pos = stream.threshold if c_pos is None else c_pos
    c_neg = stream.threshold if c_neg is None else c_neg
    h, w = stream.height, stream.width
    if req.initial is None:
        state = np.zeros(h * w, dtype=np.float64)
    else:
        init = np.asarray(req.initial, dtype=np.float64)
        if init.shape != (h, w):
            raise ValidationError(f"initial grid {init.shape} does not match ({h}, {w})")
        state = init.reshape(-1).copy()

    pix = stream.pixel_index()
    steps = np.where(stream.p > 0, c_pos, -c_neg)
    out = np.empty((req.timestamps_us.size, h, w), dtype=np.float64)
    prev_us = -1  # so events stamped exactly 0 are included in the first frame
    cursor = 0
    for i, t_us in enumerate(req.timestamps_us):
        t_us = int(t_us)
        if req.decay > 0.0 and t_us > max(prev_us, 0):
            state *= np.exp(-req.decay * (t_us - max(prev_us, 0)) * 1e-6)
        hi = np.searchsorted(stream.t, t_us, side="right")
        if hi > cursor:
            sel = slice(cursor, hi)
            if req.decay > 0.0:
                weights = steps[sel] * np.exp(-req.decay * (t_us - stream.t[sel]) * 1e-6)
            else:
                weights = steps[sel]
            np.add.at(state, pix[sel], weights)
            cursor = hi
        out[i] = state.reshape(h, w)
        prev_us = t_us
    return FrameSequence(times=req.timestamps_us * 1e-6, frames=out)


def event_frame(stream: EventStream, t0_us: int, t1_us: int) -> np.ndarray:
    """Signed event count per pixel over ``[t0_us, t1_us)``."""
    if t0_us >= t1_us:
        raise ValidationError(f"need t0 < t1, got [{t0_us}, {t1_us})")
    counts = np.zeros(stream.height * stream.width, dtype=np.int64)
    lo = np.searchsorted(stream.t, t0_us, side="left")
    hi = np.searchsorted(stream.t, t1_us, side="left")
    if hi > lo:
        np.add.at(counts, stream.pixel_index()[lo:hi], stream.p[lo:hi].astype(np.int64))
    return counts.reshape(stream.height, stream.width)


def bin_to_lightfield(frames: FrameSequence, curve: ScanCurve, bins: int) -> LightFieldVideo:
    """Slice scan-synchronized frames into one light field per scan period.

    Periods are anchored at integer multiples of the curve period; each is
    divided into ``bins`` phase bins, the bin-center view offset comes from
    the curve, and the frame nearest each bin center becomes that view.
    Only periods fully covered by the frame span are produced.
    """
    if bins < 3:
        raise ValidationError(f"need at least 3 bins, got {bins}")
    if len(frames) == 0:
        raise ValidationError("no frames to bin")
    T = curve.period
    t_lo, t_hi = frames.times[0], frames.times[-1]
    # a period is reconstructible when all its bin centers fall inside the
    # frame span, give or take half a bin
    half_bin = T / (2.0 * bins)
    eps = 1e-9 * T
    first = int(np.ceil((t_lo - half_bin - eps) / T))
    last = int(np.floor((t_hi + half_bin + eps) / T)) - 1
    if last < first:
        raise ValidationError(
            f"frames span [{t_lo}, {t_hi}] s which covers no full period of {T} s"
        )
    phases = (np.arange(bins) + 0.5) / bins * T
    offsets = scan_eval(curve, phases)
    views = [ViewOffset(float(s), float(t)) for s, t in offsets]
    fields = []
    for p in range(first, last + 1):
        centers = p * T + phases
        idx = np.clip(np.searchsorted(frames.times, centers), 1, len(frames) - 1)
        left_closer = (centers - frames.times[idx - 1]) <= (frames.times[idx] - centers)
        idx = np.where(left_closer, idx - 1, idx)
        fields.append(LightField(views=views, data=frames.frames[idx].copy(),
                                 timestamp=float(p * T)))
    return LightFieldVideo(lightfields=fields, views_per_period=bins)
