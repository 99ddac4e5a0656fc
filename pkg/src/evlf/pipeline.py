"""End-to-end capture pipelines and the shipped comparison scenarios.

The building blocks (simulate a design, reconstruct per scan period,
self-calibrate) live here so the CLI and the acceptance suite run exactly
the same code paths.  Scenario runners return a ``ScenarioResult`` with
machine-checkable metric rows plus the images the report renders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .calib import (CalibrationResult, ShiftTrack, assign_views, fit_circle,
                    fit_depth_disparity, track_patch)
from .errors import ValidationError
from .lfops import depth_from_focus, focal_stack, refocus, sharpness
from .optics import (KALEIDOSCOPE as KALEIDOSCOPE_KIND, MosaicLayout,
                     ScanCurve, scan_eval, spatial_demux, spatial_mux,
                     temporal_mux)
from .plenoptic import (FrameSequence, LayeredScene, LightField, ViewOffset,
                        grid_views, integrate_aperture, layer_disparity,
                        render_lightfield, render_view)
from .presets import build_scene
from .recon import FrameRequest, LightFieldVideo, bin_to_lightfield, integrate_events
from .report import MetricRow
from .sensor import EventStream, SensorConfig, apply_bandwidth_limit, brightness, generate_events


@dataclass
class ScenarioResult:
    name: str
    rows: list[MetricRow]
    images: dict[str, np.ndarray] = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def curve_to_dict(curve: ScanCurve) -> dict:
    return {"amplitude": list(curve.amplitude), "frequency": list(curve.frequency),
            "phase": list(curve.phase), "period": curve.period}


def curve_from_dict(doc: dict) -> ScanCurve:
    return ScanCurve(amplitude=tuple(doc["amplitude"]), frequency=tuple(doc["frequency"]),
                     phase=tuple(doc["phase"]), period=doc["period"])


def layout_to_dict(layout: MosaicLayout) -> dict:
    doc = {"kind": layout.kind, "n": list(layout.n), "r": list(layout.r)}
    if layout.flip_pattern is not None:
        doc["flip_pattern"] = layout.flip_pattern.astype(int).tolist()
    return doc


def layout_from_dict(doc: dict) -> MosaicLayout:
    flips = doc.get("flip_pattern")
    return MosaicLayout(kind=doc["kind"], n=tuple(doc["n"]), r=tuple(doc["r"]),
                        flip_pattern=np.asarray(flips, dtype=bool) if flips is not None else None)


def sensor_from_config(doc: dict | None) -> SensorConfig:
    doc = doc or {}
    return SensorConfig(
        c_pos=doc.get("c_pos", 0.1), c_neg=doc.get("c_neg", 0.1),
        refractory_us=doc.get("refractory_us", 0),
        log_floor=doc.get("log_floor", 1e-4),
        noise_rate=doc.get("noise_rate", 0.0),
        bandwidth_cap=doc.get("bandwidth_cap"),
        bandwidth_window_us=doc.get("bandwidth_window_us", 1000),
        seed=doc.get("seed", 0),
    )


def slice_stream(stream: EventStream, t0_us: int, t1_us: int) -> EventStream:
    """Events with ``t0_us <= t < t1_us``, metadata preserved."""
    lo = np.searchsorted(stream.t, t0_us, side="left")
    hi = np.searchsorted(stream.t, t1_us, side="left")
    return EventStream(t=stream.t[lo:hi], x=stream.x[lo:hi], y=stream.y[lo:hi],
                       p=stream.p[lo:hi], width=stream.width, height=stream.height,
                       threshold=stream.threshold, metadata=dict(stream.metadata))


# ---------------------------------------------------------------------------
# capture simulation
# ---------------------------------------------------------------------------

def simulate_temporal(scene: LayeredScene, curve: ScanCurve, t0: float, t1: float,
                      sample_rate: float, cfg: SensorConfig, threads: int = 1
                      ) -> tuple[EventStream, FrameSequence]:
    """Scanned-aperture capture: returns the stream and its brightness frames."""
    rendered = temporal_mux(scene, curve, t0, t1, sample_rate, threads=threads)
    frames = FrameSequence(times=rendered.times,
                           frames=brightness(rendered.frames, cfg.log_floor))
    stream = generate_events(frames, cfg)
    stream.metadata = {"design": "galvo", "curve": curve_to_dict(curve)}
    return stream, frames


def simulate_spatial(scene: LayeredScene, layout: MosaicLayout, view_spacing: float,
                     t0: float, t1: float, frame_rate: float, cfg: SensorConfig,
                     threads: int = 1) -> tuple[EventStream, FrameSequence]:
    """Mosaic capture: per-sample light fields folded to mosaics, then events.

    The scene must be built at the layout's tile resolution.
    """
    tw, th = layout.tile_size
    if scene.sensor_size != (tw, th):
        raise ValidationError(
            f"scene {scene.sensor_size} does not match tile size ({tw}, {th})")
    views = grid_views(layout.n, view_spacing)
    count = int(np.floor((t1 - t0) * frame_rate + 1e-9)) + 1
    times = t0 + np.arange(count) / frame_rate
    mosaics = np.stack([
        spatial_mux(render_lightfield(scene, views, t, threads=threads), layout)
        for t in times
    ])
    frames = FrameSequence(times=times, frames=brightness(mosaics, cfg.log_floor))
    stream = generate_events(frames, cfg)
    stream.metadata = {"design": "kaleidoscope" if layout.kind == "kaleidoscope" else "mla",
                       "layout": layout_to_dict(layout), "view_spacing": view_spacing}
    return stream, frames


def bin_center_times_us(curve: ScanCurve, bins: int, oversample: int = 4,
                        period: int = 0) -> np.ndarray:
    """Reconstruction timestamps covering one scan period, microseconds."""
    n = bins * oversample
    t = (period + (np.arange(n) + 0.5) / n) * curve.period
    return np.unique(np.round(t * 1e6).astype(np.int64))


def reconstruct_period(stream: EventStream, curve: ScanCurve, bins: int,
                       oversample: int = 4, decay: float = 0.0,
                       initial: np.ndarray | None = None,
                       period: int = 0) -> tuple[FrameSequence, LightFieldVideo]:
    """Integrate events across one scan period and bin them into a light field."""
    times = bin_center_times_us(curve, bins, oversample, period)
    frames = integrate_events(stream, FrameRequest(times, decay=decay, initial=initial))
    return frames, bin_to_lightfield(frames, curve, bins)


def self_calibrate(frames: FrameSequence, rect, scan_frequency: float,
                   search_radius: int = 10, residual_limit: float = 1.0
                   ) -> tuple[CalibrationResult, ShiftTrack]:
    """Recover per-frame views from reconstructed frames alone.

    Template-match the reference patch across the sequence, fit the shift
    circle, then place each frame on it at its drive phase.
    """
    track = track_patch(frames, rect, search_radius)
    fit = fit_circle(np.column_stack(track.as_arrays()))
    result = assign_views(track, fit, scan_frequency, frames.times,
                          residual_limit=residual_limit)
    return result, track


# ---------------------------------------------------------------------------
# scenario: design comparison (static-scene contrast and motion blur)
# ---------------------------------------------------------------------------

def _region_mean_sharpness(img: np.ndarray, rect, window: int = 7) -> float:
    return float(metrics.crop(sharpness(img, window), rect).mean())


def _inflate(rect, margin: int, extra_w: int = 0, bounds: int | None = None):
    x, y, w, h = rect
    x, y = x - margin, y - margin
    w, h = w + 2 * margin + extra_w, h + 2 * margin
    if bounds is not None:
        x, y = max(0, x), max(0, y)
        w, h = min(w, bounds - x), min(h, bounds - y)
    return (x, y, w, h)


def run_compare(cfg: dict) -> ScenarioResult:
    """Mosaic vs scan capture across object speed multipliers, fixed scan rate.

    The mosaic pipeline reconstructs over an event-count-matched window
    (inversely proportional to speed), the standard motion-adaptive choice
    for event integration; the scan pipeline is pinned to its period, which
    is exactly why it motion-blurs.
    """
    size = cfg.get("size", 256)
    speeds = cfg.get("speeds", [1, 2, 4, 8])
    sensor = sensor_from_config(cfg.get("sensor"))
    gal = cfg["galvo"]
    mos = cfg["mosaic"]
    scene_spec = dict(cfg["scene"])
    base_speed = scene_spec.pop("object_speed", 625.0)
    curve = ScanCurve.circle(gal["amplitude"], gal["frequency"])
    T = curve.period
    bins, oversample = gal.get("bins", 40), gal.get("oversample", 4)
    n = tuple(mos.get("n", [4, 4]))
    layout = MosaicLayout("kaleidoscope", n, (size, size))
    tile = size // n[0]

    galvo_sharp, kal_sharp = {}, {}
    images = {}
    box_energy = {}
    kal_box_events = 0
    for speed in speeds:
        spec = dict(scene_spec, object_speed=base_speed * speed)
        # scanned capture at full resolution
        scene_g, info_g = build_scene(spec, size)
        stream_g, _ = simulate_temporal(scene_g, curve, 0.0, 1.05 * T,
                                        gal.get("samples_per_period", 20) * gal["frequency"],
                                        sensor)
        _, lfv = reconstruct_period(stream_g, curve, bins, oversample)
        refoc_g = refocus(lfv.lightfields[0], info_g["depth"],
                          scene_g.focus_distance, scene_g.disparity_constant)
        max_path = int(math.ceil(base_speed * max(speeds) * (size / 256.0) * T))
        region_g = _inflate(info_g["object_rect"], 6, extra_w=max_path, bounds=size)
        galvo_sharp[speed] = _region_mean_sharpness(refoc_g, region_g)
        images[f"galvo_{speed}x"] = refoc_g

        # mosaic capture at tile resolution; each speed is reconstructed
        # after the same total object displacement (window T / speed), the
        # event-count-matched choice that makes mosaic quality motion-blind
        scene_k, info_k = build_scene(spec, tile)
        t_meas = T / speed
        stream_k, _ = simulate_spatial(scene_k, layout, mos.get("view_spacing", 1.0),
                                       0.0, t_meas, mos.get("frame_rate", 20000.0),
                                       sensor)
        t_meas_us = int(round(t_meas * 1e6))
        recon_k = integrate_events(stream_k, FrameRequest(np.array([t_meas_us])))
        views_k = grid_views(layout.n, mos.get("view_spacing", 1.0))
        lf_k = spatial_demux(recon_k.frames[0], layout, views=views_k)
        refoc_k = refocus(lf_k, info_k["depth"], scene_k.focus_distance,
                          scene_k.disparity_constant)
        disp = info_k["object_speed_px"] * t_meas
        orect = info_k["object_rect"]
        region_k = _inflate((orect[0] + int(round(disp)), orect[1], orect[2], orect[3]),
                            3, bounds=tile)
        kal_sharp[speed] = _region_mean_sharpness(refoc_k, region_k, window=5)
        images[f"kaleidoscope_{speed}x"] = refoc_k

        if speed == speeds[0]:
            box_energy["galvo"] = metrics.laplacian_energy(
                metrics.crop(refoc_g, info_g["box_rect"]))
            box_energy["kaleidoscope"] = metrics.laplacian_energy(
                metrics.crop(refoc_k, info_k["box_rect"]))
            kal_box_events = _count_events_in_tiled_rect(stream_k, layout,
                                                         info_k["box_rect"])

    g_vals = [galvo_sharp[s] for s in speeds]
    k_vals = [kal_sharp[s] for s in speeds]
    k_var = (max(k_vals) - min(k_vals)) / np.mean(k_vals)
    energy_ratio_ok = box_energy["galvo"] >= 20.0 * box_energy["kaleidoscope"] \
        and box_energy["galvo"] > 0
    rows = [
        MetricRow("kaleidoscope_box_events", kal_box_events, "== 0",
                  kal_box_events == 0),
        MetricRow("galvo_box_laplacian_energy", box_energy["galvo"],
                  ">= 20x kaleidoscope", energy_ratio_ok),
        MetricRow("kaleidoscope_box_laplacian_energy", box_energy["kaleidoscope"],
                  "(reference)", True),
        MetricRow("galvo_sharpness_strictly_decreasing",
                  float(all(a > b for a, b in zip(g_vals, g_vals[1:]))),
                  "strict decrease over speeds", all(a > b for a, b in zip(g_vals, g_vals[1:]))),
        MetricRow("kaleidoscope_sharpness_variation", float(k_var), "< 0.10",
                  k_var < 0.10),
    ]
    rows += [MetricRow(f"galvo_sharpness_{s}x", galvo_sharp[s], "", True) for s in speeds]
    rows += [MetricRow(f"kaleidoscope_sharpness_{s}x", kal_sharp[s], "", True) for s in speeds]
    return ScenarioResult("compare", rows, images,
                          data={"galvo_sharpness": galvo_sharp,
                                "kaleidoscope_sharpness": kal_sharp,
                                "box_energy": box_energy})


def _count_events_in_tiled_rect(stream: EventStream, layout: MosaicLayout,
                                rect) -> int:
    """Events falling into a tile-space rect, summed over all mosaic tiles.

    Kaleidoscope tiles may be mirrored, so coordinates are unmirrored with
    each tile's own flip flags before the rect test.
    """
    tw, th = layout.tile_size
    x, y, w, h = rect
    xs = stream.x.astype(np.int64) % tw
    ys = stream.y.astype(np.int64) % th
    if layout.kind == KALEIDOSCOPE_KIND and layout.flip_pattern is not None:
        ti = stream.x.astype(np.int64) // tw
        tj = stream.y.astype(np.int64) // th
        flip_x = layout.flip_pattern[tj, ti, 0]
        flip_y = layout.flip_pattern[tj, ti, 1]
        xs = np.where(flip_x, tw - 1 - xs, xs)
        ys = np.where(flip_y, th - 1 - ys, ys)
    inside = (xs >= x) & (xs < x + w) & (ys >= y) & (ys < y + h)
    return int(np.count_nonzero(inside))


# ---------------------------------------------------------------------------
# scenario: edge orientation (moving grid)
# ---------------------------------------------------------------------------

def run_edges(cfg: dict) -> ScenarioResult:
    """Horizontally moving line grid: which design keeps horizontal edges."""
    size = cfg.get("size", 256)
    sensor = sensor_from_config(cfg.get("sensor"))
    gal = cfg["galvo"]
    mos = cfg["mosaic"]
    curve = ScanCurve.circle(gal["amplitude"], gal["frequency"])
    T = curve.period
    n = tuple(mos.get("n", [4, 4]))
    layout = MosaicLayout("kaleidoscope", n, (size, size))
    tile = size // n[0]

    scene_g, info_g = build_scene(cfg["scene"], size)
    stream_g, _ = simulate_temporal(scene_g, curve, 0.0, 1.05 * T,
                                    gal.get("samples_per_period", 20) * gal["frequency"],
                                    sensor)
    _, lfv = reconstruct_period(stream_g, curve, gal.get("bins", 40),
                                gal.get("oversample", 4))
    refoc_g = refocus(lfv.lightfields[0], info_g["depth"],
                      scene_g.focus_distance, scene_g.disparity_constant)
    h_g, v_g = metrics.oriented_edge_energy(refoc_g, border=8)

    scene_k, info_k = build_scene(cfg["scene"], tile)
    stream_k, _ = simulate_spatial(scene_k, layout, mos.get("view_spacing", 1.0),
                                   0.0, T / 4.0, mos.get("frame_rate", 20000.0), sensor)
    t_meas = int(round(T / 4.0 * 1e6))
    recon_k = integrate_events(stream_k, FrameRequest(np.array([t_meas])))
    lf_k = spatial_demux(recon_k.frames[0], layout,
                         views=grid_views(layout.n, mos.get("view_spacing", 1.0)))
    refoc_k = refocus(lf_k, info_k["depth"], scene_k.focus_distance,
                      scene_k.disparity_constant)
    h_k, v_k = metrics.oriented_edge_energy(refoc_k, border=4)

    ratio_g = h_g / v_g if v_g > 0 else np.inf
    ratio_k = h_k / v_k if v_k > 0 else np.inf
    rows = [
        MetricRow("kaleidoscope_h_to_v_edge_ratio", float(ratio_k), "< 0.1",
                  ratio_k < 0.1),
        MetricRow("galvo_h_to_v_edge_ratio", float(ratio_g), "> 0.5", ratio_g > 0.5),
    ]
    return ScenarioResult("edges", rows,
                          images={"galvo": refoc_g, "kaleidoscope": refoc_k},
                          data={"ratio_galvo": ratio_g, "ratio_kaleidoscope": ratio_k})


# ---------------------------------------------------------------------------
# scenario: high dynamic range
# ---------------------------------------------------------------------------

def _quantized_log_diff(img0: np.ndarray, img1: np.ndarray, exposure: float) -> np.ndarray:
    """8-bit frame-camera pair in log space, same shape as the event output."""
    q0 = np.clip(np.round(img0 * exposure * 255.0), 0, 255) / 255.0
    q1 = np.clip(np.round(img1 * exposure * 255.0), 0, 255) / 255.0
    eps = 1.0 / 512.0
    return np.log(q1 + eps) - np.log(q0 + eps)


def run_hdr(cfg: dict) -> ScenarioResult:
    """Event capture vs 8-bit frame camera on a high-contrast moving scene."""
    size = cfg.get("size", 256)
    sensor = sensor_from_config(cfg.get("sensor"))
    mos = cfg["mosaic"]
    n = tuple(mos.get("n", [2, 2]))
    layout = MosaicLayout("kaleidoscope", n, (size, size))
    tile = size // n[0]
    duration = cfg.get("duration", 0.02)
    threshold = cfg.get("contrast_threshold", 0.04)
    window = cfg.get("contrast_window", 5)

    scene, info = build_scene(cfg["scene"], tile)
    stream, _ = simulate_spatial(scene, layout, mos.get("view_spacing", 1.0),
                                 0.0, duration, mos.get("frame_rate", 2000.0), sensor)
    t1_us = int(round(duration * 1e6))
    recon = integrate_events(stream, FrameRequest(np.array([t1_us])))
    lf = spatial_demux(recon.frames[0], layout,
                       views=grid_views(layout.n, mos.get("view_spacing", 1.0)))
    event_img = lf.data[0]

    cov_bright = metrics.contrast_coverage(event_img, info["bright_mask"], threshold, window)
    cov_dark = metrics.contrast_coverage(event_img, info["dark_mask"], threshold, window)

    frame0 = render_view(scene, ViewOffset(0.0, 0.0), 0.0)
    frame1 = render_view(scene, ViewOffset(0.0, 0.0), duration)
    exposures = cfg.get("exposures")
    if exposures is None:
        base = cfg.get("base_exposure", 2e-5)
        exposures = [base * 2 ** k for k in range(5)]
    frame_rows = []
    all_fail = True
    fc_images = {}
    for e in exposures:
        diff = _quantized_log_diff(frame0, frame1, e)
        cb = metrics.contrast_coverage(diff, info["bright_mask"], threshold, window)
        cd = metrics.contrast_coverage(diff, info["dark_mask"], threshold, window)
        ok_both = cb >= 0.9 and cd >= 0.9
        all_fail &= not ok_both
        frame_rows.append(MetricRow(f"frame_camera_coverage_exposure_{e:g}",
                                    float(min(cb, cd)), "< 0.9 in some region",
                                    not ok_both))
        fc_images[f"frame_{e:g}"] = np.clip(np.round(frame1 * e * 255.0), 0, 255) / 255.0
    rows = [
        MetricRow("event_bright_coverage", float(cov_bright), ">= 0.9", cov_bright >= 0.9),
        MetricRow("event_dark_coverage", float(cov_dark), ">= 0.9", cov_dark >= 0.9),
        MetricRow("frame_camera_fails_every_exposure", float(all_fail), "all exposures",
                  all_fail),
    ] + frame_rows
    images = {"event_reconstruction": event_img, **fc_images}
    return ScenarioResult("hdr", rows, images,
                          data={"coverage": {"bright": cov_bright, "dark": cov_dark}})


# ---------------------------------------------------------------------------
# scenario: scan-frequency sweep against a bandwidth cap
# ---------------------------------------------------------------------------

def run_bandwidth(cfg: dict) -> ScenarioResult:
    """Sweep scan frequency at a fixed readout cap; track loss and sharpness.

    Reconstructed frames are temporally highpassed per period (each pixel's
    period mean removed) before binning: integration from an unknown start
    leaves a constant offset image that would otherwise ride through the
    refocus average and mask the per-view signal.
    """
    size = cfg.get("size", 256)
    frequencies = cfg.get("frequencies", [50, 100, 200, 400, 800])
    sensor = sensor_from_config(cfg.get("sensor"))
    if sensor.bandwidth_cap is None:
        raise ValidationError("bandwidth scenario needs sensor.bandwidth_cap")
    gal = cfg["galvo"]
    bins, oversample = gal.get("bins", 40), gal.get("oversample", 4)
    scene, info = build_scene(cfg["scene"], size)

    drops, static_sharp, fan_sharp = {}, {}, {}
    images = {}
    for f in frequencies:
        curve = ScanCurve.circle(gal["amplitude"], f)
        raw, _ = simulate_temporal(scene, curve, 0.0, 1.05 / f,
                                   gal.get("samples_per_period", 20) * f, sensor)
        capped = apply_bandwidth_limit(raw, sensor)
        drops[f] = 1.0 - len(capped) / len(raw) if len(raw) else 0.0
        times = bin_center_times_us(curve, bins, oversample)
        frames = integrate_events(capped, FrameRequest(times))
        detrended = FrameSequence(times=frames.times,
                                  frames=frames.frames - frames.frames.mean(axis=0))
        lfv = bin_to_lightfield(detrended, curve, bins)
        refoc_static = refocus(lfv.lightfields[0], info["static_depth"],
                               scene.focus_distance, scene.disparity_constant)
        refoc_disc = refocus(lfv.lightfields[0], info["disc_depth"],
                             scene.focus_distance, scene.disparity_constant)
        static_sharp[f] = _region_mean_sharpness(refoc_static, info["static_rect"])
        fan_sharp[f] = _region_mean_sharpness(refoc_disc, info["disc_rect"])
        images[f"refocus_static_{f}Hz"] = refoc_static

    ordered = sorted(frequencies)
    drop_seq = [drops[f] for f in ordered]
    monotone = all(a <= b + 1e-12 for a, b in zip(drop_seq, drop_seq[1:]))
    f_base = ordered[0]
    saturated = [f for f in ordered if drops[f] > 0.01]
    rows = [MetricRow("drop_fraction_non_decreasing", float(monotone),
                      "non-decreasing in frequency", monotone)]
    rows += [MetricRow(f"drop_fraction_{f}Hz", drops[f], "", True) for f in ordered]
    if not saturated:
        rows.append(MetricRow("saturation_reached", 0.0, "some f exceeds cap", False))
    else:
        f_sat = saturated[0]
        above = [f for f in ordered if f > f_sat]
        static_ok = all(static_sharp[f] < static_sharp[f_base] for f in above)
        fan_ok = all(fan_sharp[f] > fan_sharp[f_base] for f in above)
        rows += [
            MetricRow("saturating_frequency_hz", float(f_sat), "", True),
            MetricRow("static_sharpness_drops_past_saturation", float(static_ok),
                      f"< value at {f_base} Hz", static_ok),
            MetricRow("rotating_sharpness_rises_past_saturation", float(fan_ok),
                      f"> value at {f_base} Hz", fan_ok),
        ]
    rows += [MetricRow(f"static_sharpness_{f}Hz", static_sharp[f], "", True) for f in ordered]
    rows += [MetricRow(f"rotating_sharpness_{f}Hz", fan_sharp[f], "", True) for f in ordered]
    return ScenarioResult("bandwidth", rows, images,
                          data={"drops": drops, "static_sharpness": static_sharp,
                                "rotating_sharpness": fan_sharp})


# ---------------------------------------------------------------------------
# scenario: self-calibration of a circular scan
# ---------------------------------------------------------------------------

def run_selfcal(cfg: dict, seed: int | None = None) -> ScenarioResult:
    """Recover scan radius and phase from the capture itself, one seed.

    Two tracking inputs are exercised: frames reconstructed from the event
    stream (the full chain, judged at 5% radius / 5 degrees, since the
    threshold quantization lags the true brightness) and zero-noise rendered
    frames (matching plus fitting alone, judged at 0.05 shift-px).
    """
    size = cfg.get("size", 256)
    sensor = sensor_from_config(cfg.get("sensor"))
    gal = cfg["galvo"]
    bins = gal.get("bins", 40)
    seed = cfg.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    phase_true = float(rng.uniform(0.0, 2.0 * np.pi))
    curve = ScanCurve.circle(gal["amplitude"], gal["frequency"], phase=phase_true)
    T = curve.period
    search_radius = cfg.get("search_radius", 16)

    scene, info = build_scene(dict(cfg["scene"], seed=seed), size)
    plane_depth = cfg["scene"].get("depth", 2.0)
    delta = layer_disparity(plane_depth, scene.focus_distance, scene.disparity_constant)
    radius_true = abs(delta) * gal["amplitude"]

    stream, bframes = simulate_temporal(scene, curve, 0.0, 1.05 * T,
                                        gal.get("samples_per_period", 20) * gal["frequency"],
                                        sensor)
    times = bin_center_times_us(curve, bins, oversample=1)
    recon = integrate_events(stream, FrameRequest(times, initial=bframes.frames[0]))
    result, track = self_calibrate(recon, info["patch_rect"], gal["frequency"],
                                   search_radius=search_radius)

    phase_expected = phase_true if delta > 0 else phase_true + np.pi
    phase_err = abs(math.remainder(result.phase_offset - phase_expected, 2.0 * math.pi))
    radius_err = abs(result.radius - radius_true) / radius_true

    truth_views = delta * scan_eval(curve, recon.times)
    fitted = np.array([[v.s, v.t] for v in result.per_frame_views])
    event_view_err = float(np.max(np.hypot(*(fitted - truth_views).T)))

    # zero-noise track: the same frames rendered directly, no sensor involved
    clean = FrameSequence(times=times * 1e-6, frames=np.stack([
        brightness(render_view(scene, scan_eval(curve, t), t), sensor.log_floor)
        for t in times * 1e-6]))
    clean_result, _ = self_calibrate(clean, info["patch_rect"], gal["frequency"],
                                     search_radius=search_radius)
    clean_fit = np.array([[v.s, v.t] for v in clean_result.per_frame_views])
    clean_view_err = float(np.max(np.hypot(*(clean_fit - truth_views).T)))

    _, lfv = reconstruct_period(stream, curve, bins, initial=bframes.frames[0])
    centers = (np.arange(bins) + 0.5) / bins * T
    known_views = scan_eval(curve, centers)
    binned = np.array([[v.s, v.t] for v in lfv.lightfields[0].views])
    known_err = float(np.max(np.abs(binned - known_views)))

    rows = [
        MetricRow("radius_relative_error", radius_err, "< 0.05", radius_err < 0.05),
        MetricRow("phase_error_deg", math.degrees(phase_err), "< 5 deg",
                  math.degrees(phase_err) < 5.0),
        MetricRow("views_per_period", float(lfv.views_per_period), f"== {bins}",
                  lfv.views_per_period == bins),
        MetricRow("known_curve_bin_offset_error", known_err, "< 1e-9", known_err < 1e-9),
        MetricRow("selfcal_view_error_px", clean_view_err, "< 0.05",
                  clean_view_err < 0.05),
        MetricRow("event_chain_view_error_px", event_view_err, "(informational)", True),
    ]
    return ScenarioResult("selfcal", rows,
                          images={"reference_frame": recon.frames[0]},
                          data={"result": result, "track": track,
                                "radius_true": radius_true, "phase_true": phase_true,
                                "radius_est": result.radius,
                                "phase_err_deg": math.degrees(phase_err),
                                "clean_view_err": clean_view_err})


# ---------------------------------------------------------------------------
# scenario: depth from focus on the two-plane scene
# ---------------------------------------------------------------------------

def depth_slices(lo: float, hi: float, count: int, pin=(2.0, 6.0)) -> np.ndarray:
    """Log-spaced focal sweep with the pinned depths snapped onto it."""
    depths = np.geomspace(lo, hi, count)
    for p in pin:
        depths[np.argmin(np.abs(depths - p))] = p
    return np.unique(depths)


def run_depth(cfg: dict) -> ScenarioResult:
    """Focal-stack depth recovery on the front-block/backdrop scene."""
    size = cfg.get("size", 256)
    scene, info = build_scene(cfg["scene"], size)
    views_cfg = cfg.get("views", {})
    curve = ScanCurve.circle(views_cfg.get("amplitude", 3.0), 1.0)
    count = views_cfg.get("count", 24)
    centers = (np.arange(count) + 0.5) / count
    views = [ViewOffset(float(s), float(t)) for s, t in scan_eval(curve, centers)]
    lf = render_lightfield(scene, views)

    stack_cfg = cfg.get("stack", {})
    depths = depth_slices(stack_cfg.get("lo", 1.5), stack_cfg.get("hi", 8.0),
                          stack_cfg.get("count", 9),
                          pin=(info["front_depth"], info["back_depth"]))
    stack = focal_stack(lf, depths, scene.focus_distance, scene.disparity_constant)
    min_contrast = stack_cfg.get("min_contrast", 1e-5)
    dm = depth_from_focus(stack, min_contrast=min_contrast)

    truth = np.where(info["front_mask"], info["front_depth"],
                     np.where(info["back_mask"], info["back_depth"], np.nan))
    eval_mask = (info["front_mask"] | info["back_mask"]) & dm.valid
    log_d = np.log(depths)
    idx_est = np.argmin(np.abs(np.log(dm.depth[eval_mask])[:, None] - log_d[None, :]), axis=1)
    idx_true = np.argmin(np.abs(np.log(truth[eval_mask])[:, None] - log_d[None, :]), axis=1)
    frac_ok = float(np.mean(np.abs(idx_est - idx_true) <= 1))

    lf_gain = LightField(views=lf.views, data=lf.data * 10.0, timestamp=lf.timestamp)
    dm_gain = depth_from_focus(
        focal_stack(lf_gain, depths, scene.focus_distance, scene.disparity_constant),
        min_contrast=min_contrast * 100.0)
    both = dm.valid & dm_gain.valid
    gain_invariant = bool(np.array_equal(dm.depth[both], dm_gain.depth[both])
                          or np.allclose(dm.depth[both], dm_gain.depth[both],
                                         rtol=1e-9, atol=1e-9))
    rows = [
        MetricRow("fraction_within_one_slice", frac_ok, ">= 0.95", frac_ok >= 0.95),
        MetricRow("gain_invariant_depth", float(gain_invariant), "10x radiance gain",
                  gain_invariant),
        MetricRow("valid_fraction", float(np.mean(eval_mask[info["front_mask"] | info["back_mask"]])),
                  "", True),
    ]
    return ScenarioResult("depth", rows,
                          images={"refocus_front": stack.slices[int(np.argmin(np.abs(depths - info["front_depth"])))],
                                  "refocus_back": stack.slices[int(np.argmin(np.abs(depths - info["back_depth"])))]},
                          data={"depthmap": dm, "depths": depths, "fraction_ok": frac_ok})


# ---------------------------------------------------------------------------
# scenario: depth-disparity line fit
# ---------------------------------------------------------------------------

def run_depthline(cfg: dict) -> ScenarioResult:
    """Recover a known linear depth-disparity law from synthetic points."""
    slope = cfg.get("slope", 1.7)
    intercept = cfg.get("intercept", 12.0)
    lo, hi = cfg.get("depth_range", [15.0, 100.0])
    count = cfg.get("points", 7)
    depths = np.linspace(lo, hi, count)
    disparities = (depths - intercept) / slope
    fit = fit_depth_disparity(list(zip(disparities, depths)))
    span = hi - lo
    round_trip = max(
        abs(slope * d + intercept - (fit.slope * d + fit.intercept))
        for d in disparities)
    rows = [
        MetricRow("slope_error", abs(fit.slope - slope), "< 1e-6 (exact data)",
                  abs(fit.slope - slope) < 1e-6),
        MetricRow("intercept_error", abs(fit.intercept - intercept), "< 1e-6",
                  abs(fit.intercept - intercept) < 1e-6),
        MetricRow("residual_rms_vs_span", fit.residual_rms / span, "< 0.01",
                  fit.residual_rms < 0.01 * span),
        MetricRow("line_round_trip_error", round_trip, "< 1e-9", round_trip < 1e-9),
    ]
    return ScenarioResult("depthline", rows, data={"fit": fit, "depths": depths,
                                                   "disparities": disparities})


SCENARIO_RUNNERS = {
    "compare": run_compare,
    "edges": run_edges,
    "hdr": run_hdr,
    "bandwidth": run_bandwidth,
    "selfcal": run_selfcal,
    "depth": run_depth,
    "depthline": run_depthline,
}
