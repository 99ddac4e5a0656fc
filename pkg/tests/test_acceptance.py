"""Acceptance gates, one test per criterion.

Each test drives the shipped scenario configs end to end and asserts the
stated tolerance, printing one summary line (run with ``pytest -s`` to see
them live).  The throughput gate is reported, not hard-failed.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from evlf.optics import MosaicLayout, spatial_demux, spatial_mux
from evlf.pipeline import (run_bandwidth, run_compare, run_depth,
                           run_depthline, run_edges, run_hdr, run_selfcal)
from evlf.plenoptic import FrameSequence, LightField, ViewOffset
from evlf.recon import FrameRequest, integrate_events
from evlf.sensor import SensorConfig, generate_events

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return json.loads((SCENARIOS / f"{name}.json").read_text())


def announce(criterion, detail):
    print(f"[acceptance] {criterion}: PASS ({detail})")


def rows_by_name(result):
    return {r.name: r for r in result.rows}


@pytest.fixture(scope="module")
def compare_result():
    return run_compare(load("compare"))


@pytest.fixture(scope="module")
def selfcal_result():
    return run_selfcal(load("selfcal"), seed=0)


@pytest.fixture(scope="module")
def ramp_setup():
    # 100 log-brightness frames, each pixel ramping linearly at its own rate
    rng = np.random.default_rng(42)
    size = 256
    base = rng.uniform(-1.0, 1.0, (size, size))
    slope = rng.uniform(-40.0, 40.0, (size, size))
    times = np.linspace(0.0, 0.1, 100)
    frames = base[None] + slope[None] * times[:, None, None]
    return FrameSequence(times=times, frames=frames)


# ---------------------------------------------------------------------------
# criterion 1: event-model fidelity
# ---------------------------------------------------------------------------

def test_c01_event_model_fidelity(ramp_setup):
    cfg = SensorConfig(c_pos=0.1, c_neg=0.1, refractory_us=0, noise_rate=0.0)
    stream = generate_events(ramp_setup, cfg)
    probe_times = np.array([25_000, 50_000, 75_000, int(ramp_setup.times[-1] * 1e6)])
    recon = integrate_events(
        stream, FrameRequest(probe_times, initial=ramp_setup.frames[0]))
    base = ramp_setup.frames[0]
    rate = (ramp_setup.frames[-1] - base) / ramp_setup.times[-1]
    worst = 0.0
    for i, t_us in enumerate(probe_times):
        truth = base + rate * (t_us * 1e-6)
        worst = max(worst, float(np.max(np.abs(recon.frames[i] - truth))))
    assert worst < cfg.c_pos
    announce("C1 event-model fidelity",
             f"{len(stream)} events, max |recon - truth| = {worst:.6f} < 0.1 "
             f"at every probe time")


# ---------------------------------------------------------------------------
# criterion 2: mux bijection
# ---------------------------------------------------------------------------

def test_c02_mux_bijection_1000_round_trips():
    rng = np.random.default_rng(2024)
    failures = 0
    for trial in range(1000):
        nx, ny = rng.integers(1, 5, size=2)
        tw, th = rng.integers(2, 9, size=2)
        kind = "kaleidoscope" if trial % 2 == 0 else "microlens"
        flips = (rng.random((ny, nx, 2)) < 0.5) if kind == "kaleidoscope" else None
        layout = MosaicLayout(kind, (int(nx), int(ny)),
                              (int(nx * tw), int(ny * th)), flip_pattern=flips)
        data = rng.random((layout.view_count, int(th), int(tw)))
        views = [ViewOffset(float(i), float(j)) for j in range(ny) for i in range(nx)]
        lf = LightField(views=views, data=data)
        back = spatial_demux(spatial_mux(lf, layout), layout, views=views)
        if not np.array_equal(back.data, lf.data):
            failures += 1
    assert failures == 0
    announce("C2 mux bijection", "1000 random layouts, bit-exact, 0 failures")


# ---------------------------------------------------------------------------
# criteria 3 and 4: design comparison
# ---------------------------------------------------------------------------

def test_c03_static_scene_contrast(compare_result):
    rows = rows_by_name(compare_result)
    assert rows["kaleidoscope_box_events"].value == 0
    assert rows["kaleidoscope_box_events"].passed
    assert rows["galvo_box_laplacian_energy"].passed
    announce("C3 static-scene contrast",
             f"mosaic box events = 0, scan box energy = "
             f"{rows['galvo_box_laplacian_energy'].value:.3g} (>= 20x of 0)")


def test_c04_motion_blur_trend(compare_result):
    rows = rows_by_name(compare_result)
    galvo = compare_result.data["galvo_sharpness"]
    speeds = sorted(galvo)
    values = [galvo[s] for s in speeds]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert rows["kaleidoscope_sharpness_variation"].passed
    announce("C4 motion-blur trend",
             f"scan sharpness {['%.4f' % v for v in values]} strictly down, "
             f"mosaic variation {rows['kaleidoscope_sharpness_variation'].value:.3g} < 0.10")


# ---------------------------------------------------------------------------
# criterion 5: edge orientation
# ---------------------------------------------------------------------------

def test_c05_edge_orientation():
    result = run_edges(load("edges"))
    rows = rows_by_name(result)
    assert rows["kaleidoscope_h_to_v_edge_ratio"].value < 0.1
    assert rows["galvo_h_to_v_edge_ratio"].value > 0.5
    announce("C5 edge orientation",
             f"mosaic h/v = {rows['kaleidoscope_h_to_v_edge_ratio'].value:.3g} < 0.1, "
             f"scan h/v = {rows['galvo_h_to_v_edge_ratio'].value:.3g} > 0.5")


# ---------------------------------------------------------------------------
# criterion 6: structured light field
# ---------------------------------------------------------------------------

def test_c06_structured_lightfield(selfcal_result):
    rows = rows_by_name(selfcal_result)
    assert rows["views_per_period"].value == 40
    assert rows["known_curve_bin_offset_error"].value < 1e-9
    assert rows["selfcal_view_error_px"].value < 0.05
    announce("C6 structured light field",
             f"40 views, known-curve error {rows['known_curve_bin_offset_error'].value:.2g}"
             f" < 1e-9, self-calibrated {rows['selfcal_view_error_px'].value:.4f} px < 0.05")


# ---------------------------------------------------------------------------
# criterion 7: calibration recovery over 10 seeds
# ---------------------------------------------------------------------------

def test_c07_calibration_recovery_10_seeds():
    cfg = load("selfcal")
    worst_radius, worst_phase = 0.0, 0.0
    for seed in range(10):
        result = run_selfcal(cfg, seed=seed)
        rows = rows_by_name(result)
        worst_radius = max(worst_radius, rows["radius_relative_error"].value)
        worst_phase = max(worst_phase, rows["phase_error_deg"].value)
        assert rows["radius_relative_error"].passed, f"seed {seed}"
        assert rows["phase_error_deg"].passed, f"seed {seed}"
    announce("C7 calibration recovery",
             f"10 seeds, worst radius err {worst_radius:.3%} < 5%, "
             f"worst phase err {worst_phase:.2f} deg < 5 deg")


# ---------------------------------------------------------------------------
# criterion 8: depth from focus
# ---------------------------------------------------------------------------

def test_c08_depth_from_focus():
    result = run_depth(load("depth"))
    rows = rows_by_name(result)
    assert rows["fraction_within_one_slice"].value >= 0.95
    assert rows["gain_invariant_depth"].passed
    announce("C8 depth from focus",
             f"{rows['fraction_within_one_slice'].value:.1%} within one slice, "
             f"gain invariant")


# ---------------------------------------------------------------------------
# criterion 9: depth-disparity fit
# ---------------------------------------------------------------------------

def test_c09_depth_disparity_fit():
    result = run_depthline(load("depthline"))
    rows = rows_by_name(result)
    assert rows["residual_rms_vs_span"].value < 0.01
    assert all(r.passed for r in result.rows)
    announce("C9 depth-disparity fit",
             f"residual/span = {rows['residual_rms_vs_span'].value:.2g} < 0.01")


# ---------------------------------------------------------------------------
# criterion 10: bandwidth behavior
# ---------------------------------------------------------------------------

def test_c10_bandwidth_behavior():
    result = run_bandwidth(load("bandwidth"))
    rows = rows_by_name(result)
    assert rows["drop_fraction_non_decreasing"].passed
    assert rows["static_sharpness_drops_past_saturation"].passed
    assert rows["rotating_sharpness_rises_past_saturation"].passed
    announce("C10 bandwidth behavior",
             f"drops non-decreasing, saturation at "
             f"{rows['saturating_frequency_hz'].value:.0f} Hz, static down / rotating up")


# ---------------------------------------------------------------------------
# criterion 11: high dynamic range
# ---------------------------------------------------------------------------

def test_c11_hdr():
    result = run_hdr(load("hdr"))
    rows = rows_by_name(result)
    assert rows["event_bright_coverage"].value >= 0.9
    assert rows["event_dark_coverage"].value >= 0.9
    assert rows["frame_camera_fails_every_exposure"].passed
    announce("C11 HDR",
             f"event coverage bright {rows['event_bright_coverage'].value:.1%} / "
             f"dark {rows['event_dark_coverage'].value:.1%}, frame camera fails all exposures")


# ---------------------------------------------------------------------------
# criterion 12: throughput (reported, not hard-failed)
# ---------------------------------------------------------------------------

def test_c12_throughput_reported(ramp_setup):
    cfg = SensorConfig(c_pos=0.1, c_neg=0.1)
    generate_events(ramp_setup, cfg)  # warm caches
    t0 = time.perf_counter()
    stream = generate_events(ramp_setup, cfg)
    elapsed = time.perf_counter() - t0
    rate = len(stream) / elapsed
    gate = "meets" if rate >= 1_000_000 else "BELOW"
    announce("C12 throughput",
             f"{rate / 1e6:.2f} Mev/s over {len(stream)} events, "
             f"{gate} the 1 Mev/s soft gate")
    assert len(stream) > 1_000_000
