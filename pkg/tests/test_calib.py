import numpy as np
import pytest

from evlf.calib import (CircleFit, PatchShift, ShiftTrack, assign_views,
                        fit_circle, fit_depth_disparity, match_template,
                        track_patch)
from evlf.errors import (CalibrationError, DegenerateInputError,
                         ValidationError)
from evlf.plenoptic import FrameSequence, bilinear_sample

from conftest import noise_texture


# ---------------------------------------------------------------------------
# match_template
# ---------------------------------------------------------------------------

def shifted_copy(img, dx, dy):
    h, w = img.shape
    out = np.zeros_like(img)
    ys0, ys1 = max(0, dy), min(h, h + dy)
    xs0, xs1 = max(0, dx), min(w, w + dx)
    out[ys0:ys1, xs0:xs1] = img[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
    return out


def test_exact_shift_recovered():
    patch = noise_texture((20, 20), seed=1)
    frame = shifted_copy(patch, 3, -2)
    dx, dy, score = match_template(patch, frame, search_radius=4)
    assert dx == pytest.approx(3.0, abs=0.01)
    assert dy == pytest.approx(-2.0, abs=0.01)
    assert score > 0.999


def test_self_match_is_zero_shift():
    patch = noise_texture((16, 16), seed=2)
    dx, dy, score = match_template(patch, patch, search_radius=3)
    assert dx == pytest.approx(0.0, abs=0.05)
    assert dy == pytest.approx(0.0, abs=0.05)
    assert score == pytest.approx(1.0, abs=1e-9)


def _dense_ncc_peak(patch, frame, up=10, radius=1.5):
    """Oracle: argmax of NCC between 10x-upsampled images around zero."""
    h, w = patch.shape
    yy, xx = np.mgrid[0:h - 2, 0:w - 2].astype(np.float64) + 1.0
    best = (None, -2.0)
    steps = np.arange(-radius, radius + 1e-9, 1.0 / up)
    for dy in steps:
        for dx in steps:
            shifted = bilinear_sample(frame, xx + dx, yy + dy)
            ref = bilinear_sample(patch, xx, yy)
            a = shifted - shifted.mean()
            b = ref - ref.mean()
            s = (a * b).sum() / np.sqrt((a * a).sum() * (b * b).sum())
            if s > best[1]:
                best = ((dx, dy), s)
    return best[0]


def test_subpixel_shift_within_band():
    patch = noise_texture((24, 24), seed=3, sigma=2.0)
    h, w = patch.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    frame = bilinear_sample(patch, xx - 0.5, yy)  # content moved +0.5 in x
    dx, dy, _ = match_template(patch, frame, search_radius=3)
    assert 0.3 <= dx <= 0.7
    assert abs(dy) < 0.2
    ox, oy = _dense_ncc_peak(patch, frame)
    assert dx == pytest.approx(ox, abs=0.15)


def test_zero_variance_patch_rejected():
    with pytest.raises(DegenerateInputError):
        match_template(np.ones((8, 8)), np.ones((16, 16)), 2)


def test_translation_consistency():
    base = noise_texture((40, 40), seed=4, sigma=2.0)
    patch = base[12:28, 12:28]
    d1 = match_template(patch, base[10:30, 10:30], 4)
    shifted = shifted_copy(base, 2, 1)
    d2 = match_template(patch, shifted[10:30, 10:30], 6)
    assert d2[0] - d1[0] == pytest.approx(2.0, abs=0.1)
    assert d2[1] - d1[1] == pytest.approx(1.0, abs=0.1)


def test_track_patch_requires_margin():
    frames = FrameSequence(times=np.array([0.0, 0.1]),
                           frames=np.stack([noise_texture((20, 20))] * 2))
    with pytest.raises(ValidationError):
        track_patch(frames, (0, 0, 8, 8), search_radius=4)


# ---------------------------------------------------------------------------
# fit_circle
# ---------------------------------------------------------------------------

def test_exact_circle_recovered_to_1e9():
    angles = 2 * np.pi * np.arange(40) / 40
    pts = np.column_stack([2.0 + 5.0 * np.cos(angles), 3.0 + 5.0 * np.sin(angles)])
    fit = fit_circle(pts)
    assert fit.center[0] == pytest.approx(2.0, abs=1e-9)
    assert fit.center[1] == pytest.approx(3.0, abs=1e-9)
    assert fit.radius == pytest.approx(5.0, abs=1e-9)
    assert fit.rms_residual < 1e-9


def test_noisy_circle_radius_within_tenth_pixel():
    # Monte Carlo oracle: 95th percentile of the radius error over 100 trials
    angles = 2 * np.pi * np.arange(40) / 40
    errs = []
    for trial in range(100):
        rng = np.random.default_rng(trial)
        pts = np.column_stack([
            2.0 + 5.0 * np.cos(angles) + rng.normal(0, 0.2, 40),
            3.0 + 5.0 * np.sin(angles) + rng.normal(0, 0.2, 40)])
        errs.append(abs(fit_circle(pts).radius - 5.0))
    assert np.quantile(errs, 0.95) < 0.1


def test_equilateral_triangle_circumscribed():
    angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
    pts = np.column_stack([np.cos(angles), np.sin(angles)])
    fit = fit_circle(pts)
    assert fit.center[0] == pytest.approx(0.0, abs=1e-12)
    assert fit.center[1] == pytest.approx(0.0, abs=1e-12)
    assert fit.radius == pytest.approx(1.0, abs=1e-12)


def test_degenerate_points_rejected():
    with pytest.raises(DegenerateInputError):
        fit_circle([(0, 0), (1, 1)])
    with pytest.raises(DegenerateInputError):
        fit_circle([(0, 0), (1, 1), (2, 2), (3, 3)])


# ---------------------------------------------------------------------------
# assign_views
# ---------------------------------------------------------------------------

def synthetic_track(phase, freq=250.0, radius=6.0, center=(1.0, -2.0), n=40,
                    noise=0.0, seed=0):
    t = (np.arange(n) + 0.5) / n / freq
    theta = 2 * np.pi * freq * t + phase
    rng = np.random.default_rng(seed)
    dx = center[0] + radius * np.sin(theta) + rng.normal(0, noise, n)
    dy = center[1] + radius * np.cos(theta) + rng.normal(0, noise, n)
    shifts = [PatchShift(k, dx[k], dy[k], 1.0) for k in range(n)]
    return ShiftTrack(reference_patch=(0, 0, 8, 8), shifts=shifts), t


def _grid_search_phase(track, fit, freq, times):
    """Oracle: brute-force phase at 1e-4 rad resolution."""
    dx, dy = track.as_arrays()
    u, v = dx - fit.center[0], dy - fit.center[1]
    best = (None, np.inf)
    for phi in np.arange(0, 2 * np.pi, 1e-4):
        theta = 2 * np.pi * freq * times + phi
        err = np.sum((u - fit.radius * np.sin(theta)) ** 2
                     + (v - fit.radius * np.cos(theta)) ** 2)
        if err < best[1]:
            best = (phi, err)
    return best[0]


def test_phase_recovery_matches_grid_search():
    track, t = synthetic_track(phase=1.0, noise=0.03, seed=5)
    fit = fit_circle(np.column_stack(track.as_arrays()))
    result = assign_views(track, fit, 250.0, t)
    oracle = _grid_search_phase(track, fit, 250.0, t)
    wrap = lambda a: abs((a + np.pi) % (2 * np.pi) - np.pi)
    assert wrap(result.phase_offset - 1.0) < 0.02
    assert wrap(result.phase_offset - oracle) < 0.001


def test_exact_track_views_land_on_truth():
    track, t = synthetic_track(phase=2.3)
    fit = fit_circle(np.column_stack(track.as_arrays()))
    result = assign_views(track, fit, 250.0, t)
    theta = 2 * np.pi * 250.0 * t + 2.3
    truth = np.column_stack([6.0 * np.sin(theta), 6.0 * np.cos(theta)])
    got = np.array([[v.s, v.t] for v in result.per_frame_views])
    assert np.max(np.abs(got - truth)) < 1e-6
    assert result.direction == 1


def test_reversed_scan_direction_detected():
    track, t = synthetic_track(phase=0.7)
    # reverse time ordering of the measured shifts
    rev = ShiftTrack(track.reference_patch,
                     [PatchShift(k, s.dx, s.dy, 1.0)
                      for k, s in enumerate(reversed(track.shifts))])
    fit = fit_circle(np.column_stack(rev.as_arrays()))
    result = assign_views(rev, fit, 250.0, t)
    got = np.array([[v.s, v.t] for v in result.per_frame_views])
    truth = np.column_stack(rev.as_arrays()) - np.array(fit.center)
    assert np.max(np.abs(got - truth)) < 1e-6


def test_zero_frequency_rejected():
    track, t = synthetic_track(phase=0.5)
    fit = fit_circle(np.column_stack(track.as_arrays()))
    with pytest.raises(DegenerateInputError):
        assign_views(track, fit, 0.0, t)


def test_large_residual_fails_calibration():
    track, t = synthetic_track(phase=0.5, noise=2.5, seed=9)
    fit = fit_circle(np.column_stack(track.as_arrays()))
    with pytest.raises(CalibrationError):
        assign_views(track, fit, 250.0, t, residual_limit=0.5)


# ---------------------------------------------------------------------------
# fit_depth_disparity
# ---------------------------------------------------------------------------

def test_exact_line_recovered():
    pairs = [(d, 2.0 * d + 5.0) for d in (0.0, 1.0, 4.0, 9.0)]
    fit = fit_depth_disparity(pairs)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(5.0, abs=1e-12)
    assert fit.residual_rms < 1e-12


def test_two_points_interpolate():
    fit = fit_depth_disparity([(1.0, 3.0), (5.0, 11.0)])
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.residual_rms < 1e-12


def test_fit_is_permutation_invariant():
    rng = np.random.default_rng(3)
    pairs = [(float(d), float(1.3 * d + 4 + rng.normal(0, 0.5))) for d in range(8)]
    a = fit_depth_disparity(pairs)
    b = fit_depth_disparity(list(reversed(pairs)))
    assert a.slope == pytest.approx(b.slope, abs=1e-12)
    assert a.residual_rms == pytest.approx(b.residual_rms, abs=1e-12)


def test_equal_disparities_rejected():
    with pytest.raises(DegenerateInputError):
        fit_depth_disparity([(2.0, 1.0), (2.0, 9.0)])
