import numpy as np
import pytest

from evlf.errors import ValidationError
from evlf.plenoptic import FrameSequence
from evlf.sensor import (EventStream, SensorConfig, add_noise,
                         apply_bandwidth_limit, brightness, final_reference,
                         generate_events)


# ---------------------------------------------------------------------------
# independent oracle: dense 1-microsecond level-crossing simulation
# ---------------------------------------------------------------------------

def dense_oracle(times_s, values, c_pos, c_neg, refractory_us):
    """Step a single pixel's piecewise-linear signal at 1 us resolution.

    A side disarms when its level is passed without firing (refractory) and
    re-arms once the signal returns inside the band.  Assumes crossings are
    separated by more than one tick, which the test signals guarantee.
    """
    times_us = [int(round(t * 1e6)) for t in times_s]
    ref = values[0]
    t_last = -10 ** 12
    armed_pos = armed_neg = True
    events = []
    for seg in range(len(values) - 1):
        t0, t1 = times_us[seg], times_us[seg + 1]
        b0, b1 = values[seg], values[seg + 1]
        for t in range(t0 + 1, t1 + 1):
            b = b0 + (b1 - b0) * (t - t0) / (t1 - t0)
            if b < ref + c_pos:
                armed_pos = True
            if b > ref - c_neg:
                armed_neg = True
            if armed_pos and b - ref >= c_pos:
                if t - t_last >= refractory_us:
                    events.append((t, 1))
                    ref += c_pos
                    t_last = t
                else:
                    armed_pos = False
            elif armed_neg and ref - b >= c_neg:
                if t - t_last >= refractory_us:
                    events.append((t, -1))
                    ref -= c_neg
                    t_last = t
                else:
                    armed_neg = False
    return events


def single_pixel_frames(times_s, values):
    arr = np.array(values, dtype=np.float64).reshape(-1, 1, 1)
    return FrameSequence(times=np.array(times_s), frames=arr)


def test_brightness_examples():
    assert np.allclose(brightness(np.ones((2, 2))), 0.0)
    assert np.allclose(brightness(np.full((2, 2), np.e)), 1.0)
    assert np.allclose(brightness(np.zeros((2, 2)), 1e-4), np.log(1e-4))


def test_constant_brightness_yields_no_events():
    frames = single_pixel_frames([0.0, 0.001, 0.002], [0.5, 0.5, 0.5])
    stream = generate_events(frames, SensorConfig())
    assert len(stream) == 0


def test_ramp_crossings_match_dense_oracle():
    # one pixel ramps 0 -> 0.35 over 1000 us with C = 0.1
    frames = single_pixel_frames([0.0, 0.001], [0.0, 0.35])
    cfg = SensorConfig(c_pos=0.1, c_neg=0.1, refractory_us=0)
    stream = generate_events(frames, cfg)
    expected = dense_oracle([0.0, 0.001], [0.0, 0.35], 0.1, 0.1, 0)
    assert [(int(t), int(p)) for t, p in zip(stream.t, stream.p)] == expected
    assert expected == [(286, 1), (572, 1), (858, 1)]


def test_updown_signal_matches_dense_oracle():
    rng = np.random.default_rng(3)
    times = np.arange(9) * 0.0005
    values = np.cumsum(rng.normal(0, 0.25, size=9))
    cfg = SensorConfig(c_pos=0.13, c_neg=0.09, refractory_us=0)
    stream = generate_events(single_pixel_frames(times, values), cfg)
    expected = dense_oracle(times, list(values), 0.13, 0.09, 0)
    got = [(int(t), int(p)) for t, p in zip(stream.t, stream.p)]
    assert got == expected


def test_refractory_suppression_loses_events():
    # second crossing at ~571 us falls inside a 400 us window: lost for good
    frames = single_pixel_frames([0.0, 0.001], [0.0, 0.35])
    cfg = SensorConfig(c_pos=0.1, c_neg=0.1, refractory_us=400)
    stream = generate_events(frames, cfg)
    assert [int(t) for t in stream.t] == [286]
    # reference did not advance for the suppressed crossings
    ref = final_reference(frames, cfg)
    assert ref[0, 0] == pytest.approx(0.1)


def test_refractory_gap_invariant():
    rng = np.random.default_rng(11)
    times = np.arange(12) * 0.0003
    frames = FrameSequence(times=times,
                           frames=np.cumsum(rng.normal(0, 0.2, (12, 3, 3)), axis=0))
    cfg = SensorConfig(refractory_us=250)
    stream = generate_events(frames, cfg)
    assert len(stream) > 0
    pix = stream.pixel_index()
    order = np.argsort(pix, kind="stable")
    same = pix[order][1:] == pix[order][:-1]
    gaps = np.diff(stream.t[order])[same]
    assert np.all(gaps >= 250)


def test_reconstruction_bound_and_polarity():
    rng = np.random.default_rng(5)
    times = np.arange(40) * 0.0002
    frames = FrameSequence(times=times,
                           frames=np.cumsum(rng.normal(0, 0.08, (40, 6, 6)), axis=0))
    cfg = SensorConfig(c_pos=0.1, c_neg=0.12, refractory_us=0)
    ref = final_reference(frames, cfg)
    assert np.max(np.abs(ref - frames.frames[-1])) < max(cfg.c_pos, cfg.c_neg)


def test_gain_invariance_of_event_stream():
    rng = np.random.default_rng(8)
    radiance = np.cumsum(rng.random((20, 4, 4)) + 0.05, axis=0)
    times = np.arange(20) * 0.0004
    cfg = SensorConfig(c_pos=0.1, c_neg=0.1)
    a = generate_events(FrameSequence(times=times, frames=brightness(radiance)), cfg)
    b = generate_events(FrameSequence(times=times, frames=brightness(radiance * 37.5)), cfg)
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.p, b.p)


def test_stream_is_sorted_and_strict_per_pixel():
    rng = np.random.default_rng(9)
    times = np.arange(30) * 0.0001
    frames = FrameSequence(times=times,
                           frames=np.cumsum(rng.normal(0, 0.3, (30, 8, 8)), axis=0))
    stream = generate_events(frames, SensorConfig())
    stream.validate()


def test_determinism():
    rng = np.random.default_rng(10)
    frames = FrameSequence(times=np.arange(10) * 0.001,
                           frames=np.cumsum(rng.normal(0, 0.2, (10, 5, 5)), axis=0))
    a = generate_events(frames, SensorConfig())
    b = generate_events(frames, SensorConfig())
    assert np.array_equal(a.t, b.t) and np.array_equal(a.p, b.p)


def test_generate_rejects_bad_frames():
    with pytest.raises(ValidationError):
        generate_events(single_pixel_frames([0.0], [1.0]), SensorConfig())
    with pytest.raises(ValidationError):
        FrameSequence(times=np.array([0.0, 0.0]), frames=np.zeros((2, 2, 2)))


# ---------------------------------------------------------------------------
# noise injection
# ---------------------------------------------------------------------------

def _empty(w=16, h=16):
    return EventStream.empty(w, h, 0.1)


def test_noise_rate_zero_is_identity():
    stream = _empty()
    assert add_noise(stream, SensorConfig(noise_rate=0.0)) is stream


def test_noise_count_within_poisson_bounds():
    cfg = SensorConfig(noise_rate=5.0, seed=123)
    duration_s = 2.0
    stream = add_noise(_empty(), cfg, 0, int(duration_s * 1e6))
    lam = cfg.noise_rate * duration_s * 16 * 16
    assert abs(len(stream) - lam) < 4.0 * np.sqrt(lam)
    stream.validate()


def test_noise_is_deterministic_per_seed():
    cfg = SensorConfig(noise_rate=3.0, seed=7)
    a = add_noise(_empty(), cfg, 0, 500_000)
    b = add_noise(_empty(), cfg, 0, 500_000)
    assert np.array_equal(a.t, b.t) and np.array_equal(a.x, b.x) \
        and np.array_equal(a.p, b.p)


# ---------------------------------------------------------------------------
# bandwidth limiting
# ---------------------------------------------------------------------------

def _uniform_stream(n, t_span_us, w=64, h=64, seed=0):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, t_span_us, size=n))
    return EventStream(t=t, x=rng.integers(0, w, n).astype(np.uint16),
                       y=rng.integers(0, h, n).astype(np.uint16),
                       p=np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8),
                       width=w, height=h, threshold=0.1)


def test_stream_under_cap_unchanged():
    stream = _uniform_stream(100, 1000)
    out = apply_bandwidth_limit(stream, SensorConfig(bandwidth_cap=5e6))
    assert out is stream


def test_exact_retention_count():
    # 10000 events inside one 1 ms window, cap 5e6/s -> exactly 5000 kept
    stream = _uniform_stream(10_000, 1000)
    out = apply_bandwidth_limit(stream, SensorConfig(bandwidth_cap=5e6, seed=1))
    assert len(out) == 5000
    assert np.all(np.diff(out.t) >= 0)


def test_drop_fraction_monotone_in_rate():
    # Monte Carlo over rising input rates at a fixed cap
    cap = 2e6
    fractions = []
    for n in (1000, 2000, 4000, 8000, 16000):
        stream = _uniform_stream(n, 1000, seed=n)
        out = apply_bandwidth_limit(stream, SensorConfig(bandwidth_cap=cap, seed=3))
        fractions.append(1.0 - len(out) / n)
    assert all(a <= b + 1e-12 for a, b in zip(fractions, fractions[1:]))


def test_retained_events_form_an_input_subsequence():
    stream = _uniform_stream(5000, 2000, seed=4)
    out = apply_bandwidth_limit(stream, SensorConfig(bandwidth_cap=1e6, seed=5))
    assert 0 < len(out) < len(stream)
    src = list(zip(stream.t, stream.x, stream.y, stream.p))
    i = 0
    for ev in zip(out.t, out.x, out.y, out.p):
        while i < len(src) and src[i] != ev:
            i += 1
        assert i < len(src), "retained event out of order or missing"
        i += 1
