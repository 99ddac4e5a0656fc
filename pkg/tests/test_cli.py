import json
from pathlib import Path

import numpy as np
import pytest

from evlf import io as evio
from evlf.cli import main
from evlf.plenoptic import (LightField, SceneLayer, ViewOffset, grid_views,
                            integrate_aperture, render_lightfield)

from conftest import make_scene, noise_texture


def write_simulate_config(path, seed=3):
    cfg = {
        "seed": seed,
        "size": 64,
        "design": "galvo",
        "duration": 0.004,
        "sensor": {"c_pos": 0.1, "c_neg": 0.1, "seed": seed},
        "scene": {"builtin": "single_plane", "seed": seed, "depth": 2.0,
                  "d0": 3.0, "A": 8.0},
        "galvo": {"frequency": 250.0, "amplitude": 3.0, "samples_per_period": 20},
    }
    Path(path).write_text(json.dumps(cfg))


def test_simulate_is_byte_deterministic(tmp_path):
    cfg_path = tmp_path / "sim.json"
    write_simulate_config(cfg_path)
    for d in ("a", "b"):
        rc = main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / d),
                   "--text"])
        assert rc == 0
    assert (tmp_path / "a/events.evf2").read_bytes() == (tmp_path / "b/events.evf2").read_bytes()
    assert (tmp_path / "a/events.evf").read_bytes() == (tmp_path / "b/events.evf").read_bytes()
    manifest = json.loads((tmp_path / "a/run_manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    stream = evio.read_events(tmp_path / "a/events.evf2")
    assert len(stream) > 0


def _sample_lightfield(tmp_path, size=24):
    shape = (size, size)
    scene = make_scene([], SceneLayer(texture=noise_texture(shape, 5),
                                      alpha=np.ones(shape), depth=2.0),
                       d0=3.0, A=8.0)
    lf = render_lightfield(scene, grid_views((2, 2), 1.0))
    lf_dir = tmp_path / "lf"
    evio.write_lightfield_dir(lf, lf_dir)
    return lf_dir


def test_refocus_at_focus_plane_matches_integrated_file(tmp_path):
    lf_dir = _sample_lightfield(tmp_path)
    rc = main(["refocus", "--lightfield", str(lf_dir), "--depth", "3.0",
               "--d0", "3.0", "--A", "8.0", "--out", str(tmp_path / "out")])
    assert rc == 0
    reference = integrate_aperture(evio.read_lightfield_dir(lf_dir))
    evio.write_normalized_frame(tmp_path / "ref.pgm", reference)
    assert (tmp_path / "out/refocus.pgm").read_bytes() == (tmp_path / "ref.pgm").read_bytes()


def test_mux_demux_cli_round_trip(tmp_path):
    lf_dir = _sample_lightfield(tmp_path)
    layout = {"kind": "kaleidoscope", "n": [2, 2], "r": [48, 48]}
    layout_path = tmp_path / "layout.json"
    layout_path.write_text(json.dumps(layout))
    assert main(["mux", "--layout", str(layout_path), "--lightfield", str(lf_dir),
                 "--out", str(tmp_path / "m")]) == 0
    assert main(["mux", "--layout", str(layout_path), "--demux",
                 "--mosaic", str(tmp_path / "m/mosaic.pgm"),
                 "--out", str(tmp_path / "d")]) == 0
    original = evio.read_lightfield_dir(lf_dir)
    back = evio.read_lightfield_dir(tmp_path / "d/lightfield")
    assert np.array_equal(back.data, original.data)


def test_focalstack_writes_slices_and_index(tmp_path):
    lf_dir = _sample_lightfield(tmp_path)
    rc = main(["focalstack", "--lightfield", str(lf_dir), "--depths", "1.5,2.0,4.0",
               "--d0", "3.0", "--A", "8.0", "--out", str(tmp_path / "fs")])
    assert rc == 0
    index = json.loads((tmp_path / "fs/stack_index.json").read_text())
    assert index["depths"] == [1.5, 2.0, 4.0]
    for name in index["files"]:
        assert (tmp_path / "fs" / name).exists()


def test_depthline_subcommand_writes_reports(tmp_path):
    cfg = {"scenario": "depthline", "slope": 1.7, "intercept": 12.0,
           "depth_range": [15.0, 100.0], "points": 7}
    cfg_path = tmp_path / "line.json"
    cfg_path.write_text(json.dumps(cfg))
    rc = main(["depth", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    metrics = (tmp_path / "o/metrics.csv").read_text()
    assert "pass" in metrics and "fail" not in metrics
    assert (tmp_path / "o/depth_line.png").exists()
    assert (tmp_path / "o/run_manifest.json").exists()


def test_missing_config_is_exit_2(tmp_path):
    assert main(["compare", "--out", str(tmp_path)]) == 2
    assert main(["compare", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 2


def test_degenerate_calibration_is_exit_3(tmp_path):
    cfg = {
        "seed": 0,
        "size": 64,
        "sensor": {"c_pos": 0.1, "c_neg": 0.1},
        # constant texture: nothing to track
        "scene": {"builtin": "single_plane", "depth": 2.0, "d0": 3.0, "A": 8.0,
                  "lo": 0.5, "hi": 0.5},
        "galvo": {"frequency": 250.0, "amplitude": 3.0, "samples_per_period": 20,
                  "bins": 8},
        "search_radius": 4,
    }
    cfg_path = tmp_path / "cal.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["calibrate", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 3
