"""Command-line entry point wiring the capture, processing, and report paths.

Every run writes a ``run_manifest.json`` beside its outputs (resolved
config, seed, produced files, wall time, metric values) so results can be
reproduced by replay.  Exit codes: 0 success, 2 configuration or
validation error, 3 degenerate input or calibration failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io as evio
from . import pipeline, report
from .errors import DegenerateInputError, EvlfError, ValidationError
from .lfops import depth_from_focus, focal_stack, refocus
from .optics import ScanCurve
from .plenoptic import grid_views
from .presets import build_scene
from .recon import FrameRequest, integrate_events
from .sensor import add_noise, apply_bandwidth_limit


def _load_config(args) -> dict:
    if not args.config:
        raise ValidationError("this subcommand needs --config <file>")
    path = Path(args.config)
    if not path.exists():
        raise ValidationError(f"config not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg.setdefault("sensor", {})["seed"] = args.seed
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, subcommand: str, cfg: dict, seed, outputs,
                    wall: float, metric_rows=None) -> None:
    doc = {
        "subcommand": subcommand,
        "config": cfg,
        "seed": seed,
        "outputs": sorted(str(p) for p in outputs),
        "wall_time_s": wall,
        "metrics": {r.name: r.value for r in (metric_rows or [])},
    }
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=1, default=str) + "\n")


def _emit_scenario(result, out: Path, extra_outputs=()) -> list[Path]:
    outputs = list(extra_outputs)
    csv_path = out / "metrics.csv"
    report.write_metrics_csv(csv_path, result.rows)
    outputs.append(csv_path)
    if result.images:
        grid_path = out / f"{result.name}_overview.png"
        report.save_image_grid(grid_path, result.images, title=result.name)
        outputs.append(grid_path)
        for name, img in result.images.items():
            p = out / f"{name}.pgm"
            evio.write_normalized_frame(p, np.asarray(img, dtype=np.float64))
            outputs.append(p)
    for row in result.rows:
        status = "pass" if row.passed else "FAIL"
        print(f"[{status}] {row.name} = {row.value:.6g} {row.tolerance}")
    return outputs


def _scene_for(cfg: dict, size: int):
    spec = cfg["scene"]
    if "path" in spec:
        return evio.read_scene(spec["path"]), {}
    return build_scene(spec, size)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _thread_count(args) -> int:
    value = getattr(args, "threads", "1")
    if value == "auto":
        return os.cpu_count() or 1
    try:
        return max(1, int(value))
    except ValueError as exc:
        raise ValidationError(f"--threads must be an integer or 'auto', got {value!r}") from exc


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    threads = _thread_count(args)
    sensor = pipeline.sensor_from_config(cfg.get("sensor"))
    size = cfg.get("size", 256)
    design = cfg.get("design", "galvo")
    duration = cfg.get("duration", 0.005)
    if design == "galvo":
        gal = cfg["galvo"]
        curve = ScanCurve.circle(gal["amplitude"], gal["frequency"],
                                 phase=gal.get("phase", 0.0))
        scene, _ = _scene_for(cfg, size)
        stream, _ = pipeline.simulate_temporal(
            scene, curve, 0.0, duration,
            gal.get("samples_per_period", 20) * gal["frequency"], sensor,
            threads=threads)
    elif design in ("kaleidoscope", "mla"):
        mos = cfg["mosaic"]
        n = tuple(mos.get("n", [4, 4]))
        kind = "kaleidoscope" if design == "kaleidoscope" else "microlens"
        layout = pipeline.MosaicLayout(kind, n, (size, size))
        scene, _ = _scene_for(cfg, size // n[0])
        stream, _ = pipeline.simulate_spatial(
            scene, layout, mos.get("view_spacing", 1.0), 0.0, duration,
            mos.get("frame_rate", 5000.0), sensor, threads=threads)
    else:
        raise ValidationError(f"unknown design {design!r}")
    if sensor.noise_rate > 0:
        stream = add_noise(stream, sensor, 0, int(duration * 1e6))
    if sensor.bandwidth_cap is not None:
        stream = apply_bandwidth_limit(stream, sensor)
    outputs = []
    bin_path = out / "events.evf2"
    evio.write_events(stream, bin_path, "binary")
    outputs.append(bin_path)
    if args.text:
        text_path = out / "events.evf"
        evio.write_events(stream, text_path, "text")
        outputs.append(text_path)
    print(f"simulated {len(stream)} events ({design}, {duration} s)")
    _write_manifest(out, "simulate", cfg, cfg.get("seed", sensor.seed), outputs,
                    time.perf_counter() - t_start)
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    scenario = cfg.get("scenario", "compare")
    if scenario not in ("compare", "edges"):
        raise ValidationError(f"compare runs 'compare' or 'edges' configs, not {scenario!r}")
    result = pipeline.SCENARIO_RUNNERS[scenario](cfg)
    outputs = _emit_scenario(result, out)
    if scenario == "compare":
        speeds = cfg.get("speeds", [1, 2, 4, 8])
        fig = out / "sharpness_vs_speed.png"
        report.save_line_plot(
            fig, speeds,
            {"galvo": [result.data["galvo_sharpness"][s] for s in speeds],
             "kaleidoscope": [result.data["kaleidoscope_sharpness"][s] for s in speeds]},
            xlabel="object speed multiplier", ylabel="region sharpness", logy=True)
        outputs.append(fig)
    _write_manifest(out, "compare", cfg, cfg.get("seed"), outputs,
                    time.perf_counter() - t_start, result.rows)
    return 0 if result.passed else 3


def cmd_hdr(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    result = pipeline.run_hdr(cfg)
    outputs = _emit_scenario(result, out)
    _write_manifest(out, "hdr", cfg, cfg.get("seed"), outputs,
                    time.perf_counter() - t_start, result.rows)
    return 0 if result.passed else 3


def cmd_bandwidth(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    result = pipeline.run_bandwidth(cfg)
    outputs = _emit_scenario(result, out)
    freqs = sorted(result.data["drops"])
    fig = out / "bandwidth_trends.png"
    report.save_line_plot(
        fig, freqs,
        {"drop fraction": [result.data["drops"][f] for f in freqs]},
        xlabel="scan frequency (Hz)", ylabel="dropped fraction", logx=True)
    outputs.append(fig)
    _write_manifest(out, "bandwidth", cfg, cfg.get("seed"), outputs,
                    time.perf_counter() - t_start, result.rows)
    return 0 if result.passed else 3


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    result = pipeline.run_selfcal(cfg, seed=args.seed)
    outputs = _emit_scenario(result, out)
    calib_path = out / "calibration.json"
    evio.write_calibration(calib_path, result.data["result"])
    outputs.append(calib_path)
    circle_path = out / "shift_circle.png"
    report.save_shift_circle(circle_path, result.data["track"], result.data["result"])
    outputs.append(circle_path)
    _write_manifest(out, "calibrate", cfg, cfg.get("seed"), outputs,
                    time.perf_counter() - t_start, result.rows)
    return 0 if result.passed else 3


def cmd_depth(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    t_start = time.perf_counter()
    if cfg.get("scenario") == "depthline":
        result = pipeline.run_depthline(cfg)
        outputs = _emit_scenario(result, out)
        fig = out / "depth_line.png"
        report.save_depth_line_figure(fig, result.data["disparities"],
                                      result.data["depths"], result.data["fit"])
        outputs.append(fig)
    else:
        result = pipeline.run_depth(cfg)
        outputs = _emit_scenario(result, out)
        dm = result.data["depthmap"]
        dpath = out / "depth.dpf"
        evio.write_depthmap(dpath, dm.depth)
        outputs += [dpath, dpath.with_suffix(dpath.suffix + ".ppm")]
        fig = out / "depth_map.png"
        report.save_depth_figure(fig, dm)
        outputs.append(fig)
    _write_manifest(out, "depth", cfg, cfg.get("seed"), outputs,
                    time.perf_counter() - t_start, result.rows)
    return 0 if result.passed else 3


def cmd_refocus(args) -> int:
    out = _out_dir(args)
    t_start = time.perf_counter()
    lf = evio.read_lightfield_dir(args.lightfield)
    img = refocus(lf, args.depth, args.d0, args.A)
    path = out / "refocus.pgm"
    evio.write_normalized_frame(path, img)
    _write_manifest(out, "refocus",
                    {"lightfield": args.lightfield, "depth": args.depth,
                     "d0": args.d0, "A": args.A},
                    None, [path], time.perf_counter() - t_start)
    print(f"refocused at depth {args.depth} -> {path}")
    return 0


def cmd_focalstack(args) -> int:
    out = _out_dir(args)
    t_start = time.perf_counter()
    lf = evio.read_lightfield_dir(args.lightfield)
    depths = [float(d) for d in args.depths.split(",")]
    stack = focal_stack(lf, depths, args.d0, args.A)
    outputs = []
    index = {"depths": depths, "files": []}
    for i, d in enumerate(depths):
        name = f"slice_{i:03d}.pgm"
        evio.write_normalized_frame(out / name, stack.slices[i])
        index["files"].append(name)
        outputs.append(out / name)
    (out / "stack_index.json").write_text(json.dumps(index, indent=1) + "\n")
    outputs.append(out / "stack_index.json")
    if args.depth_map:
        dm = depth_from_focus(stack, min_contrast=args.min_contrast)
        evio.write_depthmap(out / "depth.dpf", dm.depth)
        outputs.append(out / "depth.dpf")
    _write_manifest(out, "focalstack",
                    {"lightfield": args.lightfield, "depths": depths,
                     "d0": args.d0, "A": args.A}, None, outputs,
                    time.perf_counter() - t_start)
    return 0


def cmd_mux(args) -> int:
    out = _out_dir(args)
    t_start = time.perf_counter()
    layout = pipeline.layout_from_dict(json.loads(Path(args.layout).read_text()))
    if args.demux:
        mosaic = evio.read_normalized_frame(args.mosaic)
        lf = pipeline.spatial_demux(mosaic, layout)
        evio.write_lightfield_dir(lf, out / "lightfield")
        outputs = [out / "lightfield"]
        print(f"demuxed mosaic into {len(lf)} views")
    else:
        lf = evio.read_lightfield_dir(args.lightfield)
        mosaic = pipeline.spatial_mux(lf, layout)
        evio.write_normalized_frame(out / "mosaic.pgm", mosaic)
        outputs = [out / "mosaic.pgm"]
        print(f"muxed {len(lf)} views into {out / 'mosaic.pgm'}")
    _write_manifest(out, "mux", {"layout": args.layout, "demux": args.demux},
                    None, outputs, time.perf_counter() - t_start)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario/config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--threads", default=os.environ.get("EVLF_THREADS", "1"),
                   help="worker threads for view rendering, or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evlf",
        description="Event-camera light field simulation and processing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scene -> optics -> sensor -> event file")
    _add_common(p)
    p.add_argument("--text", action="store_true", help="also write the text event format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="mosaic vs scan design comparison scenarios")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("hdr", help="high dynamic range capture scenario")
    _add_common(p)
    p.set_defaults(func=cmd_hdr)

    p = sub.add_parser("bandwidth", help="scan-frequency sweep against a readout cap")
    _add_common(p)
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("calibrate", help="self-calibrate a simulated circular scan")
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("depth", help="depth-from-focus or depth-line scenarios")
    _add_common(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("refocus", help="refocus a stored light field at one depth")
    _add_common(p)
    p.add_argument("--lightfield", required=True, help="light field directory")
    p.add_argument("--depth", type=float, required=True)
    p.add_argument("--d0", type=float, required=True)
    p.add_argument("--A", type=float, required=True)
    p.set_defaults(func=cmd_refocus)

    p = sub.add_parser("focalstack", help="refocus a light field at a depth sweep")
    _add_common(p)
    p.add_argument("--lightfield", required=True)
    p.add_argument("--depths", required=True, help="comma-separated depths")
    p.add_argument("--d0", type=float, required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--depth-map", action="store_true")
    p.add_argument("--min-contrast", type=float, default=1e-5)
    p.set_defaults(func=cmd_focalstack)

    p = sub.add_parser("mux", help="fold a light field into a mosaic, or unfold one")
    _add_common(p)
    p.add_argument("--layout", required=True, help="mosaic layout JSON")
    p.add_argument("--lightfield", help="input light field directory (mux)")
    p.add_argument("--mosaic", help="input mosaic image (demux)")
    p.add_argument("--demux", action="store_true")
    p.set_defaults(func=cmd_mux)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, EvlfError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
