"""Readers and writers for every on-disk artifact.

Event streams travel as either a human-inspectable text format (``evf1``)
or a packed binary (``EVF2``, 13-byte little-endian records) since
acceptance scenes reach tens of millions of events.  Images are binary
netpbm (PGM P5 with 8-bit or big-endian 16-bit samples, PPM P6), chosen
for dependency-free bit-exact goldens.  All parsers reject malformed input
with the offending line, byte, or record named; none repair silently.
Byte-level layouts are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .plenoptic import LayeredScene, LightField, SceneLayer, ViewOffset
from .sensor import EventStream

_EVF2_MAGIC = b"EVF2"
_EVF2_HEADER = struct.Struct("<4sHHfI")
_EVF2_RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

def write_events(stream: EventStream, path, fmt: str = "binary") -> None:
    """Serialize an event stream; ``fmt`` is ``text`` (evf1) or ``binary`` (EVF2)."""
    path = Path(path)
    if fmt == "text":
        with path.open("w") as f:
            f.write(f"# evf1 {stream.width} {stream.height} {stream.threshold!r}\n")
            if stream.metadata:
                f.write(f"# meta {json.dumps(stream.metadata, sort_keys=True)}\n")
            for i in range(len(stream)):
                f.write(f"{stream.t[i]},{stream.x[i]},{stream.y[i]},{stream.p[i]}\n")
    elif fmt == "binary":
        records = np.empty(len(stream), dtype=_EVF2_RECORD)
        records["t"] = stream.t
        records["x"] = stream.x
        records["y"] = stream.y
        records["p"] = (stream.p > 0).astype(np.uint8)
        with path.open("wb") as f:
            f.write(_EVF2_HEADER.pack(_EVF2_MAGIC, stream.width, stream.height,
                                      stream.threshold, len(stream)))
            f.write(records.tobytes())
    else:
        raise ValidationError(f"unknown event format {fmt!r}")


def read_events(path, fmt: str | None = None) -> EventStream:
    """Parse an event file; format is sniffed from the leading bytes when omitted."""
    path = Path(path)
    if fmt is None:
        with path.open("rb") as f:
            head = f.read(6)
        fmt = "binary" if head.startswith(_EVF2_MAGIC) else "text"
    if fmt == "binary":
        return _read_events_binary(path)
    if fmt == "text":
        return _read_events_text(path)
    raise ValidationError(f"unknown event format {fmt!r}")


def _read_events_binary(path: Path) -> EventStream:
    raw = path.read_bytes()
    if len(raw) < _EVF2_HEADER.size:
        raise ParseError(f"{path}: truncated header, {len(raw)} bytes")
    magic, width, height, threshold, count = _EVF2_HEADER.unpack_from(raw)
    if magic != _EVF2_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r} at byte 0")
    body = raw[_EVF2_HEADER.size:]
    expected = count * _EVF2_RECORD.itemsize
    if len(body) < expected:
        got = len(body) // _EVF2_RECORD.itemsize
        raise ParseError(
            f"{path}: truncated at record {got} of {count} "
            f"(byte {_EVF2_HEADER.size + len(body)})")
    if len(body) > expected:
        raise ParseError(f"{path}: {len(body) - expected} trailing bytes after {count} records")
    records = np.frombuffer(body, dtype=_EVF2_RECORD)
    stream = EventStream(
        t=records["t"].astype(np.int64), x=records["x"].copy(),
        y=records["y"].copy(), p=np.where(records["p"] > 0, 1, -1).astype(np.int8),
        width=int(width), height=int(height), threshold=float(threshold),
    )
    _check_stream(stream, path)
    return stream


def _read_events_text(path: Path) -> EventStream:
    with path.open("r") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 5 or parts[0] != "#" or parts[1] != "evf1":
            raise ParseError(f"{path}:1: expected '# evf1 width height C' header")
        try:
            width, height, threshold = int(parts[2]), int(parts[3]), float(parts[4])
        except ValueError as exc:
            raise ParseError(f"{path}:1: bad header field: {exc}") from exc
        metadata: dict = {}
        ts, xs, ys, ps = [], [], [], []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# meta "):
                    try:
                        metadata = json.loads(line[len("# meta "):])
                    except json.JSONDecodeError as exc:
                        raise ParseError(f"{path}:{lineno}: bad metadata JSON") from exc
                continue
            fields = line.split(",")
            if len(fields) != 4:
                raise ParseError(f"{path}:{lineno}: expected 't,x,y,p', got {line!r}")
            try:
                ts.append(int(fields[0]))
                xs.append(int(fields[1]))
                ys.append(int(fields[2]))
                ps.append(int(fields[3]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-integer field: {exc}") from exc
            if ps[-1] not in (1, -1):
                raise ParseError(f"{path}:{lineno}: polarity must be 1 or -1, got {ps[-1]}")
    stream = EventStream(
        t=np.asarray(ts, np.int64), x=np.asarray(xs, np.uint16),
        y=np.asarray(ys, np.uint16), p=np.asarray(ps, np.int8),
        width=width, height=height, threshold=threshold, metadata=metadata,
    )
    _check_stream(stream, path)
    return stream


def _check_stream(stream: EventStream, path: Path) -> None:
    try:
        stream.validate()
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# netpbm images
# ---------------------------------------------------------------------------

def write_image(path, img: np.ndarray, maxval: int | None = None) -> None:
    """Write PGM (2-D) or PPM (H, W, 3) with 8- or 16-bit samples."""
    path = Path(path)
    img = np.asarray(img)
    if maxval is None:
        maxval = 255 if img.dtype == np.uint8 else 65535
    if not (0 < maxval < 65536):
        raise ValidationError(f"maxval must be in [1, 65535], got {maxval}")
    if np.any(img < 0) or np.any(img > maxval):
        raise ValidationError("sample values exceed the stated maxval")
    if img.ndim == 2:
        magic = "P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = "P6"
    else:
        raise ValidationError(f"image must be (H, W) or (H, W, 3), got {img.shape}")
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = img.shape[:2]
    with path.open("wb") as f:
        f.write(f"{magic}\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(img.astype(dtype).tobytes())


def read_image(path) -> tuple[np.ndarray, int]:
    """Read PGM/PPM; returns ``(samples, maxval)`` with dtype uint8 or uint16."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] not in (b"P5", b"P6"):
        raise ParseError(f"{path}: not a binary PGM/PPM (magic {raw[:2]!r})")
    channels = 1 if raw[:2] == b"P5" else 3
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(raw):
            raise ParseError(f"{path}: header ended at byte {pos}")
        c = raw[pos:pos + 1]
        if c == b"#":
            pos = raw.index(b"\n", pos) + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(raw) and not raw[end:end + 1].isspace():
                end += 1
            tokens.append(raw[pos:end])
            pos = end
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric header token: {exc}") from exc
    if not (0 < maxval < 65536):
        raise ParseError(f"{path}: maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * channels * dtype.itemsize
    body = raw[pos:pos + need]
    if len(body) < need:
        raise ParseError(f"{path}: pixel data truncated at byte {pos + len(body)}")
    img = np.frombuffer(body, dtype=dtype).reshape(
        (h, w) if channels == 1 else (h, w, 3))
    if dtype.itemsize == 2:
        img = img.astype(np.uint16)
    else:
        img = img.copy()
    return img, maxval


def write_normalized_frame(path, img: np.ndarray) -> None:
    """Store a float image as 16-bit PGM plus a JSON sidecar with (min, max)."""
    path = Path(path)
    img = np.asarray(img, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    scale = (hi - lo) or 1.0
    quant = np.round((img - lo) / scale * 65535.0).astype(np.uint16)
    write_image(path, quant, 65535)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps({"min": lo, "max": hi}) + "\n")


def read_normalized_frame(path) -> np.ndarray:
    path = Path(path)
    img, maxval = read_image(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    lo, hi = meta["min"], meta["max"]
    return img.astype(np.float64) / maxval * (hi - lo) + lo


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------

def _load_texture(base: Path, name: str, scale: float) -> np.ndarray:
    tex_path = base / name
    if not tex_path.exists():
        raise ValidationError(f"texture file not found: {tex_path}")
    img, maxval = read_image(tex_path)
    return img.astype(np.float64) / maxval * scale


def _layer_from_config(entry: dict, base: Path) -> SceneLayer:
    tex = _load_texture(base, entry["texture"], float(entry.get("radiance_scale", 1.0)))
    if "alpha" in entry:
        alpha_img, maxval = read_image(base / entry["alpha"])
        alpha = alpha_img.astype(np.float64) / maxval
    else:
        alpha = np.ones(tex.shape[:2])
    return SceneLayer(
        texture=tex, alpha=alpha, depth=float(entry["depth"]),
        velocity=tuple(entry.get("velocity", (0.0, 0.0))),
        angular_velocity=float(entry.get("angular_velocity", 0.0)),
        rotation_center=tuple(entry["rotation_center"]) if "rotation_center" in entry else None,
    )


def read_scene(path) -> LayeredScene:
    """Parse a scene document (JSON per ``docs/scene_schema.json``)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    base = path.parent
    for key in ("sensor_size", "focus_distance", "disparity_constant", "background"):
        if key not in doc:
            raise ValidationError(f"{path}: missing required key {key!r}")
    return LayeredScene(
        layers=[_layer_from_config(e, base) for e in doc.get("layers", [])],
        background=_layer_from_config(doc["background"], base),
        focus_distance=float(doc["focus_distance"]),
        disparity_constant=float(doc["disparity_constant"]),
        sensor_size=tuple(doc["sensor_size"]),
    )


# ---------------------------------------------------------------------------
# light field directories
# ---------------------------------------------------------------------------

def write_lightfield_dir(lf: LightField, out_dir) -> None:
    """One 16-bit PGM per view plus ``index.json`` (shared normalization)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lo, hi = float(lf.data.min()), float(lf.data.max())
    scale = (hi - lo) or 1.0
    files = []
    for i in range(len(lf)):
        name = f"view_{i:03d}.pgm"
        quant = np.round((lf.data[i] - lo) / scale * 65535.0).astype(np.uint16)
        write_image(out_dir / name, quant, 65535)
        files.append(name)
    index = {
        "views": [[v.s, v.t] for v in lf.views],
        "files": files,
        "width": int(lf.data.shape[2]),
        "height": int(lf.data.shape[1]),
        "timestamp": lf.timestamp,
        "norm": {"min": lo, "max": hi},
    }
    (out_dir / "index.json").write_text(json.dumps(index, indent=1) + "\n")


def read_lightfield_dir(in_dir) -> LightField:
    in_dir = Path(in_dir)
    index_path = in_dir / "index.json"
    if not index_path.exists():
        raise ValidationError(f"missing light field index: {index_path}")
    index = json.loads(index_path.read_text())
    lo, hi = index["norm"]["min"], index["norm"]["max"]
    slices = []
    for name in index["files"]:
        img, maxval = read_image(in_dir / name)
        if img.shape[:2] != (index["height"], index["width"]):
            raise ParseError(f"{in_dir / name}: dimensions disagree with index.json")
        slices.append(img.astype(np.float64) / maxval * (hi - lo) + lo)
    return LightField(
        views=[ViewOffset(float(s), float(t)) for s, t in index["views"]],
        data=np.stack(slices), timestamp=index.get("timestamp"),
    )


# ---------------------------------------------------------------------------
# depth maps
# ---------------------------------------------------------------------------

def write_depthmap(path, depth: np.ndarray, units: str = "scene",
                   preview: bool = True) -> None:
    """Float32 grid behind a one-line text header, plus a color PPM preview."""
    path = Path(path)
    h, w = depth.shape
    with path.open("wb") as f:
        f.write(f"DPF1 {w} {h} {units} nan\n".encode("ascii"))
        f.write(depth.astype("<f4").tobytes())
    if preview:
        _write_depth_preview(path.with_suffix(path.suffix + ".ppm"), depth)


def read_depthmap(path) -> tuple[np.ndarray, str]:
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ParseError(f"{path}: missing header line")
    parts = raw[:nl].decode("ascii", "replace").split()
    if len(parts) != 5 or parts[0] != "DPF1":
        raise ParseError(f"{path}: expected 'DPF1 w h units sentinel' header")
    w, h = int(parts[1]), int(parts[2])
    body = raw[nl + 1:]
    if len(body) != w * h * 4:
        raise ParseError(f"{path}: expected {w * h * 4} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64), parts[3]


def _write_depth_preview(path, depth: np.ndarray) -> None:
    import matplotlib.cm as cm

    finite = np.isfinite(depth)
    rgb = np.zeros((*depth.shape, 3), dtype=np.uint8)
    if np.any(finite):
        lo, hi = depth[finite].min(), depth[finite].max()
        norm = (depth - lo) / ((hi - lo) or 1.0)
        colored = cm.viridis(np.nan_to_num(norm, nan=0.0))[..., :3]
        rgb = (colored * 255).astype(np.uint8)
        rgb[~finite] = 0
    write_image(path, rgb, 255)


# ---------------------------------------------------------------------------
# calibration documents
# ---------------------------------------------------------------------------

def write_calibration(path, result) -> None:
    doc = {
        "circle_center": list(result.circle_center),
        "radius": result.radius,
        "phase_offset": result.phase_offset,
        "direction": result.direction,
        "per_frame_views": [[v.s, v.t] for v in result.per_frame_views],
    }
    if result.depth_fit is not None:
        doc["depth_fit"] = {
            "slope": result.depth_fit.slope,
            "intercept": result.depth_fit.intercept,
            "residual_rms": result.depth_fit.residual_rms,
            "disparity_range": list(result.depth_fit.disparity_range),
        }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_calibration(path):
    from .calib import CalibrationResult, DepthDisparityFit

    doc = json.loads(Path(path).read_text())
    fit = None
    if "depth_fit" in doc:
        d = doc["depth_fit"]
        fit = DepthDisparityFit(slope=d["slope"], intercept=d["intercept"],
                                residual_rms=d["residual_rms"],
                                disparity_range=tuple(d["disparity_range"]))
    return CalibrationResult(
        circle_center=tuple(doc["circle_center"]), radius=doc["radius"],
        phase_offset=doc["phase_offset"],
        per_frame_views=[ViewOffset(s, t) for s, t in doc["per_frame_views"]],
        direction=doc.get("direction", 1), depth_fit=fit,
    )
