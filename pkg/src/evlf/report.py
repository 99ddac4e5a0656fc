"""Report rendering: metric tables as CSV and summary figures as PNG.

Every scenario run drops a ``metrics.csv`` (metric, value, tolerance,
pass/fail) next to its image outputs so acceptance checks are machine
readable, plus matplotlib figures for eyeballing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


@dataclass
class MetricRow:
    name: str
    value: float
    tolerance: str
    passed: bool


def write_metrics_csv(path, rows: list[MetricRow]) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value", "tolerance", "pass"])
        for row in rows:
            writer.writerow([row.name, f"{row.value:.9g}", row.tolerance,
                             "pass" if row.passed else "fail"])


def save_image_grid(path, images: dict, cols: int = 4, cmap: str = "gray",
                    title: str | None = None) -> None:
    """Panel of labeled images, shared grayscale mapping per panel."""
    names = list(images)
    rows = (len(names) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.2 * rows),
                             squeeze=False)
    for ax in axes.flat:
        ax.axis("off")
    for ax, name in zip(axes.flat, names):
        img = np.asarray(images[name], dtype=np.float64)
        ax.imshow(img, cmap=cmap)
        ax.set_title(name, fontsize=9)
        ax.axis("off")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_line_plot(path, x, series: dict, xlabel: str, ylabel: str,
                   logx: bool = False, logy: bool = False,
                   title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for label, ys in series.items():
        ax.plot(x, ys, marker="o", label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_shift_circle(path, track, result) -> None:
    """Measured patch shifts with the fitted scan circle overlaid."""
    dx, dy = track.as_arrays()
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.scatter(dx, dy, s=18, label="measured shifts")
    theta = np.linspace(0, 2 * np.pi, 256)
    cx, cy = result.circle_center
    ax.plot(cx + result.radius * np.sin(theta), cy + result.radius * np.cos(theta),
            "r-", lw=1.0, label=f"fit r={result.radius:.2f} px")
    ax.set_aspect("equal")
    ax.set_xlabel("shift x (px)")
    ax.set_ylabel("shift y (px)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_depth_figure(path, depthmap, title: str = "depth") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(depthmap.depth, cmap="viridis")
    fig.colorbar(im, ax=ax, label="depth (scene units)")
    ax.set_title(title)
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_depth_line_figure(path, disparities, depths, fit) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.scatter(disparities, depths, s=24, label="calibration points")
    xs = np.linspace(min(disparities), max(disparities), 50)
    ax.plot(xs, fit.slope * xs + fit.intercept, "r-",
            label=f"depth = {fit.slope:.3f} disp + {fit.intercept:.2f}")
    ax.set_xlabel("disparity (px)")
    ax.set_ylabel("depth (scene units)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
