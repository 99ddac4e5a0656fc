"""Image metrics backing the comparison scenarios and their pass/fail gates."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ValidationError

_SOBEL = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def crop(img: np.ndarray, rect: tuple[int, int, int, int]) -> np.ndarray:
    """Extract (x, y, w, h) from an image."""
    x, y, w, h = rect
    if x < 0 or y < 0 or x + w > img.shape[1] or y + h > img.shape[0]:
        raise ValidationError(f"rect {rect} leaves image {img.shape}")
    return img[y:y + h, x:x + w]


def laplacian_energy(img: np.ndarray) -> float:
    """Mean squared 3x3 Laplacian response; zero on constant images."""
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="edge")
    lap = (padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2]
           + padded[1:-1, 2:] - 4.0 * img)
    return float(np.mean(lap * lap))


def _convolve3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            out += kernel[dy, dx] * padded[dy:dy + img.shape[0], dx:dx + img.shape[1]]
    return out


def oriented_edge_energy(img: np.ndarray, border: int = 4) -> tuple[float, float]:
    """Mean squared Sobel responses, as (horizontal_edges, vertical_edges).

    Horizontal edges are rows of contrast (gradient along y), vertical edges
    are columns (gradient along x).  A border band is excluded so padding
    artifacts do not count.
    """
    img = np.asarray(img, dtype=np.float64)
    gx = _convolve3(img, _SOBEL)
    gy = _convolve3(img, _SOBEL.T)
    b = border
    inner = np.s_[b:img.shape[0] - b, b:img.shape[1] - b]
    return float(np.mean(gy[inner] ** 2)), float(np.mean(gx[inner] ** 2))


def local_contrast(img: np.ndarray, window: int = 5) -> np.ndarray:
    """Windowed standard deviation per pixel."""
    img = np.asarray(img, dtype=np.float64)
    mean = uniform_filter(img, size=window, mode="nearest")
    mean_sq = uniform_filter(img * img, size=window, mode="nearest")
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))


def contrast_coverage(img: np.ndarray, mask: np.ndarray, threshold: float,
                      window: int = 5) -> float:
    """Fraction of masked pixels whose local contrast clears ``threshold``."""
    if not np.any(mask):
        raise ValidationError("empty mask")
    return float(np.mean(local_contrast(img, window)[mask] > threshold))


def region_mean_sharpness(sharp_map: np.ndarray, rect: tuple[int, int, int, int]) -> float:
    return float(crop(sharp_map, rect).mean())


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.mean(diff * diff)))
