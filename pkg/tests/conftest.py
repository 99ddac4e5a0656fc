import numpy as np
import pytest

from evlf.plenoptic import LayeredScene, SceneLayer


def noise_texture(shape, seed=0, lo=0.2, hi=1.0, sigma=1.2):
    rng = np.random.default_rng(seed)
    from scipy.ndimage import gaussian_filter
    tex = gaussian_filter(rng.random(shape), sigma, mode="wrap")
    t0, t1 = tex.min(), tex.max()
    return (tex - t0) / (t1 - t0) * (hi - lo) + lo


def uniform_layer(shape, value, depth, **kw):
    return SceneLayer(texture=np.full(shape, float(value)),
                      alpha=np.ones(shape), depth=depth, **kw)


def make_scene(layers, background, d0=4.0, A=8.0, size=None):
    h, w = background.texture.shape[:2]
    return LayeredScene(layers=layers, background=background, focus_distance=d0,
                        disparity_constant=A, sensor_size=(w, h))


@pytest.fixture
def small_shape():
    return (24, 24)
