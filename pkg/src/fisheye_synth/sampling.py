"""Image resampling at continuous pixel coordinates (centre of pixel j is at j)."""
import numpy as np


def sample_nearest(img, u, v):
    """Nearest-neighbour lookup with edge clamping; never blends values."""
    h, w = img.shape[:2]
    j = np.clip(np.floor(np.asarray(u) + 0.5), 0, w - 1).astype(np.intp)
    i = np.clip(np.floor(np.asarray(v) + 0.5), 0, h - 1).astype(np.intp)
    return img[i, j]


def sample_bilinear(img, u, v):
    """Bilinear interpolation with edge clamping; returns float64."""
    h, w = img.shape[:2]
    u = np.clip(np.asarray(u, dtype=np.float64), 0, w - 1)
    v = np.clip(np.asarray(v, dtype=np.float64), 0, h - 1)
    j0 = np.minimum(np.floor(u).astype(np.intp), max(w - 2, 0))
    i0 = np.minimum(np.floor(v).astype(np.intp), max(h - 2, 0))
    j1 = np.minimum(j0 + 1, w - 1)
    i1 = np.minimum(i0 + 1, h - 1)
    a = u - j0
    b = v - i0
    if img.ndim == 3:
        a = a[..., None]
        b = b[..., None]
    f = img.astype(np.float64, copy=False)
    top = f[i0, j0] * (1 - a) + f[i0, j1] * a
    bot = f[i1, j0] * (1 - a) + f[i1, j1] * a
    return top * (1 - b) + bot * b


def to_uint8(x):
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)
