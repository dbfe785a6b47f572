"""Perspective-to-fisheye warping and paired image/label augmentation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .sampling import sample_bilinear, sample_nearest, to_uint8


class PairingError(ValueError):
    pass


def fisheye_source_map(shape, fisheye_f: float, source_focal: float | None = None):
    """Source coordinates sampled by each output pixel of the warp.

    The output follows the equidistant law ``r_d = f * theta`` and the source
    is an ideal pinhole, ``r_u = f_src * tan(theta)``, both centred on the
    image centre. Returns ``(su, sv, valid)``; ``valid`` is False for
    theta >= pi/2.
    """
    if not fisheye_f > 0:
        raise ValueError(f"fisheye focal length must be positive, got {fisheye_f}")
    f_src = fisheye_f if source_focal is None else source_focal
    if not f_src > 0:
        raise ValueError(f"source focal length must be positive, got {f_src}")
    h, w = shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = u - cx, v - cy
    r_d = np.hypot(dx, dy)
    theta = r_d / fisheye_f
    valid = theta < math.pi / 2
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r_d > 0, f_src * np.tan(np.where(valid, theta, 0.0)) / r_d, f_src / fisheye_f)
    return cx + dx * scale, cy + dy * scale, valid


def perspective_to_fisheye(img: np.ndarray, fisheye_f: float, kind: str = "rgb", source_focal: float | None = None,
                           void_value=0):
    """Warp a centred pinhole image into an equidistant fisheye of the same size.

    ``kind="label"`` uses nearest-neighbour lookups so class values are never
    mixed. Returns ``(warped, void)`` where ``void`` marks pixels beyond 90
    degrees or whose source falls outside the input.
    """
    if kind not in ("rgb", "label"):
        raise ValueError(f"kind must be 'rgb' or 'label', got {kind!r}")
    img = np.asarray(img)
    h, w = img.shape[:2]
    su, sv, valid = fisheye_source_map(img.shape, fisheye_f, source_focal)
    valid &= (su >= -0.5) & (su <= w - 0.5) & (sv >= -0.5) & (sv <= h - 0.5)
    out = np.empty_like(img)
    out[...] = void_value
    if kind == "label":
        out[valid] = sample_nearest(img, su[valid], sv[valid])
    else:
        vals = sample_bilinear(img, su[valid], sv[valid])
        out[valid] = to_uint8(vals) if img.dtype == np.uint8 else vals.astype(img.dtype)
    return out, ~valid


# --- augmentation ----------------------------------------------------------------

_OPS = {"flip": 0, "brightness": 1, "noise": 2, "hue": 3, "saturation": 4}


@dataclass(frozen=True)
class AugmentConfig:
    """Random photometric/geometric augmentation parameters.

    Brightness deltas are fractions of full scale, noise is in 8-bit
    intensity levels and hue shifts are in turns. ``op_probability`` is the
    chance that each photometric op fires for a sample.
    """

    flip_probability: float = 0.5
    brightness_max_delta: float = 0.5
    noise_mean: float = 0.0
    noise_std: float = 8.0
    hue_max_delta: float = 0.05
    saturation_range: tuple[float, float] = (0.8, 1.2)
    op_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "saturation_range", tuple(float(s) for s in self.saturation_range))
        for name in ("brightness_max_delta", "noise_std", "hue_max_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("flip_probability", "op_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        lo, hi = self.saturation_range
        if lo < 0 or lo > hi:
            raise ValueError(f"saturation_range must satisfy 0 <= lower <= upper, got {self.saturation_range}")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, (1.0, 1.0), 0.0, seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["saturation_range"] = list(self.saturation_range)
        return d


def _rng(seed: int, sample_index: int, op: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(sample_index), _OPS[op]]))


def augment_pair(rgb: np.ndarray, label: np.ndarray, cfg: AugmentConfig, sample_index: int,
                 force: dict | None = None):
    """Augment one (rgb, label) pair.

    Every random draw comes from a generator keyed on ``(cfg.seed,
    sample_index, op)``, so the result for a sample does not depend on which
    other samples were processed. The flip is applied to both images; all
    photometric ops touch ``rgb`` only. ``force`` maps op names to booleans
    to override the random fire/skip decision.
    """
    if rgb.shape[:2] != label.shape[:2]:
        raise PairingError(f"rgb {rgb.shape[:2]} and label {label.shape[:2]} differ in size")
    force = force or {}

    def fires(op, p):
        g = _rng(cfg.seed, sample_index, op)
        decision = g.uniform() < p
        return force.get(op, decision), g

    out_rgb, out_label = rgb, label
    flip, _ = fires("flip", cfg.flip_probability)
    if flip:
        out_rgb = out_rgb[:, ::-1]
        out_label = out_label[:, ::-1]
    out_label = np.ascontiguousarray(out_label)

    x = None

    def working():
        return out_rgb.astype(np.float64) if x is None else x

    on, g = fires("brightness", cfg.op_probability)
    if on and cfg.brightness_max_delta > 0:
        x = working() + g.uniform(-cfg.brightness_max_delta, cfg.brightness_max_delta) * 255.0
        x = np.clip(x, 0.0, 255.0)

    on, g = fires("hue", cfg.op_probability)
    shift = g.uniform(-cfg.hue_max_delta, cfg.hue_max_delta) if on and cfg.hue_max_delta > 0 else 0.0
    on, g2 = fires("saturation", cfg.op_probability)
    lo, hi = cfg.saturation_range
    sat = g2.uniform(lo, hi) if on and (lo, hi) != (1.0, 1.0) else 1.0
    if shift or sat != 1.0:
        hsv = rgb_to_hsv(working() / 255.0)
        hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
        hsv[..., 1] = np.clip(hsv[..., 1] * sat, 0.0, 1.0)
        x = hsv_to_rgb(hsv) * 255.0

    on, g = fires("noise", cfg.op_probability)
    if on and (cfg.noise_std > 0 or cfg.noise_mean != 0):
        x = working()
        x = np.clip(x + g.normal(cfg.noise_mean, cfg.noise_std, size=x.shape), 0.0, 255.0)

    if x is not None:
        out_rgb = to_uint8(x)
    return np.ascontiguousarray(out_rgb), out_label
