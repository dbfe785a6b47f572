"""Analytic fisheye projection models.

Camera frame convention (used everywhere in this package): right-handed,
+z is the optical axis, +x points right and +y points down. Image
coordinates ``u`` grow to the right and ``v`` grow downwards, and pixel
``(row, col)`` has its centre at ``(u, v) = (col, row)``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Slack on the FOV comparison so that directions exactly on theta_max survive
# the round trip through trig functions.
THETA_TOL = 1e-12
UNIT_TOL = 1e-6


class InvalidAngleError(ValueError):
    pass


class RadiusOutOfRangeError(ValueError):
    pass


class InvalidDirectionError(ValueError):
    pass


class ProjectionModel(str, enum.Enum):
    EQUIDISTANT = "equidistant"
    STEREOGRAPHIC = "stereographic"
    EQUISOLID = "equisolid"
    ORTHOGRAPHIC = "orthographic"

    @property
    def theta_limit(self) -> float:
        """Largest polar angle the radius law accepts."""
        return math.pi / 2 if self is ProjectionModel.ORTHOGRAPHIC else math.pi

    @property
    def limit_inclusive(self) -> bool:
        # stereographic diverges at pi
        return self is not ProjectionModel.STEREOGRAPHIC


def as_model(model) -> ProjectionModel:
    if isinstance(model, ProjectionModel):
        return model
    try:
        return ProjectionModel(str(model).lower())
    except ValueError:
        names = ", ".join(m.value for m in ProjectionModel)
        raise ValueError(f"unknown projection model {model!r} (expected one of {names})") from None


def _radius(model: ProjectionModel, f, theta):
    if model is ProjectionModel.EQUIDISTANT:
        return f * theta
    if model is ProjectionModel.STEREOGRAPHIC:
        return 2.0 * f * np.tan(theta / 2.0)
    if model is ProjectionModel.EQUISOLID:
        return 2.0 * f * np.sin(theta / 2.0)
    return f * np.sin(theta)


def _theta(model: ProjectionModel, f, r):
    """Inverse radius law; NaN where ``r`` is outside the model's range."""
    r = np.asarray(r, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        if model is ProjectionModel.EQUIDISTANT:
            theta = r / f
            theta = np.where(theta <= math.pi, theta, np.nan)
        elif model is ProjectionModel.STEREOGRAPHIC:
            theta = 2.0 * np.arctan(r / (2.0 * f))
        elif model is ProjectionModel.EQUISOLID:
            theta = 2.0 * np.arcsin(r / (2.0 * f))
        else:
            theta = np.arcsin(r / f)
    return np.where(r >= 0, theta, np.nan)


def max_radius(model, f: float) -> float:
    """Supremum of the radius law over the model's angular domain."""
    model = as_model(model)
    if model is ProjectionModel.STEREOGRAPHIC:
        return math.inf
    return float(_radius(model, f, model.theta_limit))


def radius_from_theta(model, f: float, theta: float) -> float:
    """Image radius in pixels of a ray at polar angle ``theta`` (radians).

    >>> round(radius_from_theta("equidistant", 159.0, math.pi / 2), 3)
    249.757
    """
    model = as_model(model)
    if not f > 0:
        raise ValueError(f"focal length must be positive, got {f}")
    lim = model.theta_limit
    ok = 0.0 <= theta <= lim if model.limit_inclusive else 0.0 <= theta < lim
    if not ok:
        bound = "<=" if model.limit_inclusive else "<"
        raise InvalidAngleError(
            f"{model.value} projection needs 0 <= theta {bound} {lim:.6f}, got {theta!r}"
        )
    return float(_radius(model, f, theta))


def theta_from_radius(model, f: float, r: float) -> float:
    """Polar angle (radians) that images at radius ``r`` pixels."""
    model = as_model(model)
    if not f > 0:
        raise ValueError(f"focal length must be positive, got {f}")
    if not r >= 0 or r > max_radius(model, f):
        raise RadiusOutOfRangeError(
            f"radius {r!r} outside [0, {max_radius(model, f):.6f}] for {model.value} with f={f}"
        )
    return float(_theta(model, f, r))


@dataclass(frozen=True)
class FisheyeCameraSpec:
    """Intrinsics of an ideal radially symmetric fisheye camera."""

    model: ProjectionModel = ProjectionModel.EQUIDISTANT
    focal_length_px: float = 159.0
    width_px: int = 512
    height_px: int = 512
    principal_point: tuple[float, float] | None = None
    theta_max: float = math.pi / 2
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        model = as_model(self.model)
        object.__setattr__(self, "model", model)
        if not self.focal_length_px > 0:
            raise ValueError(f"focal_length_px must be positive, got {self.focal_length_px}")
        if int(self.width_px) < 1 or int(self.height_px) < 1:
            raise ValueError("image dimensions must be positive")
        object.__setattr__(self, "width_px", int(self.width_px))
        object.__setattr__(self, "height_px", int(self.height_px))
        if not 0 < self.theta_max <= math.pi:
            raise InvalidAngleError(f"theta_max must lie in (0, pi], got {self.theta_max}")
        if model is ProjectionModel.ORTHOGRAPHIC and self.theta_max > math.pi / 2:
            raise InvalidAngleError("orthographic projection requires theta_max <= pi/2")
        if model is ProjectionModel.STEREOGRAPHIC and self.theta_max >= math.pi:
            raise InvalidAngleError("stereographic projection requires theta_max < pi")
        if self.principal_point is None:
            pp = ((self.width_px - 1) / 2.0, (self.height_px - 1) / 2.0)
        else:
            pp = (float(self.principal_point[0]), float(self.principal_point[1]))
        object.__setattr__(self, "principal_point", pp)

        msgs = []
        half = min(self.width_px, self.height_px) / 2.0
        if self.image_circle_radius > half:
            msgs.append(
                f"image circle radius {self.image_circle_radius:.2f}px exceeds "
                f"half the short image side ({half:.1f}px)"
            )
            log.warning(msgs[-1])
        object.__setattr__(self, "warnings", tuple(msgs))

    @property
    def image_circle_radius(self) -> float:
        return float(_radius(self.model, self.focal_length_px, self.theta_max))

    @property
    def shape(self) -> tuple[int, int]:
        return self.height_px, self.width_px

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "focal_length_px": self.focal_length_px,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "principal_point": list(self.principal_point),
            "theta_max": self.theta_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FisheyeCameraSpec":
        pp = d.get("principal_point")
        return cls(
            model=d.get("model", "equidistant"),
            focal_length_px=float(d.get("focal_length_px", 159.0)),
            width_px=int(d.get("width_px", 512)),
            height_px=int(d.get("height_px", 512)),
            principal_point=tuple(pp) if pp is not None else None,
            theta_max=float(d.get("theta_max", math.pi / 2)),
        )


def pixels_to_rays(spec: FisheyeCameraSpec, u, v):
    """Vectorised inverse projection.

    Returns ``(dirs, valid)`` where ``dirs`` has shape ``u.shape + (3,)`` and
    is NaN wherever ``valid`` is False (outside the field of view).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cx, cy = spec.principal_point
    dx = u - cx
    dy = v - cy
    r = np.hypot(dx, dy)
    theta = _theta(spec.model, spec.focal_length_px, r)
    valid = np.isfinite(theta) & (theta <= spec.theta_max + THETA_TOL)
    phi = np.arctan2(dy, dx)
    st = np.sin(theta)
    dirs = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
    dirs[~valid] = np.nan
    return dirs, valid


def rays_to_pixels(spec: FisheyeCameraSpec, dirs, clip: bool = True):
    """Vectorised forward projection of unit directions.

    Returns ``(uv, valid)``; ``uv[..., 0]`` is u and ``uv[..., 1]`` is v.
    With ``clip=False`` directions beyond theta_max are still projected as
    long as the radius law is defined for them.
    """
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    theta = np.arctan2(np.hypot(x, y), z)
    lim = spec.model.theta_limit
    valid = theta <= lim if spec.model.limit_inclusive else theta < lim
    if clip:
        valid &= theta <= spec.theta_max + THETA_TOL
    with np.errstate(invalid="ignore"):
        r = _radius(spec.model, spec.focal_length_px, np.where(valid, theta, 0.0))
    phi = np.arctan2(y, x)
    cx, cy = spec.principal_point
    uv = np.stack([cx + r * np.cos(phi), cy + r * np.sin(phi)], axis=-1)
    uv[~valid] = np.nan
    return uv, valid


def pixel_to_ray(spec: FisheyeCameraSpec, p) -> np.ndarray | None:
    """Unit direction seen by image point ``p = (u, v)``, or None if it is void."""
    d, ok = pixels_to_rays(spec, p[0], p[1])
    return d if bool(ok) else None


def ray_to_pixel(spec: FisheyeCameraSpec, d) -> np.ndarray | None:
    """Image point ``(u, v)`` of unit direction ``d``, or None outside the FOV."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (3,) or not np.all(np.isfinite(d)):
        raise InvalidDirectionError(f"expected a finite 3-vector, got {d!r}")
    n = float(np.linalg.norm(d))
    if abs(n - 1.0) > UNIT_TOL:
        raise InvalidDirectionError(f"direction must be unit length, |d| = {n:.9f}")
    uv, ok = rays_to_pixels(spec, d)
    return uv if bool(ok) else None


def pixel_grid_rays(spec: FisheyeCameraSpec):
    """Rays through every pixel centre: ``(dirs[H, W, 3], valid[H, W])``."""
    v, u = np.mgrid[0:spec.height_px, 0:spec.width_px].astype(np.float64)
    return pixels_to_rays(spec, u, v)


def void_mask(spec: FisheyeCameraSpec) -> np.ndarray:
    """Boolean image, True where the pixel centre lies outside the FOV."""
    return ~pixel_grid_rays(spec)[1]
