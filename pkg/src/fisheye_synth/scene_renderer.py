"""Procedural street scene and a CPU raycaster for the rig's perspective faces.

World frame: right-handed, x east, y north, z up; the ground is z = 0.
Camera frames follow :mod:`fisheye_synth.camera_models` (x right, y down,
z forward).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .layers import BACKGROUND_LAYER, LayerMap, LayerMapError, default_layer_map
from .sampling import to_uint8

SKY_RGB = (135, 190, 235)
REQUIRED_LAYERS = ("sky", "road", "sidewalk", "terrain", "building", "vehicle")


class InvalidPoseError(ValueError):
    pass


class CoverageError(ValueError):
    pass


class ChannelKind(str, enum.Enum):
    RGB = "rgb"
    LABEL = "label"
    DEPTH = "depth"


@dataclass(frozen=True)
class ChannelImage:
    kind: ChannelKind
    data: np.ndarray = field(compare=False)

    def __post_init__(self):
        kind = ChannelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        d = self.data
        if kind is ChannelKind.DEPTH:
            if d.ndim != 2 or d.dtype != np.float32:
                raise ValueError(f"depth channel must be a 2-D float32 array, got {d.dtype} {d.shape}")
        elif d.ndim != 3 or d.shape[2] != 3 or d.dtype != np.uint8:
            raise ValueError(f"{kind.value} channel must be (H, W, 3) uint8, got {d.dtype} {d.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, ChannelImage)
            and self.kind is other.kind
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


# --- scene -------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    layer_id: int
    albedo: tuple[float, float, float]


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    layer_id: int
    albedo: tuple[float, float, float]


@dataclass(frozen=True)
class GroundPlane:
    height: float
    layer_id: int
    albedo: tuple[float, float, float]


@dataclass(frozen=True)
class Light:
    direction: tuple[float, float, float] = (0.35, 0.25, -0.9)  # direction light travels
    intensity: float = 1.0
    ambient: float = 0.35

    def unit(self) -> np.ndarray:
        d = np.asarray(self.direction, dtype=np.float64)
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class Scene:
    objects: tuple
    layer_map: LayerMap
    light: Light = Light()
    seed: int = 0

    def __post_init__(self):
        known = set(self.layer_map.ids)
        bad = sorted({o.layer_id for o in self.objects} - known)
        if bad:
            raise LayerMapError(f"objects reference layer ids missing from the layer map: {bad}")

    def digest(self) -> str:
        payload = {
            "objects": [[type(o).__name__, asdict(o)] for o in self.objects],
            "layers": self.layer_map.to_json_obj(),
            "light": asdict(self.light),
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    @cached_property
    def _arrays(self):
        return _SceneArrays(self)


class _SceneArrays:
    """Struct-of-arrays view of a scene for vectorised tracing."""

    def __init__(self, scene: Scene):
        objs = scene.objects
        self.layer = np.array([o.layer_id for o in objs], dtype=np.int64)
        self.albedo = np.array([o.albedo for o in objs], dtype=np.float64).reshape(-1, 3)
        self.planes = [(i, o.height) for i, o in enumerate(objs) if isinstance(o, GroundPlane)]
        self.box_idx = np.array([i for i, o in enumerate(objs) if isinstance(o, Box)], dtype=np.int64)
        self.box_lo = np.array([objs[i].lo for i in self.box_idx], dtype=np.float64).reshape(-1, 3)
        self.box_hi = np.array([objs[i].hi for i in self.box_idx], dtype=np.float64).reshape(-1, 3)
        self.sph_idx = np.array([i for i, o in enumerate(objs) if isinstance(o, Sphere)], dtype=np.int64)
        self.sph_c = np.array([objs[i].center for i in self.sph_idx], dtype=np.float64).reshape(-1, 3)
        self.sph_r = np.array([objs[i].radius for i in self.sph_idx], dtype=np.float64)


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 1
    length_m: float = 300.0
    block_length_m: float = 60.0
    road_width_m: float = 8.0
    sidewalk_width_m: float = 3.0
    building_density: float = 0.75
    vehicle_density: float = 0.35
    vegetation_density: float = 0.4
    pole_density: float = 0.3
    prop_density: float = 0.2
    n_layers: int = 10

    def __post_init__(self):
        for name in ("building_density", "vehicle_density", "vegetation_density", "pole_density", "prop_density"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.length_m <= 0 or self.block_length_m <= 0:
            raise ValueError("city length and block length must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in d.items() if k in names})


def _rgb01(color, rng=None, jitter=0.0):
    c = np.asarray(color, dtype=np.float64) / 255.0
    if rng is not None and jitter:
        c = c * (1.0 + rng.uniform(-jitter, jitter))
    return tuple(round(float(x), 6) for x in np.clip(c, 0.0, 1.0))


def generate_city(config: SceneConfig | None = None) -> tuple[Scene, LayerMap]:
    """Build a deterministic street scene from ``config``.

    The layout is a main north-south road with cross streets every block,
    raised sidewalks, building lots on both sides, parked cars, trees and
    poles. Layers beyond the built-in catalogue become generic props.
    """
    cfg = config or SceneConfig()
    if cfg.n_layers < len(REQUIRED_LAYERS):
        raise LayerMapError(f"at least {len(REQUIRED_LAYERS)} layers are required, got {cfg.n_layers}")
    lmap = default_layer_map(cfg.n_layers)
    rng = np.random.default_rng(cfg.seed)
    has = {l.name: l for l in lmap}

    def lid(name):
        return has[name].id

    def alb(name, jitter=0.0):
        return _rgb01(has[name].color, rng, jitter)

    objs: list = [GroundPlane(0.0, lid("terrain"), alb("terrain"))]
    L = cfg.length_m
    hw = cfg.road_width_m / 2
    sw = cfg.sidewalk_width_m
    cross_x = hw + sw + 60.0
    crossings = np.arange(cfg.block_length_m, L, cfg.block_length_m)

    objs.append(Box((-hw, -20.0, 0.0), (hw, L + 20.0, 0.02), lid("road"), alb("road")))
    for yc in crossings:
        for s in (-1, 1):
            x0, x1 = sorted((s * hw, s * cross_x))
            objs.append(Box((x0, yc - hw, 0.0), (x1, yc + hw, 0.02), lid("road"), alb("road")))

    # block extents along y between crossings
    edges = np.concatenate([[-20.0], crossings, [L + 20.0]])
    blocks = [(a + (hw if i else 0.0), b - (hw if i < len(edges) - 2 else 0.0))
              for i, (a, b) in enumerate(zip(edges[:-1], edges[1:]))]

    for y0, y1 in blocks:
        for s in (-1, 1):
            x0, x1 = sorted((s * hw, s * (hw + sw)))
            objs.append(Box((x0, y0, 0.0), (x1, y1, 0.15), lid("sidewalk"), alb("sidewalk")))

    lot_x0 = hw + sw + 2.0
    for y0, y1 in blocks:
        for s in (-1, 1):
            y = y0 + 1.0
            while y < y1 - 6.0:
                width = float(min(rng.uniform(10.0, 25.0), y1 - 1.0 - y))
                depth = float(rng.uniform(10.0, 22.0))
                xa, xb = sorted((s * lot_x0, s * (lot_x0 + depth)))
                roll = rng.uniform()
                if roll < cfg.building_density:
                    h = float(rng.uniform(6.0, 30.0))
                    objs.append(Box((xa, y, 0.0), (xb, y + width - 1.5, h), lid("building"), alb("building", 0.3)))
                elif "parking" in has and rng.uniform() < 0.5:
                    objs.append(Box((xa, y, 0.0), (xb, y + width - 1.5, 0.03), lid("parking"), alb("parking")))
                y += width

    if "rail track" in has:
        xr = -(lot_x0 + 28.0)
        objs.append(Box((xr - 3.0, -20.0, 0.0), (xr, L + 20.0, 0.05), lid("rail track"), alb("rail track")))

    # parked cars along both kerbs, away from crossings
    slots = np.arange(5.0, L - 5.0, 7.0)
    for s in (-1, 1):
        for y in slots:
            if np.min(np.abs(crossings - y), initial=np.inf) < hw + 5.0:
                continue
            if rng.uniform() < cfg.vehicle_density:
                x0, x1 = sorted((s * (hw - 0.3), s * (hw - 2.1)))
                objs.append(Box((x0, y, 0.0), (x1, y + 4.5, 1.5), lid("vehicle"), alb("vehicle", 0.4)))

    street_y = np.arange(3.0, L - 3.0, 9.0)
    if "vegetation" in has:
        for s in (-1, 1):
            for y in street_y:
                if rng.uniform() < cfg.vegetation_density:
                    x = s * (hw + sw - 0.6)
                    objs.append(Box((x - 0.15, y - 0.15, 0.0), (x + 0.15, y + 0.15, 3.0), lid("vegetation"), alb("vegetation")))
                    r = float(rng.uniform(1.2, 2.2))
                    objs.append(Sphere((x, y, 3.0 + r * 0.8), r, lid("vegetation"), alb("vegetation", 0.2)))
    if "pole" in has:
        for s in (-1, 1):
            for y in street_y + 4.5:
                if rng.uniform() < cfg.pole_density:
                    x = s * (hw + 0.4)
                    objs.append(Box((x - 0.1, y - 0.1, 0.0), (x + 0.1, y + 0.1, 6.0), lid("pole"), alb("pole")))

    extra = [l for l in lmap if l.name not in {"sky", "road", "sidewalk", "terrain", "building", "vehicle",
                                               "vegetation", "pole", "parking", "rail track"}]
    for layer in extra:
        for s in (-1, 1):
            for y in np.arange(10.0, L - 10.0, 25.0):
                if rng.uniform() < cfg.prop_density:
                    x = s * (hw + sw * float(rng.uniform(0.2, 0.8)))
                    size = float(rng.uniform(0.4, 1.2))
                    objs.append(Box((x - size / 2, y, 0.0), (x + size / 2, y + size, 2 * size), layer.id,
                                    _rgb01(layer.color, rng, 0.2)))

    scene = Scene(tuple(objs), lmap, Light(), seed=int(cfg.seed))
    return scene, lmap


# --- cameras -------------------------------------------------------------------


def _check_rotation(R, what="rotation"):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidPoseError(f"{what} must be a finite 3x3 matrix")
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or abs(np.linalg.det(R) - 1.0) > 1e-6:
        raise InvalidPoseError(f"{what} is not a proper orthonormal rotation")
    return R


def frame_from_axes(forward, right) -> np.ndarray:
    """Rotation whose columns are the (right, down, forward) camera axes."""
    z = np.asarray(forward, dtype=np.float64)
    z = z / np.linalg.norm(z)
    x = np.asarray(right, dtype=np.float64)
    x = x - z * (x @ z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


def rig_rotation(yaw: float = 0.0, pitch_down: float = 0.0) -> np.ndarray:
    """Rig-to-world rotation for a rig heading ``yaw`` rad counter-clockwise
    from north, tilted ``pitch_down`` rad below the horizon."""
    base = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    c, s = math.cos(-pitch_down), math.sin(-pitch_down)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    c, s = math.cos(yaw), math.sin(yaw)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rz @ base @ rx


@dataclass(frozen=True, eq=False)
class PerspectiveCamera:
    """Square pinhole camera posed in the world (rotation is camera-to-world)."""

    rotation: np.ndarray
    position: tuple[float, float, float]
    resolution: int
    fov_deg: float = 90.0

    @property
    def focal_px(self) -> float:
        return self.resolution / 2.0 / math.tan(math.radians(self.fov_deg) / 2.0)

    def ray_directions(self) -> np.ndarray:
        n = self.resolution
        c = (n - 1) / 2.0
        v, u = np.mgrid[0:n, 0:n].astype(np.float64)
        d = np.stack([(u - c) / self.focal_px, (v - c) / self.focal_px, np.ones_like(u)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return d @ np.asarray(self.rotation, dtype=np.float64).T


@dataclass(frozen=True, eq=False)
class RigCamera:
    name: str
    rotation: np.ndarray  # camera-to-rig
    fov_deg: float = 90.0

    def __post_init__(self):
        if abs(self.fov_deg - 90.0) > 1e-12:
            raise ValueError(f"rig cameras must have a 90 degree FOV, {self.name} has {self.fov_deg}")
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, f"camera {self.name}"))


_S = math.sqrt(0.5)
RIG_PRESETS = {
    # cube turned 45 degrees about the vertical: the optical axis runs along the
    # edge between the two side faces, top and bottom faces fill the rest
    "quad45": [
        ("left", (-_S, 0.0, _S), (_S, 0.0, _S)),
        ("right", (_S, 0.0, _S), (_S, 0.0, -_S)),
        ("up", (0.0, -1.0, 0.0), (_S, 0.0, _S)),
        ("down", (0.0, 1.0, 0.0), (_S, 0.0, _S)),
    ],
    "cube5": [
        ("front", (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
        ("left", (-1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
        ("right", (1.0, 0.0, 0.0), (0.0, 0.0, -1.0)),
        ("up", (0.0, -1.0, 0.0), (1.0, 0.0, 0.0)),
        ("down", (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)),
    ],
}


def fibonacci_cap(n: int, theta_max: float) -> np.ndarray:
    """``n`` quasi-uniform unit directions with polar angle <= theta_max, plus
    a ring of 64 directions exactly on the boundary."""
    i = np.arange(n, dtype=np.float64)
    cz = 1.0 - (1.0 - math.cos(theta_max)) * (i + 0.5) / n
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    sz = np.sqrt(np.maximum(0.0, 1.0 - cz * cz))
    pts = np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=1)
    ring_phi = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ring = np.stack([math.sin(theta_max) * np.cos(ring_phi), math.sin(theta_max) * np.sin(ring_phi),
                     np.full(64, math.cos(theta_max))], axis=1)
    return np.concatenate([pts, ring])


@dataclass(frozen=True, eq=False)
class CameraRig:
    """Co-located 90 degree cameras whose frusta tile the fisheye hemisphere.

    ``rotation`` maps rig coordinates to world; the rig's +z axis is the
    fisheye optical axis.
    """

    cameras: tuple
    resolution: int = 256
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    name: str = "custom"

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("rig resolution must be >= 1")
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, "rig rotation"))

    @classmethod
    def preset(cls, name: str, resolution: int = 256, position=(0.0, 0.0, 0.0), rotation=None) -> "CameraRig":
        if name not in RIG_PRESETS:
            raise ValueError(f"unknown rig preset {name!r} (expected one of {sorted(RIG_PRESETS)})")
        cams = tuple(RigCamera(n, frame_from_axes(f, r)) for n, f, r in RIG_PRESETS[name])
        return cls(cams, int(resolution), tuple(position), np.eye(3) if rotation is None else rotation, name)

    def with_pose(self, position, rotation) -> "CameraRig":
        return CameraRig(self.cameras, self.resolution, tuple(float(p) for p in position), rotation, self.name)

    @property
    def focal_px(self) -> float:
        return self.resolution / 2.0

    def world_cameras(self) -> list[PerspectiveCamera]:
        return [PerspectiveCamera(self.rotation @ c.rotation, self.position, self.resolution) for c in self.cameras]

    def local_coords(self, dirs_rig):
        """Directions in each camera's frame: array (n_cams, ..., 3)."""
        d = np.asarray(dirs_rig, dtype=np.float64)
        return np.stack([d @ c.rotation for c in self.cameras])

    def containment(self, dirs_rig, tol: float = 1e-9):
        """(n_cams, ...) boolean: direction lies inside the camera's closed frustum."""
        loc = self.local_coords(dirs_rig)
        x, y, z = loc[..., 0], loc[..., 1], loc[..., 2]
        lim = z * (1.0 + tol) + tol
        return (z > 0) & (np.abs(x) <= lim) & (np.abs(y) <= lim)

    def covers(self, theta_max: float, n: int = 4096) -> bool:
        dirs = fibonacci_cap(n, theta_max)
        return bool(self.containment(dirs).any(axis=0).all())

    def check_coverage(self, theta_max: float, n: int = 4096):
        if not self.covers(theta_max, n):
            raise CoverageError(
                f"rig {self.name!r} does not cover the field of view up to theta = {math.degrees(theta_max):.2f} deg"
            )


# --- tracing -------------------------------------------------------------------


def depth_normalize(hit_distance: float, near: float, far: float) -> float:
    """Distance past the near plane as a fraction of the near-far span.

    >>> depth_normalize(51.0, 1.0, 101.0)
    0.5
    """
    _check_clip(near, far)
    if not np.isfinite(hit_distance):
        return 1.0
    return float(min(max((hit_distance - near) / (far - near), 0.0), 1.0))


def normalize_depth(t, near, far) -> np.ndarray:
    _check_clip(near, far)
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        d = np.clip((t - near) / (far - near), 0.0, 1.0)
    return np.where(np.isfinite(t), d, 1.0).astype(np.float32)


def _check_clip(near, far):
    if not (near > 0 and far > near):
        raise ValueError(f"need far > near > 0, got near={near}, far={far}")


@dataclass
class Hit:
    """Nearest intersection per ray; ``obj == -1`` marks a miss (t = inf)."""

    t: np.ndarray
    obj: np.ndarray
    normal: np.ndarray


def trace(scene: Scene, origin, dirs, near: float, far: float) -> Hit:
    """Nearest hit of unit rays ``dirs`` (M, 3) from ``origin`` within [near, far]."""
    _check_clip(near, far)
    A = scene._arrays
    o = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    m = len(dirs)
    best_t = np.full(m, np.inf)
    best_o = np.full(m, -1, dtype=np.int64)
    best_n = np.zeros((m, 3))

    dz = dirs[:, 2]
    for idx, h in A.planes:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (h - o[2]) / dz
        ok = (t >= near) & (t <= far) & (t < best_t)
        best_t[ok] = t[ok]
        best_o[ok] = idx
        best_n[ok] = (0.0, 0.0, 1.0 if o[2] >= h else -1.0)

    def candidates(center, radius):
        oc = center - o
        dist = float(np.linalg.norm(oc))
        if dist - radius > far:
            return None
        if dist <= radius:
            return np.arange(m)
        cos_a = math.sqrt(1.0 - (radius / dist) ** 2)
        return np.flatnonzero(dirs @ (oc / dist) >= cos_a - 1e-9)

    for k, idx in enumerate(A.box_idx):
        lo, hi = A.box_lo[k], A.box_hi[k]
        cand = candidates((lo + hi) / 2, float(np.linalg.norm(hi - lo)) / 2)
        if cand is None or cand.size == 0:
            continue
        d = dirs[cand]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
        tmin = np.fmin(t1, t2)
        tmax = np.fmax(t1, t2)
        tn = tmin.max(axis=1)
        tf = tmax.min(axis=1)
        ok = (tn <= tf) & (tn >= near) & (tn <= far) & (tn < best_t[cand])
        if not ok.any():
            continue
        sel = cand[ok]
        axis = np.argmax(tmin[ok], axis=1)
        n = np.zeros((sel.size, 3))
        n[np.arange(sel.size), axis] = -np.sign(d[ok][np.arange(sel.size), axis])
        best_t[sel] = tn[ok]
        best_o[sel] = idx
        best_n[sel] = n

    for k, idx in enumerate(A.sph_idx):
        c, r = A.sph_c[k], A.sph_r[k]
        cand = candidates(c, r)
        if cand is None or cand.size == 0:
            continue
        d = dirs[cand]
        oc = o - c
        b = d @ oc
        disc = b * b - (oc @ oc - r * r)
        with np.errstate(invalid="ignore"):
            t = -b - np.sqrt(disc)
        ok = (disc >= 0) & (t >= near) & (t <= far) & (t < best_t[cand])
        if not ok.any():
            continue
        sel = cand[ok]
        best_t[sel] = t[ok]
        best_o[sel] = idx
        best_n[sel] = (o + t[ok, None] * d[ok] - c) / r

    return Hit(best_t, best_o, best_n)


def shade(scene: Scene, hit: Hit, kind, near: float, far: float, shape) -> ChannelImage:
    """Turn one hit record into an image of the requested channel kind."""
    kind = ChannelKind(kind)
    A = scene._arrays
    miss = hit.obj < 0
    safe = np.where(miss, 0, hit.obj)
    if kind is ChannelKind.DEPTH:
        data = normalize_depth(hit.t, near, far)
        return ChannelImage(kind, data.reshape(shape))
    if kind is ChannelKind.LABEL:
        table = scene.layer_map.color_table()
        bg = np.array(scene.layer_map.by_name(BACKGROUND_LAYER).color, dtype=np.uint8)
        if len(A.layer):
            data = table[A.layer[safe]]
        else:
            data = np.zeros((len(hit.obj), 3), dtype=np.uint8)
        data[miss] = bg
        return ChannelImage(kind, data.reshape(shape + (3,)))
    light = scene.light
    lam = np.clip(hit.normal @ -light.unit(), 0.0, None)
    gain = (light.ambient + (1.0 - light.ambient) * lam) * light.intensity
    if len(A.albedo):
        rgb = A.albedo[safe] * gain[:, None] * 255.0
    else:
        rgb = np.zeros((len(hit.obj), 3))
    rgb[miss] = SKY_RGB
    return ChannelImage(kind, to_uint8(rgb).reshape(shape + (3,)))


def render_camera(scene: Scene, camera: PerspectiveCamera, kinds, near: float, far: float) -> dict:
    """All requested channels of one camera from a single shared hit record."""
    _check_rotation(camera.rotation, "camera rotation")
    if camera.resolution < 1:
        raise ValueError("camera resolution must be >= 1")
    dirs = camera.ray_directions()
    shape = dirs.shape[:2]
    hit = trace(scene, camera.position, dirs.reshape(-1, 3), near, far)
    return {ChannelKind(k): shade(scene, hit, k, near, far, shape) for k in kinds}


def render_channel(scene: Scene, camera: PerspectiveCamera, kind, near: float, far: float) -> ChannelImage:
    kind = ChannelKind(kind)
    return render_camera(scene, camera, [kind], near, far)[kind]


def render_rig(scene: Scene, rig: CameraRig, kinds=tuple(ChannelKind), near: float = 0.1,
               far: float = 1000.0) -> list[dict]:
    """One ``{kind: ChannelImage}`` dict per rig camera, in rig order."""
    return [render_camera(scene, cam, kinds, near, far) for cam in rig.world_cameras()]


# --- scripted drive ------------------------------------------------------------


@dataclass(frozen=True)
class TimedPose:
    timestamp: float
    position: tuple[float, float, float]
    yaw: float


def scripted_trajectory(config: SceneConfig, duration_s: float, hz: float = 10.0, speed: float = 8.0,
                        height: float = 2.0, lane_x: float = 0.0) -> list[TimedPose]:
    """Ping-pong drive along the main road, sampled at ``hz``."""
    if hz <= 0 or speed <= 0:
        raise ValueError("hz and speed must be positive")
    lo, hi = 5.0, config.length_m - 5.0
    span = hi - lo
    n = int(math.floor(duration_s * hz + 1e-9)) + 1
    poses = []
    for k in range(n):
        t = k / hz
        s = (speed * t) % (2 * span)
        if s <= span:
            y, yaw = lo + s, 0.0
        else:
            y, yaw = hi - (s - span), math.pi
        poses.append(TimedPose(round(t, 9), (lane_x, y, height), yaw))
    return poses
