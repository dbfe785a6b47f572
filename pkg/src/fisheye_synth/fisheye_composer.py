"""Combine a rig's perspective faces into one fisheye image per channel.

Two routes produce the same picture: :func:`compose_mesh` textures a
precomputed warp mesh (one grid per rig camera, vertices placed by the
fisheye projection), and :func:`compose_per_pixel` resamples every output
pixel directly. The per-pixel route is the reference the mesh is checked
against.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .camera_models import THETA_TOL, FisheyeCameraSpec, pixel_grid_rays, rays_to_pixels
from .layers import VOID_COLOR
from .sampling import sample_bilinear, sample_nearest, to_uint8
from .scene_renderer import CameraRig, ChannelImage, ChannelKind, CoverageError, render_rig

VOID_VALUES = {ChannelKind.RGB: (0, 0, 0), ChannelKind.LABEL: VOID_COLOR, ChannelKind.DEPTH: 1.0}


class InputArityError(ValueError):
    pass


class MeshConsistencyError(ValueError):
    pass


def _face_arrays(faces, kind: ChannelKind, n_cams: int) -> list[np.ndarray]:
    if len(faces) != n_cams:
        raise InputArityError(f"expected {n_cams} face images, got {len(faces)}")
    out = []
    for i, f in enumerate(faces):
        if isinstance(f, dict):
            if kind not in f:
                raise InputArityError(f"face {i} has no {kind.value} channel")
            f = f[kind]
        if f is None:
            raise InputArityError(f"face {i} is missing")
        if f.kind is not kind:
            raise InputArityError(f"face {i} is {f.kind.value}, expected {kind.value}")
        out.append(f.data)
    if len({a.shape for a in out}) > 1:
        raise InputArityError("face images differ in size")
    return out


def _sample_faces(arrays, cam, u, v, kind: ChannelKind):
    """Sample face ``cam[i]`` at ``(u[i], v[i])`` for every i."""
    if kind is ChannelKind.DEPTH:
        out = np.empty(len(cam), dtype=np.float32)
    else:
        out = np.empty((len(cam), 3), dtype=np.uint8)
    for k, img in enumerate(arrays):
        sel = cam == k
        if not sel.any():
            continue
        if kind is ChannelKind.LABEL:
            out[sel] = sample_nearest(img, u[sel], v[sel])
        elif kind is ChannelKind.RGB:
            out[sel] = to_uint8(sample_bilinear(img, u[sel], v[sel]))
        else:
            out[sel] = sample_bilinear(img, u[sel], v[sel]).astype(np.float32)
    return out


def select_cameras(rig: CameraRig, dirs):
    """Most central containing camera for each rig-frame direction (M, 3).

    Returns ``(cam, local)`` where ``local`` holds each direction in its
    chosen camera's frame. Ties go to the lowest camera index.
    """
    loc = rig.local_coords(dirs)
    inside = rig.containment(dirs)
    score = np.where(inside, loc[..., 2], -np.inf)
    # directions no frustum contains (only possible for uncovered rigs) fall
    # back to the camera whose axis is closest
    none = ~inside.any(axis=0)
    score[:, none] = loc[:, none, 2]
    cam = np.argmax(score, axis=0)
    local = loc[cam, np.arange(loc.shape[1])]
    return cam, local


def sample_directions(arrays, rig: CameraRig, dirs, kind: ChannelKind):
    cam, local = select_cameras(rig, dirs)
    f = rig.focal_px
    c = (rig.resolution - 1) / 2.0
    u = f * local[:, 0] / local[:, 2] + c
    v = f * local[:, 1] / local[:, 2] + c
    return _sample_faces(arrays, cam, u, v, kind)


def _blank(kind: ChannelKind, shape):
    if kind is ChannelKind.DEPTH:
        return np.full(shape, VOID_VALUES[kind], dtype=np.float32)
    return np.broadcast_to(np.array(VOID_VALUES[kind], dtype=np.uint8), shape + (3,)).copy()


def compose_per_pixel(faces, spec: FisheyeCameraSpec, rig: CameraRig, kind) -> tuple[ChannelImage, np.ndarray]:
    """Reference fisheye resampler: trace every output pixel back into a face."""
    kind = ChannelKind(kind)
    arrays = _face_arrays(faces, kind, len(rig.cameras))
    dirs, valid = pixel_grid_rays(spec)
    out = _blank(kind, spec.shape)
    out[valid] = sample_directions(arrays, rig, dirs[valid], kind)
    return ChannelImage(kind, out), ~valid


# --- warp mesh -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WarpMesh:
    """Triangle mesh in the fisheye plane textured from the rig faces.

    ``tex_uv`` spans the full extent of a face image: (0, 0) is the outer
    corner of the top-left pixel and (1, 1) the outer corner of the
    bottom-right one.
    """

    positions: np.ndarray  # (V, 2) fisheye pixel coordinates
    camera: np.ndarray  # (V,) source camera index
    tex_uv: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3)
    resolution: int
    n_cameras: int
    spec: FisheyeCameraSpec
    rig_key: tuple = field(default=())

    @property
    def grid_triangle_count(self) -> int:
        """Triangles per camera before clipping to the field of view."""
        return 2 * (self.resolution - 1) ** 2

    def to_json_obj(self) -> dict:
        return {
            "resolution": self.resolution,
            "n_cameras": self.n_cameras,
            "spec": self.spec.to_dict(),
            "vertices": [
                {"pos": [round(float(p[0]), 6), round(float(p[1]), 6)], "camera": int(c),
                 "tex_uv": [round(float(t[0]), 9), round(float(t[1]), 9)]}
                for p, c, t in zip(self.positions, self.camera, self.tex_uv)
            ],
            "triangles": self.triangles.tolist(),
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh)


def _rig_key(rig: CameraRig) -> tuple:
    return (len(rig.cameras),) + tuple(np.round(c.rotation, 12).tobytes() for c in rig.cameras)


def _tex_to_rig(rig: CameraRig, cam: int, uv) -> np.ndarray:
    uv = np.asarray(uv, dtype=np.float64)
    d = np.stack([2 * uv[..., 0] - 1, 2 * uv[..., 1] - 1, np.ones(uv.shape[:-1])], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d @ rig.cameras[cam].rotation.T


def _polar(d):
    return np.arctan2(np.hypot(d[..., 0], d[..., 1]), d[..., 2])


def build_warp_mesh(spec: FisheyeCameraSpec, rig: CameraRig, resolution: int = 128) -> WarpMesh:
    """Grid each camera's image plane and push the vertices into the fisheye plane.

    Triangles straddling the FOV boundary are clipped in texture space; the
    new boundary vertices are found by bisection along the cut edges so they
    land on theta_max.
    """
    if resolution < 2:
        raise ValueError("mesh resolution must be >= 2")
    try:
        rig.check_coverage(spec.theta_max)
    except CoverageError as e:
        raise CoverageError(f"cannot build warp mesh: {e}") from None

    lim = spec.theta_max + THETA_TOL
    g = np.linspace(0.0, 1.0, resolution)
    gu, gv = np.meshgrid(g, g)
    grid_uv = np.stack([gu, gv], axis=-1).reshape(-1, 2)
    ii, jj = np.mgrid[0:resolution - 1, 0:resolution - 1]
    a = (ii * resolution + jj).ravel()
    b, c, d = a + 1, a + resolution, a + resolution + 1
    grid_tris = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])

    all_uv, all_cam, all_tris = [], [], []
    offset = 0
    for k in range(len(rig.cameras)):
        uv = [tuple(p) for p in grid_uv]
        inside = list(_polar(_tex_to_rig(rig, k, grid_uv)) <= lim)
        n_in = np.asarray(inside)[grid_tris].sum(axis=1)
        tris = [tuple(t) for t in grid_tris[n_in == 3]]
        cut = {}

        def crossing(i_in, i_out):
            key = (i_in, i_out)
            if key not in cut:
                p, q = np.asarray(uv[i_in]), np.asarray(uv[i_out])
                lo_s, hi_s = 0.0, 1.0
                for _ in range(64):
                    mid = 0.5 * (lo_s + hi_s)
                    # aim at theta_max itself so rounding stays inside the tolerance
                    if _polar(_tex_to_rig(rig, k, p + mid * (q - p))) <= spec.theta_max:
                        lo_s = mid
                    else:
                        hi_s = mid
                if lo_s <= 1e-12:
                    cut[key] = i_in
                else:
                    uv.append(tuple(p + lo_s * (q - p)))
                    inside.append(True)
                    cut[key] = len(uv) - 1
            return cut[key]

        for tri in grid_tris[(n_in > 0) & (n_in < 3)]:
            poly = []
            for e in range(3):
                p, q = int(tri[e]), int(tri[(e + 1) % 3])
                if inside[p]:
                    poly.append(p)
                if inside[p] and not inside[q]:
                    poly.append(crossing(p, q))
                elif inside[q] and not inside[p]:
                    poly.append(crossing(q, p))
            for t in range(1, len(poly) - 1):
                tris.append((poly[0], poly[t], poly[t + 1]))

        tris = np.array([t for t in tris if len(set(t)) == 3], dtype=np.int64).reshape(-1, 3)
        uv_arr = np.array(uv, dtype=np.float64)
        used = np.unique(tris)
        remap = np.full(len(uv_arr), -1, dtype=np.int64)
        remap[used] = np.arange(len(used)) + offset
        all_uv.append(uv_arr[used])
        all_cam.append(np.full(len(used), k, dtype=np.int64))
        all_tris.append(remap[tris])
        offset += len(used)

    tex = np.concatenate(all_uv) if all_uv else np.zeros((0, 2))
    cams = np.concatenate(all_cam) if all_cam else np.zeros(0, dtype=np.int64)
    tris = np.concatenate(all_tris) if all_tris else np.zeros((0, 3), dtype=np.int64)
    dirs = np.empty((len(tex), 3))
    for k in range(len(rig.cameras)):
        sel = cams == k
        dirs[sel] = _tex_to_rig(rig, k, tex[sel])
    pos, ok = rays_to_pixels(spec, dirs, clip=False)
    if not ok.all():
        raise MeshConsistencyError("mesh vertex outside the projection's domain")
    return WarpMesh(pos, cams, tex, tris, int(resolution), len(rig.cameras), spec, _rig_key(rig))


def rasterize(positions, triangles, height: int, width: int, eps: float = 1e-9, budget: int = 1 << 22):
    """Scan-convert triangles onto pixel centres.

    Returns ``(tri, bary)``: per pixel the lowest-index covering triangle
    (-1 if none) and its barycentric weights. Triangles are processed in
    buckets of similar bounding-box size so the work stays vectorised.
    """
    P = np.asarray(positions, dtype=np.float64)[np.asarray(triangles)]
    x0, y0 = P[:, 0, 0], P[:, 0, 1]
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    xmin = np.maximum(np.ceil(P[..., 0].min(1) - eps), 0).astype(np.int64)
    xmax = np.minimum(np.floor(P[..., 0].max(1) + eps), width - 1).astype(np.int64)
    ymin = np.maximum(np.ceil(P[..., 1].min(1) - eps), 0).astype(np.int64)
    ymax = np.minimum(np.floor(P[..., 1].max(1) + eps), height - 1).astype(np.int64)
    size = np.maximum(xmax - xmin, ymax - ymin) + 1
    live = (np.abs(area) > 1e-12) & (xmax >= xmin) & (ymax >= ymin)
    bucket = np.where(live, np.ceil(np.log2(np.maximum(size, 1))).astype(np.int64), -1)

    pix_parts, tri_parts, b_parts = [], [], []
    for kb in np.unique(bucket[bucket >= 0]):
        K = 1 << int(kb)
        oy, ox = np.divmod(np.arange(K * K), K)
        ids = np.flatnonzero(bucket == kb)
        step = max(1, budget // (K * K))
        for s in range(0, len(ids), step):
            t = ids[s:s + step]
            px = xmin[t, None] + ox
            py = ymin[t, None] + oy
            inb = (px <= xmax[t, None]) & (py <= ymax[t, None])
            r, col = np.nonzero(inb)
            tt = t[r]
            qx = px[r, col] - x0[tt]
            qy = py[r, col] - y0[tt]
            b1 = (qx * e2[tt, 1] - qy * e2[tt, 0]) / area[tt]
            b2 = (e1[tt, 0] * qy - e1[tt, 1] * qx) / area[tt]
            b0 = 1.0 - b1 - b2
            hit = (b0 >= -eps) & (b1 >= -eps) & (b2 >= -eps)
            pix_parts.append((py[r, col] * width + px[r, col])[hit])
            tri_parts.append(tt[hit])
            b_parts.append(np.stack([b0, b1, b2], 1)[hit])

    tri_img = np.full(height * width, -1, dtype=np.int64)
    bary = np.zeros((height * width, 3))
    if pix_parts:
        pix = np.concatenate(pix_parts)
        tri = np.concatenate(tri_parts)
        bb = np.concatenate(b_parts)
        order = np.lexsort((tri, pix))
        ps = pix[order]
        first = order[np.r_[True, ps[1:] != ps[:-1]]]
        tri_img[pix[first]] = tri[first]
        bary[pix[first]] = bb[first]
    return tri_img.reshape(height, width), bary.reshape(height, width, 3)


def compose_mesh(faces, mesh: WarpMesh, spec: FisheyeCameraSpec, kind, raster=None) -> tuple[ChannelImage, np.ndarray]:
    """Texture the warp mesh with the face images; uncovered pixels are void.

    ``raster`` may carry a cached :func:`rasterize` result for this mesh.
    """
    kind = ChannelKind(kind)
    if mesh.spec != spec:
        raise MeshConsistencyError("mesh was built for a different fisheye camera")
    arrays = _face_arrays(faces, kind, mesh.n_cameras)
    n = arrays[0].shape[0]
    tri_img, bary = raster if raster is not None else rasterize(mesh.positions, mesh.triangles, *spec.shape)
    covered = tri_img >= 0
    tri = mesh.triangles[tri_img[covered]]
    w = bary[covered]
    uv = np.einsum("mk,mkj->mj", w, mesh.tex_uv[tri])
    cam = mesh.camera[tri[:, 0]]
    out = _blank(kind, spec.shape)
    out[covered] = _sample_faces(arrays, cam, uv[:, 0] * n - 0.5, uv[:, 1] * n - 0.5, kind)
    return ChannelImage(kind, out), ~covered


# --- frames ----------------------------------------------------------------------


class FrameInvariantError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FisheyeFrame:
    rgb: ChannelImage
    label: ChannelImage
    depth: ChannelImage
    void_mask: np.ndarray
    spec: FisheyeCameraSpec
    frame_id: str

    def problems(self, layer_map=None) -> list[str]:
        """Invariant violations, empty when the frame is consistent."""
        out = []
        shape = self.void_mask.shape
        for ch in (self.rgb, self.label, self.depth):
            if ch.data.shape[:2] != shape:
                out.append(f"{ch.kind.value} shape {ch.data.shape[:2]} != void mask shape {shape}")
        if out:
            return out
        v = self.void_mask
        if np.any(self.rgb.data[v] != 0):
            out.append("void pixels in rgb are not black")
        if np.any(self.label.data[v] != np.array(VOID_COLOR, dtype=np.uint8)):
            out.append("void pixels in label do not carry the void colour")
        if np.any(self.depth.data[v] != 1.0):
            out.append("void pixels in depth are not 1.0")
        d = self.depth.data
        if not np.all(np.isfinite(d)) or d.min() < 0.0 or d.max() > 1.0:
            out.append("depth outside [0, 1]")
        if layer_map is not None:
            allowed = layer_map.colors() | {tuple(VOID_COLOR)}
            got = {tuple(c) for c in np.unique(self.label.data.reshape(-1, 3), axis=0)}
            extra = got - allowed
            if extra:
                out.append(f"label colours outside the layer map: {sorted(extra)[:5]}")
        return out

    def __eq__(self, other):
        return (
            isinstance(other, FisheyeFrame)
            and self.frame_id == other.frame_id
            and self.rgb == other.rgb
            and self.label == other.label
            and self.depth == other.depth
            and np.array_equal(self.void_mask, other.void_mask)
        )


class FrameComposer:
    """Holds the precomputed mesh and raster for repeated frame composition."""

    def __init__(self, spec: FisheyeCameraSpec, rig: CameraRig, method: str = "mesh", mesh_resolution: int = 128):
        if method not in ("mesh", "per_pixel"):
            raise ValueError(f"unknown composition method {method!r}")
        rig.check_coverage(spec.theta_max)
        self.spec = spec
        self.rig = rig
        self.method = method
        self.void = ~pixel_grid_rays(spec)[1]
        self.mesh = None
        if method == "mesh":
            self.mesh = build_warp_mesh(spec, rig, mesh_resolution)
            self.raster = rasterize(self.mesh.positions, self.mesh.triangles, *spec.shape)
            # in-FOV pixels no triangle reaches: slivers between the clipped
            # mesh rim (chords) and the true image circle
            self.gaps = (self.raster[0] < 0) & ~self.void
            dirs, _ = pixel_grid_rays(spec)
            self.gap_dirs = dirs[self.gaps]

    def compose(self, faces, kind) -> ChannelImage:
        kind = ChannelKind(kind)
        if self.method == "per_pixel":
            img, _ = compose_per_pixel(faces, self.spec, self.rig, kind)
            return img
        img, _ = compose_mesh(faces, self.mesh, self.spec, kind, raster=self.raster)
        data = img.data
        if self.gaps.any():
            arrays = _face_arrays(faces, kind, len(self.rig.cameras))
            data[self.gaps] = sample_directions(arrays, self.rig, self.gap_dirs, kind)
        data[self.void] = VOID_VALUES[kind]
        return ChannelImage(kind, data)

    def frame(self, scene, pose_rig: CameraRig, near: float, far: float, frame_id: str) -> FisheyeFrame:
        faces = render_rig(scene, pose_rig, tuple(ChannelKind), near, far)
        ch = {k: self.compose(faces, k) for k in ChannelKind}
        return FisheyeFrame(ch[ChannelKind.RGB], ch[ChannelKind.LABEL], ch[ChannelKind.DEPTH],
                            self.void.copy(), self.spec, frame_id)


def compose_frame(scene, rig: CameraRig, spec: FisheyeCameraSpec, near: float, far: float, frame_id: str,
                  method: str = "mesh", mesh_resolution: int = 128) -> FisheyeFrame:
    """Render all three channels for the rig's current pose and compose them."""
    return FrameComposer(spec, rig, method, mesh_resolution).frame(scene, rig, near, far, frame_id)


def expected_void_fraction(spec: FisheyeCameraSpec) -> float:
    """Analytic share of the image outside the FOV disc (disc fully inside the image)."""
    r = spec.image_circle_radius
    return 1.0 - math.pi * r * r / (spec.width_px * spec.height_px)
