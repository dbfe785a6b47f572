"""On-disk dataset layout: frame files, layer map, manifest, splits and checks.

A frame ``<id>`` is stored as four files:

    <id>_rgb.png     8-bit RGB
    <id>_label.png   8-bit RGB label colours (void pixels use VOID_COLOR)
    <id>_depth.exr   single 32-bit float channel "Y", uncompressed
    <id>_void.png    8-bit greyscale, 255 = outside the field of view
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import OpenEXR
from PIL import Image

from .camera_models import FisheyeCameraSpec
from .fisheye_composer import FisheyeFrame
from .layers import VOID_COLOR, LayerMap
from .scene_renderer import ChannelImage, ChannelKind

SUFFIXES = ("_rgb.png", "_label.png", "_depth.exr", "_void.png")
RAW_MAGIC = b"FDP1"
RAW_HEADER = struct.Struct("<4sIII")  # magic, width, height, reserved


class FrameWriteError(ValueError):
    pass


def frame_id(index: int) -> str:
    return f"frame_{index:06d}"


# --- depth containers -------------------------------------------------------------


def write_exr(path, depth: np.ndarray):
    depth = np.ascontiguousarray(depth, dtype=np.float32)
    header = {"compression": OpenEXR.NO_COMPRESSION, "type": OpenEXR.scanlineimage}
    with OpenEXR.File(header, {"Y": depth}) as f:
        f.write(str(path))


def read_exr(path) -> np.ndarray:
    with OpenEXR.File(str(path)) as f:
        ch = f.channels()
        if "Y" not in ch:
            raise ValueError(f"{path}: EXR has no 'Y' channel")
        data = ch["Y"].pixels
    return np.ascontiguousarray(data, dtype=np.float32)


def write_raw_depth(path, depth: np.ndarray):
    """Non-canonical fallback container: 16-byte header then little-endian float32 rows."""
    depth = np.ascontiguousarray(depth, dtype="<f4")
    h, w = depth.shape
    with open(path, "wb") as fh:
        fh.write(RAW_HEADER.pack(RAW_MAGIC, w, h, 0))
        fh.write(depth.tobytes())


def read_raw_depth(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < RAW_HEADER.size:
        raise ValueError(f"{path}: truncated raw depth header")
    magic, w, h, _ = RAW_HEADER.unpack_from(buf)
    if magic != RAW_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = buf[RAW_HEADER.size:]
    if len(body) != 4 * w * h:
        raise ValueError(f"{path}: expected {4 * w * h} bytes of depth, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32)


# --- frames -------------------------------------------------------------------------


def frame_paths(root, fid: str, raw_depth: bool = False) -> dict:
    root = Path(root)
    return {
        "rgb": root / f"{fid}_rgb.png",
        "label": root / f"{fid}_label.png",
        "depth": root / (f"{fid}_depth.raw" if raw_depth else f"{fid}_depth.exr"),
        "void": root / f"{fid}_void.png",
    }


def export_frame(frame: FisheyeFrame, root, layer_map: LayerMap | None = None, raw_depth: bool = False) -> list[Path]:
    """Write one frame's four files; refuses frames that break their invariants."""
    problems = frame.problems(layer_map)
    if problems:
        raise FrameWriteError(f"refusing to write {frame.frame_id}: " + "; ".join(problems))
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    p = frame_paths(root, frame.frame_id, raw_depth)
    Image.fromarray(frame.rgb.data, "RGB").save(p["rgb"])
    Image.fromarray(frame.label.data, "RGB").save(p["label"])
    Image.fromarray((frame.void_mask * 255).astype(np.uint8), "L").save(p["void"])
    if raw_depth:
        write_raw_depth(p["depth"], frame.depth.data)
    else:
        write_exr(p["depth"], frame.depth.data)
    return list(p.values())


def read_png(path, mode: str) -> np.ndarray:
    with Image.open(path) as im:
        if mode == "L" and im.mode not in ("L", "1", "P"):
            raise ValueError(f"{path}: expected a single-channel image, got mode {im.mode}")
        return np.asarray(im.convert(mode))


def import_frame(root, fid: str, spec: FisheyeCameraSpec | None = None, raw_depth: bool = False) -> FisheyeFrame:
    p = frame_paths(root, fid, raw_depth)
    rgb = read_png(p["rgb"], "RGB")
    label = read_png(p["label"], "RGB")
    void = read_png(p["void"], "L") > 127
    depth = read_raw_depth(p["depth"]) if raw_depth else read_exr(p["depth"])
    if spec is None:
        spec = FisheyeCameraSpec(width_px=rgb.shape[1], height_px=rgb.shape[0])
    return FisheyeFrame(ChannelImage(ChannelKind.RGB, rgb), ChannelImage(ChannelKind.LABEL, label),
                        ChannelImage(ChannelKind.DEPTH, depth), void, spec, fid)


# --- layer map --------------------------------------------------------------------------


def export_layer_map(layer_map, path) -> Path:
    """Serialise as a JSON array of ``{"id", "name", "color"}`` sorted by id."""
    if not isinstance(layer_map, LayerMap):
        layer_map = LayerMap(layer_map)  # validates before anything is written
    return layer_map.save(path)


def import_layer_map(path) -> LayerMap:
    return LayerMap.load(path)


# --- sampling and splitting -----------------------------------------------------------


def sample_frames(trajectory, rate_hz: float) -> list:
    """Keep the first pose, then each pose at least ``1/rate_hz`` s after the last kept one.

    Items need a ``timestamp`` attribute or be ``(timestamp, ...)`` tuples.
    """
    if not rate_hz > 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    period = 1.0 / rate_hz
    kept, last, prev = [], None, None
    for item in trajectory:
        t = item.timestamp if hasattr(item, "timestamp") else item[0]
        if prev is not None and not t > prev:
            raise ValueError("trajectory timestamps must be strictly increasing")
        prev = t
        if last is None or t >= last + period - 1e-9:
            kept.append(item)
            last = t
    return kept


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}")


def split_dataset(ids, spec: SplitSpec = SplitSpec()) -> tuple[list, list]:
    """Partition ids; the train side gets ``ceil(fraction * N)`` items.

    >>> tr, va = split_dataset(range(12028))
    >>> len(tr), len(va)
    (9623, 2405)
    """
    ids = list(ids)
    if not ids:
        raise ValueError("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    order = list(ids)
    if spec.shuffle:
        random.Random(spec.seed).shuffle(order)
    # round away float noise first: 0.8 * 12028 is 9622.4000000000001
    n_train = math.ceil(round(spec.train_fraction * len(ids), 9))
    return order[:n_train], order[n_train:]


# --- manifest --------------------------------------------------------------------------


@dataclass
class DatasetManifest:
    frames: list[str] = field(default_factory=list)
    layer_map_path: str = "layer_map.json"
    split: dict | None = None
    generator_config_hash: str = ""

    def __post_init__(self):
        if len(set(self.frames)) != len(self.frames):
            raise ValueError("frame ids in a manifest must be unique")
        if self.split is not None:
            tr, va = self.split.get("train", []), self.split.get("val", [])
            if sorted(tr + va) != sorted(self.frames) or set(tr) & set(va):
                raise ValueError("split lists do not partition the manifest frames")

    def to_json_obj(self) -> dict:
        return {
            "frames": list(self.frames),
            "layer_map_path": self.layer_map_path,
            "split": self.split,
            "generator_config_hash": self.generator_config_hash,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        return cls(list(d.get("frames", [])), d.get("layer_map_path", "layer_map.json"), d.get("split"),
                   d.get("generator_config_hash", ""))

    def with_split(self, spec: SplitSpec, sequential: bool = False) -> "DatasetManifest":
        s = SplitSpec(spec.train_fraction, spec.seed, shuffle=not sequential and spec.shuffle)
        train, val = split_dataset(self.frames, s) if self.frames else ([], [])
        split = {"train": train, "val": val, "ratio": spec.train_fraction, "seed": spec.seed,
                 "shuffle": s.shuffle}
        return DatasetManifest(self.frames, self.layer_map_path, split, self.generator_config_hash)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


# --- verification ---------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    frame_id: str
    rule: str
    detail: str

    def __str__(self):
        return f"{self.frame_id}: [{self.rule}] {self.detail}"


def verify_dataset(root, frames_dir: str = "frames", raw_depth: bool = False) -> list[Violation]:
    """Check every manifest frame for presence, decodability, label purity,
    depth range and void consistency. An empty list means the tree is clean."""
    root = Path(root)
    out: list[Violation] = []
    mpath = root / "manifest.json"
    try:
        manifest = DatasetManifest.load(mpath)
    except (OSError, ValueError, KeyError) as e:
        return [Violation("-", "manifest", f"{mpath}: {e}")]
    try:
        lmap = import_layer_map(root / manifest.layer_map_path)
    except (OSError, ValueError, KeyError) as e:
        return [Violation("-", "layer-map", str(e))]
    allowed = np.array(sorted(lmap.colors() | {VOID_COLOR}), dtype=np.int64)
    allowed_keys = set((allowed[:, 0] << 16) | (allowed[:, 1] << 8) | allowed[:, 2])

    expected_void = None
    cfg_path = root / "config_used.json"
    if cfg_path.exists():
        try:
            from .camera_models import void_mask

            spec = FisheyeCameraSpec.from_dict(json.loads(cfg_path.read_text())["camera"])
            expected_void = void_mask(spec)
        except (ValueError, KeyError, TypeError):
            expected_void = None

    fdir = root / frames_dir
    for fid in manifest.frames:
        paths = frame_paths(fdir, fid, raw_depth)
        missing = [k for k, p in paths.items() if not p.exists()]
        for k in missing:
            out.append(Violation(fid, "presence", f"missing {paths[k].name}"))
        if missing:
            continue
        ch = {}
        loaders = {
            "rgb": lambda p: read_png(p, "RGB"),
            "label": lambda p: read_png(p, "RGB"),
            "void": lambda p: read_png(p, "L"),
            "depth": read_raw_depth if raw_depth else read_exr,
        }
        for k, load in loaders.items():
            try:
                ch[k] = load(paths[k])
            except Exception as e:  # any decoder failure is a finding, not a crash
                out.append(Violation(fid, "decode", f"{paths[k].name}: {type(e).__name__}: {e}"))
        if "label" in ch:
            lab = ch["label"].astype(np.int64)
            keys = np.unique((lab[..., 0] << 16) | (lab[..., 1] << 8) | lab[..., 2])
            bad = [int(k) for k in keys if int(k) not in allowed_keys]
            if bad:
                cols = [((k >> 16) & 255, (k >> 8) & 255, k & 255) for k in bad[:5]]
                out.append(Violation(fid, "label-purity", f"{len(bad)} unmapped colour(s), e.g. {cols}"))
        if "depth" in ch:
            d = ch["depth"]
            if not np.all(np.isfinite(d)) or d.min() < 0.0 or d.max() > 1.0:
                out.append(Violation(fid, "depth-range", f"depth spans [{np.nanmin(d)}, {np.nanmax(d)}]"))
        shapes = {k: v.shape[:2] for k, v in ch.items()}
        if len(set(shapes.values())) > 1:
            out.append(Violation(fid, "dimensions", f"channel sizes differ: {shapes}"))
            continue
        if "void" in ch:
            vm = ch["void"]
            if not np.all((vm == 0) | (vm == 255)):
                out.append(Violation(fid, "void-consistency", "void mask is not binary"))
                continue
            v = vm == 255
            if expected_void is not None and (expected_void.shape != v.shape or np.any(expected_void != v)):
                out.append(Violation(fid, "void-consistency", "void mask differs from the camera's FOV"))
            msgs = []
            if "label" in ch and np.any(ch["label"][v] != np.array(VOID_COLOR, dtype=np.uint8)):
                msgs.append("label")
            if "rgb" in ch and np.any(ch["rgb"][v] != 0):
                msgs.append("rgb")
            if "depth" in ch and np.any(ch["depth"][v] != 1.0):
                msgs.append("depth")
            if "label" in ch and np.any(np.all(ch["label"][~v] == np.array(VOID_COLOR, dtype=np.uint8), axis=-1)):
                msgs.append("void colour inside FOV")
            if msgs:
                out.append(Violation(fid, "void-consistency", "void pixels disagree in: " + ", ".join(msgs)))
    return out
