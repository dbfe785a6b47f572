"""Free-space masks and void-aware Intersection-over-Union."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .layers import VOID_COLOR, LayerMap, normalize_name

DEFAULT_FREE_SPACE = ("road", "sidewalk", "parking", "rail track", "terrain")
_STEM_SUFFIXES = ("_label", "_pred", "_mask", "_gt")


class UnmappedColorError(ValueError):
    pass


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class ClassMappingRule:
    """Set of class names (or layer ids) merged into the free-space class."""

    free_space_classes: frozenset = frozenset(DEFAULT_FREE_SPACE)

    def __post_init__(self):
        classes = frozenset(normalize_name(c) if isinstance(c, str) else int(c) for c in self.free_space_classes)
        if not classes:
            raise ValueError("a class mapping needs at least one free-space class")
        object.__setattr__(self, "free_space_classes", classes)

    def free_layer_ids(self, layer_map: LayerMap) -> set[int]:
        ids = set()
        for l in layer_map:
            if normalize_name(l.name) in self.free_space_classes or l.id in self.free_space_classes:
                ids.add(l.id)
        if not ids:
            raise ValueError(
                f"none of the free-space classes {sorted(map(str, self.free_space_classes))} "
                f"occur in the layer map"
            )
        return ids


def _color_keys(img: np.ndarray) -> np.ndarray:
    img = img.astype(np.int64)
    return (img[..., 0] << 16) | (img[..., 1] << 8) | img[..., 2]


def map_to_binary(label: np.ndarray, mapping: ClassMappingRule, layer_map: LayerMap) -> np.ndarray:
    """True where the label colour belongs to a free-space class.

    The void colour maps to background; the void mask is handled separately.
    """
    free = mapping.free_layer_ids(layer_map)
    keys = _color_keys(label)
    lut_keys, inv = np.unique(keys, return_inverse=True)
    known = {int(_color_keys(np.array(l.color))): l.id for l in layer_map}
    void_key = int(_color_keys(np.array(VOID_COLOR)))
    is_free = np.zeros(len(lut_keys), dtype=bool)
    unknown = []
    for i, k in enumerate(lut_keys):
        k = int(k)
        if k in known:
            is_free[i] = known[k] in free
        elif k != void_key:
            unknown.append(((k >> 16) & 255, (k >> 8) & 255, k & 255))
    if unknown:
        raise UnmappedColorError(f"label colours not in the layer map: {unknown[:10]}")
    return is_free[inv.reshape(keys.shape)]


def compute_iou(pred: np.ndarray, gt: np.ndarray, void: np.ndarray | None = None) -> float | None:
    """Free-space IoU over non-void pixels; None when the union is empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if void is None:
        void = np.zeros(pred.shape, dtype=bool)
    void = np.asarray(void, dtype=bool)
    if not pred.shape == gt.shape == void.shape:
        raise PairingError(f"mask shapes differ: pred {pred.shape}, gt {gt.shape}, void {void.shape}")
    keep = ~void
    inter = int(np.count_nonzero(pred & gt & keep))
    union = int(np.count_nonzero((pred | gt) & keep))
    return None if union == 0 else inter / union


@dataclass
class FrameScore:
    frame_id: str
    iou: float | None
    intersection: int
    union: int
    counted: int
    void: int


@dataclass
class IoUReport:
    per_frame: list[FrameScore] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    @property
    def mean_iou(self) -> float | None:
        vals = [f.iou for f in self.per_frame if f.iou is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def pooled_iou(self) -> float | None:
        u = sum(f.union for f in self.per_frame)
        return sum(f.intersection for f in self.per_frame) / u if u else None

    @property
    def counted_pixels(self) -> int:
        return sum(f.counted for f in self.per_frame)

    @property
    def void_pixels(self) -> int:
        return sum(f.void for f in self.per_frame)

    def to_json_obj(self) -> dict:
        return {
            "per_frame": [
                {"frame_id": f.frame_id, "iou": f.iou, "defined": f.iou is not None,
                 "intersection": f.intersection, "union": f.union}
                for f in self.per_frame
            ],
            "mean_iou": self.mean_iou,
            "pooled_iou": self.pooled_iou,
            "counted_pixels": self.counted_pixels,
            "void_pixels": self.void_pixels,
            "missing": list(self.missing),
        }

    def to_table(self) -> str:
        rows = [("frame", "iou", "intersection", "union")]
        for f in self.per_frame:
            rows.append((f.frame_id, "undefined" if f.iou is None else f"{f.iou:.4f}", str(f.intersection),
                         str(f.union)))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
                 for r in rows]
        fmt = lambda x: "undefined" if x is None else f"{x:.4f}"
        lines.append("")
        lines.append(f"mean IoU (per frame): {fmt(self.mean_iou)}")
        lines.append(f"pooled IoU:           {fmt(self.pooled_iou)}")
        lines.append(f"counted pixels:       {self.counted_pixels}")
        lines.append(f"void pixels:          {self.void_pixels}")
        for m in self.missing:
            lines.append(f"missing: {m}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        out = ["frame_id,iou,intersection,union,counted_pixels,void_pixels"]
        for f in self.per_frame:
            out.append(f"{f.frame_id},{'' if f.iou is None else repr(f.iou)},{f.intersection},{f.union},"
                       f"{f.counted},{f.void}")
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {"report.json": json.dumps(self.to_json_obj(), indent=2) + "\n",
                 "report.txt": self.to_table(), "report.csv": self.to_csv()}
        for name, text in files.items():
            (out_dir / name).write_text(text)
        return [out_dir / n for n in files]


def _frame_key(path: Path) -> str | None:
    stem = path.stem
    if stem.endswith(("_void", "_depth", "_rgb")):
        return None
    for suf in _STEM_SUFFIXES:
        if stem.endswith(suf):
            return stem[: -len(suf)]
    return stem


def _index(directory) -> dict[str, Path]:
    out = {}
    for p in sorted(Path(directory).rglob("*.png")):
        key = _frame_key(p)
        if key is not None:
            out.setdefault(key, p)
    return out


def load_mask(path, mapping: ClassMappingRule, layer_map: LayerMap) -> np.ndarray:
    """Binary PNG (0/255 or 0/1) or a label-colour PNG run through :func:`map_to_binary`."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "1") else im.convert("L"))
    if arr.ndim == 2:
        return arr > (0 if arr.max() <= 1 else 127)
    cols = {tuple(c) for c in np.unique(arr.reshape(-1, 3), axis=0)}
    if cols <= {(0, 0, 0), (255, 255, 255)} and (255, 255, 255) not in layer_map.colors():
        return arr[..., 0] == 255
    return map_to_binary(arr, mapping, layer_map)


def load_void(gt_path: Path) -> np.ndarray | None:
    key = _frame_key(gt_path)
    cand = gt_path.with_name(f"{key}_void.png")
    if cand.exists():
        with Image.open(cand) as im:
            return np.asarray(im.convert("L")) > 127
    return None


def evaluate_batch(pred_dir, gt_dir, mapping: ClassMappingRule, layer_map: LayerMap) -> IoUReport:
    """Score every prediction against its ground truth (paired by frame id).

    Void comes from ``<id>_void.png`` beside the ground truth when present,
    otherwise from void-coloured ground-truth pixels.
    """
    preds = _index(pred_dir)
    gts = _index(gt_dir)
    report = IoUReport()
    for key in sorted(set(preds) | set(gts)):
        if key not in preds:
            report.missing.append(f"{key}: no prediction")
            continue
        if key not in gts:
            report.missing.append(f"{key}: no ground truth")
            continue
        gt_path = gts[key]
        gt = load_mask(gt_path, mapping, layer_map)
        pred = load_mask(preds[key], mapping, layer_map)
        void = load_void(gt_path)
        if void is None:
            with Image.open(gt_path) as im:
                arr = np.asarray(im.convert("RGB"))
            void = np.all(arr == np.array(VOID_COLOR, dtype=np.uint8), axis=-1)
        if pred.shape != gt.shape:
            report.missing.append(f"{key}: size mismatch {pred.shape} vs {gt.shape}")
            continue
        keep = ~void
        inter = int(np.count_nonzero(pred & gt & keep))
        union = int(np.count_nonzero((pred | gt) & keep))
        report.per_frame.append(FrameScore(key, compute_iou(pred, gt, void), inter, union,
                                           int(keep.sum()), int(void.sum())))
    return report
