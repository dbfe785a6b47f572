"""Layer id -> (name, colour) tables used to encode label images."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_LAYERS = 32
VOID_COLOR = (0, 0, 0)

# Colours follow the Cityscapes palette where a class exists there.
CATALOG = [
    ("sky", (70, 130, 180)),
    ("road", (128, 64, 128)),
    ("sidewalk", (244, 35, 232)),
    ("terrain", (152, 251, 152)),
    ("building", (70, 70, 70)),
    ("vehicle", (0, 0, 142)),
    ("vegetation", (107, 142, 35)),
    ("pole", (153, 153, 153)),
    ("parking", (250, 170, 160)),
    ("rail track", (230, 150, 140)),
    ("fence", (190, 153, 153)),
    ("wall", (102, 102, 156)),
    ("traffic sign", (220, 220, 0)),
    ("traffic light", (250, 170, 30)),
    ("person", (220, 20, 60)),
    ("bus", (0, 60, 100)),
]
BACKGROUND_LAYER = "sky"


class LayerMapError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    id: int
    name: str
    color: tuple[int, int, int]


class LayerMap:
    """Validated table of at most 32 layers with pairwise distinct colours."""

    def __init__(self, entries=()):
        layers = []
        for e in entries:
            if isinstance(e, Layer):
                layers.append(Layer(int(e.id), str(e.name), tuple(int(c) for c in e.color)))
            else:
                lid, name, color = e
                layers.append(Layer(int(lid), str(name), tuple(int(c) for c in color)))
        if len(layers) > MAX_LAYERS:
            raise LayerMapError(f"{len(layers)} layers requested, at most {MAX_LAYERS} are supported")
        ids = [l.id for l in layers]
        colors = [l.color for l in layers]
        if len(set(ids)) != len(ids):
            raise LayerMapError(f"duplicate layer ids: {sorted(i for i in set(ids) if ids.count(i) > 1)}")
        if len(set(colors)) != len(colors):
            raise LayerMapError("layer colours must be pairwise distinct")
        for l in layers:
            if not 0 <= l.id < MAX_LAYERS:
                raise LayerMapError(f"layer id {l.id} outside 0..{MAX_LAYERS - 1}")
            if len(l.color) != 3 or not all(0 <= c <= 255 for c in l.color):
                raise LayerMapError(f"layer {l.name!r} has invalid colour {l.color}")
            if l.color == VOID_COLOR:
                raise LayerMapError(f"layer {l.name!r} uses the reserved void colour")
        self._layers = tuple(sorted(layers, key=lambda l: l.id))

    def __iter__(self):
        return iter(self._layers)

    def __len__(self):
        return len(self._layers)

    def __eq__(self, other):
        return isinstance(other, LayerMap) and self._layers == other._layers

    def __repr__(self):
        return f"LayerMap({list(self._layers)!r})"

    @property
    def ids(self) -> list[int]:
        return [l.id for l in self._layers]

    @property
    def names(self) -> list[str]:
        return [l.name for l in self._layers]

    def by_name(self, name: str) -> Layer:
        key = normalize_name(name)
        for l in self._layers:
            if normalize_name(l.name) == key:
                return l
        raise KeyError(name)

    def by_id(self, lid: int) -> Layer:
        for l in self._layers:
            if l.id == lid:
                return l
        raise KeyError(lid)

    def color_table(self) -> np.ndarray:
        """(32, 3) uint8 lookup indexed by layer id; unused rows hold the void colour."""
        table = np.zeros((MAX_LAYERS, 3), dtype=np.uint8)
        for l in self._layers:
            table[l.id] = l.color
        return table

    def colors(self) -> set[tuple[int, int, int]]:
        return {l.color for l in self._layers}

    def to_json_obj(self) -> list[dict]:
        return [{"id": l.id, "name": l.name, "color": list(l.color)} for l in self._layers]

    @classmethod
    def from_json_obj(cls, obj) -> "LayerMap":
        return cls((d["id"], d["name"], d["color"]) for d in obj)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json_obj(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "LayerMap":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


def normalize_name(name: str) -> str:
    return " ".join(str(name).replace("_", " ").replace("-", " ").lower().split())


def _extra_color(k: int, taken: set) -> tuple[int, int, int]:
    # golden-ratio hue walk; deterministic and far from the catalog colours
    import colorsys

    i = k
    while True:
        h = (0.137 + 0.61803398875 * i) % 1.0
        rgb = tuple(int(round(c * 255)) for c in colorsys.hsv_to_rgb(h, 0.55 + 0.4 * ((i * 7) % 3) / 2, 0.9))
        if rgb not in taken and rgb != VOID_COLOR:
            return rgb
        i += 97


def default_layer_map(n_layers: int = 8) -> LayerMap:
    """First ``n_layers`` entries of the built-in catalog, padded with generic props."""
    if n_layers > MAX_LAYERS:
        raise LayerMapError(f"{n_layers} layers requested, at most {MAX_LAYERS} are supported")
    if n_layers < 1:
        raise LayerMapError("need at least one layer")
    entries = list(CATALOG[:n_layers])
    taken = {c for _, c in entries}
    for k in range(len(entries), n_layers):
        c = _extra_color(k, taken)
        taken.add(c)
        entries.append((f"prop {k:02d}", c))
    return LayerMap((i, name, color) for i, (name, color) in enumerate(entries))
