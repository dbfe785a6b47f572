"""Shared builders for synthetic face sets."""
import numpy as np

from fisheye_synth.sampling import to_uint8
from fisheye_synth.scene_renderer import CameraRig, ChannelImage, ChannelKind


def smooth_rgb(d):
    """Smooth colour field over unit directions (values in [0, 255])."""
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack([127.5 * (1 + np.sin(2.0 * x + 0.5 * z)),
                     127.5 * (1 + np.cos(1.5 * y - x)),
                     127.5 * (1 + np.sin(x * y + 2.0 * z))], axis=-1)


def radial_rgb(d):
    """Colour that depends on the direction only through 4-fold symmetric terms."""
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack([255.0 * z.clip(0, 1), 255.0 * (x * x + y * y), 1020.0 * (x * y) ** 2], axis=-1)


def direction_faces(rig: CameraRig, fn=smooth_rgb):
    """One rgb face per rig camera whose pixels are ``fn(ray in rig frame)``."""
    rig = rig.with_pose((0.0, 0.0, 0.0), np.eye(3))
    return [{ChannelKind.RGB: ChannelImage(ChannelKind.RGB, to_uint8(fn(cam.ray_directions())))}
            for cam in rig.world_cameras()]


def uniform_faces(rig: CameraRig, color, kind=ChannelKind.RGB):
    n = rig.resolution
    if kind is ChannelKind.DEPTH:
        data = lambda: np.full((n, n), color, dtype=np.float32)
    else:
        data = lambda: np.broadcast_to(np.array(color, dtype=np.uint8), (n, n, 3)).copy()
    return [{kind: ChannelImage(kind, data())} for _ in rig.cameras]
