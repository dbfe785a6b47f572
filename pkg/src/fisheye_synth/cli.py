"""Command-line entry point: ``fisheye-synth <command> ...``.

Exit status: 0 on success, 1 on runtime failures (including skipped inputs
and failed verification), 2 on usage or configuration errors. Settings come
from built-in defaults, then ``--config`` (JSON or YAML), then flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from .camera_models import FisheyeCameraSpec, ProjectionModel
from .dataset_io import (DatasetManifest, SplitSpec, config_hash, export_frame, export_layer_map, frame_id,
                         import_layer_map, sample_frames, verify_dataset)
from .dataset_transform import AugmentConfig, augment_pair, perspective_to_fisheye
from .evaluation import DEFAULT_FREE_SPACE, ClassMappingRule, evaluate_batch
from .fisheye_composer import FrameComposer, build_warp_mesh
from .scene_renderer import RIG_PRESETS, CameraRig, SceneConfig, generate_city, rig_rotation, scripted_trajectory

log = logging.getLogger("fisheye_synth")
LOG_ENV = "FISHEYE_SYNTH_LOG_LEVEL"


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a mapping")
    return data


def _merge(defaults: dict, args, keys) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(defaults)
    for k, v in _load_config(args.config).items():
        k = k.replace("-", "_")
        if k not in cfg:
            raise UsageError(f"unknown config key {k!r}")
        cfg[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _threads(args) -> int:
    return max(1, args.threads or os.cpu_count() or 1)


def _prepare_out(out: Path, force: bool, owned=()):
    if out.exists() and any(out.iterdir()):
        if not force:
            raise UsageError(f"output directory {out} is not empty (use --force)")
        for name in owned:
            p = out / name
            if p.is_dir():
                shutil.rmtree(p)
            elif p.exists():
                p.unlink()
    out.mkdir(parents=True, exist_ok=True)


def _write_config(out: Path, cfg: dict):
    (out / "config_used.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


# --- generate ----------------------------------------------------------------------

GENERATE_DEFAULTS = {
    "seed": 1,
    "frames": 10,
    "size": 512,
    "rig": "quad45",
    "model": "equidistant",
    "focal": 159.0,
    "fov_deg": 180.0,
    "face_resolution": None,
    "mesh_resolution": 128,
    "method": "mesh",
    "near": 0.1,
    "far": 1000.0,
    "rate_hz": 1.0,
    "trajectory_hz": 10.0,
    "speed": 8.0,
    "camera_height": 2.0,
    "pitch_deg": 15.0,
    "raw_depth": False,
    "preview": False,
    "scene": {},
}


def _camera_spec(cfg) -> FisheyeCameraSpec:
    try:
        return FisheyeCameraSpec(cfg["model"], float(cfg["focal"]), int(cfg["size"]), int(cfg["size"]),
                                 theta_max=math.radians(float(cfg["fov_deg"])) / 2)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_generate(args) -> int:
    cfg = _merge(GENERATE_DEFAULTS, args, ["seed", "frames", "size", "rig", "model", "focal", "fov_deg",
                                           "face_resolution", "mesh_resolution", "method", "near", "far",
                                           "rate_hz", "pitch_deg", "raw_depth", "preview"])
    if int(cfg["frames"]) < 0:
        raise UsageError("--frames must be >= 0")
    if cfg["rig"] not in RIG_PRESETS:
        raise UsageError(f"unknown rig {cfg['rig']!r}")
    spec = _camera_spec(cfg)
    if cfg["face_resolution"] is None:
        cfg["face_resolution"] = max(64, 16 * math.ceil(2 * spec.focal_length_px / 16))
    try:
        scene_cfg = SceneConfig.from_dict({**cfg["scene"], "seed": int(cfg["seed"])})
        rig = CameraRig.preset(cfg["rig"], int(cfg["face_resolution"]))
        rig.check_coverage(spec.theta_max)
        if not float(cfg["far"]) > float(cfg["near"]) > 0:
            raise ValueError("need far > near > 0")
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from None
    cfg["scene"] = asdict(scene_cfg)
    used = {"command": "generate", "camera": spec.to_dict(), **cfg}

    out = Path(args.out)
    _prepare_out(out, args.force, owned=("frames", "manifest.json", "layer_map.json", "config_used.json",
                                         "previews"))
    scene, lmap = generate_city(scene_cfg)
    n = int(cfg["frames"])
    rate = float(cfg["rate_hz"])
    poses = []
    if n:
        traj = scripted_trajectory(scene_cfg, (n + 1) / rate, float(cfg["trajectory_hz"]), float(cfg["speed"]),
                                   float(cfg["camera_height"]))
        poses = sample_frames(traj, rate)[:n]
    composer = FrameComposer(spec, rig, cfg["method"], int(cfg["mesh_resolution"])) if n else None
    scene._arrays  # build the shared lookup tables before threads start
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    pitch = math.radians(float(cfg["pitch_deg"]))

    def work(item):
        i, pose = item
        fid = frame_id(i)
        try:
            posed = rig.with_pose(pose.position, rig_rotation(pose.yaw, pitch))
            frame = composer.frame(scene, posed, float(cfg["near"]), float(cfg["far"]), fid)
            export_frame(frame, frames_dir, lmap, raw_depth=bool(cfg["raw_depth"]))
            if cfg["preview"]:
                from .plotting import plot_frame_preview

                (out / "previews").mkdir(exist_ok=True)
                plot_frame_preview(frame, out / "previews" / f"{fid}.png")
        except Exception as e:
            raise RuntimeError(f"frame {fid}: {e}") from e
        log.info("wrote %s", fid)
        return fid

    with ThreadPoolExecutor(_threads(args)) as pool:
        ids = list(pool.map(work, enumerate(poses)))

    export_layer_map(lmap, out / "layer_map.json")
    DatasetManifest(ids, "layer_map.json", None, config_hash(used)).save(out / "manifest.json")
    _write_config(out, used)
    print(f"generated {len(ids)} frame(s) in {out}")
    return 0


# --- warp / augment ---------------------------------------------------------------------

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def find_pairs(root) -> tuple[list, list]:
    """Pair images with labels under ``root``.

    Accepts either ``images/`` + ``labels/`` subtrees with matching relative
    stems, or ``<stem>_rgb.*`` next to ``<stem>_label.*``. Returns
    ``(pairs, unpaired)`` with pairs as ``(relative_stem, image, label)``.
    """
    root = Path(root)
    files = [p for p in sorted(root.rglob("*")) if p.suffix.lower() in IMAGE_EXTS and p.is_file()]
    imgs, labs = {}, {}
    if (root / "images").is_dir() and (root / "labels").is_dir():
        for p in files:
            rel = p.relative_to(root)
            if rel.parts[0] == "images":
                imgs[str(Path(*rel.parts[1:]).with_suffix(""))] = p
            elif rel.parts[0] == "labels":
                labs[str(Path(*rel.parts[1:]).with_suffix(""))] = p
    else:
        for p in files:
            stem = str(p.relative_to(root).with_suffix(""))
            if stem.endswith("_rgb"):
                imgs[stem[:-4]] = p
            elif stem.endswith("_label"):
                labs[stem[:-6]] = p
    pairs = [(k, imgs[k], labs[k]) for k in sorted(set(imgs) & set(labs))]
    unpaired = [str(imgs.get(k) or labs.get(k)) for k in sorted(set(imgs) ^ set(labs))]
    return pairs, unpaired


def _read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("L", "P", "I", "I;16"):
            return np.asarray(im.convert("L")) if im.mode != "P" else np.asarray(im.convert("RGB"))
        return np.asarray(im.convert("RGB"))


def _save_image(arr, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def cmd_warp(args) -> int:
    cfg = _merge({"focal": 159.0, "source_focal": None}, args, ["focal", "source_focal"])
    try:
        focal = float(cfg["focal"])
        src = None if cfg["source_focal"] is None else float(cfg["source_focal"])
        if not focal > 0 or (src is not None and not src > 0):
            raise ValueError("focal lengths must be positive")
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None
    inp, out = Path(args.input), Path(args.output)
    if not inp.is_dir():
        raise UsageError(f"input directory {inp} does not exist")
    pairs, unpaired = find_pairs(inp)
    _prepare_out(out, args.force)

    def work(pair):
        stem, ip, lp = pair
        img, lab = _read_image(ip), _read_image(lp)
        if img.shape[:2] != lab.shape[:2]:
            return f"{stem}: image {img.shape[:2]} and label {lab.shape[:2]} differ in size"
        w_img, void = perspective_to_fisheye(img, focal, "rgb", src)
        w_lab, _ = perspective_to_fisheye(lab, focal, "label", src)
        _save_image(w_img, out / f"{stem}_rgb.png")
        _save_image(w_lab, out / f"{stem}_label.png")
        _save_image((void * 255).astype(np.uint8), out / f"{stem}_void.png")
        return None

    with ThreadPoolExecutor(_threads(args)) as pool:
        errors = [e for e in pool.map(work, pairs) if e]
    _write_config(out, {"command": "warp", "input": str(inp), **cfg})
    for u in unpaired:
        print(f"unpaired: {u}", file=sys.stderr)
    for e in errors:
        print(f"skipped: {e}", file=sys.stderr)
    print(f"warped {len(pairs) - len(errors)} pair(s), {len(unpaired)} unpaired, {len(errors)} failed")
    return 1 if unpaired or errors else 0


AUGMENT_KEYS = ["seed", "flip_probability", "brightness_max_delta", "noise_mean", "noise_std", "hue_max_delta",
                "saturation_range", "op_probability"]


def cmd_augment(args) -> int:
    defaults = AugmentConfig().to_dict()
    cfg = _merge(defaults, args, AUGMENT_KEYS)
    try:
        acfg = AugmentConfig(**{**cfg, "saturation_range": tuple(cfg["saturation_range"])})
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None
    inp, out = Path(args.input), Path(args.output)
    if not inp.is_dir():
        raise UsageError(f"input directory {inp} does not exist")
    pairs, unpaired = find_pairs(inp)
    _prepare_out(out, args.force)

    def work(item):
        idx, (stem, ip, lp) = item
        img, lab = _read_image(ip), _read_image(lp)
        if img.shape[:2] != lab.shape[:2]:
            return f"{stem}: image and label differ in size"
        a_img, a_lab = augment_pair(img, lab, acfg, idx)
        _save_image(a_img, out / f"{stem}_rgb.png")
        _save_image(a_lab, out / f"{stem}_label.png")
        return None

    with ThreadPoolExecutor(_threads(args)) as pool:
        errors = [e for e in pool.map(work, enumerate(pairs)) if e]
    _write_config(out, {"command": "augment", "input": str(inp), **acfg.to_dict()})
    for u in unpaired:
        print(f"unpaired: {u}", file=sys.stderr)
    for e in errors:
        print(f"skipped: {e}", file=sys.stderr)
    print(f"augmented {len(pairs) - len(errors)} pair(s), {len(unpaired)} unpaired")
    return 1 if unpaired or errors else 0


# --- split / eval / verify / mesh-dump -----------------------------------------------------


def cmd_split(args) -> int:
    cfg = _merge({"fraction": 0.8, "seed": 0, "sequential": False}, args, ["fraction", "seed", "sequential"])
    path = Path(args.manifest)
    try:
        manifest = DatasetManifest.load(path)
        spec = SplitSpec(float(cfg["fraction"]), int(cfg["seed"]))
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(str(e)) from None
    updated = manifest.with_split(spec, sequential=bool(cfg["sequential"]))
    updated.save(path)
    print(f"train {len(updated.split['train'])} / val {len(updated.split['val'])}")
    return 0


def _find_layer_map(*dirs) -> Path | None:
    for d in dirs:
        for cand in (Path(d) / "layer_map.json", Path(d).parent / "layer_map.json"):
            if cand.exists():
                return cand
    return None


def cmd_eval(args) -> int:
    cfg = _merge({"free_space": ",".join(DEFAULT_FREE_SPACE), "layer_map": None, "figures": True}, args,
                 ["free_space", "layer_map", "figures"])
    lm_path = cfg["layer_map"] or _find_layer_map(args.gt, args.pred)
    if lm_path is None:
        raise UsageError("no layer map found; pass --layer-map")
    try:
        lmap = import_layer_map(lm_path)
        classes = cfg["free_space"]
        if isinstance(classes, str):
            classes = [c for c in classes.split(",") if c.strip()]
        rule = ClassMappingRule(frozenset(classes))
        rule.free_layer_ids(lmap)
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(str(e)) from None
    report = evaluate_batch(args.pred, args.gt, rule, lmap)
    out = Path(args.out)
    report.write(out)
    if cfg["figures"]:
        from .plotting import plot_iou_report

        plot_iou_report(report, out / "iou_per_frame.png")
    _write_config(out, {"command": "eval", "pred": str(args.pred), "gt": str(args.gt), "layer_map": str(lm_path),
                        "free_space": sorted(map(str, rule.free_space_classes)), "figures": bool(cfg["figures"])})
    sys.stdout.write(report.to_table())
    return 1 if report.missing else 0


def cmd_verify(args) -> int:
    problems = verify_dataset(args.root, raw_depth=args.raw_depth)
    for p in problems:
        print(p)
    print("clean" if not problems else f"{len(problems)} violation(s)")
    return 0 if not problems else 1


def cmd_mesh_dump(args) -> int:
    cfg = _merge({"rig": "quad45", "model": "equidistant", "focal": 159.0, "size": 512, "fov_deg": 180.0,
                  "resolution": 16}, args, ["rig", "model", "focal", "size", "fov_deg", "resolution"])
    spec = _camera_spec(cfg)
    try:
        rig = CameraRig.preset(cfg["rig"])
        mesh = build_warp_mesh(spec, rig, int(cfg["resolution"]))
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mesh.dump(out)
    if args.plot:
        from .plotting import plot_warp_mesh

        plot_warp_mesh(mesh, args.plot)
    print(f"{len(mesh.positions)} vertices, {len(mesh.triangles)} triangles -> {out}")
    return 0


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file with settings (flags override it)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    p = argparse.ArgumentParser(prog="fisheye-synth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="render a synthetic fisheye dataset")
    g.add_argument("out")
    g.add_argument("--seed", type=int)
    g.add_argument("--frames", type=int)
    g.add_argument("--size", type=int, help="fisheye image width and height in pixels")
    g.add_argument("--rig", choices=sorted(RIG_PRESETS))
    g.add_argument("--model", choices=[m.value for m in ProjectionModel])
    g.add_argument("--focal", type=float)
    g.add_argument("--fov-deg", dest="fov_deg", type=float)
    g.add_argument("--face-resolution", dest="face_resolution", type=int)
    g.add_argument("--mesh-resolution", dest="mesh_resolution", type=int)
    g.add_argument("--method", choices=["mesh", "per_pixel"])
    g.add_argument("--near", type=float)
    g.add_argument("--far", type=float)
    g.add_argument("--rate-hz", dest="rate_hz", type=float)
    g.add_argument("--pitch-deg", dest="pitch_deg", type=float)
    g.add_argument("--raw-depth", dest="raw_depth", action="store_true", default=None,
                   help="write depth as raw float32 instead of EXR (non-canonical)")
    g.add_argument("--preview", action="store_true", default=None, help="also write preview figures")
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_generate)

    w = sub.add_parser("warp", parents=[common], help="warp perspective image/label pairs into fisheye")
    w.add_argument("input")
    w.add_argument("output")
    w.add_argument("--focal", type=float)
    w.add_argument("--source-focal", dest="source_focal", type=float)
    w.add_argument("--force", action="store_true")
    w.set_defaults(func=cmd_warp)

    a = sub.add_parser("augment", parents=[common], help="augment image/label pairs")
    a.add_argument("input")
    a.add_argument("output")
    a.add_argument("--seed", type=int)
    a.add_argument("--flip-probability", dest="flip_probability", type=float)
    a.add_argument("--brightness-max-delta", dest="brightness_max_delta", type=float)
    a.add_argument("--noise-mean", dest="noise_mean", type=float)
    a.add_argument("--noise-std", dest="noise_std", type=float)
    a.add_argument("--hue-max-delta", dest="hue_max_delta", type=float)
    a.add_argument("--saturation-range", dest="saturation_range", type=float, nargs=2)
    a.add_argument("--op-probability", dest="op_probability", type=float)
    a.add_argument("--force", action="store_true")
    a.set_defaults(func=cmd_augment)

    s = sub.add_parser("split", parents=[common], help="add a train/validation split to a manifest")
    s.add_argument("manifest")
    s.add_argument("--fraction", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--sequential", action="store_true", default=None)
    s.set_defaults(func=cmd_split)

    e = sub.add_parser("eval", parents=[common], help="free-space IoU of predictions against ground truth")
    e.add_argument("pred")
    e.add_argument("gt")
    e.add_argument("--out", required=True)
    e.add_argument("--layer-map", dest="layer_map")
    e.add_argument("--free-space", dest="free_space", help="comma separated class names")
    e.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", parents=[common], help="check a generated dataset tree")
    v.add_argument("root")
    v.add_argument("--raw-depth", dest="raw_depth", action="store_true")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("mesh-dump", parents=[common], help="write a warp mesh as JSON")
    m.add_argument("out")
    m.add_argument("--rig", choices=sorted(RIG_PRESETS))
    m.add_argument("--model", choices=[x.value for x in ProjectionModel])
    m.add_argument("--focal", type=float)
    m.add_argument("--size", type=int)
    m.add_argument("--fov-deg", dest="fov_deg", type=float)
    m.add_argument("--resolution", type=int)
    m.add_argument("--plot", help="also draw the mesh to this image file")
    m.set_defaults(func=cmd_mesh_dump)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        log.debug("failure", exc_info=True)
        print(f"{parser.prog} {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
