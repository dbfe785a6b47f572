import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fisheye_synth.layers import CATALOG, LayerMap, LayerMapError, default_layer_map
from fisheye_synth.scene_renderer import (Box, CameraRig, ChannelImage, ChannelKind, CoverageError, GroundPlane,
                                          InvalidPoseError, PerspectiveCamera, RigCamera, Scene, SceneConfig, Sphere,
                                          depth_normalize, fibonacci_cap, frame_from_axes, generate_city,
                                          normalize_depth, render_camera, render_channel, render_rig, rig_rotation,
                                          scripted_trajectory, trace)

LMAP = default_layer_map(6)
SKY = LMAP.by_name("sky").color
TERRAIN = LMAP.by_name("terrain")
BUILDING = LMAP.by_name("building")


def test_depth_normalize_examples():
    assert depth_normalize(1.0, 1.0, 101.0) == 0.0
    assert depth_normalize(101.0, 1.0, 101.0) == 1.0
    assert depth_normalize(51.0, 1.0, 101.0) == 0.5
    assert depth_normalize(math.inf, 1.0, 101.0) == 1.0
    with pytest.raises(ValueError):
        depth_normalize(5.0, 10.0, 10.0)
    with pytest.raises(ValueError):
        depth_normalize(5.0, 0.0, 10.0)
    d = normalize_depth([0.5, 1.0, 51.0, 500.0, np.inf], 1.0, 101.0)
    assert d.dtype == np.float32
    np.testing.assert_array_equal(d, np.float32([0.0, 0.0, 0.5, 1.0, 1.0]))


def test_empty_scene_is_background():
    scene = Scene((), LMAP)
    cam = PerspectiveCamera(np.eye(3), (0.0, 0.0, 0.0), 17)
    out = render_camera(scene, cam, list(ChannelKind), 0.1, 100.0)
    assert np.all(out[ChannelKind.LABEL].data == SKY)
    assert np.all(out[ChannelKind.DEPTH].data == 1.0)


def test_ground_plane_horizon():
    h, far, n = 2.0, 50.0, 41
    scene = Scene((GroundPlane(0.0, TERRAIN.id, (0.5, 0.5, 0.5)),), LMAP)
    cam = PerspectiveCamera(rig_rotation(0.0, 0.0), (0.0, 0.0, h), n)
    lab = render_channel(scene, cam, "label", 0.1, far).data
    # oracle: camera y (down) is world -z, so rows below centre descend; hit distance h*|d|/y
    c = (n - 1) / 2
    v, u = np.mgrid[0:n, 0:n].astype(float)
    x, y = (u - c) / (n / 2), (v - c) / (n / 2)
    norm = np.sqrt(x * x + y * y + 1)
    with np.errstate(divide="ignore"):
        t = np.where(y > 0, h * norm / y, np.inf)
    ground = t <= far
    assert ground.any() and (~ground).any()
    np.testing.assert_array_equal(np.all(lab == TERRAIN.color, axis=-1), ground)
    np.testing.assert_array_equal(np.all(lab == SKY, axis=-1), ~ground)
    assert not ground[: int(c) + 1].any()


@pytest.mark.parametrize("d", [3.0, 10.0, 47.5])
def test_box_depth_on_axis(d):
    near, far = 0.5, 200.0
    box = Box((-0.5, -0.5, d), (0.5, 0.5, d + 1.0), BUILDING.id, (0.3, 0.3, 0.3))
    scene = Scene((box,), LMAP)
    cam = PerspectiveCamera(np.eye(3), (0.0, 0.0, 0.0), 33)
    out = render_camera(scene, cam, ["depth", "label"], near, far)
    assert out[ChannelKind.DEPTH].data[16, 16] == pytest.approx((d - near) / (far - near), abs=1e-5)
    assert tuple(out[ChannelKind.LABEL].data[16, 16]) == BUILDING.color


def test_sphere_hit_distance():
    sph = Sphere((0.0, 0.0, 10.0), 2.0, BUILDING.id, (1, 1, 1))
    hit = trace(Scene((sph,), LMAP), (0, 0, 0), np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]), 0.1, 100.0)
    assert hit.t[0] == pytest.approx(8.0)
    assert hit.obj[1] == -1 and np.isinf(hit.t[1])
    np.testing.assert_allclose(hit.normal[0], [0, 0, -1])


def test_hits_beyond_far_are_misses():
    box = Box((-1, -1, 20), (1, 1, 21), BUILDING.id, (1, 1, 1))
    hit = trace(Scene((box,), LMAP), (0, 0, 0), np.array([[0.0, 0.0, 1.0]]), 0.1, 10.0)
    assert hit.obj[0] == -1


def test_channel_alignment_and_range():
    scene, lmap = generate_city(SceneConfig(seed=4, length_m=120))
    rig = CameraRig.preset("quad45", 48, position=(0.0, 30.0, 2.0), rotation=rig_rotation(0.3, 0.2))
    faces = render_rig(scene, rig)
    table = {c: l.id for l in lmap for c in [l.color]}
    for f in faces:
        lab, dep = f[ChannelKind.LABEL].data, f[ChannelKind.DEPTH].data
        assert dep.min() >= 0.0 and dep.max() <= 1.0
        cols = {tuple(c) for c in lab.reshape(-1, 3)}
        assert cols <= set(table)
        sky = np.all(lab == lmap.by_name("sky").color, axis=-1)
        np.testing.assert_array_equal(sky, dep == 1.0)


def test_render_rig_cardinality_and_determinism():
    scene, _ = generate_city(SceneConfig(seed=2, length_m=90))
    rig = CameraRig.preset("quad45", 24, position=(0.0, 20.0, 2.0), rotation=rig_rotation(0.0, 0.1))
    a = render_rig(scene, rig)
    b = render_rig(scene, rig)
    assert sum(len(f) for f in a) == 12
    assert all(fa[k] == fb[k] for fa, fb in zip(a, b) for k in fa)


def test_overlapping_frusta_agree_on_label():
    scene, lmap = generate_city(SceneConfig(seed=7, length_m=120))
    origin = np.array([0.0, 40.0, 2.0])
    rig = CameraRig.preset("cube5", 64, position=origin, rotation=rig_rotation(0.0, 0.0))
    cams = rig.world_cameras()
    labels = [f[ChannelKind.LABEL].data for f in render_rig(scene, rig, ["label"])]
    # a direction on the front/right frustum edge; trace it to get a world point
    d_rig = np.array([1.0, 0.3, 1.0])
    d_rig /= np.linalg.norm(d_rig)
    d = rig.rotation @ d_rig
    hit = trace(scene, origin, d[None], 0.1, 1000.0)
    inside = [k for k in range(len(cams)) if rig.containment(d_rig[None], tol=1e-9)[k, 0]]
    assert len(inside) == 2
    cols = []
    for k in inside:
        loc = d @ cams[k].rotation
        u = cams[k].focal_px * loc[0] / loc[2] + (64 - 1) / 2
        v = cams[k].focal_px * loc[1] / loc[2] + (64 - 1) / 2
        cols.append(tuple(labels[k][int(round(v)), min(int(round(u)), 63)]))
    expected = lmap.color_table()[scene._arrays.layer[hit.obj[0]]] if hit.obj[0] >= 0 else lmap.by_name("sky").color
    assert cols[0] == cols[1] == tuple(expected)


@pytest.mark.parametrize("name", ["quad45", "cube5"])
def test_presets_cover_hemisphere(name):
    rig = CameraRig.preset(name)
    assert rig.covers(math.pi / 2)
    dirs = fibonacci_cap(4096, math.pi / 2)
    assert len(dirs) == 4096 + 64
    assert np.all(dirs[:, 2] >= -1e-12)


def test_incomplete_rig_rejected():
    rig = CameraRig((RigCamera("front", np.eye(3)),), 32)
    assert not rig.covers(math.pi / 2)
    with pytest.raises(CoverageError):
        rig.check_coverage(math.pi / 2)
    assert rig.covers(math.radians(40))


def test_rig_camera_needs_90_degrees():
    with pytest.raises(ValueError):
        RigCamera("wide", np.eye(3), 100.0)


def test_bad_pose_rejected():
    with pytest.raises(InvalidPoseError):
        CameraRig.preset("quad45", rotation=np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(InvalidPoseError):
        CameraRig.preset("quad45", rotation=np.full((3, 3), np.nan))


@settings(max_examples=30)
@given(st.floats(-math.pi, math.pi), st.floats(-0.6, 0.6))
def test_rig_rotation_is_proper(yaw, pitch):
    R = rig_rotation(yaw, pitch)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)
    fwd = R[:, 2]
    # heading measured counter-clockwise from north, tilted below the horizon
    assert math.atan2(-fwd[0], fwd[1]) == pytest.approx(yaw, abs=1e-9)
    assert -math.asin(fwd[2]) == pytest.approx(pitch, abs=1e-9)


def test_frame_from_axes_columns():
    R = frame_from_axes((0, 0, 1), (1, 0, 0))
    np.testing.assert_allclose(R, np.eye(3))


def test_city_determinism_and_layers():
    a, la = generate_city(SceneConfig(seed=1))
    b, lb = generate_city(SceneConfig(seed=1))
    assert a.digest() == b.digest() and la == lb
    c, _ = generate_city(SceneConfig(seed=2))
    assert c.digest() != a.digest()
    _, l8 = generate_city(SceneConfig(seed=1, n_layers=8))
    assert len(l8) == 8 and len(l8.colors()) == 8
    assert LayerMap.from_json_obj(l8.to_json_obj()) == l8
    with pytest.raises(LayerMapError):
        generate_city(SceneConfig(n_layers=5))


def test_zero_building_density_has_no_buildings():
    scene, lmap = generate_city(SceneConfig(seed=3, building_density=0.0, length_m=120))
    rig = CameraRig.preset("quad45", 48, position=(0.0, 50.0, 2.0), rotation=rig_rotation(0.0, 0.0))
    faces = render_rig(scene, rig, ["label"])
    bcol = lmap.by_name("building").color
    assert not any(np.all(f[ChannelKind.LABEL].data == bcol, axis=-1).any() for f in faces)
    # sanity: the default density does show buildings from the same pose
    scene2, _ = generate_city(SceneConfig(seed=3, length_m=120))
    faces2 = render_rig(scene2, rig.with_pose(rig.position, rig.rotation), ["label"])
    assert any(np.all(f[ChannelKind.LABEL].data == bcol, axis=-1).any() for f in faces2)


def test_scene_rejects_unknown_layers():
    with pytest.raises(LayerMapError):
        Scene((Box((0, 0, 0), (1, 1, 1), 31, (1, 1, 1)),), LMAP)


def test_channel_image_validation():
    with pytest.raises(ValueError):
        ChannelImage("depth", np.zeros((4, 4), np.float64))
    with pytest.raises(ValueError):
        ChannelImage("rgb", np.zeros((4, 4), np.uint8))
    a = ChannelImage("label", np.zeros((2, 2, 3), np.uint8))
    assert a == ChannelImage(ChannelKind.LABEL, np.zeros((2, 2, 3), np.uint8))


def test_layer_map_limits():
    assert LayerMap().to_json_obj() == []
    one = LayerMap([(0, "road", (128, 64, 128))])
    assert one.to_json_obj() == [{"id": 0, "name": "road", "color": [128, 64, 128]}]
    with pytest.raises(LayerMapError):
        LayerMap([(i, f"l{i}", (i + 1, 0, 0)) for i in range(33)])
    with pytest.raises(LayerMapError):
        LayerMap([(0, "a", (1, 2, 3)), (1, "b", (1, 2, 3))])
    with pytest.raises(LayerMapError):
        LayerMap([(0, "void", (0, 0, 0))])
    full = default_layer_map(32)
    assert len(full.colors()) == 32
    assert [n for n, _ in CATALOG[:4]] == full.names[:4]


def test_trajectory_ping_pong():
    cfg = SceneConfig(length_m=100)
    poses = scripted_trajectory(cfg, 30.0, hz=10, speed=8)
    assert len(poses) == 301
    ys = [p.position[1] for p in poses]
    assert min(ys) >= 5.0 - 1e-9 and max(ys) <= 95.0 + 1e-9
    assert poses[0].yaw == 0.0 and any(p.yaw == math.pi for p in poses)
    np.testing.assert_allclose(np.diff([p.timestamp for p in poses]), 0.1, atol=1e-9)
