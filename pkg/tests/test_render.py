import numpy as np
import numpy.testing as npt
import pytest

from sblab.render import (
    CameraPose,
    read_image,
    render_depth,
    render_views,
    sample_camera_pose,
    write_image,
)
from sblab.rng import rng_from
from sblab.shapegen import builtin_recipes, normalize_pointcloud, realize
from sblab.shapegen import sample_surface_points
from sblab.shapegen.primitives import sample_primitive


def _sphere_cloud(n=2000, seed=0):
    return normalize_pointcloud(sample_primitive("sphere", (1.0,), n, rng_from(seed)))


def _cube_cloud(n=2000, seed=1):
    return normalize_pointcloud(
        sample_primitive("box", (1.0, 1.0, 1.0), n, rng_from(seed))
    )


def test_pose_sampling_ranges_and_mean():
    rng = rng_from(2)
    azimuths = []
    for _ in range(10_000):
        pose = sample_camera_pose(rng)
        assert 0.0 <= pose.azimuth < 360.0
        assert -50.0 <= pose.elevation <= 50.0
        azimuths.append(pose.azimuth)
    assert 170.0 <= np.mean(azimuths) <= 190.0


def test_pose_sampling_deterministic():
    a = [sample_camera_pose(rng_from(3)) for _ in range(5)]
    b = [sample_camera_pose(rng_from(3)) for _ in range(5)]
    assert a == b


def test_pose_range_validation():
    with pytest.raises(ValueError):
        CameraPose(azimuth=360.0, elevation=0.0)
    with pytest.raises(ValueError):
        CameraPose(azimuth=0.0, elevation=51.0)


def test_single_point_disc_centered():
    img = render_depth(np.zeros((1, 3)), CameraPose(0.0, 0.0), 32, 32, splat_radius=1)
    assert img.silhouette[16, 16] == 1
    assert img.silhouette[16, 15] == 1 and img.silhouette[15, 16] == 1
    assert img.silhouette.sum() == 5  # radius-1 disc = plus shape


def test_sphere_silhouette_bounding_box_square():
    img = render_depth(_sphere_cloud(), CameraPose(123.0, 0.0), 64, 64)
    rows = np.where(img.silhouette.any(axis=1))[0]
    cols = np.where(img.silhouette.any(axis=0))[0]
    h = rows[-1] - rows[0] + 1
    w = cols[-1] - cols[0] + 1
    assert abs(h - w) <= 2


def test_zbuffer_keeps_nearer_point():
    # both points project to the same pixel; smaller camera-frame depth wins
    pts = np.array([[0.0, -0.5, 0.0], [0.0, 0.5, 0.0]])
    img = render_depth(pts, CameraPose(0.0, 0.0), 32, 32, splat_radius=0)
    fg = img.silhouette > 0
    assert fg.sum() == 1
    # two distinct depths collapse onto one pixel; survivor is min, normalized span 0
    assert img.depth[fg][0] == 0.5


def test_foreground_depths_in_unit_interval():
    img = render_depth(_cube_cloud(), CameraPose(33.0, 21.0), 32, 32)
    fg = img.silhouette > 0
    assert fg.any()
    assert img.depth[fg].min() >= 0.0
    assert img.depth[fg].max() <= 1.0
    ch = img.channels()
    assert np.all(ch[0][~fg.astype(bool)] == 0.0)


def test_render_views_distinct_poses_and_determinism():
    cloud = _cube_cloud()
    views_a = render_views(cloud, 8, rng_from(7), 32, 32)
    views_b = render_views(cloud, 8, rng_from(7), 32, 32)
    poses = {(v.pose.azimuth, v.pose.elevation) for v in views_a}
    assert len(poses) == 8
    for va, vb in zip(views_a, views_b):
        assert np.array_equal(va.depth, vb.depth)
        assert np.array_equal(va.silhouette, vb.silhouette)


def test_cube_quarter_turn_silhouette_match():
    cloud = _cube_cloud(4000)
    a = render_depth(cloud, CameraPose(0.0, 0.0), 32, 32).silhouette
    b = render_depth(cloud, CameraPose(90.0, 0.0), 32, 32).silhouette
    differing = np.sum(a != b)
    assert differing <= 0.02 * a.size


def test_object_rotation_equals_azimuth_shift():
    inst = realize(builtin_recipes()[8], seed=4)  # table: no rotational symmetry
    cloud = sample_surface_points(inst, 1024, rng_from(8))
    delta = 37.0
    rad = np.deg2rad(delta)
    rz = np.array(
        [
            [np.cos(rad), -np.sin(rad), 0.0],
            [np.sin(rad), np.cos(rad), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    a = render_depth(cloud @ rz.T, CameraPose(80.0 - delta, 10.0), 32, 32)
    b = render_depth(cloud, CameraPose(80.0, 10.0), 32, 32)
    differing = np.sum(a.silhouette != b.silhouette)
    assert differing <= 0.02 * a.silhouette.size


def test_silhouette_monotone_in_splat_radius():
    cloud = _sphere_cloud(200)
    pose = CameraPose(10.0, -20.0)
    sizes = [
        render_depth(cloud, pose, 32, 32, splat_radius=r).silhouette.sum()
        for r in (0, 1, 2, 3)
    ]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_empty_cloud_rejected():
    with pytest.raises(ValueError, match="empty"):
        render_depth(np.zeros((0, 3)), CameraPose(0.0, 0.0), 32, 32)


def test_image_file_roundtrip(tmp_path):
    img = render_depth(_cube_cloud(300), CameraPose(45.0, 12.5), 16, 16)
    path = tmp_path / "img" / "x_0.f32"
    write_image(path, img)
    chans, pose = read_image(path)
    assert chans.shape == (2, 16, 16)
    npt.assert_allclose(chans[1], img.silhouette, atol=0)
    npt.assert_allclose(chans[0], img.channels()[0], atol=1e-7)
    assert pose.azimuth == pytest.approx(45.0, abs=1e-4)
    assert pose.elevation == pytest.approx(12.5, abs=1e-4)
