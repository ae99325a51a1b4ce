import numpy as np
import pytest

from graspgen.accel import build_accel
from graspgen.camera import (CameraIntrinsics, DEPTH_PNG_SCALE,
                             ViewpointConfig, depth_to_pointcloud, load_frame,
                             look_at_pose, render_depth, sample_viewpoint,
                             save_frame)
from graspgen.geometry import Pose
from graspgen.procedural import box_mesh


@pytest.fixture(scope="module")
def plane_accel():
    # large slab, top at z = 0
    return build_accel([(box_mesh((4, 4, 0.5), center=(0, 0, -0.25)),
                         Pose.identity(), 1.0)])


def test_look_at_points_camera_z_at_target():
    pose = look_at_pose([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    z_cam = pose.rotation[:, 2]
    want = -np.array([1.0, 2.0, 3.0]) / np.linalg.norm([1.0, 2.0, 3.0])
    assert np.allclose(z_cam, want, atol=1e-12)
    # +Y roughly downward (negative world z component)
    assert pose.rotation[2, 1] < 0
    assert np.isclose(np.linalg.det(pose.rotation), 1.0)


def test_look_at_straight_down_fallback():
    pose = look_at_pose([0.0, 0.0, 2.0], [0.0, 0.0, 0.0])
    assert np.allclose(pose.rotation[:, 2], [0, 0, -1], atol=1e-12)
    assert np.isclose(np.linalg.det(pose.rotation), 1.0)


def test_sample_viewpoint_in_ranges():
    cfg = ViewpointConfig(rho_range=(0.5, 10.0))
    for seed in range(20):
        pose = sample_viewpoint(cfg, seed)
        rho = np.linalg.norm(pose.t)
        assert 0.5 - 1e-9 <= rho <= 10.0 + 1e-9
        assert pose.t[2] >= -1e-9  # phi in [0, pi/2]: upper hemisphere


def test_render_depth_straight_down_is_z_depth(plane_accel):
    h = 1.5
    pose = look_at_pose([0.0, 0.0, h])
    intr = CameraIntrinsics()
    frame = render_depth(plane_accel, pose, intr)
    valid = frame.depth > 0
    assert valid.mean() > 0.9
    # z-depth of a horizontal plane seen straight down is constant = h,
    # regardless of pixel position
    assert np.allclose(frame.depth[valid], h, atol=1e-9)
    assert (frame.instance_ids[valid] == 0).all()
    assert (frame.instance_ids[~valid] == -1).all()


def test_render_depth_oblique_matches_analytic(plane_accel):
    pose = look_at_pose([1.0, 0.5, 1.2])
    frame = render_depth(plane_accel, pose, CameraIntrinsics())
    valid = frame.depth > 0
    pc = depth_to_pointcloud(frame)
    pts = pc[0][0]
    # back-projected points lie on the z=0 plane
    assert np.abs(pts[:, 2]).max() < 1e-9
    assert valid.sum() == len(pts)


def test_depth_noise_deterministic(plane_accel):
    pose = look_at_pose([0.0, 0.0, 1.0])
    a = render_depth(plane_accel, pose, CameraIntrinsics(),
                     noise_sigma_mm=2.0, noise_seed=5)
    b = render_depth(plane_accel, pose, CameraIntrinsics(),
                     noise_sigma_mm=2.0, noise_seed=5)
    c = render_depth(plane_accel, pose, CameraIntrinsics(),
                     noise_sigma_mm=2.0, noise_seed=6)
    assert np.array_equal(a.depth, b.depth)
    assert not np.array_equal(a.depth, c.depth)


def test_frame_roundtrip(tmp_path, plane_accel):
    pose = look_at_pose([0.3, -0.2, 1.0])
    frame = render_depth(plane_accel, pose, CameraIntrinsics())
    save_frame(frame, tmp_path, "f")
    loaded = load_frame(tmp_path, "f")
    valid = frame.depth > 0
    # 16-bit PNG stores 0.1 mm units
    err = np.abs(frame.depth[valid] - loaded.depth[valid])
    assert err.max() <= 0.5 / DEPTH_PNG_SCALE + 1e-12
    assert np.array_equal(frame.instance_ids, loaded.instance_ids)
    assert np.allclose(frame.camera_pose.t, loaded.camera_pose.t)
    assert loaded.intrinsics.fx == frame.intrinsics.fx


def test_pointcloud_grouped_by_instance():
    accel = build_accel([
        (box_mesh((0.2, 0.2, 0.1), center=(0, 0, 0.05)), Pose.identity(), 1.0),
        (box_mesh((0.2, 0.2, 0.1), center=(0, 0, 0.05)),
         Pose.from_translation([0.5, 0, 0]), 1.0)])
    frame = render_depth(accel, look_at_pose([0.25, 0.0, 1.5],
                                             [0.25, 0.0, 0.0]),
                         CameraIntrinsics())
    pc = depth_to_pointcloud(frame)
    assert set(pc) == {0, 1}
    for inst, (pts, nrm) in pc.items():
        assert len(pts) > 100
        assert nrm.shape == pts.shape
