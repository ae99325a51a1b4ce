"""Viewpoint sampling and depth / instance-ID rendering by ray casting.

Camera convention: +Z optical axis (forward), +X right, +Y down in the
image. Depth is z-depth in the camera frame; misses are 0 in the depth map
and -1 in the instance map. Rendering is noise-free by default; an optional
Gaussian depth-noise sigma exists for downstream experiments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .accel import SceneAccel
from .geometry import Pose

DEPTH_PNG_SCALE = 10000.0  # 16-bit PNG stores depth in 0.1 mm units


@dataclass
class CameraIntrinsics:
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point outside image")


@dataclass
class ViewpointConfig:
    rho_range: tuple[float, float] = (0.5, 10.0)
    phi_range: tuple[float, float] = (0.0, math.pi / 2)
    theta_range: tuple[float, float] = (0.0, math.pi)
    look_at: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class DepthFrame:
    depth: np.ndarray         # (H, W) float64, m; 0 = miss
    instance_ids: np.ndarray  # (H, W) int32; -1 = miss
    camera_pose: Pose
    intrinsics: CameraIntrinsics
    normals: np.ndarray | None = None  # (H, W, 3) hit-face normals, world


def look_at_pose(position, target=(0.0, 0.0, 0.0)) -> Pose:
    """Camera pose with +Z pointing at `target`, image-up along world +z
    (world +x when looking straight down)."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(forward @ up)) > 1.0 - 1e-9:
        up = np.array([1.0, 0.0, 0.0])
    y_cam = -(up - (up @ forward) * forward)
    y_cam /= np.linalg.norm(y_cam)
    x_cam = np.cross(y_cam, forward)
    rot = np.column_stack([x_cam, y_cam, forward])
    return Pose.from_matrix(rot, position)


def sample_viewpoint(cfg: ViewpointConfig, seed: int) -> Pose:
    """Spherical-coordinate viewpoint, orientation looking at the scene center."""
    rng = np.random.default_rng(seed)
    rho = rng.uniform(*cfg.rho_range)
    phi = rng.uniform(*cfg.phi_range)
    theta = rng.uniform(*cfg.theta_range)
    pos = np.array([rho * math.sin(phi) * math.cos(theta),
                    rho * math.sin(phi) * math.sin(theta),
                    rho * math.cos(phi)]) + np.asarray(cfg.look_at)
    return look_at_pose(pos, cfg.look_at)


def render_depth(accel: SceneAccel | None, camera_pose: Pose,
                 intrinsics: CameraIntrinsics,
                 noise_sigma_mm: float = 0.0, noise_seed: int = 0) -> DepthFrame:
    """One ray per pixel through the pinhole model; nearest hit wins."""
    h, w = intrinsics.height, intrinsics.width
    us, vs = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = np.stack([(us + 0.5 - intrinsics.cx) / intrinsics.fx,
                         (vs + 0.5 - intrinsics.cy) / intrinsics.fy,
                         np.ones((h, w))], axis=-1).reshape(-1, 3)
    norms = np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    dirs_unit_cam = dirs_cam / norms
    rot = camera_pose.rotation
    dirs_world = dirs_unit_cam @ rot.T
    origins = np.tile(camera_pose.t, (h * w, 1))
    depth = np.zeros(h * w)
    ids = np.full(h * w, -1, dtype=np.int32)
    normals = np.zeros((h * w, 3))
    if accel is not None:
        t, tri = accel.raycast_batch(origins, dirs_world)
        hit = tri >= 0
        cos = dirs_unit_cam[:, 2] / 1.0  # z-component of unit ray in cam frame
        depth[hit] = t[hit] * cos[hit]
        ids[hit] = accel.tri_instance[tri[hit]]
        normals[hit] = accel.tri_normals[tri[hit]]
    if noise_sigma_mm > 0.0:
        rng = np.random.default_rng(noise_seed)
        mask = ids >= 0
        depth[mask] += rng.normal(0.0, noise_sigma_mm / 1000.0, mask.sum())
    return DepthFrame(depth=depth.reshape(h, w),
                      instance_ids=ids.reshape(h, w),
                      camera_pose=camera_pose, intrinsics=intrinsics,
                      normals=normals.reshape(h, w, 3))


def depth_to_pointcloud(frame: DepthFrame) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Back-project to world space, grouped by instance id.

    Returns {instance_id: (points (n,3), normals (n,3))}; miss pixels are
    excluded. Normals are the rendered hit-face normals (zeros if the frame
    was loaded without them).
    """
    intr = frame.intrinsics
    h, w = frame.depth.shape
    us, vs = np.meshgrid(np.arange(w), np.arange(h))
    mask = frame.instance_ids >= 0
    z = frame.depth[mask]
    x = (us[mask] + 0.5 - intr.cx) / intr.fx * z
    y = (vs[mask] + 0.5 - intr.cy) / intr.fy * z
    pts_cam = np.stack([x, y, z], axis=-1)
    pts_world = frame.camera_pose.apply(pts_cam)
    ids = frame.instance_ids[mask]
    if frame.normals is not None:
        normals = frame.normals[mask]
    else:
        normals = np.zeros_like(pts_world)
    out = {}
    for inst in np.unique(ids):
        m = ids == inst
        out[int(inst)] = (pts_world[m], normals[m])
    return out


def save_frame(frame: DepthFrame, out_dir, stem: str) -> None:
    """16-bit depth PNG (0.1 mm units), 16-bit instance PNG (ids+1, 0=miss),
    JSON sidecar with camera pose and intrinsics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    depth_u16 = np.clip(np.round(frame.depth * DEPTH_PNG_SCALE), 0, 65535).astype(np.uint16)
    ids_u16 = (frame.instance_ids.astype(np.int32) + 1).clip(0, 65535).astype(np.uint16)
    cv2.imwrite(str(out_dir / f"{stem}_depth.png"), depth_u16)
    cv2.imwrite(str(out_dir / f"{stem}_ids.png"), ids_u16)
    intr = frame.intrinsics
    sidecar = {
        "camera_pose": {"q": [float(x) for x in frame.camera_pose.q],
                        "t": [float(x) for x in frame.camera_pose.t]},
        "intrinsics": {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx,
                       "cy": intr.cy, "width": intr.width, "height": intr.height},
        "depth_scale": DEPTH_PNG_SCALE,
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_frame(out_dir, stem: str) -> DepthFrame:
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / f"{stem}.json").read_text())
    depth = cv2.imread(str(out_dir / f"{stem}_depth.png"), cv2.IMREAD_UNCHANGED)
    ids = cv2.imread(str(out_dir / f"{stem}_ids.png"), cv2.IMREAD_UNCHANGED)
    intr = CameraIntrinsics(**meta["intrinsics"])
    pose = Pose(np.array(meta["camera_pose"]["q"]), np.array(meta["camera_pose"]["t"]))
    return DepthFrame(depth=depth.astype(np.float64) / meta["depth_scale"],
                      instance_ids=ids.astype(np.int32) - 1,
                      camera_pose=pose, intrinsics=intr)
