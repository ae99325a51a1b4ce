"""Grasp-point selection and candidate generation.

Farthest point sampling picks well-spread surface points; each point gets a
surface-attached frame built from the eigen-structure of the local
normal-covariance matrix. Candidates for both gripper modalities are
derived from that frame: the approach axis is the consensus normal
direction, roll and standoff are discretized for parallel jaws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Pose

DEFAULT_NEIGHBORHOOD_RADIUS = 0.01  # m, local support of the covariance sum
DEGENERATE_EIGEN_GAP = 1e-9


class InsufficientSupportError(Exception):
    """Fewer than 3 neighbor normals in the query radius."""


def fps(points: np.ndarray, k: int, start_index: int = 0) -> np.ndarray:
    """Greedy max-min farthest point sampling.

    Each selected index maximizes the distance to the nearest already
    selected point; ties break to the lowest index (np.argmax picks the
    first maximum). Deterministic given start_index.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 1:
        raise ValueError("need at least one point")
    if k > n:
        raise ValueError(f"k={k} exceeds point count {n}")
    selected = np.empty(k, dtype=np.int64)
    selected[0] = start_index
    d2 = np.einsum("ij,ij->i", points - points[start_index],
                   points - points[start_index])
    for i in range(1, k):
        idx = int(np.argmax(d2))
        selected[i] = idx
        delta = points - points[idx]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", delta, delta))
    return selected


def normal_covariance(sample_points: np.ndarray, sample_normals: np.ndarray,
                      center: np.ndarray, radius: float,
                      tree: cKDTree | None = None) -> np.ndarray:
    """Sum of normal outer products over the neighborhood of `center`."""
    if tree is None:
        tree = cKDTree(sample_points)
    idx = tree.query_ball_point(np.asarray(center, dtype=np.float64), radius)
    if len(idx) < 3:
        raise InsufficientSupportError(
            f"only {len(idx)} neighbors within {radius} m")
    n = sample_normals[idx]
    return n.T @ n


@dataclass
class DarbouxFrame:
    origin: np.ndarray
    rotation: np.ndarray  # columns: v1 (normal axis), v2 (major), v3 (minor)
    degenerate: bool = False

    @property
    def v1(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def v2(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def v3(self) -> np.ndarray:
        return self.rotation[:, 2]


def darboux_frame(sample_points: np.ndarray, sample_normals: np.ndarray,
                  point: np.ndarray, normal: np.ndarray,
                  radius: float = DEFAULT_NEIGHBORHOOD_RADIUS,
                  tree: cKDTree | None = None) -> DarbouxFrame:
    """Surface frame from the local normal-covariance eigenvectors.

    v1 carries the largest eigenvalue (consensus normal direction), v2 the
    middle, v3 the smallest. If v1 opposes the surface normal at the query
    point the frame is rotated 180 degrees about v3 so the approach axis
    points outward. The rotation always has det = +1.
    """
    cov = normal_covariance(sample_points, sample_normals, point, radius, tree)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    v1 = evecs[:, 2]
    v2 = evecs[:, 1]
    v3 = evecs[:, 0]
    degenerate = (evals[2] - evals[1] < DEGENERATE_EIGEN_GAP or
                  evals[1] - evals[0] < DEGENERATE_EIGEN_GAP)
    if float(v1 @ normal) < 0.0:
        v1 = -v1
        v2 = -v2
    if degenerate:
        # tie-break: v2 = global +x projected off v1 (fall back to +y)
        ref = np.array([1.0, 0.0, 0.0])
        proj = ref - (ref @ v1) * v1
        if np.linalg.norm(proj) < 1e-9:
            ref = np.array([0.0, 1.0, 0.0])
            proj = ref - (ref @ v1) * v1
        v2 = proj / np.linalg.norm(proj)
        v3 = np.cross(v1, v2)
    rot = np.column_stack([v1, v2, v3])
    if np.linalg.det(rot) < 0:
        rot[:, 2] = -rot[:, 2]
    return DarbouxFrame(origin=np.asarray(point, dtype=np.float64),
                        rotation=rot, degenerate=degenerate)


# ---------------------------------------------------------------------------
# gripper / cup specifications
# ---------------------------------------------------------------------------

@dataclass
class GripperSpec:
    """Parallel-jaw gripper.

    The gripper frame has +X as the approach direction (pointing at the
    surface), +Y as the closing direction, +Z lateral. The origin sits at
    the finger-root plane; fingers span x in [0, finger_depth].
    """
    name: str
    finger_depth: float
    max_open_width: float
    finger_thickness: float = 0.015
    finger_height: float = 0.02
    palm_depth: float = 0.04
    palm_width: float | None = None
    palm_height: float = 0.04
    grip_force: float = 60.0  # N, closing force budget

    def __post_init__(self):
        if self.finger_depth <= 0 or self.max_open_width <= 0:
            raise ValueError("gripper dimensions must be positive")
        if self.palm_width is None:
            self.palm_width = self.max_open_width + 2 * self.finger_thickness

    def close_region(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box between the open fingers, in gripper frame."""
        lo = np.array([0.0, -self.max_open_width / 2, -self.finger_height / 2])
        hi = np.array([self.finger_depth, self.max_open_width / 2,
                       self.finger_height / 2])
        return lo, hi


@dataclass
class SuctionCupSpec:
    """Bellows suction cup. The cup frame +X is the approach direction;
    the rim lies in the YZ plane through the origin; the bellows body
    extends along -X."""
    name: str
    radius: float
    bellows_height: float
    force_limit: float
    bend_limit_deg: float = 7.0

    def __post_init__(self):
        if self.radius <= 0 or self.force_limit <= 0:
            raise ValueError("cup dimensions must be positive")


def fetch_gripper() -> GripperSpec:
    return GripperSpec(name="fetch", finger_depth=0.05, max_open_width=0.10)


def robotiq_2f140() -> GripperSpec:
    return GripperSpec(name="robotiq_2f140", finger_depth=0.075,
                       max_open_width=0.140)


def suction_cup_15mm() -> SuctionCupSpec:
    return SuctionCupSpec(name="cup_1.5cm", radius=0.015,
                          bellows_height=0.02, force_limit=20.0)


def suction_cup_25mm() -> SuctionCupSpec:
    return SuctionCupSpec(name="cup_2.5cm", radius=0.025,
                          bellows_height=0.03, force_limit=30.0)


GRIPPERS = {"fetch": fetch_gripper, "robotiq_2f140": robotiq_2f140}
SUCTION_CUPS = {"cup_1.5cm": suction_cup_15mm, "cup_2.5cm": suction_cup_25mm}


# ---------------------------------------------------------------------------
# candidates
# ---------------------------------------------------------------------------

@dataclass
class GraspCandidate:
    pose: Pose          # gripper frame in world
    standoff: float
    roll: float
    gripper: str
    target_instance: int


@dataclass
class SuctionCandidate:
    pose: Pose          # cup frame in world; rim center at the sample point
    cup: str
    target_instance: int


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


_ROT_Z_PI = np.diag([-1.0, -1.0, 1.0])


def gen_parallel_grasps(frame: DarbouxFrame, gripper: GripperSpec,
                        n_roll: int, n_standoff: int,
                        target_instance: int) -> list[GraspCandidate]:
    """Discretized roll x standoff grid of jaw candidates for one frame.

    The gripper approach axis (+X of the gripper frame) is anti-parallel to
    the frame's outward normal v1; roll spins about the approach axis;
    standoff retreats the gripper along the outward normal.
    """
    if n_roll < 1 or n_standoff < 1:
        raise ValueError("n_roll and n_standoff must be >= 1")
    rolls = [2 * np.pi * j / n_roll for j in range(n_roll)]
    if n_standoff == 1:
        standoffs = [0.0]
    else:
        standoffs = [gripper.finger_depth * i / (n_standoff - 1)
                     for i in range(n_standoff)]
    out = []
    for roll in rolls:
        rot = frame.rotation @ _rot_x(roll) @ _ROT_Z_PI
        for standoff in standoffs:
            t = frame.origin + standoff * frame.v1
            out.append(GraspCandidate(pose=Pose.from_matrix(rot, t),
                                      standoff=standoff, roll=roll,
                                      gripper=gripper.name,
                                      target_instance=target_instance))
    return out


def gen_suction_grasp(frame: DarbouxFrame, cup: SuctionCupSpec,
                      target_instance: int) -> SuctionCandidate:
    """Single suction candidate: cup axis anti-parallel to v1, rim at the
    sample point. The free spin about the axis is fixed by the frame for
    determinism."""
    rot = frame.rotation @ _ROT_Z_PI
    return SuctionCandidate(pose=Pose.from_matrix(rot, frame.origin),
                            cup=cup.name, target_instance=target_instance)
