"""Triangle meshes, poses and basic surface operations.

Everything downstream (scenes, rendering, grasp labeling) works on posed,
uniformly scaled triangle meshes, so this module is deliberately small and
array-centric: vertices are (V, 3) float64 arrays, faces are (F, 3) int64
index arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEGENERATE_AREA = 1e-12


class MeshError(Exception):
    """Raised for unusable mesh input (parse failures, empty meshes)."""


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation [m]."""

    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "q", quat_normalize(self.q))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(rot: np.ndarray, t=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(matrix_to_quat(rot), np.asarray(t, dtype=np.float64))

    @staticmethod
    def from_translation(t) -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.asarray(t, dtype=np.float64))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(quat_multiply(self.q, other.q),
                    self.rotation @ other.t + self.t)

    def inverse(self) -> "Pose":
        r = self.rotation.T
        return Pose(matrix_to_quat(r), -(r @ self.t))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.t


@dataclass
class TriangleMesh:
    """Indexed triangle mesh. Degenerate faces are filtered at load time."""

    vertices: np.ndarray
    faces: np.ndarray
    density: float | None = None  # kg/m^3, optional material density

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) == 0:
            raise MeshError("mesh has no triangles")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangle_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_normals(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        n = np.cross(b - a, c - a)
        norms = np.linalg.norm(n, axis=1)
        norms[norms == 0] = 1.0
        return n / norms[:, None]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def transformed(self, pose: Pose, scale: float = 1.0) -> "TriangleMesh":
        return TriangleMesh(pose.apply(self.vertices * scale), self.faces.copy(),
                            density=self.density)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class MeshVolume:
    volume: float          # absolute value, m^3
    watertight: bool
    orientation_flipped: bool


def load_mesh(path, density: float | None = None) -> tuple[TriangleMesh, int]:
    """Parse an ASCII Wavefront OBJ file (v/f records; vn/vt ignored).

    Returns (mesh, dropped) where `dropped` counts degenerate triangles
    removed during loading. Raises MeshError with a line number on parse
    failures and on empty meshes.
    """
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    face_lines: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshError(f"{path}:{lineno}: bad face index {token!r}") from exc
                    # OBJ indices are 1-based; negative indexes count from the end
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                if len(idx) < 3:
                    raise MeshError(f"{path}:{lineno}: face needs >= 3 vertices")
                for k in range(1, len(idx) - 1):  # fan triangulation
                    faces.append([idx[0], idx[k], idx[k + 1]])
                    face_lines.append(lineno)
            # vn / vt / usemtl / o / g / s are ignored
    if not vertices or not faces:
        raise MeshError(f"{path}: mesh is empty")
    verts = np.array(vertices, dtype=np.float64)
    tris = np.array(faces, dtype=np.int64)
    bad = (tris < 0) | (tris >= len(verts))
    if bad.any():
        lineno = face_lines[int(np.argmax(bad.any(axis=1)))]
        raise MeshError(f"{path}:{lineno}: face index out of range")
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    keep = areas > DEGENERATE_AREA
    dropped = int((~keep).sum())
    tris = tris[keep]
    if len(tris) == 0:
        raise MeshError(f"{path}: all triangles degenerate")
    return TriangleMesh(verts, tris, density=density), dropped


def save_mesh(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def is_watertight(mesh: TriangleMesh) -> bool:
    """Closed orientable surface: each edge used exactly twice, once per direction."""
    edges: dict[tuple[int, int], int] = {}
    for f in mesh.faces:
        for i in range(3):
            e = (int(f[i]), int(f[(i + 1) % 3]))
            edges[e] = edges.get(e, 0) + 1
    for (a, b), count in edges.items():
        if count != 1 or edges.get((b, a), 0) != 1:
            return False
    return True


def mesh_volume(mesh: TriangleMesh) -> MeshVolume:
    """Signed-tetrahedron volume sum; open meshes yield an estimate."""
    a, b, c = mesh.triangle_corners()
    signed = float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)
    return MeshVolume(volume=abs(signed),
                      watertight=is_watertight(mesh),
                      orientation_flipped=signed < 0)


def mesh_centroid(mesh: TriangleMesh) -> np.ndarray:
    """Volume centroid via signed tetrahedra (falls back to area centroid)."""
    a, b, c = mesh.triangle_corners()
    signed = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
    total = signed.sum()
    if abs(total) < 1e-15:
        areas = mesh.face_areas()
        centers = (a + b + c) / 3.0
        return (centers * areas[:, None]).sum(axis=0) / areas.sum()
    centers = (a + b + c) / 4.0
    return (centers * signed[:, None]).sum(axis=0) / total


def sample_surface(mesh: TriangleMesh, n: int, seed: int,
                   instance_id: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Area-weighted uniform surface samples.

    Returns (points (n,3), normals (n,3), instance_ids (n,)); normals are the
    face normals of the sampled triangles. Deterministic per seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas()
    probs = areas / areas.sum()
    tri_idx = rng.choice(len(probs), size=n, p=probs)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a, b, c = mesh.triangle_corners()
    pts = a[tri_idx] + u[:, None] * (b - a)[tri_idx] + v[:, None] * (c - a)[tri_idx]
    normals = mesh.face_normals()[tri_idx]
    ids = np.full(n, instance_id, dtype=np.int64)
    return pts, normals, ids
