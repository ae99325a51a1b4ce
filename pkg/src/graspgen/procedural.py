"""Procedural mesh generators.

The repository ships no asset corpus; scenes and fixtures are built from
these watertight primitives (boxes, icospheres, cylinders, washers,
heightfield solids) instead.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import TriangleMesh


def merge_meshes(meshes) -> TriangleMesh:
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriangleMesh(np.vstack(verts), np.vstack(faces))


def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    sx, sy, sz = size
    cx, cy, cz = center
    v = np.array([[x, y, z]
                  for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)])
    v = v * [sx, sy, sz] + [cx, cy, cz]
    f = np.array([
        [0, 1, 3], [0, 3, 2],   # x-
        [4, 6, 7], [4, 7, 5],   # x+
        [0, 4, 5], [0, 5, 1],   # y-
        [2, 3, 7], [2, 7, 6],   # y+
        [0, 2, 6], [0, 6, 4],   # z-
        [1, 5, 7], [1, 7, 3],   # z+
    ])
    return TriangleMesh(v, f)


def icosphere(radius: float = 1.0, subdivisions: int = 2,
              center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key in cache:
                return cache[key]
            a = np.array(verts[i])
            b = np.array(verts[j])
            m = (a + b) / 2.0
            m /= np.linalg.norm(m)
            verts.append(tuple(m))
            cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center)
    return TriangleMesh(v, np.array(faces))


def cylinder(radius: float, height: float, segments: int = 32,
             center=(0.0, 0.0, 0.0), axis: str = "z") -> TriangleMesh:
    """Closed cylinder; axis 'z' or 'x', centered at `center`."""
    ang = np.arange(segments) * (2 * math.pi / segments)
    ring = np.stack([np.cos(ang) * radius, np.sin(ang) * radius], axis=1)
    bot = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.vstack([bot, top,
                       [[0, 0, -height / 2]], [[0, 0, height / 2]]])
    cb = 2 * segments
    ct = 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [[i, j, segments + j], [i, segments + j, segments + i]]  # wall
        faces += [[cb, j, i]]                  # bottom cap (normal -z)
        faces += [[ct, segments + i, segments + j]]  # top cap (normal +z)
    verts = np.array(verts)
    if axis == "x":
        verts = verts[:, [2, 1, 0]] * [1, 1, -1]  # rotate z-axis onto x-axis
    return TriangleMesh(verts + np.asarray(center), np.array(faces))


def washer(outer_radius: float, inner_radius: float, thickness: float,
           segments: int = 64, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Flat annular plate with a centered through-hole, axis +z."""
    if not 0 < inner_radius < outer_radius:
        raise ValueError("need 0 < inner_radius < outer_radius")
    ang = np.arange(segments) * (2 * math.pi / segments)
    co, si = np.cos(ang), np.sin(ang)
    zt, zb = thickness / 2, -thickness / 2
    ot = np.column_stack([co * outer_radius, si * outer_radius, np.full(segments, zt)])
    ob = np.column_stack([co * outer_radius, si * outer_radius, np.full(segments, zb)])
    it_ = np.column_stack([co * inner_radius, si * inner_radius, np.full(segments, zt)])
    ib = np.column_stack([co * inner_radius, si * inner_radius, np.full(segments, zb)])
    verts = np.vstack([ot, ob, it_, ib])
    OT, OB, IT, IB = 0, segments, 2 * segments, 3 * segments
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [[IT + i, OT + i, OT + j], [IT + i, OT + j, IT + j]]  # top (+z)
        faces += [[IB + i, OB + j, OB + i], [IB + i, IB + j, OB + j]]  # bottom (-z)
        faces += [[OT + i, OB + i, OB + j], [OT + i, OB + j, OT + j]]  # outer wall
        faces += [[IT + i, IB + j, IB + i], [IT + i, IT + j, IB + j]]  # inner wall
    return TriangleMesh(np.array(verts) + np.asarray(center), np.array(faces))


def heightfield_solid(half_x: float, half_y: float, base_thickness: float,
                      height_fn, resolution: int = 40) -> TriangleMesh:
    """Watertight solid plate whose top surface is z = height_fn(x, y).

    The solid spans [-half_x, half_x] x [-half_y, half_y]; its flat bottom
    is at z = -base_thickness. Used for grooves, ridges, bumps and dimples.
    """
    n = resolution
    xs = np.linspace(-half_x, half_x, n)
    ys = np.linspace(-half_y, half_y, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = np.vectorize(height_fn)(gx, gy).astype(np.float64)
    top = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    bottom = top.copy()
    bottom[:, 2] = -base_thickness
    verts = np.vstack([top, bottom])
    nb = n * n

    def tidx(i, j):
        return i * n + j

    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b = tidx(i, j), tidx(i + 1, j)
            c, d = tidx(i + 1, j + 1), tidx(i, j + 1)
            faces += [[a, b, c], [a, c, d]]                      # top (+z)
            faces += [[nb + a, nb + c, nb + b], [nb + a, nb + d, nb + c]]  # bottom
    for i in range(n - 1):  # walls
        faces += [[tidx(i, 0), nb + tidx(i, 0), nb + tidx(i + 1, 0)],
                  [tidx(i, 0), nb + tidx(i + 1, 0), tidx(i + 1, 0)]]
        faces += [[tidx(i, n - 1), tidx(i + 1, n - 1), nb + tidx(i + 1, n - 1)],
                  [tidx(i, n - 1), nb + tidx(i + 1, n - 1), nb + tidx(i, n - 1)]]
        faces += [[tidx(0, i), tidx(0, i + 1), nb + tidx(0, i + 1)],
                  [tidx(0, i), nb + tidx(0, i + 1), nb + tidx(0, i)]]
        faces += [[tidx(n - 1, i), nb + tidx(n - 1, i), nb + tidx(n - 1, i + 1)],
                  [tidx(n - 1, i), nb + tidx(n - 1, i + 1), tidx(n - 1, i + 1)]]
    return TriangleMesh(verts, np.array(faces))


def l_shape(leg: float = 0.08, thickness: float = 0.03) -> TriangleMesh:
    a = box_mesh((leg, thickness, thickness), (leg / 2, 0, thickness / 2))
    b = box_mesh((thickness, leg, thickness),
                 (thickness / 2, leg / 2 - thickness / 2, thickness / 2))
    return merge_meshes([a, b])


def two_component(gap: float = 0.02, size: float = 0.04) -> TriangleMesh:
    """Two detached cubes in one mesh (adversarial: multiple components)."""
    a = box_mesh((size, size, size), (-(size + gap) / 2, 0, 0))
    b = box_mesh((size, size, size), ((size + gap) / 2, 0, 0))
    return merge_meshes([a, b])
