"""Scene acceleration structure: BVH over world-space triangles.

Supports nearest-hit ray casting (watertight triangle test), triangle-mesh
overlap queries, and ray-parity containment checks. The structure is
immutable after build; all queries are read-only and safe to call from
many threads (the numba kernels release the GIL).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import Pose, TriangleMesh

_LEAF_SIZE = 8
_STACK_DEPTH = 96


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray  # unit
    max_distance: float = np.inf


@dataclass(frozen=True)
class RayHit:
    distance: float
    point: np.ndarray
    face_normal: np.ndarray
    instance_id: int
    triangle_index: int  # local index within the instance's mesh


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _safe_inv(d):
    if d >= 0.0:
        return 1.0 / max(d, 1e-300)
    return 1.0 / min(d, -1e-300)


@njit(cache=True, nogil=True)
def _raycast_kernel(origins, dirs, maxds, exclude_ids,
                    node_min, node_max, node_left, node_right,
                    node_start, node_count, tri_order,
                    v0, v1, v2, tri_inst,
                    out_t, out_tri):
    """Nearest-hit traversal for a batch of rays.

    Watertight ray/triangle test (Woop et al. style shear test, double
    precision, inclusive edges). Distance ties resolve to the lower global
    triangle index so shared-edge hits are deterministic.
    """
    n_rays = origins.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    for r in range(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        maxd = maxds[r]
        excl = exclude_ids[r]
        ix, iy, iz = _safe_inv(dx), _safe_inv(dy), _safe_inv(dz)

        # shear constants for the watertight triangle test
        adx, ady, adz = abs(dx), abs(dy), abs(dz)
        if adx >= ady and adx >= adz:
            kz = 0
        elif ady >= adz:
            kz = 1
        else:
            kz = 2
        kx = kz + 1
        if kx == 3:
            kx = 0
        ky = kx + 1
        if ky == 3:
            ky = 0
        d = np.empty(3)
        d[0], d[1], d[2] = dx, dy, dz
        if d[kz] < 0.0:
            kx, ky = ky, kx
        sx = d[kx] / d[kz]
        sy = d[ky] / d[kz]
        sz = 1.0 / d[kz]

        best_t = maxd
        best_tri = -1
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test
            t0 = (node_min[node, 0] - ox) * ix
            t1 = (node_max[node, 0] - ox) * ix
            tmin = min(t0, t1)
            tmax = max(t0, t1)
            t0 = (node_min[node, 1] - oy) * iy
            t1 = (node_max[node, 1] - oy) * iy
            tmin = max(tmin, min(t0, t1))
            tmax = min(tmax, max(t0, t1))
            t0 = (node_min[node, 2] - oz) * iz
            t1 = (node_max[node, 2] - oz) * iz
            tmin = max(tmin, min(t0, t1))
            tmax = min(tmax, max(t0, t1))
            if tmax < max(tmin, 0.0) or tmin > best_t:
                continue
            if node_count[node] > 0:  # leaf
                start = node_start[node]
                for k in range(node_count[node]):
                    tri = tri_order[start + k]
                    if tri_inst[tri] == excl:
                        continue
                    if kz == 0:
                        okz = ox
                    elif kz == 1:
                        okz = oy
                    else:
                        okz = oz
                    if kx == 0:
                        okx = ox
                    elif kx == 1:
                        okx = oy
                    else:
                        okx = oz
                    if ky == 0:
                        oky = ox
                    elif ky == 1:
                        oky = oy
                    else:
                        oky = oz
                    az = v0[tri, kz] - okz
                    bz = v1[tri, kz] - okz
                    cz = v2[tri, kz] - okz
                    ax = (v0[tri, kx] - okx) - sx * az
                    ay = (v0[tri, ky] - oky) - sy * az
                    bx = (v1[tri, kx] - okx) - sx * bz
                    by = (v1[tri, ky] - oky) - sy * bz
                    cx = (v2[tri, kx] - okx) - sx * cz
                    cy = (v2[tri, ky] - oky) - sy * cz
                    u = cx * by - cy * bx
                    v = ax * cy - ay * cx
                    w = bx * ay - by * ax
                    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
                        continue
                    det = u + v + w
                    if det == 0.0:
                        continue
                    t = (u * sz * az + v * sz * bz + w * sz * cz) / det
                    if t < 0.0 or t > maxd:
                        continue
                    if t < best_t or (t == best_t and tri < best_tri):
                        best_t = t
                        best_tri = tri
            else:
                stack[sp] = node_left[node]
                sp += 1
                stack[sp] = node_right[node]
                sp += 1
        out_t[r] = best_t if best_tri >= 0 else -1.0
        out_tri[r] = best_tri


@njit(cache=True, nogil=True)
def _parity_kernel(origin, direction,
                   node_min, node_max, node_left, node_right,
                   node_start, node_count, tri_order,
                   v0, v1, v2, tri_inst, counts):
    """Count ray crossings per instance (for point-containment parity)."""
    ox, oy, oz = origin[0], origin[1], origin[2]
    dx, dy, dz = direction[0], direction[1], direction[2]
    ix, iy, iz = _safe_inv(dx), _safe_inv(dy), _safe_inv(dz)
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        t0 = (node_min[node, 0] - ox) * ix
        t1 = (node_max[node, 0] - ox) * ix
        tmin = min(t0, t1)
        tmax = max(t0, t1)
        t0 = (node_min[node, 1] - oy) * iy
        t1 = (node_max[node, 1] - oy) * iy
        tmin = max(tmin, min(t0, t1))
        tmax = min(tmax, max(t0, t1))
        t0 = (node_min[node, 2] - oz) * iz
        t1 = (node_max[node, 2] - oz) * iz
        tmin = max(tmin, min(t0, t1))
        tmax = min(tmax, max(t0, t1))
        if tmax < max(tmin, 0.0):
            continue
        if node_count[node] > 0:
            start = node_start[node]
            for k in range(node_count[node]):
                tri = tri_order[start + k]
                # Moller-Trumbore, strict interior (boundary grazing is
                # avoided by the caller's irrational ray direction)
                e1x = v1[tri, 0] - v0[tri, 0]
                e1y = v1[tri, 1] - v0[tri, 1]
                e1z = v1[tri, 2] - v0[tri, 2]
                e2x = v2[tri, 0] - v0[tri, 0]
                e2y = v2[tri, 1] - v0[tri, 1]
                e2z = v2[tri, 2] - v0[tri, 2]
                px = dy * e2z - dz * e2y
                py = dz * e2x - dx * e2z
                pz = dx * e2y - dy * e2x
                det = e1x * px + e1y * py + e1z * pz
                if abs(det) < 1e-300:
                    continue
                inv = 1.0 / det
                tx = ox - v0[tri, 0]
                ty = oy - v0[tri, 1]
                tz = oz - v0[tri, 2]
                u = (tx * px + ty * py + tz * pz) * inv
                if u < 0.0 or u > 1.0:
                    continue
                qx = ty * e1z - tz * e1y
                qy = tz * e1x - tx * e1z
                qz = tx * e1y - ty * e1x
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2x * qx + e2y * qy + e2z * qz) * inv
                if t > 1e-12:
                    counts[tri_inst[tri]] += 1
        else:
            stack[sp] = node_left[node]
            sp += 1
            stack[sp] = node_right[node]
            sp += 1


@njit(cache=True, nogil=True)
def _cross3(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True, nogil=True)
def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


_TT_EPS = 1e-12


@njit(cache=True, nogil=True)
def _edge_edge_2d(ax, ay, bx, by, cx, cy, dx_, dy_):
    """Inclusive 2D segment intersection test (AB vs CD)."""
    d1x = bx - ax
    d1y = by - ay
    d2x = dx_ - cx
    d2y = dy_ - cy
    denom = d1x * d2y - d1y * d2x
    ex = cx - ax
    ey = cy - ay
    if abs(denom) < _TT_EPS:
        # parallel: overlap only if collinear and ranges intersect
        if abs(ex * d1y - ey * d1x) > _TT_EPS:
            return False
        # project onto the longer axis of d1
        if abs(d1x) >= abs(d1y):
            s0, s1 = ax, bx
            t0, t1 = cx, dx_
        else:
            s0, s1 = ay, by
            t0, t1 = cy, dy_
        lo1, hi1 = min(s0, s1), max(s0, s1)
        lo2, hi2 = min(t0, t1), max(t0, t1)
        return hi1 >= lo2 and hi2 >= lo1
    s = (ex * d2y - ey * d2x) / denom
    t = (ex * d1y - ey * d1x) / denom
    return 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0


@njit(cache=True, nogil=True)
def _point_in_tri_2d(px, py, ax, ay, bx, by, cx, cy):
    d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
    d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
    d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
    has_neg = (d1 < -_TT_EPS) or (d2 < -_TT_EPS) or (d3 < -_TT_EPS)
    has_pos = (d1 > _TT_EPS) or (d2 > _TT_EPS) or (d3 > _TT_EPS)
    return not (has_neg and has_pos)


@njit(cache=True, nogil=True)
def _coplanar_tri_tri(n, p0, p1, p2, q0, q1, q2):
    # project onto the dominant axis of the shared plane normal
    a0, a1, a2 = abs(n[0]), abs(n[1]), abs(n[2])
    if a0 >= a1 and a0 >= a2:
        i0, i1 = 1, 2
    elif a1 >= a2:
        i0, i1 = 0, 2
    else:
        i0, i1 = 0, 1
    ps = ((p0[i0], p0[i1]), (p1[i0], p1[i1]), (p2[i0], p2[i1]))
    qs = ((q0[i0], q0[i1]), (q1[i0], q1[i1]), (q2[i0], q2[i1]))
    for i in range(3):
        a = ps[i]
        b = ps[(i + 1) % 3]
        for j in range(3):
            c = qs[j]
            d = qs[(j + 1) % 3]
            if _edge_edge_2d(a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]):
                return True
    if _point_in_tri_2d(ps[0][0], ps[0][1], qs[0][0], qs[0][1],
                        qs[1][0], qs[1][1], qs[2][0], qs[2][1]):
        return True
    if _point_in_tri_2d(qs[0][0], qs[0][1], ps[0][0], ps[0][1],
                        ps[1][0], ps[1][1], ps[2][0], ps[2][1]):
        return True
    return False


@njit(cache=True, nogil=True)
def _interval(proj0, proj1, proj2, d0, d1, d2):
    """Intersection-line interval of a triangle straddling the other's plane.

    Vertex 0 is assumed to be on one side alone (or on the plane).
    Returns (lo, hi).
    """
    denom01 = d0 - d1
    denom02 = d0 - d2
    t1 = proj0 + (proj1 - proj0) * (d0 / denom01) if abs(denom01) > 0 else proj0
    t2 = proj0 + (proj2 - proj0) * (d0 / denom02) if abs(denom02) > 0 else proj0
    return min(t1, t2), max(t1, t2)


@njit(cache=True, nogil=True)
def _arrange(d0, d1, d2):
    """Pick the vertex alone on one side of the plane: returns permutation
    (i, j, k) with vertex i alone, or (-1, ...) if coplanar."""
    z0 = abs(d0) <= _TT_EPS
    z1 = abs(d1) <= _TT_EPS
    z2 = abs(d2) <= _TT_EPS
    if z0 and z1 and z2:
        return -1, -1, -1
    # signs with zero treated as "either side"
    if (d0 > _TT_EPS and d1 <= _TT_EPS and d2 <= _TT_EPS) or \
       (d0 < -_TT_EPS and d1 >= -_TT_EPS and d2 >= -_TT_EPS):
        return 0, 1, 2
    if (d1 > _TT_EPS and d0 <= _TT_EPS and d2 <= _TT_EPS) or \
       (d1 < -_TT_EPS and d0 >= -_TT_EPS and d2 >= -_TT_EPS):
        return 1, 0, 2
    if (d2 > _TT_EPS and d0 <= _TT_EPS and d1 <= _TT_EPS) or \
       (d2 < -_TT_EPS and d0 >= -_TT_EPS and d1 >= -_TT_EPS):
        return 2, 0, 1
    # zeros on both sides of a sign split: any zero vertex works as "alone"
    if z0:
        return 0, 1, 2
    if z1:
        return 1, 0, 2
    return 2, 0, 1


@njit(cache=True, nogil=True)
def _tri_tri_overlap(p0, p1, p2, q0, q1, q2):
    """Inclusive triangle-triangle intersection (touching counts)."""
    e1 = np.empty(3)
    e2 = np.empty(3)
    n1 = np.empty(3)
    n2 = np.empty(3)
    dline = np.empty(3)
    for i in range(3):
        e1[i] = p1[i] - p0[i]
        e2[i] = p2[i] - p0[i]
    _cross3(e1, e2, n1)
    dd1 = -_dot3(n1, p0)
    dq0 = _dot3(n1, q0) + dd1
    dq1 = _dot3(n1, q1) + dd1
    dq2 = _dot3(n1, q2) + dd1
    if (dq0 > _TT_EPS and dq1 > _TT_EPS and dq2 > _TT_EPS) or \
       (dq0 < -_TT_EPS and dq1 < -_TT_EPS and dq2 < -_TT_EPS):
        return False
    for i in range(3):
        e1[i] = q1[i] - q0[i]
        e2[i] = q2[i] - q0[i]
    _cross3(e1, e2, n2)
    dd2 = -_dot3(n2, q0)
    dp0 = _dot3(n2, p0) + dd2
    dp1 = _dot3(n2, p1) + dd2
    dp2 = _dot3(n2, p2) + dd2
    if (dp0 > _TT_EPS and dp1 > _TT_EPS and dp2 > _TT_EPS) or \
       (dp0 < -_TT_EPS and dp1 < -_TT_EPS and dp2 < -_TT_EPS):
        return False
    _cross3(n1, n2, dline)
    a0, a1, a2 = abs(dline[0]), abs(dline[1]), abs(dline[2])
    coplanar = (abs(dp0) <= _TT_EPS and abs(dp1) <= _TT_EPS and abs(dp2) <= _TT_EPS)
    if coplanar:
        return _coplanar_tri_tri(n1, p0, p1, p2, q0, q1, q2)
    if a0 >= a1 and a0 >= a2:
        axis = 0
    elif a1 >= a2:
        axis = 1
    else:
        axis = 2
    i, j, k = _arrange(dp0, dp1, dp2)
    if i < 0:
        return _coplanar_tri_tri(n1, p0, p1, p2, q0, q1, q2)
    ps = (p0, p1, p2)
    ds = (dp0, dp1, dp2)
    lo1, hi1 = _interval(ps[i][axis], ps[j][axis], ps[k][axis],
                         ds[i], ds[j], ds[k])
    i, j, k = _arrange(dq0, dq1, dq2)
    if i < 0:
        return _coplanar_tri_tri(n1, p0, p1, p2, q0, q1, q2)
    qs = (q0, q1, q2)
    es = (dq0, dq1, dq2)
    lo2, hi2 = _interval(qs[i][axis], qs[j][axis], qs[k][axis],
                         es[i], es[j], es[k])
    return hi1 >= lo2 - _TT_EPS and hi2 >= lo1 - _TT_EPS


@njit(cache=True, nogil=True)
def _overlap_kernel(p0, p1, p2,
                    node_min, node_max, node_left, node_right,
                    node_start, node_count, tri_order,
                    v0, v1, v2, tri_inst, excluded, contacts):
    """Mark instances whose triangles intersect any probe triangle."""
    n_probe = p0.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    pa = np.empty(3)
    pb = np.empty(3)
    pc = np.empty(3)
    qa = np.empty(3)
    qb = np.empty(3)
    qc = np.empty(3)
    for p in range(n_probe):
        bmin0 = min(p0[p, 0], min(p1[p, 0], p2[p, 0]))
        bmin1 = min(p0[p, 1], min(p1[p, 1], p2[p, 1]))
        bmin2 = min(p0[p, 2], min(p1[p, 2], p2[p, 2]))
        bmax0 = max(p0[p, 0], max(p1[p, 0], p2[p, 0]))
        bmax1 = max(p0[p, 1], max(p1[p, 1], p2[p, 1]))
        bmax2 = max(p0[p, 2], max(p1[p, 2], p2[p, 2]))
        for i in range(3):
            pa[i] = p0[p, i]
            pb[i] = p1[p, i]
            pc[i] = p2[p, i]
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if node_min[node, 0] > bmax0 or node_max[node, 0] < bmin0 or \
               node_min[node, 1] > bmax1 or node_max[node, 1] < bmin1 or \
               node_min[node, 2] > bmax2 or node_max[node, 2] < bmin2:
                continue
            if node_count[node] > 0:
                start = node_start[node]
                for k in range(node_count[node]):
                    tri = tri_order[start + k]
                    inst = tri_inst[tri]
                    if excluded[inst] or contacts[inst]:
                        continue
                    for i in range(3):
                        qa[i] = v0[tri, i]
                        qb[i] = v1[tri, i]
                        qc[i] = v2[tri, i]
                    if _tri_tri_overlap(pa, pb, pc, qa, qb, qc):
                        contacts[inst] = True
            else:
                stack[sp] = node_left[node]
                sp += 1
                stack[sp] = node_right[node]
                sp += 1


# ---------------------------------------------------------------------------
# BVH build + public interface
# ---------------------------------------------------------------------------

def _build_bvh(centroids: np.ndarray, tri_min: np.ndarray, tri_max: np.ndarray):
    n = len(centroids)
    order = np.arange(n, dtype=np.int64)
    node_min, node_max = [], []
    node_left, node_right, node_start, node_count = [], [], [], []

    def new_node():
        node_min.append(np.zeros(3))
        node_max.append(np.zeros(3))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(-1)
        node_count.append(0)
        return len(node_min) - 1

    root = new_node()
    work = [(root, 0, n)]
    while work:
        node, lo, hi = work.pop()
        idx = order[lo:hi]
        node_min[node] = tri_min[idx].min(axis=0)
        node_max[node] = tri_max[idx].max(axis=0)
        if hi - lo <= _LEAF_SIZE:
            node_start[node] = lo
            node_count[node] = hi - lo
            continue
        cent = centroids[idx]
        extents = cent.max(axis=0) - cent.min(axis=0)
        axis = int(np.argmax(extents))
        if extents[axis] <= 0:
            node_start[node] = lo
            node_count[node] = hi - lo
            continue
        local = np.argsort(cent[:, axis], kind="stable")
        order[lo:hi] = idx[local]
        mid = lo + (hi - lo) // 2
        left = new_node()
        right = new_node()
        node_left[node] = left
        node_right[node] = right
        work.append((left, lo, mid))
        work.append((right, mid, hi))
    return (np.array(node_min), np.array(node_max),
            np.array(node_left, dtype=np.int64), np.array(node_right, dtype=np.int64),
            np.array(node_start, dtype=np.int64), np.array(node_count, dtype=np.int64),
            order)


class SceneAccel:
    """Immutable BVH over the world-space triangles of posed mesh instances."""

    def __init__(self, mesh_instances):
        """mesh_instances: list of (TriangleMesh, Pose, scale) or
        (TriangleMesh, Pose, scale, instance_id)."""
        if not mesh_instances:
            raise ValueError("empty instance list")
        v0s, v1s, v2s, insts, locals_ = [], [], [], [], []
        self.instance_ids = []
        for entry in mesh_instances:
            if len(entry) == 4:
                mesh, pose, scale, inst_id = entry
            else:
                mesh, pose, scale = entry
                inst_id = len(self.instance_ids)
            if scale <= 0:
                raise ValueError("scale must be positive")
            self.instance_ids.append(int(inst_id))
            world = mesh.transformed(pose, scale)
            a, b, c = world.triangle_corners()
            v0s.append(a)
            v1s.append(b)
            v2s.append(c)
            insts.append(np.full(len(a), inst_id, dtype=np.int64))
            locals_.append(np.arange(len(a), dtype=np.int64))
        self.v0 = np.ascontiguousarray(np.vstack(v0s))
        self.v1 = np.ascontiguousarray(np.vstack(v1s))
        self.v2 = np.ascontiguousarray(np.vstack(v2s))
        self.tri_instance = np.concatenate(insts)
        self.tri_local = np.concatenate(locals_)
        self.max_instance_id = int(self.tri_instance.max())
        tri_min = np.minimum(np.minimum(self.v0, self.v1), self.v2)
        tri_max = np.maximum(np.maximum(self.v0, self.v1), self.v2)
        centroids = (self.v0 + self.v1 + self.v2) / 3.0
        (self.node_min, self.node_max, self.node_left, self.node_right,
         self.node_start, self.node_count, self.tri_order) = \
            _build_bvh(centroids, tri_min, tri_max)
        n = np.cross(self.v1 - self.v0, self.v2 - self.v0)
        norms = np.linalg.norm(n, axis=1)
        norms[norms == 0] = 1.0
        self.tri_normals = n / norms[:, None]

    @property
    def n_triangles(self) -> int:
        return len(self.v0)

    def raycast_batch(self, origins, directions, max_distances=None,
                      exclude_id: int = -1):
        """Vectorized nearest-hit query.

        Returns (t, tri): t[i] < 0 means miss, tri[i] is the global triangle
        index of the hit.
        """
        origins = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
        directions = np.ascontiguousarray(np.atleast_2d(directions), dtype=np.float64)
        n = len(origins)
        if max_distances is None:
            maxds = np.full(n, np.inf)
        else:
            maxds = np.broadcast_to(np.asarray(max_distances, dtype=np.float64), (n,))
            maxds = np.ascontiguousarray(maxds)
        excl = np.full(n, exclude_id, dtype=np.int64)
        out_t = np.empty(n)
        out_tri = np.empty(n, dtype=np.int64)
        _raycast_kernel(origins, directions, maxds, excl,
                        self.node_min, self.node_max, self.node_left,
                        self.node_right, self.node_start, self.node_count,
                        self.tri_order, self.v0, self.v1, self.v2,
                        self.tri_instance, out_t, out_tri)
        return out_t, out_tri

    def raycast(self, ray: Ray, exclude_id: int = -1) -> RayHit | None:
        origin = np.asarray(ray.origin, dtype=np.float64)
        direction = np.asarray(ray.direction, dtype=np.float64)
        t, tri = self.raycast_batch(origin[None], direction[None],
                                    np.array([ray.max_distance]),
                                    exclude_id=exclude_id)
        if tri[0] < 0:
            return None
        g = int(tri[0])
        return RayHit(distance=float(t[0]),
                      point=origin + float(t[0]) * direction,
                      face_normal=self.tri_normals[g].copy(),
                      instance_id=int(self.tri_instance[g]),
                      triangle_index=int(self.tri_local[g]))

    # fixed irrational-ish direction to avoid grazing axis-aligned edges
    _PARITY_DIR = np.array([0.267261241912, 0.534522483825, 0.801783725737])

    def containment_counts(self, point) -> np.ndarray:
        """Ray-parity crossing counts per instance id (odd = inside)."""
        counts = np.zeros(self.max_instance_id + 1, dtype=np.int64)
        _parity_kernel(np.asarray(point, dtype=np.float64), self._PARITY_DIR,
                       self.node_min, self.node_max, self.node_left,
                       self.node_right, self.node_start, self.node_count,
                       self.tri_order, self.v0, self.v1, self.v2,
                       self.tri_instance, counts)
        return counts

    def overlap_triangles(self, p0, p1, p2, exclude_ids=()) -> list[int]:
        """Instance ids whose triangles intersect any of the probe triangles."""
        excluded = np.zeros(self.max_instance_id + 1, dtype=np.bool_)
        for i in exclude_ids:
            if 0 <= i <= self.max_instance_id:
                excluded[i] = True
        contacts = np.zeros(self.max_instance_id + 1, dtype=np.bool_)
        _overlap_kernel(np.ascontiguousarray(p0), np.ascontiguousarray(p1),
                        np.ascontiguousarray(p2),
                        self.node_min, self.node_max, self.node_left,
                        self.node_right, self.node_start, self.node_count,
                        self.tri_order, self.v0, self.v1, self.v2,
                        self.tri_instance, excluded, contacts)
        return [int(i) for i in np.nonzero(contacts)[0]]


def build_accel(mesh_instances) -> SceneAccel:
    return SceneAccel(mesh_instances)


def mesh_overlap(accel: SceneAccel, probe: TriangleMesh, probe_pose: Pose,
                 scale: float = 1.0, exclude_ids=()):
    """True iff the posed probe mesh touches or interpenetrates any
    non-excluded instance.

    Triangle-triangle contact is the primary test; a center-point ray-parity
    check catches the fully-contained non-touching case in either direction.
    Returns (overlapping, contacting_instance_ids).
    """
    world = probe.transformed(probe_pose, scale)
    a, b, c = world.triangle_corners()
    contacts = set(accel.overlap_triangles(a, b, c, exclude_ids=exclude_ids))
    excluded = set(exclude_ids)
    # probe swallowed by a scene instance: a surface vertex of the probe
    # inside an instance implies overlap (the mean vertex would not -- a
    # non-convex probe like a two-finger gripper straddles its target)
    counts = accel.containment_counts(world.vertices[0])
    for inst, cnt in enumerate(counts):
        if cnt % 2 == 1 and inst not in excluded:
            contacts.add(int(inst))
    # scene instance swallowed by the probe: test an instance surface vertex
    probe_accel = SceneAccel([(probe, probe_pose, scale)])
    for inst in set(int(i) for i in accel.instance_ids) - excluded:
        mask = accel.tri_instance == inst
        if not mask.any():
            continue
        if probe_accel.containment_counts(accel.v0[mask][0])[0] % 2 == 1:
            contacts.add(inst)
    return (len(contacts) > 0), sorted(contacts)
