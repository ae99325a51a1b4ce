"""Suction seal evaluation.

The cup rim is discretized as 15 concentric rings of 64 vertices (960
total) spanning the full cup radius, spider-web style. From every vertex a
ray is cast toward the surface along the cup axis; the signed gap between
the hit and the nominal rim plane is the local bellows deformation. A seal
forms only if every ray lands on the target instance and no deformation
exceeds 10% of the bellows height.

An 8-vertex perimeter spring model (the classic quasi-static baseline) is
included for the ablation study. It only sees the outer rim and does not
use instance identities, which reproduces that model's documented false
positives on grooves, rough interiors, and unsegmented neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .accel import SceneAccel
from .sampling import SuctionCandidate, SuctionCupSpec

SEAL_RINGS = 15
SEAL_VERTICES_PER_RING = 64
DEFORMATION_FRACTION = 0.10
STRAIN_LIMIT = 0.10
RAY_REACH_FACTOR = 2.0  # rays reach 2x bellows height; beyond that no seal


class SealFailure(str, Enum):
    NONE = "none"
    RAY_MISS = "ray_miss"
    WRONG_INSTANCE = "wrong_instance"
    DEFORMATION_EXCEEDED = "deformation_exceeded"


@dataclass
class SealModel:
    rings: int
    vertices_per_ring: int
    ring_radii: np.ndarray
    nominal_height: float
    vertices: np.ndarray  # (rings * vertices_per_ring, 3) in cup frame (rim plane)


@dataclass
class SealEvaluation:
    q_seal: int
    failure_reason: SealFailure
    hit_mask: np.ndarray
    hit_instances: np.ndarray
    deformations: np.ndarray   # signed, m; positive = surface recessed
    max_abs_deformation: float


def build_seal_model(cup: SuctionCupSpec) -> SealModel:
    """Vertex lattice in the cup frame: rings concentric about the X-axis,
    lying in the rim (YZ) plane."""
    radii = cup.radius * np.arange(1, SEAL_RINGS + 1) / SEAL_RINGS
    ang = 2 * np.pi * np.arange(SEAL_VERTICES_PER_RING) / SEAL_VERTICES_PER_RING
    verts = np.zeros((SEAL_RINGS * SEAL_VERTICES_PER_RING, 3))
    k = 0
    for r in radii:
        verts[k:k + SEAL_VERTICES_PER_RING, 1] = r * np.cos(ang)
        verts[k:k + SEAL_VERTICES_PER_RING, 2] = r * np.sin(ang)
        k += SEAL_VERTICES_PER_RING
    return SealModel(rings=SEAL_RINGS, vertices_per_ring=SEAL_VERTICES_PER_RING,
                     ring_radii=radii, nominal_height=cup.bellows_height,
                     vertices=verts)


def _cast_cup_rays(accel: SceneAccel, cand: SuctionCandidate,
                   verts_cup: np.ndarray, height: float):
    """Cast rays toward the surface from `height` behind the rim plane.

    Cup +X points into the surface; origins are retracted along -X so that
    raised geometry under the cup is measured instead of being started
    inside of. Returns (gaps, instances): gap is hit distance minus the
    retraction (0 = exactly at the rim plane), instance -1 = miss.
    """
    rot = cand.pose.rotation
    axis = rot[:, 0]  # into the surface
    world = verts_cup @ rot.T + cand.pose.t
    origins = world - height * axis
    n = len(origins)
    dirs = np.tile(axis, (n, 1))
    maxd = np.full(n, RAY_REACH_FACTOR * height)
    t, tri = accel.raycast_batch(origins, dirs, maxd)
    hit = tri >= 0
    gaps = np.where(hit, t - height, np.nan)
    inst = np.full(n, -1, dtype=np.int64)
    inst[hit] = accel.tri_instance[tri[hit]]
    return gaps, inst


def evaluate_seal(accel: SceneAccel, cand: SuctionCandidate,
                  model: SealModel) -> SealEvaluation:
    """Full 960-vertex seal check against the scene.

    Failure precedence: a ray landing on a non-target instance dominates
    (neighbor under the rim breaks the seal regardless of geometry), then
    missed rays (holes/grooves), then the deformation threshold.
    """
    gaps, inst = _cast_cup_rays(accel, cand, model.vertices, model.nominal_height)
    hit = inst >= 0
    wrong = hit & (inst != cand.target_instance)
    deform = np.where(hit, gaps, 0.0)
    max_abs = float(np.abs(deform[hit]).max()) if hit.any() else 0.0
    if wrong.any():
        reason = SealFailure.WRONG_INSTANCE
    elif (~hit).any():
        reason = SealFailure.RAY_MISS
    elif max_abs > DEFORMATION_FRACTION * model.nominal_height:
        reason = SealFailure.DEFORMATION_EXCEEDED
    else:
        reason = SealFailure.NONE
    return SealEvaluation(q_seal=int(reason == SealFailure.NONE),
                          failure_reason=reason, hit_mask=hit,
                          hit_instances=inst, deformations=deform,
                          max_abs_deformation=max_abs)


DEXNET8_VERTICES = 8


def evaluate_seal_dexnet8(accel: SceneAccel, cand: SuctionCandidate,
                          cup: SuctionCupSpec) -> bool:
    """8-vertex perimeter/flexion/cone spring baseline.

    Instance-blind: any surface counts as a sealing surface (the model has
    no segmentation). Vertices are projected onto their ray hits; the check
    passes iff every spring's strain stays within 10% and every vertex
    lands on something. Pass the target's own single-instance accel for a
    truly singulated evaluation, or the scene accel for the unsegmented
    behavior used in the ablation.
    """
    ang = 2 * np.pi * np.arange(DEXNET8_VERTICES) / DEXNET8_VERTICES
    rim = np.zeros((DEXNET8_VERTICES, 3))
    rim[:, 1] = cup.radius * np.cos(ang)
    rim[:, 2] = cup.radius * np.sin(ang)
    h = cup.bellows_height
    gaps, inst = _cast_cup_rays(accel, cand, rim, h)
    if (inst < 0).any():
        return False
    rot = cand.pose.rotation
    axis = rot[:, 0]
    nominal_world = rim @ rot.T + cand.pose.t
    projected = nominal_world + gaps[:, None] * axis
    apex = cand.pose.t - h * axis  # top of the bellows on the cup axis

    def strains(points, nominal):
        out = []
        for shift in (1, 2):  # perimeter, flexion
            l0 = np.linalg.norm(nominal - np.roll(nominal, -shift, axis=0), axis=1)
            l1 = np.linalg.norm(points - np.roll(points, -shift, axis=0), axis=1)
            out.append(np.abs(l1 - l0) / l0)
        l0 = np.linalg.norm(nominal - apex, axis=1)  # cone
        l1 = np.linalg.norm(points - apex, axis=1)
        out.append(np.abs(l1 - l0) / l0)
        return np.concatenate(out)

    return bool((strains(projected, nominal_world) <= STRAIN_LIMIT).all())
