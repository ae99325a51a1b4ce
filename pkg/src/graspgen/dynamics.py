"""Quasi-static dynamics proxy producing Q_dynamics.

Replaces simulated lifting with closed-form feasibility checks that keep
the decision-relevant quantities: suction force limits, the 7-degree cup
bend limit, Coulomb friction cones for jaw contacts, and (when
clutter-aware) the weight of everything resting on the target per the
support graph. Single-object mode ignores the pile and reproduces the
false positives of per-object labeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .context import SceneContext
from .sampling import GraspCandidate, GripperSpec, SuctionCandidate, SuctionCupSpec
from .scenes import stacked_mass
from .geometry import mesh_centroid

GRAVITY = 9.81
ACCEL_FACTOR = 1.5  # lift acceleration margin (~0.5 g) applied to payload weight


class DynamicsFailure:
    NONE = "none"
    PAYLOAD = "payload_exceeds_force_limit"
    BEND = "bend_limit_exceeded"
    BLOCKED = "blocked_by_pile"
    NO_ANTIPODAL = "no_antipodal_contact"
    FRICTION_CONE = "friction_cone_violated"


@dataclass
class DynamicsVerdict:
    q_dynamics: int
    failure_reason: str = DynamicsFailure.NONE
    payload_mass: float = 0.0
    blocking_instances: list[int] = field(default_factory=list)


def _payloads(ctx: SceneContext, target: int, clutter_aware: bool):
    """(payload mass, target-only mass, instances stacked on the target)."""
    obj = ctx.object_by_instance(target)
    own = obj.mass
    if not clutter_aware:
        return own, own, []
    extra = stacked_mass(ctx.scene, target, ctx.support)
    reverse = [a for a, sup in ctx.support.items() if target in sup]
    return own + extra, own, sorted(reverse)


def _target_com(ctx: SceneContext, target: int) -> np.ndarray:
    obj = ctx.object_by_instance(target)
    mesh = ctx.assets[obj.asset_id].mesh
    return obj.pose.apply(mesh_centroid(mesh) * obj.scale)


def suction_quasistatic(ctx: SceneContext, cand: SuctionCandidate,
                        cup: SuctionCupSpec,
                        clutter_aware: bool = True) -> DynamicsVerdict:
    """Static wrench feasibility for a sealed suction grasp.

    Fails when the (optionally pile-augmented) payload weight with lift
    margin exceeds the cup force limit, or when the lateral-offset torque
    bends the cup past its bend limit under a linear angular-stiffness
    model calibrated so the limit is reached at torque = force_limit x
    cup_radius.
    """
    payload, own, blockers = _payloads(ctx, cand.target_instance, clutter_aware)
    load = payload * GRAVITY * ACCEL_FACTOR
    if load > cup.force_limit:
        reason = (DynamicsFailure.BLOCKED
                  if own * GRAVITY * ACCEL_FACTOR <= cup.force_limit
                  else DynamicsFailure.PAYLOAD)
        return DynamicsVerdict(0, reason, payload, blockers)
    axis = cand.pose.rotation[:, 0]
    com = _target_com(ctx, cand.target_instance)
    rel = com - cand.pose.t
    lateral = float(np.linalg.norm(rel - (rel @ axis) * axis))
    torque = payload * GRAVITY * lateral
    k_bend = cup.force_limit * cup.radius / math.radians(cup.bend_limit_deg)
    bend_deg = math.degrees(torque / k_bend)
    if bend_deg > cup.bend_limit_deg:
        return DynamicsVerdict(0, DynamicsFailure.BEND, payload, blockers)
    return DynamicsVerdict(1, DynamicsFailure.NONE, payload, blockers)


def grasp_quasistatic(ctx: SceneContext, cand: GraspCandidate,
                      gripper: GripperSpec,
                      clutter_aware: bool = True) -> DynamicsVerdict:
    """Antipodal friction-cone feasibility for a parallel-jaw grasp.

    Opposing rays along the closing direction from the close-region center
    locate the finger contact pair on the target; both contact normals must
    lie within the Coulomb cone of the closing line, and the (optionally
    pile-augmented) payload must stay within the gripping force budget.
    """
    payload, own, blockers = _payloads(ctx, cand.target_instance, clutter_aware)
    load = payload * GRAVITY * ACCEL_FACTOR
    if load > gripper.grip_force:
        reason = (DynamicsFailure.BLOCKED
                  if own * GRAVITY * ACCEL_FACTOR <= gripper.grip_force
                  else DynamicsFailure.PAYLOAD)
        return DynamicsVerdict(0, reason, payload, blockers)
    rot = cand.pose.rotation
    closing = rot[:, 1]  # +Y of the gripper frame
    lo, hi = gripper.close_region()
    center = cand.pose.apply(((lo + hi) / 2.0)[None])[0]
    half = gripper.max_open_width / 2.0
    origins = np.stack([center, center])
    dirs = np.stack([closing, -closing])
    t, tri = ctx.accel.raycast_batch(origins, dirs, np.full(2, half))
    if (tri < 0).any():
        return DynamicsVerdict(0, DynamicsFailure.NO_ANTIPODAL, payload, blockers)
    insts = ctx.accel.tri_instance[tri]
    if (insts != cand.target_instance).any():
        return DynamicsVerdict(0, DynamicsFailure.NO_ANTIPODAL, payload, blockers)
    cone = math.atan(max(ctx.object_by_instance(cand.target_instance).friction, 0.0))
    for k in range(2):
        normal = ctx.accel.tri_normals[tri[k]]
        cosang = abs(float(normal @ closing))
        angle = math.acos(min(1.0, max(-1.0, cosang)))
        if angle > cone + 1e-12:
            return DynamicsVerdict(0, DynamicsFailure.FRICTION_CONE,
                                   payload, blockers)
    return DynamicsVerdict(1, DynamicsFailure.NONE, payload, blockers)
