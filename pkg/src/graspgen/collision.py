"""Collision stage: full-mesh gripper overlap plus the close-region heuristic.

Q_collision passes only when the posed gripper mesh touches nothing (scene
objects or ground) and the region between the fingers contains surface
points of the target and of no other object. A "simplified" primitive-shape
variant is provided for the ablation study; it checks sampled surface
points against analytic boxes/cylinders instead of meshing the gripper and
deliberately reproduces the false positives of that approach.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import mesh_overlap
from .context import SceneContext
from .geometry import TriangleMesh
from .procedural import box_mesh, cylinder, merge_meshes
from .sampling import GraspCandidate, GripperSpec, SuctionCandidate, SuctionCupSpec

GROUND_TOUCH_TOL = 1e-12
# fraction of bellows height near the rim allowed to touch the target;
# matches the seal model's deformation allowance
RIM_CONTACT_FRACTION = 0.10


@dataclass
class CollisionReport:
    q_collision: int
    contacting_instances: list[int] = field(default_factory=list)
    close_region_occupied_by: list[int] = field(default_factory=list)
    ground_contact: bool = False
    close_region_has_target: bool = True


def gripper_collision_mesh(spec: GripperSpec) -> TriangleMesh:
    """Simplified volumetric open-configuration mesh: palm box plus two
    finger boxes. User-supplied OBJ meshes can replace this for fidelity."""
    half_gap = spec.max_open_width / 2
    finger_y = half_gap + spec.finger_thickness / 2
    fingers = [
        box_mesh((spec.finger_depth, spec.finger_thickness, spec.finger_height),
                 (spec.finger_depth / 2, finger_y, 0.0)),
        box_mesh((spec.finger_depth, spec.finger_thickness, spec.finger_height),
                 (spec.finger_depth / 2, -finger_y, 0.0)),
    ]
    palm = box_mesh((spec.palm_depth, spec.palm_width, spec.palm_height),
                    (-spec.palm_depth / 2, 0.0, 0.0))
    return merge_meshes(fingers + [palm])


def suction_body_mesh(spec: SuctionCupSpec, rim_clearance: float = 0.0) -> TriangleMesh:
    """Cup body cylinder behind the rim plane; `rim_clearance` trims the
    rim end so permitted rim contact is excluded from the overlap test."""
    height = spec.bellows_height - rim_clearance
    return cylinder(spec.radius, height, segments=32,
                    center=(-(rim_clearance + height / 2), 0.0, 0.0), axis="x")


def _points_in_box(points_local: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.all((points_local >= lo) & (points_local <= hi), axis=1)


def _close_region_occupancy(ctx: SceneContext, cand: GraspCandidate,
                            gripper: GripperSpec):
    lo, hi = gripper.close_region()
    inv = cand.pose.inverse()
    local = inv.apply(ctx.surface_points)
    inside = _points_in_box(local, lo, hi)
    ids_inside = ctx.surface_ids[inside]
    has_target = bool((ids_inside == cand.target_instance).any())
    others = sorted(int(i) for i in np.unique(ids_inside)
                    if i != cand.target_instance)
    return has_target, others


def check_grasp_collision(ctx: SceneContext, cand: GraspCandidate,
                          gripper: GripperSpec,
                          simplified: bool = False) -> CollisionReport:
    """Q_collision for a parallel-jaw candidate."""
    if simplified:
        return _check_grasp_collision_simplified(ctx, cand, gripper)
    mesh = gripper_collision_mesh(gripper)
    world = mesh.transformed(cand.pose)
    ground = bool(world.vertices[:, 2].min() <= ctx.ground_z + GROUND_TOUCH_TOL)
    _, contacts = mesh_overlap(ctx.accel, mesh, cand.pose)
    has_target, others = _close_region_occupancy(ctx, cand, gripper)
    ok = (not contacts) and (not ground) and has_target and not others
    return CollisionReport(q_collision=int(ok),
                           contacting_instances=contacts,
                           close_region_occupied_by=others,
                           ground_contact=ground,
                           close_region_has_target=has_target)


def _check_grasp_collision_simplified(ctx: SceneContext, cand: GraspCandidate,
                                      gripper: GripperSpec) -> CollisionReport:
    """Primitive-shape ablation variant: boxes tested against sampled
    surface points only (no triangle meshes). Misses thin contacts."""
    half_gap = gripper.max_open_width / 2
    finger_y0 = half_gap
    finger_y1 = half_gap + gripper.finger_thickness
    boxes = [
        (np.array([0.0, finger_y0, -gripper.finger_height / 2]),
         np.array([gripper.finger_depth, finger_y1, gripper.finger_height / 2])),
        (np.array([0.0, -finger_y1, -gripper.finger_height / 2]),
         np.array([gripper.finger_depth, -finger_y0, gripper.finger_height / 2])),
        (np.array([-gripper.palm_depth, -gripper.palm_width / 2,
                   -gripper.palm_height / 2]),
         np.array([0.0, gripper.palm_width / 2, gripper.palm_height / 2])),
    ]
    inv = cand.pose.inverse()
    local = inv.apply(ctx.surface_points)
    contacts: set[int] = set()
    for lo, hi in boxes:
        inside = _points_in_box(local, lo, hi)
        contacts.update(int(i) for i in np.unique(ctx.surface_ids[inside]))
    # ground via primitive corner depth
    mesh = gripper_collision_mesh(gripper)
    ground = bool(mesh.transformed(cand.pose).vertices[:, 2].min()
                  <= ctx.ground_z + GROUND_TOUCH_TOL)
    has_target, others = _close_region_occupancy(ctx, cand, gripper)
    ok = (not contacts) and (not ground) and has_target and not others
    return CollisionReport(q_collision=int(ok),
                           contacting_instances=sorted(contacts),
                           close_region_occupied_by=others,
                           ground_contact=ground,
                           close_region_has_target=has_target)


def check_suction_collision(ctx: SceneContext, cand: SuctionCandidate,
                            cup: SuctionCupSpec) -> CollisionReport:
    """Q_collision for a suction candidate: the cup body cylinder may touch
    nothing except the target within the rim contact band."""
    full_body = suction_body_mesh(cup)
    world = full_body.transformed(cand.pose)
    ground = bool(world.vertices[:, 2].min() <= ctx.ground_z + GROUND_TOUCH_TOL)
    _, contacts = mesh_overlap(ctx.accel, full_body, cand.pose,
                               exclude_ids=(cand.target_instance,))
    trimmed = suction_body_mesh(
        cup, rim_clearance=RIM_CONTACT_FRACTION * cup.bellows_height)
    _, target_contacts = mesh_overlap(ctx.accel, trimmed, cand.pose,
                                      exclude_ids=tuple(
                                          i for i in ctx.accel.instance_ids
                                          if i != cand.target_instance))
    contacts = sorted(set(contacts) | set(target_contacts))
    ok = (not contacts) and (not ground)
    return CollisionReport(q_collision=int(ok),
                           contacting_instances=contacts,
                           ground_contact=ground)
