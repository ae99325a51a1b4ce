import numpy as np
import pytest

from graspgen.accel import SceneAccel
from graspgen.geometry import Pose
from graspgen.procedural import box_mesh, heightfield_solid, washer
from graspgen.sampling import SuctionCandidate, suction_cup_15mm
from graspgen.seal import (SEAL_RINGS, SEAL_VERTICES_PER_RING, SealFailure,
                           build_seal_model, evaluate_seal,
                           evaluate_seal_dexnet8)

CUP = suction_cup_15mm()
MODEL = build_seal_model(CUP)

TOP_DOWN = np.array([[0.0, -1.0, 0.0],
                     [0.0, 0.0, 1.0],
                     [-1.0, 0.0, 0.0]])


def cand_at(point, target=0):
    return SuctionCandidate(Pose.from_matrix(TOP_DOWN, point), "cup_1.5cm", target)


def accel_of(*meshes):
    return SceneAccel([(m, Pose.identity(), 1.0, i)
                       for i, m in enumerate(meshes)])


def flat_plate(size=0.1):
    # top face at z = 0
    return box_mesh((size, size, 0.01), center=(0, 0, -0.005))


def test_seal_model_lattice():
    assert len(MODEL.vertices) == SEAL_RINGS * SEAL_VERTICES_PER_RING == 960
    r = np.linalg.norm(MODEL.vertices[:, 1:], axis=1)
    assert np.isclose(r.max(), CUP.radius)
    assert r.min() > 0
    assert np.allclose(MODEL.vertices[:, 0], 0.0)  # rim plane


def test_flat_plate_seals():
    ev = evaluate_seal(accel_of(flat_plate()), cand_at([0, 0, 0]), MODEL)
    assert ev.q_seal == 1
    assert ev.failure_reason == SealFailure.NONE
    assert ev.hit_mask.all()
    assert ev.max_abs_deformation < 1e-9


def test_hole_breaks_seal_ray_miss():
    # through-hole half the cup radius: the inner rings see nothing
    plate = washer(0.05, 0.0075, 0.01, 64, center=(0, 0, -0.005))
    ev = evaluate_seal(accel_of(plate), cand_at([0, 0, 0]), MODEL)
    assert ev.q_seal == 0
    assert ev.failure_reason == SealFailure.RAY_MISS
    assert (~ev.hit_mask).sum() > 0


def test_step_exceeds_deformation():
    # 3 mm recess under half the cup: 15% of bellows height > the 10% budget
    step = heightfield_solid(0.05, 0.05, 0.02,
                             lambda x, y: -0.003 if x > 0 else 0.0, 51)
    ev = evaluate_seal(accel_of(step), cand_at([0, 0, 0]), MODEL)
    assert ev.q_seal == 0
    assert ev.failure_reason == SealFailure.DEFORMATION_EXCEEDED
    assert ev.max_abs_deformation == pytest.approx(0.003, abs=1e-9)


def test_shallow_step_within_budget():
    step = heightfield_solid(0.05, 0.05, 0.02,
                             lambda x, y: -0.0015 if x > 0 else 0.0, 51)
    ev = evaluate_seal(accel_of(step), cand_at([0, 0, 0]), MODEL)
    assert ev.q_seal == 1


def test_neighbor_under_rim_wrong_instance():
    # coplanar neighbor plate under the overhanging half of the cup
    target = box_mesh((0.06, 0.06, 0.01), center=(-0.03, 0, -0.005))
    neighbor = box_mesh((0.06, 0.06, 0.01), center=(0.03, 0, -0.005))
    ev = evaluate_seal(accel_of(target, neighbor),
                       cand_at([-0.005, 0, 0]), MODEL)
    assert ev.q_seal == 0
    assert ev.failure_reason == SealFailure.WRONG_INSTANCE
    assert (ev.hit_instances == 1).any()


def test_wrong_instance_outranks_ray_miss():
    # gap rays miss entirely AND the far rim lands on a neighbor
    target = box_mesh((0.06, 0.06, 0.01), center=(-0.032, 0, -0.005))
    neighbor = box_mesh((0.06, 0.06, 0.01), center=(0.034, 0, -0.005))
    ev = evaluate_seal(accel_of(target, neighbor),
                       cand_at([-0.005, 0, 0]), MODEL)
    assert (~ev.hit_mask).any()          # rays lost in the 4 mm gap
    assert (ev.hit_instances == 1).any()  # rays on the neighbor
    assert ev.failure_reason == SealFailure.WRONG_INSTANCE


def test_ray_miss_outranks_deformation():
    def fn(x, y):
        if x < -0.005:
            return -0.05   # pit deeper than the ray reach
        if x > 0.005:
            return -0.004  # 20% deformation
        return 0.0
    mesh = heightfield_solid(0.05, 0.05, 0.06, fn, 51)
    ev = evaluate_seal(accel_of(mesh), cand_at([0, 0, 0]), MODEL)
    assert (~ev.hit_mask).any()
    assert ev.max_abs_deformation > 0.002
    assert ev.failure_reason == SealFailure.RAY_MISS


def grooved_top(x, y):
    # 4 mm wide, 3 mm deep grooves on a 12 mm pitch
    return -0.003 if (x + 0.002) % 0.012 < 0.004 else 0.0


def test_dexnet8_passes_grooves_dense_rejects():
    """Grooves deeper than the bellows budget: the 960-vertex model sees the
    recess and rejects; the 8-vertex perimeter model's springs all stay
    within 10% strain and it accepts."""
    plate = heightfield_solid(0.04, 0.04, 0.01, grooved_top, 81)
    accel = accel_of(plate)
    cand = cand_at([0, 0, 0])
    ev = evaluate_seal(accel, cand, MODEL)
    assert ev.failure_reason == SealFailure.DEFORMATION_EXCEEDED
    assert evaluate_seal_dexnet8(accel, cand, CUP)


def test_dexnet8_rejects_tall_ridge():
    # a 4 mm ridge under one rim vertex stretches its cone spring past 10%
    ridge = heightfield_solid(0.04, 0.04, 0.01,
                              lambda x, y: 0.004 if x < -0.0125 else 0.0, 81)
    assert not evaluate_seal_dexnet8(accel_of(ridge), cand_at([0, 0, 0]), CUP)


def test_dexnet8_is_instance_blind():
    # overhanging a coplanar neighbor: dense fails, the baseline cannot tell
    target = box_mesh((0.06, 0.06, 0.01), center=(-0.03, 0, -0.005))
    neighbor = box_mesh((0.06, 0.06, 0.01), center=(0.03, 0, -0.005))
    accel = accel_of(target, neighbor)
    cand = cand_at([-0.005, 0, 0])
    assert evaluate_seal(accel, cand, MODEL).failure_reason == \
        SealFailure.WRONG_INSTANCE
    assert evaluate_seal_dexnet8(accel, cand, CUP)
    # singulated evaluation restores the rejection (rim rays miss)
    singulated = accel_of(target)
    assert not evaluate_seal_dexnet8(singulated, cand, CUP)


def test_dexnet8_flat_plate_passes():
    assert evaluate_seal_dexnet8(accel_of(flat_plate()), cand_at([0, 0, 0]), CUP)


def test_cup_off_the_edge_misses():
    ev = evaluate_seal(accel_of(flat_plate(0.02)), cand_at([0.02, 0, 0]), MODEL)
    assert ev.failure_reason == SealFailure.RAY_MISS
