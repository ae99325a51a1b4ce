"""Procedural corner-case fixtures for the seal-model ablation.

Six scenes, each sized for the 1.5 cm cup, with one fixed top-down suction
candidate: (a) plate with a centered through-hole, (b) protruding ridge,
(c) rough interior surface, (d) objects separated by a hair gap,
(e) concave bowl, (f) overlapped thin plates. The dense ring model rejects
all six; the 8-vertex perimeter baseline accepts (a), (c), (d) and (f).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import procedural as pr
from .geometry import Pose, mesh_volume
from .sampling import SuctionCandidate, suction_cup_15mm
from .scenes import (ObjectAsset, Scene, SceneObject, save_asset_manifest,
                     scene_to_dict)

CUP = suction_cup_15mm()

# fixture dimensions (m)
HOLE_RADIUS = 0.5 * CUP.radius       # through-hole under the cup center
GROOVE_WIDTH = 0.006                 # ridge/groove footprint
RIDGE_HEIGHT = 0.004
ROUGH_AMPLITUDE = 0.003
ROUGH_WAVELENGTH = 0.008
NEIGHBOR_GAP = 0.0005
BOWL_RADIUS = 0.02
OVERLAP_PLATE_THICKNESS = 0.002


@dataclass
class CornerCase:
    name: str
    assets: dict[str, ObjectAsset]
    scene: Scene
    candidate: SuctionCandidate
    description: str


def _top_down_candidate(point, target_instance: int,
                        roll: float = 0.0) -> SuctionCandidate:
    # outward normal +z; cup +X points down into the surface; `roll` spins
    # the rim lattice about the cup axis
    rot = np.array([[0.0, -1.0, 0.0],
                    [0.0, 0.0, 1.0],
                    [-1.0, 0.0, 0.0]])
    c, s = math.cos(roll), math.sin(roll)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return SuctionCandidate(pose=Pose.from_matrix(rot @ rx, np.asarray(point)),
                            cup=CUP.name, target_instance=target_instance)


def _single_object_scene(asset: ObjectAsset, z: float, seed: int) -> Scene:
    mass = asset.density * mesh_volume(asset.mesh).volume
    return Scene(objects=[SceneObject(0, asset.asset_id,
                                      Pose.from_translation([0.0, 0.0, z]),
                                      1.0, mass, 0.5)], seed=seed)


def _case_hole() -> CornerCase:
    thickness = 0.005
    mesh = pr.washer(0.05, HOLE_RADIUS, thickness, segments=64)
    asset = ObjectAsset("plate_hole", mesh)
    scene = _single_object_scene(asset, thickness / 2, seed=101)
    cand = _top_down_candidate([0.0, 0.0, thickness], 0)
    return CornerCase("a_grooves_holes", {asset.asset_id: asset}, scene, cand,
                      "through-hole radius 7.5 mm under the cup center")


def _case_protrusion() -> CornerCase:
    # half-millimeter margin keeps grid nodes off the ridge boundary
    x0, x1 = 0.008 - GROOVE_WIDTH / 2 - 0.0005, 0.008 + GROOVE_WIDTH / 2 + 0.0005

    def top(x, y):
        return RIDGE_HEIGHT if x0 <= x <= x1 else 0.0

    base = 0.008
    mesh = pr.heightfield_solid(0.04, 0.04, base, top, resolution=81)
    asset = ObjectAsset("plate_ridge", mesh)
    scene = _single_object_scene(asset, base, seed=102)
    cand = _top_down_candidate([0.0, 0.0, base], 0)
    return CornerCase("b_protruding", {asset.asset_id: asset}, scene, cand,
                      "4 mm ridge crossing the cup footprint and perimeter")


def _case_rough() -> CornerCase:
    def top(x, y):
        r = math.hypot(x, y)
        if r < 0.003 or r > 0.012:
            return 0.0
        return ROUGH_AMPLITUDE * math.sin(2 * math.pi * x / ROUGH_WAVELENGTH) * \
            math.sin(2 * math.pi * y / ROUGH_WAVELENGTH)

    base = 0.008
    mesh = pr.heightfield_solid(0.04, 0.04, base, top, resolution=101)
    asset = ObjectAsset("plate_rough", mesh)
    scene = _single_object_scene(asset, base, seed=103)
    cand = _top_down_candidate([0.0, 0.0, base], 0)
    return CornerCase("c_rough", {asset.asset_id: asset}, scene, cand,
                      "3 mm amplitude roughness inside the rim, flat perimeter")


def _case_neighbors() -> CornerCase:
    size = (0.04, 0.08, 0.01)
    mesh = pr.box_mesh(size)
    asset = ObjectAsset("slab", mesh)
    mass = asset.density * mesh_volume(mesh).volume
    off = size[0] / 2 + NEIGHBOR_GAP / 2
    scene = Scene(objects=[
        SceneObject(0, "slab", Pose.from_translation([-off, 0.0, size[2] / 2]),
                    1.0, mass, 0.5),
        SceneObject(1, "slab", Pose.from_translation([off, 0.0, size[2] / 2]),
                    1.0, mass, 0.5),
    ], seed=104)
    # cup 14.1 mm from the target edge, rolled 22.5 deg: the rim arc bulging
    # past the edge onto the neighbor falls between the 8 baseline vertices
    edge = -NEIGHBOR_GAP / 2
    cand = _top_down_candidate([edge - 0.0141, 0.0, size[2]], 0,
                               roll=math.pi / 8)
    return CornerCase("d_neighbors", {asset.asset_id: asset}, scene, cand,
                      "0.5 mm gap; the rim reaches across onto the neighbor")


def _case_concave() -> CornerCase:
    r_edge = 0.018

    def top(x, y):
        r = min(math.hypot(x, y), r_edge)
        return BOWL_RADIUS - math.sqrt(BOWL_RADIUS ** 2 - r ** 2)

    base = 0.01
    mesh = pr.heightfield_solid(0.04, 0.04, base, top, resolution=101)
    asset = ObjectAsset("plate_bowl", mesh)
    scene = _single_object_scene(asset, base, seed=105)
    cand = _top_down_candidate([0.0, 0.0, base], 0)
    return CornerCase("e_concave", {asset.asset_id: asset}, scene, cand,
                      "spherical bowl radius 2 cm, cup seated at the bottom")


def _case_overlap() -> CornerCase:
    t = OVERLAP_PLATE_THICKNESS
    size = (0.06, 0.06, t)
    mesh = pr.box_mesh(size)
    asset = ObjectAsset("thin_plate", mesh)
    mass = asset.density * mesh_volume(mesh).volume
    scene = Scene(objects=[
        SceneObject(0, "thin_plate", Pose.from_translation([0.0, 0.0, t / 2]),
                    1.0, mass, 0.5),
        SceneObject(1, "thin_plate",
                    Pose.from_translation([size[0] / 2, 0.0, 1.5 * t]),
                    1.0, mass, 0.5),
    ], seed=106)
    # rim bulge past the top-plate edge at x=0 lands on the lower plate;
    # same 22.5 deg roll keeps the 8 baseline vertices on the target
    cand = _top_down_candidate([0.0141, 0.0, 2 * t], 1, roll=math.pi / 8)
    return CornerCase("f_overlapped", {asset.asset_id: asset}, scene, cand,
                      "50% overlapped stack; rim reaches onto the lower plate")


def corner_cases() -> list[CornerCase]:
    return [_case_hole(), _case_protrusion(), _case_rough(),
            _case_neighbors(), _case_concave(), _case_overlap()]


def gen_corner_corpus(out_dir) -> list[Path]:
    """Write the six fixtures to disk: OBJ meshes, asset manifest, scene
    JSON and the fixed candidate per case. Returns the case directories."""
    out_dir = Path(out_dir)
    dirs = []
    for case in corner_cases():
        case_dir = out_dir / case.name
        case_dir.mkdir(parents=True, exist_ok=True)
        save_asset_manifest(case.assets, case_dir)
        (case_dir / "scene.json").write_text(
            json.dumps(scene_to_dict(case.scene), indent=2) + "\n")
        cand = {
            "kind": "suction",
            "pose": {"q": [float(x) for x in case.candidate.pose.q],
                     "t": [float(x) for x in case.candidate.pose.t]},
            "cup": case.candidate.cup,
            "target_instance": case.candidate.target_instance,
            "description": case.description,
        }
        (case_dir / "candidate.json").write_text(json.dumps(cand, indent=2) + "\n")
        dirs.append(case_dir)
    return dirs
