"""Shared per-scene evaluation context.

Bundles the immutable pieces every labeling stage needs: the scene, its
asset pool, the triangle BVH, per-instance surface samples (used by the
close-region heuristic and the support graph) and the resting-contact
graph. Built once per scene, then shared read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import SceneAccel
from .geometry import sample_surface
from .scenes import ObjectAsset, Scene, scene_accel, support_graph

SURFACE_SAMPLES_PER_INSTANCE = 1024


@dataclass
class SceneContext:
    scene: Scene
    assets: dict[str, ObjectAsset]
    accel: SceneAccel
    surface_points: np.ndarray    # (N, 3) world-space samples over all instances
    surface_normals: np.ndarray   # (N, 3)
    surface_ids: np.ndarray       # (N,)
    support: dict[int, set[int]] = field(default_factory=dict)
    ground_z: float = 0.0

    @staticmethod
    def build(scene: Scene, assets: dict[str, ObjectAsset],
              samples_per_instance: int = SURFACE_SAMPLES_PER_INSTANCE) -> "SceneContext":
        accel = scene_accel(scene, assets)
        pts, nrm, ids = [], [], []
        for obj in scene.objects:
            mesh = assets[obj.asset_id].mesh
            p, n, _ = sample_surface(mesh, samples_per_instance,
                                     seed=scene.seed * 1000 + obj.instance_id)
            rot = obj.pose.rotation
            pts.append(obj.pose.apply(p * obj.scale))
            nrm.append(n @ rot.T)
            ids.append(np.full(len(p), obj.instance_id, dtype=np.int64))
        return SceneContext(
            scene=scene, assets=assets, accel=accel,
            surface_points=np.vstack(pts), surface_normals=np.vstack(nrm),
            surface_ids=np.concatenate(ids),
            support=support_graph(scene, assets, seed=scene.seed),
            ground_z=scene.ground_plane_z)

    def object_by_instance(self, instance_id: int):
        return self.scene.objects[instance_id]

    def instance_mesh_world(self, instance_id: int):
        obj = self.scene.objects[instance_id]
        mesh = self.assets[obj.asset_id].mesh
        return mesh.transformed(obj.pose, obj.scale)
