import numpy as np
import pytest

from graspgen.geometry import Pose, mesh_volume
from graspgen.procedural import box_mesh, icosphere
from graspgen.scenes import ObjectAsset, Scene, SceneObject
from graspgen.context import SceneContext


@pytest.fixture(scope="session")
def cube_asset():
    return ObjectAsset("cube", box_mesh((0.06, 0.04, 0.04)))


@pytest.fixture(scope="session")
def sphere_asset():
    return ObjectAsset("sphere", icosphere(0.03, 3))


@pytest.fixture
def cube_scene(cube_asset):
    assets = {"cube": cube_asset}
    mass = cube_asset.density * mesh_volume(cube_asset.mesh).volume
    scene = Scene(objects=[SceneObject(0, "cube",
                                       Pose.from_translation([0, 0, 0.02]),
                                       1.0, mass, 0.5)], seed=11)
    return scene, assets


@pytest.fixture
def cube_ctx(cube_scene):
    scene, assets = cube_scene
    return SceneContext.build(scene, assets)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q
