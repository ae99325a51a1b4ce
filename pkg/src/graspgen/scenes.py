"""Cluttered-scene sampling, deterministic settling, and serialization.

Scenes are produced by dropping objects one-by-one with a frozen-orientation
z-drop: each object keeps its sampled orientation and is translated down
until first contact with the ground or previously placed objects. Full
rigid-body settling is intentionally not simulated; externally settled
scenes can be imported through the same JSON format.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import (Pose, TriangleMesh, load_mesh, mesh_volume,
                       sample_surface, save_mesh)
from .accel import SceneAccel, mesh_overlap

log = logging.getLogger(__name__)

DEFAULT_DENSITY = 500.0  # kg/m^3, light-plastic assumption for unspecified assets
CONTACT_RESOLUTION = 1e-4  # m, z-drop bisection resolution
SUPPORT_RAY_REACH = 2e-3   # m, resting-contact detection distance


class SceneSchemaError(Exception):
    """Scene/asset JSON does not match the expected schema."""


@dataclass
class ObjectAsset:
    asset_id: str
    mesh: TriangleMesh
    density: float = DEFAULT_DENSITY
    difficulty: str | None = None  # L1/L2/L3; computed lazily if None

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.difficulty is None:
            self.difficulty = classify_difficulty(self.mesh)
        self.volume = mesh_volume(self.mesh).volume


@dataclass
class SceneObject:
    instance_id: int
    asset_id: str
    pose: Pose
    scale: float
    mass: float
    friction: float


@dataclass
class Scene:
    objects: list[SceneObject]
    seed: int
    ground_plane_z: float = 0.0


@dataclass
class SceneDistributionConfig:
    object_count_range: tuple[int, int] = (1, 20)
    drop_region_min: tuple[float, float, float] = (-0.1, -0.1, 0.5)
    drop_region_max: tuple[float, float, float] = (0.1, 0.1, 0.8)
    scale_range: tuple[float, float] = (1.0, 1.5)
    friction_range: tuple[float, float] = (0.0, 1.0)


@dataclass
class PlanEntry:
    asset_id: str
    position: np.ndarray
    quat: np.ndarray  # (w, x, y, z)
    scale: float
    friction: float


@dataclass
class ScenePlan:
    entries: list[PlanEntry]
    seed: int


def sample_scene_plan(cfg: SceneDistributionConfig, assets: dict[str, ObjectAsset],
                      seed: int) -> ScenePlan:
    """Draw an ordered drop list from the scene state distribution.

    Object count is uniform over the configured range, drop positions are
    uniform in the drop box, orientations are uniform over SO(3)
    (normalized 4D Gaussian quaternions), scales uniform per object.
    The friction coefficient is sampled once per scene and stored on each
    object.
    """
    if not assets:
        raise ValueError("empty asset pool")
    rng = np.random.default_rng(seed)
    lo, hi = cfg.object_count_range
    count = int(rng.integers(lo, hi + 1))
    friction = float(rng.uniform(*cfg.friction_range))
    ids = sorted(assets.keys())
    entries = []
    rmin = np.asarray(cfg.drop_region_min)
    rmax = np.asarray(cfg.drop_region_max)
    for _ in range(count):
        asset_id = ids[int(rng.integers(len(ids)))]
        position = rng.uniform(rmin, rmax)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        scale = float(rng.uniform(*cfg.scale_range))
        entries.append(PlanEntry(asset_id, position, q, scale, friction))
    return ScenePlan(entries=entries, seed=seed)


def _ground_rest_z(world_verts_at_origin: np.ndarray) -> float:
    # translation z that puts the lowest vertex exactly on the ground plane
    return -float(world_verts_at_origin[:, 2].min())


def settle_scene(plan: ScenePlan, assets: dict[str, ObjectAsset]) -> Scene:
    """Place plan entries sequentially with a frozen-orientation z-drop.

    Each object slides down from its drop height until first contact
    (bisection to CONTACT_RESOLUTION); objects that overlap at every height
    in the search range are skipped with a warning.
    """
    placed: list[tuple[TriangleMesh, Pose, float, int]] = []
    objects: list[SceneObject] = []
    accel: SceneAccel | None = None
    for entry in plan.entries:
        asset = assets[entry.asset_id]
        rot_pose = Pose(entry.quat, np.zeros(3))
        verts0 = rot_pose.apply(asset.mesh.vertices * entry.scale)
        z_ground = _ground_rest_z(verts0)
        xy = entry.position[:2]

        def pose_at(z):
            return Pose(entry.quat, np.array([xy[0], xy[1], z]))

        def overlaps(z):
            return mesh_overlap(accel, asset.mesh, pose_at(z), entry.scale)[0]

        if accel is None:
            rest_z = z_ground
        elif not overlaps(z_ground):
            rest_z = z_ground
        else:
            hi = max(float(entry.position[2]), z_ground + CONTACT_RESOLUTION)
            tries = 0
            while overlaps(hi) and tries < 20:
                hi += 0.1
                tries += 1
            if tries >= 20:
                log.warning("object %s cannot fit, skipped", entry.asset_id)
                continue
            lo = z_ground
            while hi - lo > CONTACT_RESOLUTION:
                mid = 0.5 * (lo + hi)
                if overlaps(mid):
                    lo = mid
                else:
                    hi = mid
            rest_z = hi
        instance_id = len(objects)
        pose = pose_at(rest_z)
        mass = asset.density * entry.scale ** 3 * asset.volume
        objects.append(SceneObject(instance_id=instance_id,
                                   asset_id=entry.asset_id, pose=pose,
                                   scale=entry.scale, mass=mass,
                                   friction=entry.friction))
        placed.append((asset.mesh, pose, entry.scale, instance_id))
        accel = SceneAccel(placed)
    return Scene(objects=objects, seed=plan.seed)


def scene_accel(scene: Scene, assets: dict[str, ObjectAsset]) -> SceneAccel:
    if not scene.objects:
        raise ValueError("scene has no objects")
    return SceneAccel([(assets[o.asset_id].mesh, o.pose, o.scale, o.instance_id)
                       for o in scene.objects])


# ---------------------------------------------------------------------------
# difficulty classification
# ---------------------------------------------------------------------------

TRIANGLE_COUNT_L1 = 500
HULL_RATIO_L1 = 1.2
HULL_RATIO_L3 = 3.0


def _connected_components(mesh: TriangleMesh) -> int:
    parent = list(range(mesh.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in mesh.faces:
        a = find(int(f[0]))
        for k in (1, 2):
            b = find(int(f[k]))
            if a != b:
                parent[b] = a
    used = np.unique(mesh.faces)
    return len({find(int(v)) for v in used})


def classify_difficulty(mesh: TriangleMesh) -> str:
    """Heuristic mesh-complexity levels L1/L2/L3.

    L3: multiple connected components or strongly non-convex
    (hull/mesh volume ratio >= 3). L1: small, near-convex single component.
    Everything else is L2. Thresholds are recorded in the dataset manifest.
    """
    components = _connected_components(mesh)
    vol = mesh_volume(mesh).volume
    try:
        hull_vol = ConvexHull(mesh.vertices).volume
    except Exception:
        hull_vol = vol
    ratio = hull_vol / vol if vol > 0 else np.inf
    if components > 1 or ratio >= HULL_RATIO_L3:
        return "L3"
    if mesh.n_faces <= TRIANGLE_COUNT_L1 and ratio <= HULL_RATIO_L1:
        return "L1"
    return "L2"


# ---------------------------------------------------------------------------
# support graph
# ---------------------------------------------------------------------------

def support_graph(scene: Scene, assets: dict[str, ObjectAsset],
                  samples_per_object: int = 256, seed: int = 0) -> dict[int, set[int]]:
    """Directed resting-contact graph: edge a -> b means a rests on b.

    An edge exists when a downward ray from one of a's lowest-decile surface
    points first hits b within SUPPORT_RAY_REACH. Edges only point at
    earlier-placed instances, so the graph is acyclic by construction order.
    """
    graph: dict[int, set[int]] = {o.instance_id: set() for o in scene.objects}
    if len(scene.objects) < 2:
        return graph
    accel = scene_accel(scene, assets)
    down = np.array([0.0, 0.0, -1.0])
    for obj in scene.objects:
        mesh = assets[obj.asset_id].mesh
        pts, _, _ = sample_surface(mesh, samples_per_object,
                                   seed=seed + obj.instance_id)
        world = obj.pose.apply(pts * obj.scale)
        z = world[:, 2]
        decile = np.quantile(z, 0.1)
        low = world[z <= decile]
        # lift origins off the contact plane so roundoff below a face
        # cannot put the hit at negative ray distance
        low = low + np.array([0.0, 0.0, 1e-6])
        dirs = np.tile(down, (len(low), 1))
        t, tri = accel.raycast_batch(low, dirs,
                                     np.full(len(low), SUPPORT_RAY_REACH + 1e-6),
                                     exclude_id=obj.instance_id)
        hit = tri >= 0
        for g in np.unique(tri[hit]):
            b = int(accel.tri_instance[int(g)])
            if b < obj.instance_id:
                graph[obj.instance_id].add(b)
    return graph


def stacked_mass(scene: Scene, target: int, graph: dict[int, set[int]]) -> float:
    """Total mass of objects resting (transitively) on `target`."""
    reverse: dict[int, set[int]] = {o.instance_id: set() for o in scene.objects}
    for a, supports in graph.items():
        for b in supports:
            reverse[b].add(a)
    masses = {o.instance_id: o.mass for o in scene.objects}
    seen = set()
    stack = list(reverse.get(target, ()))
    total = 0.0
    while stack:
        a = stack.pop()
        if a in seen:
            continue
        seen.add(a)
        total += masses[a]
        stack.extend(reverse.get(a, ()))
    return total


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    return {
        "seed": scene.seed,
        "objects": [
            {
                "instance_id": o.instance_id,
                "asset_id": o.asset_id,
                "pose": {"q": [float(x) for x in o.pose.q],
                         "t": [float(x) for x in o.pose.t]},
                "scale": o.scale,
                "mass": o.mass,
                "friction": o.friction,
            }
            for o in scene.objects
        ],
    }


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise SceneSchemaError(f"missing key '{where}{key}'")
    return d[key]


def scene_from_dict(data: dict) -> Scene:
    objs_raw = _require(data, "objects", "")
    seed = int(data.get("seed", 0))
    objects = []
    for i, od in enumerate(objs_raw):
        where = f"objects[{i}]."
        pose_d = _require(od, "pose", where)
        q = _require(pose_d, "q", where + "pose.")
        t = _require(pose_d, "t", where + "pose.")
        objects.append(SceneObject(
            instance_id=int(_require(od, "instance_id", where)),
            asset_id=str(_require(od, "asset_id", where)),
            pose=Pose(np.asarray(q, dtype=np.float64),
                      np.asarray(t, dtype=np.float64)),
            scale=float(_require(od, "scale", where)),
            mass=float(_require(od, "mass", where)),
            friction=float(_require(od, "friction", where)),
        ))
    ids = [o.instance_id for o in objects]
    if ids != list(range(len(ids))):
        raise SceneSchemaError("instance_ids must be contiguous from 0")
    return Scene(objects=objects, seed=seed)


def load_scene(path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SceneSchemaError(f"{path}: invalid JSON: {exc}") from exc
    return scene_from_dict(data)


def load_asset_manifest(path) -> dict[str, ObjectAsset]:
    """Asset manifest JSON: {asset_id: {"path": obj, "density": f, "difficulty": s}}."""
    data = json.loads(Path(path).read_text())
    base = Path(path).parent
    pool = {}
    for asset_id, spec in data.items():
        mesh_path = _require(spec, "path", f"{asset_id}.")
        mesh, _ = load_mesh(base / mesh_path)
        pool[asset_id] = ObjectAsset(
            asset_id=asset_id, mesh=mesh,
            density=float(spec.get("density", DEFAULT_DENSITY)),
            difficulty=spec.get("difficulty"))
    return pool


def save_asset_manifest(assets: dict[str, ObjectAsset], out_dir,
                        manifest_name: str = "assets.json") -> Path:
    """Write every asset's OBJ plus the manifest JSON under out_dir;
    returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for asset_id, asset in assets.items():
        save_mesh(asset.mesh, out_dir / f"{asset_id}.obj")
        manifest[asset_id] = {"path": f"{asset_id}.obj",
                              "density": asset.density,
                              "difficulty": asset.difficulty}
    path = out_dir / manifest_name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def default_asset_pool() -> dict[str, ObjectAsset]:
    """Built-in procedural pool used when no asset manifest is given."""
    from . import procedural as pr

    rough_wavelength = 0.02

    def rough_top(x, y):
        import math
        r = math.hypot(x, y)
        if r > 0.035:
            return 0.0
        return 0.003 * math.sin(2 * math.pi * x / rough_wavelength) * \
            math.sin(2 * math.pi * y / rough_wavelength)

    def grooved_top(x, y):
        # parallel grooves 4 mm wide, 3 mm deep, 12 mm pitch
        return -0.003 if (x + 0.002) % 0.012 < 0.004 else 0.0

    assets = [
        ObjectAsset("box_small", pr.box_mesh((0.05, 0.05, 0.05))),
        ObjectAsset("box_flat", pr.box_mesh((0.09, 0.07, 0.02))),
        ObjectAsset("box_tall", pr.box_mesh((0.04, 0.04, 0.12))),
        ObjectAsset("sphere", pr.icosphere(0.035, 2)),
        ObjectAsset("cylinder", pr.cylinder(0.025, 0.09, 32)),
        ObjectAsset("washer_plate", pr.washer(0.05, 0.008, 0.012, 48)),
        ObjectAsset("rough_plate",
                    pr.heightfield_solid(0.045, 0.045, 0.012, rough_top, 36)),
        ObjectAsset("grooved_plate",
                    pr.heightfield_solid(0.04, 0.04, 0.01, grooved_top, 81)),
        ObjectAsset("l_shape", pr.l_shape()),
        ObjectAsset("two_part", pr.two_component()),
    ]
    return {a.asset_id: a for a in assets}
