"""Three-stage labeling pipeline, pass-rate metrics, ablation, export.

A label run takes a settled scene, samples grasp or suction candidates via
FPS + Darboux frames, and evaluates each candidate through the ordered
stages collision -> seal (suction only) -> dynamics with short-circuiting:
once a stage reports 0, later stages stay null. The final label is the
product of the evaluated stage bits.

Variant flags swap exactly one evaluated component for the ablation study:
`dexnet8_seal` replaces the dense ring seal model with the singulated
8-vertex baseline, `single_object_dynamics` ignores the pile payload, and
`simplified_gripper` uses primitive-shape collision checking.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .accel import SceneAccel
from .collision import check_grasp_collision, check_suction_collision
from .context import SceneContext
from .dynamics import grasp_quasistatic, suction_quasistatic
from .sampling import (GRIPPERS, SUCTION_CUPS, GraspCandidate, InsufficientSupportError,
                       SuctionCandidate, darboux_frame, fps, gen_parallel_grasps,
                       gen_suction_grasp)
from .scenes import ObjectAsset, Scene
from .seal import build_seal_model, evaluate_seal, evaluate_seal_dexnet8

VARIANTS = ("default", "dexnet8_seal", "single_object_dynamics",
            "simplified_gripper")

DEFAULT_CONFIG = {
    "scene": {
        "object_count_range": [1, 20],
        "drop_region_min": [-0.1, -0.1, 0.5],
        "drop_region_max": [0.1, 0.1, 0.8],
        "scale_range": [1.0, 1.5],
        "friction_range": [0.0, 1.0],
        "default_density": 500.0,
    },
    "camera": {
        "width": 640, "height": 480,
        "fx": 525.0, "fy": 525.0, "cx": 319.5, "cy": 239.5,
        "rho_range": [0.5, 10.0],
        "phi_range": [0.0, 1.5707963267948966],
        "theta_range": [0.0, 3.141592653589793],
        "frames_per_scene": 8,
        "depth_noise_sigma_mm": 0.0,
    },
    "sampling": {
        "fps_points": 50,
        "n_roll": 12,
        "n_standoff": 3,
        "neighborhood_radius": 0.01,
        "surface_samples_per_instance": 1024,
    },
    "seal": {
        "rings": 15,
        "vertices_per_ring": 64,
        "deformation_fraction": 0.10,
        "ray_reach_factor": 2.0,
    },
    "dynamics": {
        "gravity": 9.81,
        "accel_factor": 1.5,
        "grip_force": 60.0,
        "bend_limit_deg": 7.0,
    },
    "tools": {"gripper": "fetch", "cup": "cup_1.5cm"},
}


class PipelineError(Exception):
    pass


def default_config() -> dict:
    return json.loads(json.dumps(DEFAULT_CONFIG))


def load_config(path=None) -> dict:
    """Defaults overlaid with a JSON config file (section-wise merge)."""
    cfg = default_config()
    if path is not None:
        user = json.loads(Path(path).read_text())
        if not isinstance(user, dict):
            raise PipelineError("config root must be a JSON object")
        for section, values in user.items():
            if section in cfg and isinstance(cfg[section], dict):
                cfg[section].update(values)
            else:
                cfg[section] = values
    return cfg


def config_hash(cfg: dict, variant: str | None = None) -> str:
    """sha256 over the canonical config JSON; the variant tag, when given,
    is mixed in so ablation rows hash differently while the base stays
    comparable."""
    payload = {"config": cfg}
    if variant is not None:
        payload["variant"] = variant
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# candidate sampling
# ---------------------------------------------------------------------------

def sample_scene_candidates(ctx: SceneContext, modality: str, tool: str,
                            cfg: dict | None = None):
    """FPS + Darboux candidates for every object in the scene.

    Returns (candidates, skipped) where skipped counts sample points with
    insufficient neighborhood support for a frame.
    """
    cfg = cfg or default_config()
    if modality == "jaw":
        spec = GRIPPERS[tool]()
    elif modality == "suction":
        spec = SUCTION_CUPS[tool]()
    else:
        raise PipelineError(f"unknown modality {modality!r}")
    s = cfg["sampling"]
    out, skipped = [], 0
    for obj in ctx.scene.objects:
        mask = ctx.surface_ids == obj.instance_id
        pts = ctx.surface_points[mask]
        nrm = ctx.surface_normals[mask]
        tree = cKDTree(pts)
        sel = fps(pts, min(int(s["fps_points"]), len(pts)))
        for i in sel:
            try:
                frame = darboux_frame(pts, nrm, pts[i], nrm[i],
                                      radius=float(s["neighborhood_radius"]),
                                      tree=tree)
            except InsufficientSupportError:
                skipped += 1
                continue
            if modality == "jaw":
                out.extend(gen_parallel_grasps(frame, spec,
                                               int(s["n_roll"]),
                                               int(s["n_standoff"]),
                                               obj.instance_id))
            else:
                out.append(gen_suction_grasp(frame, spec, obj.instance_id))
    return out, skipped


def candidate_to_dict(cand) -> dict:
    d = {"pose": {"q": [float(x) for x in cand.pose.q],
                  "t": [float(x) for x in cand.pose.t]},
         "target_instance": int(cand.target_instance)}
    if isinstance(cand, GraspCandidate):
        d.update(kind="jaw", gripper=cand.gripper,
                 roll=float(cand.roll), standoff=float(cand.standoff))
    else:
        d.update(kind="suction", cup=cand.cup)
    return d


def candidate_from_dict(d: dict):
    from .geometry import Pose
    pose = Pose(np.asarray(d["pose"]["q"], dtype=np.float64),
                np.asarray(d["pose"]["t"], dtype=np.float64))
    if d["kind"] == "jaw":
        return GraspCandidate(pose=pose, standoff=float(d.get("standoff", 0.0)),
                              roll=float(d.get("roll", 0.0)),
                              gripper=d["gripper"],
                              target_instance=int(d["target_instance"]))
    if d["kind"] == "suction":
        return SuctionCandidate(pose=pose, cup=d["cup"],
                                target_instance=int(d["target_instance"]))
    raise PipelineError(f"unknown candidate kind {d.get('kind')!r}")


def save_candidates(candidates, path, scene_path=None, assets_path=None,
                    modality=None, tool=None) -> None:
    """Candidate NDJSON: one header line with provenance, then one
    candidate per line."""
    header = {"type": "header", "scene": str(scene_path),
              "assets": str(assets_path), "modality": modality, "tool": tool}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(candidate_to_dict(c), sort_keys=True)
              for c in candidates]
    Path(path).write_text("\n".join(lines) + "\n")


def load_candidates(path):
    """Returns (header dict, candidate list)."""
    lines = [json.loads(s) for s in Path(path).read_text().splitlines()
             if s.strip()]
    if not lines or lines[0].get("type") != "header":
        raise PipelineError(f"{path}: missing candidate header line")
    return lines[0], [candidate_from_dict(d) for d in lines[1:]]


# ---------------------------------------------------------------------------
# staged evaluation
# ---------------------------------------------------------------------------

def _singulated_accel(ctx: SceneContext, instance_id: int) -> SceneAccel:
    obj = ctx.object_by_instance(instance_id)
    return SceneAccel([(ctx.assets[obj.asset_id].mesh, obj.pose, obj.scale,
                        instance_id)])


def _record_base(ctx: SceneContext, cand, modality: str, tool: str,
                 cfg_hash: str) -> dict:
    entry = candidate_to_dict(cand)
    return {
        "scene_seed": ctx.scene.seed,
        "target_instance": int(cand.target_instance),
        "modality": modality,
        "tool": tool,
        "candidate": entry,
        "q_collision": None,
        "q_seal": None,
        "q_dynamics": None,
        "final_label": 0,
        "failure_reason": "none",
        "config_hash": cfg_hash,
    }


def evaluate_candidates(ctx: SceneContext, candidates, modality: str,
                        tool: str, cfg: dict | None = None,
                        variant: str = "default", workers: int = 1):
    """Ordered stage evaluation with short-circuit; one record per
    candidate, in input order regardless of worker count."""
    cfg = cfg or default_config()
    if variant not in VARIANTS:
        raise PipelineError(f"unknown variant {variant!r}")
    if variant == "dexnet8_seal" and modality != "suction":
        raise PipelineError("dexnet8_seal applies to suction only")
    if variant == "simplified_gripper" and modality != "jaw":
        raise PipelineError("simplified_gripper applies to jaws only")
    h = config_hash(cfg, variant)
    clutter = variant != "single_object_dynamics"
    if modality == "suction":
        spec = SUCTION_CUPS[tool]()
        model = build_seal_model(spec)
        singulated: dict[int, SceneAccel] = {
            obj.instance_id: _singulated_accel(ctx, obj.instance_id)
            for obj in ctx.scene.objects} if variant == "dexnet8_seal" else {}
    else:
        spec = GRIPPERS[tool]()

    def one_suction(cand: SuctionCandidate) -> dict:
        rec = _record_base(ctx, cand, modality, tool, h)
        col = check_suction_collision(ctx, cand, spec)
        rec["q_collision"] = col.q_collision
        if not col.q_collision:
            rec["failure_reason"] = "collision"
            return rec
        if variant == "dexnet8_seal":
            ok = evaluate_seal_dexnet8(singulated[cand.target_instance],
                                       cand, spec)
            rec["q_seal"] = int(ok)
            if not ok:
                rec["failure_reason"] = "seal_rejected"
                return rec
        else:
            ev = evaluate_seal(ctx.accel, cand, model)
            rec["q_seal"] = ev.q_seal
            if not ev.q_seal:
                rec["failure_reason"] = ev.failure_reason.value
                return rec
        dyn = suction_quasistatic(ctx, cand, spec, clutter_aware=clutter)
        rec["q_dynamics"] = dyn.q_dynamics
        if not dyn.q_dynamics:
            rec["failure_reason"] = dyn.failure_reason
            return rec
        rec["final_label"] = 1
        return rec

    def one_jaw(cand: GraspCandidate) -> dict:
        rec = _record_base(ctx, cand, modality, tool, h)
        col = check_grasp_collision(ctx, cand, spec,
                                    simplified=variant == "simplified_gripper")
        rec["q_collision"] = col.q_collision
        if not col.q_collision:
            rec["failure_reason"] = "collision"
            return rec
        dyn = grasp_quasistatic(ctx, cand, spec, clutter_aware=clutter)
        rec["q_dynamics"] = dyn.q_dynamics
        if not dyn.q_dynamics:
            rec["failure_reason"] = dyn.failure_reason
            return rec
        rec["final_label"] = 1
        return rec

    fn = one_suction if modality == "suction" else one_jaw
    if workers <= 1:
        return [fn(c) for c in candidates]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, candidates))


def run_label_pipeline(scene: Scene, assets: dict[str, ObjectAsset],
                       modality: str, tool: str | None = None,
                       cfg: dict | None = None, variant: str = "default",
                       workers: int = 1):
    """Sample and label one scene end to end; returns the record list."""
    cfg = cfg or default_config()
    if tool is None:
        tool = cfg["tools"]["gripper" if modality == "jaw" else "cup"]
    ctx = SceneContext.build(
        scene, assets,
        samples_per_instance=int(cfg["sampling"]["surface_samples_per_instance"]))
    cands, _ = sample_scene_candidates(ctx, modality, tool, cfg)
    return evaluate_candidates(ctx, cands, modality, tool, cfg,
                               variant=variant, workers=workers)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class PassRateReport:
    collision_pass_rate: float | None
    seal_pass_rate: float | None
    dynamics_pass_rate: float | None
    counts: dict

    def to_dict(self) -> dict:
        return {"collision_pass_rate": self.collision_pass_rate,
                "seal_pass_rate": self.seal_pass_rate,
                "dynamics_pass_rate": self.dynamics_pass_rate,
                "counts": self.counts}


def compute_pass_rates(records) -> PassRateReport:
    """Staged pass rates: each denominator is the previous stage's passers.

    Suction: collision -> seal -> dynamics. Jaws have no seal stage; its
    rate is null and the dynamics denominator is the collision passers.
    Zero denominators yield null, never 0. Order-independent.
    """
    records = list(records)
    if not records:
        raise PipelineError("empty record list")
    total = len(records)
    c_pass = sum(1 for r in records if r["q_collision"] == 1)
    seal_applicable = [r for r in records if r["modality"] == "suction"]
    s_den = sum(1 for r in seal_applicable if r["q_collision"] == 1)
    s_pass = sum(1 for r in seal_applicable
                 if r["q_collision"] == 1 and r["q_seal"] == 1)
    d_den = sum(1 for r in records
                if r["q_collision"] == 1 and
                (r["modality"] != "suction" or r["q_seal"] == 1))
    d_pass = sum(1 for r in records if r["final_label"] == 1)
    return PassRateReport(
        collision_pass_rate=c_pass / total if total else None,
        seal_pass_rate=s_pass / s_den if (seal_applicable and s_den) else None,
        dynamics_pass_rate=d_pass / d_den if d_den else None,
        counts={"total": total, "collision_pass": c_pass,
                "seal_eligible": s_den, "seal_pass": s_pass,
                "dynamics_eligible": d_den, "dynamics_pass": d_pass})


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def records_to_ndjson(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                   for r in records)


def save_records(records, path) -> None:
    Path(path).write_text(records_to_ndjson(records))


def load_records(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()
            if line.strip()]


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

def run_ablation(scene_sets, modality: str, variants,
                 cfg: dict | None = None, tool: str | None = None,
                 workers: int = 1) -> dict:
    """Pass-rate comparison across variants on a fixed corpus.

    `scene_sets` is a list of (scene, assets). Candidates are sampled once
    per scene and reused verbatim for every variant, so rows differ only in
    the evaluated component; the shared base config hash is recorded as the
    fairness witness.
    """
    cfg = cfg or default_config()
    if tool is None:
        tool = cfg["tools"]["gripper" if modality == "jaw" else "cup"]
    variants = list(variants)
    for v in variants:
        if v not in VARIANTS:
            raise PipelineError(f"unknown variant {v!r}")
    prepared = []
    for scene, assets in scene_sets:
        ctx = SceneContext.build(
            scene, assets,
            samples_per_instance=int(
                cfg["sampling"]["surface_samples_per_instance"]))
        cands, _ = sample_scene_candidates(ctx, modality, tool, cfg)
        prepared.append((ctx, cands))
    rows = {}
    for variant in variants:
        records = []
        for ctx, cands in prepared:
            records.extend(evaluate_candidates(ctx, cands, modality, tool,
                                               cfg, variant=variant,
                                               workers=workers))
        report = compute_pass_rates(records)
        rows[variant] = {**report.to_dict(),
                         "config_hash": config_hash(cfg, variant)}
    return {"modality": modality, "tool": tool,
            "base_config_hash": config_hash(cfg), "variants": rows}


def ablation_table(result: dict) -> str:
    """Aligned text rendering of a run_ablation result."""
    def fmt(x):
        return "    -" if x is None else f"{100 * x:5.1f}"

    lines = [f"modality: {result['modality']}   tool: {result['tool']}   "
             f"base config: {result['base_config_hash']}",
             f"{'variant':<24s} {'collision%':>10s} {'seal%':>7s} "
             f"{'dynamics%':>10s} {'n':>6s}"]
    for name, row in result["variants"].items():
        lines.append(f"{name:<24s} {fmt(row['collision_pass_rate']):>10s} "
                     f"{fmt(row['seal_pass_rate']):>7s} "
                     f"{fmt(row['dynamics_pass_rate']):>10s} "
                     f"{row['counts']['total']:>6d}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dataset export
# ---------------------------------------------------------------------------

TOOL_VERSION = "0.1.0"

FIDELITY_NOTES = [
    "dynamics stage is a quasi-static closed-form proxy, not a simulated lift",
    "scene settling is a frozen-orientation vertical drop, not rigid-body dynamics",
    "gripper collision geometry is a box approximation unless user meshes are supplied",
]


def export_dataset(out_dir, scene_files=(), frame_dirs=(), records=None,
                   cfg: dict | None = None, seeds=()) -> dict:
    """Assemble scenes/, frames/, labels/ and manifest.json under out_dir.

    Everything except the manifest timestamp is a deterministic function of
    the inputs. Returns the manifest dict.
    """
    cfg = cfg or default_config()
    out_dir = Path(out_dir)
    for sub in ("scenes", "frames", "labels"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    n_frames = 0
    for f in scene_files:
        shutil.copy(f, out_dir / "scenes" / Path(f).name)
    for d in frame_dirs:
        for f in sorted(Path(d).iterdir()):
            shutil.copy(f, out_dir / "frames" / f.name)
            if f.suffix == ".json":
                n_frames += 1
    records = list(records or [])
    save_records(records, out_dir / "labels" / "labels.ndjson")
    manifest = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seeds": list(seeds),
        "counts": {"scenes": len(list(scene_files)), "frames": n_frames,
                   "labels": len(records)},
        "tool_version": TOOL_VERSION,
        "fidelity_notes": FIDELITY_NOTES,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")
    return manifest
