"""Command-line interface.

Subcommands cover the full dataset workflow: scene generation, depth
rendering, candidate sampling, staged labeling, ablation tables, the
corner-case corpus, dataset export and label statistics. Exit code 0 on
success, 2 on validation errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import pipeline as pl
from .camera import (CameraIntrinsics, ViewpointConfig, render_depth,
                     sample_viewpoint, save_frame)
from .context import SceneContext
from .corners import gen_corner_corpus
from .geometry import MeshError
from .sampling import GRIPPERS, SUCTION_CUPS
from .scenes import (SceneDistributionConfig, SceneSchemaError,
                     default_asset_pool, load_asset_manifest, load_scene,
                     sample_scene_plan, save_asset_manifest, save_scene,
                     settle_scene)


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load_config(path):
    try:
        return pl.load_config(path)
    except (json.JSONDecodeError, pl.PipelineError, OSError) as exc:
        _fail(str(exc))


def _load_scene_and_assets(scene_path, assets_path=None):
    scene_path = Path(scene_path)
    try:
        scene = load_scene(scene_path)
    except (SceneSchemaError, OSError) as exc:
        _fail(str(exc))
    if assets_path is None:
        sibling = scene_path.parent / "assets.json"
        assets_path = sibling if sibling.exists() else None
    try:
        assets = (load_asset_manifest(assets_path) if assets_path
                  else default_asset_pool())
    except (SceneSchemaError, MeshError, json.JSONDecodeError, OSError) as exc:
        _fail(str(exc))
    missing = {o.asset_id for o in scene.objects} - set(assets)
    if missing:
        _fail(f"scene references unknown assets: {sorted(missing)}")
    return scene, assets


@click.group()
def main():
    """Grasp-candidate generation and auto-labeling for cluttered scenes."""


@main.command("default-config")
@click.option("--out", default="default-config.json", show_default=True,
              type=click.Path(dir_okay=False))
def default_config_cmd(out):
    """Write the full default configuration to a JSON file."""
    Path(out).write_text(json.dumps(pl.default_config(), indent=2,
                                    sort_keys=True) + "\n")
    click.echo(out)


@main.command("gen-scene")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None, help="JSON config file.")
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True)
def gen_scene(config_path, seed, out_dir):
    """Sample and settle one scene; writes scene.json plus the asset
    manifest and OBJ meshes."""
    cfg = _load_config(config_path)
    sc = cfg["scene"]
    dist = SceneDistributionConfig(
        object_count_range=tuple(sc["object_count_range"]),
        drop_region_min=tuple(sc["drop_region_min"]),
        drop_region_max=tuple(sc["drop_region_max"]),
        scale_range=tuple(sc["scale_range"]),
        friction_range=tuple(sc["friction_range"]))
    if cfg.get("assets"):
        try:
            assets = load_asset_manifest(cfg["assets"])
        except (SceneSchemaError, MeshError, OSError) as exc:
            _fail(str(exc))
    else:
        assets = default_asset_pool()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = sample_scene_plan(dist, assets, seed=seed)
    scene = settle_scene(plan, assets)
    save_scene(scene, out / "scene.json")
    save_asset_manifest(assets, out)
    click.echo(f"{out / 'scene.json'}: {len(scene.objects)} objects")


@main.command("render")
@click.option("--scene", "scene_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--frames", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=None, help="Default: frames/ next to the scene file.")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
def render(scene_path, frames, seed, out_dir, config_path):
    """Render depth + instance-id frames from random viewpoints."""
    if frames < 1:
        _fail("--frames must be >= 1")
    cfg = _load_config(config_path)
    cam = cfg["camera"]
    scene, assets = _load_scene_and_assets(scene_path)
    ctx = SceneContext.build(scene, assets)
    intr = CameraIntrinsics(fx=cam["fx"], fy=cam["fy"], cx=cam["cx"],
                            cy=cam["cy"], width=int(cam["width"]),
                            height=int(cam["height"]))
    vp = ViewpointConfig(rho_range=tuple(cam["rho_range"]),
                         phi_range=tuple(cam["phi_range"]),
                         theta_range=tuple(cam["theta_range"]))
    out = Path(out_dir) if out_dir else Path(scene_path).parent / "frames"
    for k in range(frames):
        pose = sample_viewpoint(vp, seed * 10007 + k)
        frame = render_depth(ctx.accel, pose, intr,
                             noise_sigma_mm=float(cam["depth_noise_sigma_mm"]),
                             noise_seed=seed * 10007 + k)
        save_frame(frame, out, f"frame_{k:04d}")
    click.echo(f"{out}: {frames} frames")


@main.command("sample")
@click.option("--scene", "scene_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--modality", type=click.Choice(["jaw", "suction"]),
              required=True)
@click.option("--gripper", "tool", default=None,
              help="Gripper or cup name; defaults from config.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Default: candidates.ndjson next to scene.")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
def sample(scene_path, modality, tool, out_path, config_path):
    """Sample FPS + Darboux grasp candidates for every object."""
    cfg = _load_config(config_path)
    if tool is None:
        tool = cfg["tools"]["gripper" if modality == "jaw" else "cup"]
    registry = GRIPPERS if modality == "jaw" else SUCTION_CUPS
    if tool not in registry:
        _fail(f"unknown {'gripper' if modality == 'jaw' else 'cup'} "
              f"{tool!r}; choose from {sorted(registry)}")
    scene, assets = _load_scene_and_assets(scene_path)
    ctx = SceneContext.build(
        scene, assets,
        samples_per_instance=int(cfg["sampling"]["surface_samples_per_instance"]))
    cands, skipped = pl.sample_scene_candidates(ctx, modality, tool, cfg)
    out = Path(out_path) if out_path else Path(scene_path).parent / "candidates.ndjson"
    assets_path = Path(scene_path).parent / "assets.json"
    pl.save_candidates(cands, out, scene_path=scene_path,
                       assets_path=assets_path if assets_path.exists() else None,
                       modality=modality, tool=tool)
    click.echo(f"{out}: {len(cands)} candidates ({skipped} points skipped)")


@main.command("evaluate")
@click.option("--candidates", "cand_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--variant", type=click.Choice(list(pl.VARIANTS)),
              default="default", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Default: labels.ndjson next to candidates.")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
@click.option("--dump-ply", "ply_path", type=click.Path(dir_okay=False),
              default=None, help="Debug surface-sample point cloud.")
def evaluate(cand_path, variant, workers, out_path, config_path, ply_path):
    """Run the staged labeling on a candidate file."""
    cfg = _load_config(config_path)
    try:
        header, cands = pl.load_candidates(cand_path)
    except (pl.PipelineError, json.JSONDecodeError, KeyError) as exc:
        _fail(str(exc))
    modality, tool = header["modality"], header["tool"]
    if modality not in ("jaw", "suction"):
        _fail(f"candidate header has invalid modality {modality!r}")
    scene, assets = _load_scene_and_assets(
        header["scene"],
        header["assets"] if header.get("assets") not in (None, "None") else None)
    ctx = SceneContext.build(
        scene, assets,
        samples_per_instance=int(cfg["sampling"]["surface_samples_per_instance"]))
    try:
        records = pl.evaluate_candidates(ctx, cands, modality, tool, cfg,
                                         variant=variant, workers=workers)
    except pl.PipelineError as exc:
        _fail(str(exc))
    out = Path(out_path) if out_path else Path(cand_path).parent / "labels.ndjson"
    pl.save_records(records, out)
    if ply_path:
        _write_ply(ply_path, ctx.surface_points, ctx.surface_ids)
    n_pass = sum(r["final_label"] for r in records)
    click.echo(f"{out}: {len(records)} labels, {n_pass} positive")


def _write_ply(path, points, ids):
    palette = np.array([[228, 26, 28], [55, 126, 184], [77, 175, 74],
                        [152, 78, 163], [255, 127, 0], [255, 255, 51],
                        [166, 86, 40], [247, 129, 191]], dtype=np.int64)
    cols = palette[np.asarray(ids) % len(palette)]
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n"
                f"element vertex {len(points)}\n"
                "property float x\nproperty float y\nproperty float z\n"
                "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                "end_header\n")
        for p, c in zip(points, cols):
            f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}\n")


@main.command("ablate")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True,
              file_okay=False), required=True,
              help="Directory of case dirs, each with scene.json + assets.json.")
@click.option("--variants", required=True,
              help="Comma-separated variant names.")
@click.option("--modality", type=click.Choice(["jaw", "suction"]),
              default="suction", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Also write the JSON result here.")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
def ablate(corpus_dir, variants, modality, workers, out_path, config_path):
    """Pass-rate comparison across variants on a scene corpus."""
    cfg = _load_config(config_path)
    names = [v.strip() for v in variants.split(",") if v.strip()]
    if not names:
        _fail("--variants must name at least one variant")
    for v in names:
        if v not in pl.VARIANTS:
            _fail(f"unknown variant {v!r}; choose from {list(pl.VARIANTS)}")
    corpus = Path(corpus_dir)
    scene_files = sorted(corpus.glob("*/scene.json"))
    if (corpus / "scene.json").exists():
        scene_files.insert(0, corpus / "scene.json")
    if not scene_files:
        _fail(f"no scene.json found under {corpus}")
    scene_sets = [_load_scene_and_assets(f) for f in scene_files]
    try:
        result = pl.run_ablation(scene_sets, modality, names, cfg=cfg,
                                 workers=workers)
    except pl.PipelineError as exc:
        _fail(str(exc))
    click.echo(pl.ablation_table(result), nl=False)
    if out_path:
        Path(out_path).write_text(json.dumps(result, indent=2,
                                             sort_keys=True) + "\n")


@main.command("corner-corpus")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True)
def corner_corpus(out_dir):
    """Generate the six seal-model corner-case fixtures."""
    dirs = gen_corner_corpus(out_dir)
    for d in dirs:
        click.echo(str(d))


@main.command("export")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
@click.option("--scene", "scene_paths", type=click.Path(exists=True,
              dir_okay=False), multiple=True)
@click.option("--frames", "frame_dirs", type=click.Path(exists=True,
              file_okay=False), multiple=True)
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None)
def export(out_dir, labels_path, scene_paths, frame_dirs, config_path):
    """Assemble a dataset directory with manifest."""
    cfg = _load_config(config_path)
    records = pl.load_records(labels_path) if labels_path else []
    seeds = sorted({r["scene_seed"] for r in records})
    manifest = pl.export_dataset(out_dir, scene_files=scene_paths,
                                 frame_dirs=frame_dirs, records=records,
                                 cfg=cfg, seeds=seeds)
    click.echo(json.dumps(manifest["counts"]))


@main.command("stats")
@click.option("--labels", "labels_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
def stats(labels_path):
    """Pass-rate report for a label NDJSON file."""
    records = pl.load_records(labels_path)
    if not records:
        _fail(f"{labels_path}: no records")
    report = pl.compute_pass_rates(records)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
