import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspgen.context import SceneContext
from graspgen.geometry import Pose
from graspgen.pipeline import (PipelineError, ablation_table,
                               candidate_from_dict, candidate_to_dict,
                               compute_pass_rates, config_hash, default_config,
                               evaluate_candidates, export_dataset,
                               load_candidates, load_config, load_records,
                               records_to_ndjson, run_ablation,
                               run_label_pipeline, sample_scene_candidates,
                               save_candidates, save_records)
from graspgen.procedural import box_mesh
from graspgen.sampling import SuctionCandidate
from graspgen.scenes import (ObjectAsset, Scene, SceneDistributionConfig,
                             SceneObject, default_asset_pool,
                             sample_scene_plan, settle_scene)

TOP_DOWN = np.array([[0.0, -1.0, 0.0],
                     [0.0, 0.0, 1.0],
                     [-1.0, 0.0, 0.0]])


def suction_record(q_col, q_seal, q_dyn):
    final = int(q_col == 1 and q_seal == 1 and q_dyn == 1)
    return {"modality": "suction", "q_collision": q_col, "q_seal": q_seal,
            "q_dynamics": q_dyn, "final_label": final}


def test_pass_rate_arithmetic():
    records = (
        [suction_record(0, None, None)] * 4 +
        [suction_record(1, 0, None)] * 3 +
        [suction_record(1, 1, 0)] * 1 +
        [suction_record(1, 1, 1)] * 2)
    rep = compute_pass_rates(records)
    assert rep.collision_pass_rate == pytest.approx(6 / 10)
    assert rep.seal_pass_rate == pytest.approx(3 / 6)
    assert rep.dynamics_pass_rate == pytest.approx(2 / 3)
    assert rep.counts == {"total": 10, "collision_pass": 6, "seal_eligible": 6,
                          "seal_pass": 3, "dynamics_eligible": 3,
                          "dynamics_pass": 2}


def test_pass_rate_zero_denominators_are_null():
    rep = compute_pass_rates([suction_record(0, None, None)] * 5)
    assert rep.collision_pass_rate == 0.0
    assert rep.seal_pass_rate is None
    assert rep.dynamics_pass_rate is None
    # collision passes but every seal fails: dynamics never evaluated
    rep = compute_pass_rates([suction_record(1, 0, None)] * 5)
    assert rep.seal_pass_rate == 0.0
    assert rep.dynamics_pass_rate is None


def test_pass_rate_jaw_has_no_seal_stage():
    records = [{"modality": "jaw", "q_collision": 1, "q_seal": None,
                "q_dynamics": 1, "final_label": 1},
               {"modality": "jaw", "q_collision": 1, "q_seal": None,
                "q_dynamics": 0, "final_label": 0}]
    rep = compute_pass_rates(records)
    assert rep.seal_pass_rate is None
    assert rep.dynamics_pass_rate == pytest.approx(0.5)


def test_pass_rate_empty_raises():
    with pytest.raises(PipelineError):
        compute_pass_rates([])


@settings(max_examples=30, deadline=None)
@given(st.permutations(
    [suction_record(0, None, None)] * 3 +
    [suction_record(1, 0, None)] * 2 +
    [suction_record(1, 1, 0)] * 2 +
    [suction_record(1, 1, 1)] * 4))
def test_pass_rates_order_invariant(shuffled):
    rep = compute_pass_rates(shuffled)
    assert rep.collision_pass_rate == pytest.approx(8 / 11)
    assert rep.seal_pass_rate == pytest.approx(6 / 8)
    assert rep.dynamics_pass_rate == pytest.approx(4 / 6)


@pytest.fixture(scope="module")
def slab_ctx():
    mesh = box_mesh((0.1, 0.1, 0.04), center=(0, 0, 0.02))
    assets = {"slab": ObjectAsset("slab", mesh)}
    scene = Scene(objects=[SceneObject(0, "slab", Pose.identity(),
                                       1.0, 0.5, 0.5)], seed=0)
    return SceneContext.build(scene, assets)


def suction_at(point):
    return SuctionCandidate(Pose.from_matrix(TOP_DOWN, point), "cup_1.5cm", 0)


def test_evaluate_short_circuit_nulls(slab_ctx):
    cands = [
        suction_at([0, 0, 0.04]),       # passes every stage
        suction_at([0, 0, 0.02]),       # rim buried: collision
        suction_at([0.048, 0, 0.04]),   # off the edge: seal ray_miss
    ]
    recs = evaluate_candidates(slab_ctx, cands, "suction", "cup_1.5cm")
    assert [r["final_label"] for r in recs] == [1, 0, 0]
    assert recs[0]["failure_reason"] == "none"
    assert (recs[0]["q_collision"], recs[0]["q_seal"],
            recs[0]["q_dynamics"]) == (1, 1, 1)
    assert recs[1]["failure_reason"] == "collision"
    assert recs[1]["q_seal"] is None and recs[1]["q_dynamics"] is None
    assert recs[2]["failure_reason"] == "ray_miss"
    assert recs[2]["q_collision"] == 1 and recs[2]["q_dynamics"] is None


def test_evaluate_variant_modality_mismatch(slab_ctx):
    with pytest.raises(PipelineError):
        evaluate_candidates(slab_ctx, [], "jaw", "fetch", variant="dexnet8_seal")
    with pytest.raises(PipelineError):
        evaluate_candidates(slab_ctx, [], "suction", "cup_1.5cm",
                            variant="simplified_gripper")
    with pytest.raises(PipelineError):
        evaluate_candidates(slab_ctx, [], "suction", "cup_1.5cm",
                            variant="nope")


@pytest.fixture(scope="module")
def settled():
    pool = default_asset_pool()
    assets = {k: pool[k] for k in ("box_small", "box_flat", "cylinder")}
    cfg = SceneDistributionConfig(object_count_range=(4, 4))
    scene = settle_scene(sample_scene_plan(cfg, assets, seed=21), assets)
    return scene, assets


def test_workers_do_not_change_output(settled):
    scene, assets = settled
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 20
    ctx = SceneContext.build(scene, assets)
    cands, _ = sample_scene_candidates(ctx, "suction", "cup_1.5cm", cfg)
    assert len(cands) > 0
    serial = evaluate_candidates(ctx, cands, "suction", "cup_1.5cm", cfg,
                                 workers=1)
    parallel = evaluate_candidates(ctx, cands, "suction", "cup_1.5cm", cfg,
                                   workers=8)
    assert records_to_ndjson(serial) == records_to_ndjson(parallel)


def test_sample_counts(settled):
    scene, assets = settled
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 10
    ctx = SceneContext.build(scene, assets)
    suction, skipped_s = sample_scene_candidates(ctx, "suction", "cup_1.5cm", cfg)
    assert len(suction) + skipped_s == 10 * len(scene.objects)
    jaw, skipped_j = sample_scene_candidates(ctx, "jaw", "fetch", cfg)
    n_frames = 10 * len(scene.objects) - skipped_j
    assert len(jaw) == n_frames * cfg["sampling"]["n_roll"] * \
        cfg["sampling"]["n_standoff"]


def test_candidate_roundtrip(tmp_path, settled):
    scene, assets = settled
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 5
    ctx = SceneContext.build(scene, assets)
    for modality, tool in (("suction", "cup_1.5cm"), ("jaw", "fetch")):
        cands, _ = sample_scene_candidates(ctx, modality, tool, cfg)
        path = tmp_path / f"{modality}.ndjson"
        save_candidates(cands, path, scene_path="s.json", assets_path="a.json",
                        modality=modality, tool=tool)
        header, loaded = load_candidates(path)
        assert header["modality"] == modality and header["tool"] == tool
        assert len(loaded) == len(cands)
        for a, b in zip(cands, loaded):
            da, db = candidate_to_dict(a), candidate_to_dict(b)
            # re-normalization on load may shift the quaternion by 1 ulp
            assert np.allclose(da.pop("pose")["q"], db.pop("pose")["q"],
                               atol=1e-15)
            assert np.allclose(a.pose.t, b.pose.t)
            assert da == db


def test_candidate_dict_unknown_kind():
    with pytest.raises(PipelineError):
        candidate_from_dict({"kind": "magnet", "pose": {"q": [1, 0, 0, 0],
                                                        "t": [0, 0, 0]}})


def test_records_roundtrip(tmp_path, slab_ctx):
    recs = evaluate_candidates(slab_ctx, [suction_at([0, 0, 0.04])],
                               "suction", "cup_1.5cm")
    path = tmp_path / "r.ndjson"
    save_records(recs, path)
    assert load_records(path) == recs


def test_config_hash_and_merge(tmp_path):
    cfg = default_config()
    assert config_hash(cfg) == config_hash(default_config())
    assert config_hash(cfg) != config_hash(cfg, "dexnet8_seal")
    assert config_hash(cfg, "default") != config_hash(cfg, "dexnet8_seal")
    over = tmp_path / "over.json"
    over.write_text(json.dumps({"sampling": {"fps_points": 7}}))
    merged = load_config(over)
    assert merged["sampling"]["fps_points"] == 7
    assert merged["sampling"]["n_roll"] == cfg["sampling"]["n_roll"]
    assert config_hash(merged) != config_hash(cfg)
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(PipelineError):
        load_config(bad)


def test_run_label_pipeline_smoke(settled):
    scene, assets = settled
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 8
    recs = run_label_pipeline(scene, assets, "suction", cfg=cfg, workers=4)
    assert len(recs) > 0
    for r in recs:
        assert r["final_label"] in (0, 1)
        assert r["modality"] == "suction"
        assert r["config_hash"] == config_hash(cfg, "default")


def test_ablation_shares_candidates_and_base_hash(settled):
    scene, assets = settled
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 10
    result = run_ablation([(scene, assets)], "suction",
                          ["default", "dexnet8_seal",
                           "single_object_dynamics"], cfg=cfg, workers=4)
    rows = result["variants"]
    totals = {row["counts"]["total"] for row in rows.values()}
    assert len(totals) == 1  # identical candidate sets across variants
    assert result["base_config_hash"] == config_hash(cfg)
    hashes = {row["config_hash"] for row in rows.values()}
    assert len(hashes) == 3
    table = ablation_table(result)
    for name in rows:
        assert name in table


def test_export_dataset_manifest(tmp_path, settled):
    scene, assets = settled
    from graspgen.scenes import save_scene
    sp = tmp_path / "scene_0021.json"
    save_scene(scene, sp)
    cfg = default_config()
    cfg["sampling"]["fps_points"] = 5
    recs = run_label_pipeline(scene, assets, "suction", cfg=cfg)
    out = tmp_path / "dataset"
    man = export_dataset(out, scene_files=[sp], records=recs, cfg=cfg,
                         seeds=[21])
    assert man["counts"] == {"scenes": 1, "frames": 0, "labels": len(recs)}
    assert man["config_hash"] == config_hash(cfg)
    assert (out / "scenes" / "scene_0021.json").exists()
    assert load_records(out / "labels" / "labels.ndjson") == recs
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["tool_version"] == man["tool_version"]
    # re-export differs only in the timestamp
    man2 = export_dataset(tmp_path / "dataset2", scene_files=[sp],
                          records=recs, cfg=cfg, seeds=[21])
    man.pop("timestamp")
    man2.pop("timestamp")
    assert man == man2
