import os

import numpy as np
import pytest

from leaksynth.config import ConfigError, load_config
from leaksynth.pipeline import read_manifest, run_pipeline, validate_config
from leaksynth.velocity_model import load_map, save_map

from helpers import tree_digest


def demo_cfg(demo_dir, tmp_path, **overrides):
    overrides.setdefault("output_dir", str(tmp_path / "out"))
    return load_config(str(demo_dir / "config.ini"), overrides)


def test_demo_config_validates(demo_dir, tmp_path):
    assert validate_config(demo_cfg(demo_dir, tmp_path)) == []


def test_cfl_violation_is_reported_with_dt(demo_dir, tmp_path):
    errors = validate_config(demo_cfg(demo_dir, tmp_path, dt="0.01"))
    assert len(errors) == 1
    assert errors[0].startswith("CflViolation") and "largest stable dt" in errors[0]


def test_all_errors_are_collected(demo_dir, tmp_path):
    errors = validate_config(
        demo_cfg(demo_dir, tmp_path, n_samples="0", target_shallow_cdf="missing.csv", dt="0.01")
    )
    assert any("n_samples" in e for e in errors)
    assert any("target_shallow_cdf" in e for e in errors)
    assert any("CflViolation" in e for e in errors)


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[run]\nn_samples = 2\nbogus = 1\n[weird]\nx = 1\n")
    with pytest.raises(ConfigError) as info:
        load_config(str(path))
    assert len(info.value.errors) == 2
    with pytest.raises(ConfigError):
        load_config(None, {"nt": "many"})


def test_config_paths_resolve_against_file(demo_dir):
    cfg = load_config(str(demo_dir / "config.ini"))
    assert cfg.baseline == str(demo_dir / "baseline.gfvm")
    assert cfg.n_samples == 4 and cfg.th_s == 50.0 and cfg.th_l == "max_over_3"


def test_single_sample_run(demo_dir, tmp_path):
    cfg = demo_cfg(demo_dir, tmp_path, n_samples="1")
    records = run_pipeline(cfg)
    assert [r.status for r in records] == ["ok"]
    files = sorted(tree_digest(cfg.output_dir))
    assert files == ["gathers/000000.gfsg", "manifest.csv", "vmaps/000000.gfvm"]
    rows = read_manifest(os.path.join(cfg.output_dir, "manifest.csv"))
    assert rows[0]["vmap_file"] == "vmaps/000000.gfvm"
    assert rows[0]["seed"] == "0" and rows[0]["source_map"] == "cond_000.gfvm"
    text = open(os.path.join(cfg.output_dir, "manifest.csv")).read()
    assert "# th_s = 50.0" in text and "output_dir" not in text


def test_output_has_shallow_leakage(demo_dir, tmp_path):
    cfg = demo_cfg(demo_dir, tmp_path, n_samples="2")
    run_pipeline(cfg)
    base = load_map(cfg.baseline)
    for sid in ("000000", "000001"):
        vmap = load_map(os.path.join(cfg.output_dir, "vmaps", f"{sid}.gfvm"))
        drop = base.values.astype(float) - vmap.values
        assert (drop[: cfg.shallow_end] > cfg.th_s).any()
        assert not (drop[cfg.intermediate_end:] != 0).any()


def test_runs_are_reproducible(demo_dir, tmp_path):
    a = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "a"))
    b = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "b"))
    run_pipeline(a)
    run_pipeline(b)
    assert tree_digest(a.output_dir) == tree_digest(b.output_dir)


def test_seed_changes_output(demo_dir, tmp_path):
    a = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "a"), n_samples="1")
    b = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "b"), n_samples="1", master_seed="5")
    run_pipeline(a)
    run_pipeline(b)
    da, db = tree_digest(a.output_dir), tree_digest(b.output_dir)
    assert da["vmaps/000000.gfvm"] != db["vmaps/000000.gfvm"]


def test_empty_leakage_is_skipped(demo_dir, tmp_path):
    cond = tmp_path / "conds"
    cond.mkdir()
    base = load_map(str(demo_dir / "baseline.gfvm"))
    save_map(base, cond / "a_flat.gfvm")
    save_map(load_map(str(demo_dir / "conditions" / "cond_000.gfvm")), cond / "b_leak.gfvm")
    cfg = demo_cfg(demo_dir, tmp_path, condition_dir=str(cond), n_samples="3")
    records = run_pipeline(cfg)
    assert [r.status for r in records] == ["skipped:EmptyLeakage", "ok", "skipped:EmptyLeakage"]
    assert sorted(tree_digest(cfg.output_dir)) == [
        "gathers/000001.gfsg", "manifest.csv", "vmaps/000001.gfvm",
    ]


def test_out_of_grid_is_skipped(demo_dir, tmp_path):
    # a plume spanning most of the column cannot be lifted to row 2
    cond = tmp_path / "conds"
    cond.mkdir()
    base = load_map(str(demo_dir / "baseline.gfvm"))
    vals = base.values.astype(float).copy()
    vals[3:60, 20:40] -= 400.0
    from leaksynth.velocity_model import VelocityMap

    save_map(VelocityMap(vals, base.dx), cond / "tall.gfvm")
    cfg = demo_cfg(demo_dir, tmp_path, condition_dir=str(cond), n_samples="3",
                   shallow_end="2", warp_max_shift="0")
    statuses = {r.status for r in run_pipeline(cfg)}
    assert statuses == {"skipped:OutOfGrid"}


def test_imported_maps_are_used_directly(demo_dir, tmp_path):
    cfg = demo_cfg(demo_dir, tmp_path, external_dir=str(demo_dir / "conditions"), n_samples="10")
    records = run_pipeline(cfg)
    assert len(records) == 3
    assert [r.source_map for r in records] == ["cond_000.gfvm", "cond_001.gfvm", "cond_002.gfvm"]


def test_worker_count_does_not_change_output(demo_dir, tmp_path):
    a = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "a"), n_samples="6")
    b = demo_cfg(demo_dir, tmp_path, output_dir=str(tmp_path / "b"), n_samples="6")
    run_pipeline(a, workers=1)
    run_pipeline(b, workers=3)
    assert tree_digest(a.output_dir) == tree_digest(b.output_dir)


def test_multi_shot_names(demo_dir, tmp_path):
    cfg = demo_cfg(demo_dir, tmp_path, n_samples="1", source_cols="10,50")
    run_pipeline(cfg)
    assert sorted(tree_digest(cfg.output_dir)) == [
        "gathers/000000_s0.gfsg", "gathers/000000_s1.gfsg", "manifest.csv", "vmaps/000000.gfvm",
    ]


def test_invalid_config_raises(demo_dir, tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(demo_cfg(demo_dir, tmp_path, baseline=str(tmp_path / "nope.gfvm")))
