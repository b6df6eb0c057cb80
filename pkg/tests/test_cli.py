"""End-to-end CLI tests: tiny corpus, tiny training run, eval validation,
metrics outputs, selfcheck, and config handling."""

import csv
import json
import os

import pytest

from copolicy.cli import main
from copolicy.config import ConfigError, config_hash, dump_toml, load_config

TINY_MODEL = [
    "--set", "model.n_layers=2", "--set", "model.n_heads=2",
    "--set", "model.d_model=32", "--set", "model.d_ff=64",
    "--set", "model.diffusion_steps=10",
]


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demos")
    rc = main(["gen-demos", "--out", str(out), "--n-per-mode", "1", "--seed", "5"])
    assert rc == 0
    return out


def test_gen_demos_outputs(demo_dir):
    assert (demo_dir / "demos.ndjson").exists()
    assert (demo_dir / "resolved.toml").exists()
    for split in ("train", "holdout", "unseen"):
        assert (demo_dir / f"maps_{split}.json").exists()
    header = json.loads((demo_dir / "demos.ndjson").read_text().splitlines()[0])
    assert header["generator_seed"] == 5


def test_train_writes_checkpoint_and_log(demo_dir, tmp_path):
    out = tmp_path / "train"
    rc = main(["train", "--dataset", str(demo_dir / "demos.ndjson"),
               "--variant", "codp", "--steps", "10", "--out", str(out)] + TINY_MODEL)
    assert rc == 0
    assert (out / "checkpoint.ckpt").exists()
    with open(out / "train_log.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 10


def test_eval_missing_checkpoint_is_validation_error(tmp_path, capsys):
    rc = main(["eval", "--mode", "coplan", "--checkpoint", str(tmp_path / "nope.ckpt"),
               "--out", str(tmp_path / "eval")])
    assert rc == 1
    assert "nope.ckpt" in capsys.readouterr().err


def test_eval_runs_on_tiny_checkpoint(demo_dir, tmp_path):
    train_out = tmp_path / "t"
    rc = main(["train", "--dataset", str(demo_dir / "demos.ndjson"),
               "--variant", "bc", "--steps", "5", "--out", str(train_out)] + TINY_MODEL)
    assert rc == 0
    eval_out = tmp_path / "e"
    rc = main(["eval", "--mode", "coplan",
               "--checkpoint", str(train_out / "checkpoint.ckpt"),
               "--out", str(eval_out), "--splits", "holdout",
               "--set", "runtime.timeout_ticks=48",
               "--set", "runtime.seeds_per_map=1"])
    assert rc == 0
    with open(eval_out / "episodes.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 6  # six holdout maps x one seed
    assert (eval_out / "summary.csv").exists()
    assert (eval_out / "summary.txt").exists()


def test_eval_scripted_partners(demo_dir, tmp_path):
    train_out = tmp_path / "t"
    rc = main(["train", "--dataset", str(demo_dir / "demos.ndjson"),
               "--variant", "bc", "--steps", "5", "--out", str(train_out)] + TINY_MODEL)
    assert rc == 0
    eval_out = tmp_path / "e"
    rc = main(["eval", "--mode", "scripted",
               "--checkpoint", str(train_out / "checkpoint.ckpt"),
               "--out", str(eval_out), "--partners", "stubborn_above,compliant",
               "--base-split", "holdout",
               "--set", "runtime.timeout_ticks=30",
               "--set", "runtime.seeds_per_map=1"])
    assert rc == 0
    with open(eval_out / "episodes.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 12  # 6 holdout maps x 2 partners
    assert {r["split"] for r in rows} == {"stubborn_above", "compliant"}


def test_metrics_tables_from_results(demo_dir, tmp_path):
    train_out = tmp_path / "t2"
    main(["train", "--dataset", str(demo_dir / "demos.ndjson"),
          "--variant", "bc", "--steps", "5", "--out", str(train_out)] + TINY_MODEL)
    eval_out = tmp_path / "e2"
    main(["eval", "--mode", "coplan",
          "--checkpoint", str(train_out / "checkpoint.ckpt"),
          "--out", str(eval_out), "--splits", "holdout",
          "--set", "runtime.timeout_ticks=30", "--set", "runtime.seeds_per_map=1"])
    tables_out = tmp_path / "m2"
    rc = main(["metrics", "tables", "--results", str(eval_out / "episodes.csv"),
               "--out", str(tables_out)])
    assert rc == 0
    assert "bc" in (tables_out / "summary.txt").read_text()


def test_metrics_force_bins(demo_dir, tmp_path):
    out = tmp_path / "m"
    rc = main(["metrics", "force-bins", "--episodes", str(demo_dir / "demos.ndjson"),
               "--out", str(out)])
    assert rc == 0
    fractions = json.loads((out / "force_bins.json").read_text())["fractions"]
    assert abs(sum(fractions.values()) - 1.0) < 1e-9
    assert (out / "force_bins.png").exists()


def test_metrics_heatmap(demo_dir, tmp_path):
    out = tmp_path / "h"
    rc = main(["metrics", "heatmap", "--episodes", str(demo_dir / "demos.ndjson"),
               "--out", str(out)])
    assert rc == 0
    assert (out / "visitation.png").exists()
    assert (out / "visitation.csv").exists()


def test_selfcheck_passes(capsys):
    rc = main(["selfcheck"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.count("PASS") == 5
    assert "FAIL" not in out


def test_unknown_subcommand_exits_one():
    assert main(["frobnicate"]) == 1


def test_unknown_config_key_rejected(tmp_path, capsys):
    rc = main(["gen-demos", "--out", str(tmp_path), "--set", "physics.warp_drive=1"])
    assert rc == 1
    assert "warp_drive" in capsys.readouterr().err


def test_config_file_round_trip(tmp_path):
    cfg = load_config(None, ["train.steps=123", 'train.schedule_kind="linear"'])
    path = tmp_path / "cfg.toml"
    path.write_text(dump_toml(cfg))
    again = load_config(path)
    assert again == cfg
    assert again["train"]["steps"] == 123
    assert again["train"]["schedule_kind"] == "linear"
    assert config_hash(again) == config_hash(cfg)


def test_config_rejects_wrong_type():
    with pytest.raises(ConfigError, match="train.steps"):
        load_config(None, ['train.steps="ten"'])
