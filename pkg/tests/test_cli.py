import csv
import json
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from clmn.cli import run
from clmn.datasets import write_target
from clmn.trainer import TrainConfig, fit, read_epoch_csv, save_model

from conftest import make_world

SMALL = """# tiny settings shared by the CLI tests
lstm_hidden = 4
cnn_filters = 4
cnn_width = 3
max_paragraphs = 4
max_tokens = 12
epochs = 2
pretrain_epochs = 1
batch_size = 8
lr = 0.01
"""


def files(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert run(["synth-data", "--seed", "7", "--out", str(d), "--source-per-class", "4",
                "--target-per-class", "5", "--emb-dim", "6"]) == 0
    return d


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def test_synth_data_deterministic(data_dir, tmp_path):
    assert run(["synth-data", "--seed", "7", "--out", str(tmp_path), "--source-per-class", "4",
                "--target-per-class", "5", "--emb-dim", "6"]) == 0
    a, b = files(data_dir), files(tmp_path)
    assert a == b
    assert {"source_bodies.csv", "source_stances.csv", "target.csv", "embeddings.vec", "config.resolved"} <= set(a)


def test_train_identity_and_outputs(data_dir, small_cfg, tmp_path):
    out = tmp_path / "t"
    assert run(["train", "--config", small_cfg, "--data", str(data_dir), "--out", str(out),
                "--mode", "clmn", "--alpha", "0.7"]) == 0
    rows = read_epoch_csv(out / "epochs.csv")
    assert rows
    for r in rows:
        assert abs(r["l_total"] - (0.3 * r["l_ca"] + 0.7 * r["l_csa"])) < 1e-9
    for name in ("metrics.json", "dev_metrics.json", "dev_losses.csv", "checkpoint/manifest.json"):
        assert (out / name).exists(), name


def test_train_deterministic_and_replayable(data_dir, small_cfg, tmp_path):
    args = ["train", "--config", small_cfg, "--data", str(data_dir), "--seed", "3", "--mode", "clmn_pretrained"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    snap = tmp_path / "a" / "config.resolved"
    assert snap.read_text().startswith("command=train\n")
    assert run(["train", "--config", str(snap), "--out", str(tmp_path / "c")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "c")


def test_all_folds(data_dir, small_cfg, tmp_path):
    assert run(["train", "--config", small_cfg, "--data", str(data_dir), "--out", str(tmp_path),
                "--mode", "target_only", "--all-folds", "--epochs", "1"]) == 0
    cv = json.loads((tmp_path / "cv_metrics.json").read_text())
    assert len(cv["folds"]) == 5 and all((tmp_path / f"fold_{k}" / "epochs.csv").exists() for k in range(5))
    assert sum(f["n_examples"] for f in cv["folds"]) == 20


def test_pretrain_then_train_from_init(data_dir, small_cfg, tmp_path):
    assert run(["pretrain", "--config", small_cfg, "--data", str(data_dir), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "pretrain_epochs.csv").exists()
    assert run(["train", "--config", small_cfg, "--data", str(data_dir), "--out", str(tmp_path / "t"),
                "--mode", "clmn_pretrained", "--init", str(tmp_path / "p" / "checkpoint")]) == 0
    assert not (tmp_path / "t" / "pretrain_epochs.csv").exists()


def test_evaluate_and_rank_evidence(data_dir, small_cfg, tmp_path):
    assert run(["train", "--config", small_cfg, "--data", str(data_dir), "--out", str(tmp_path / "t")]) == 0
    ck = str(tmp_path / "t" / "checkpoint")
    for cmd in ("evaluate", "rank-evidence"):
        for k in ("a", "b"):
            assert run([cmd, "--checkpoint", ck, "--data", str(data_dir), "--out", str(tmp_path / cmd / k)]) == 0
        assert files(tmp_path / cmd / "a") == files(tmp_path / cmd / "b")
    metrics = json.loads((tmp_path / "evaluate" / "a" / "metrics.json").read_text())
    assert metrics["n_examples"] == 20 and "random_precision_at_1" in metrics
    with open(tmp_path / "rank-evidence" / "a" / "evidence.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["example_id", "rank", "paragraph_index", "p_cnn_score", "is_gold_rationale"]
    first = [r for r in rows if r["example_id"] == rows[0]["example_id"]]
    assert [int(r["rank"]) for r in first] == list(range(1, len(first) + 1))
    scores = [float(r["p_cnn_score"]) for r in first]
    assert scores == sorted(scores, reverse=True)


def test_evaluate_perfect_fit(tmp_path):
    w = make_world(per_class=2, q=4, l=2)
    data = replace(w.data, target_dev=w.corpus.target)
    res = fit(TrainConfig(mode="target_only", epochs=80, patience=80, lr=0.05, batch_size=8, net=w.net), data)
    save_model(tmp_path / "ck", res)
    write_target(w.corpus.target, tmp_path / "toy.csv")
    assert run(["evaluate", "--checkpoint", str(tmp_path / "ck"), "--target", str(tmp_path / "toy.csv"),
                "--out", str(tmp_path / "ev")]) == 0
    m = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert m["accuracy"] == m["macro_f1"] == m["weighted_accuracy"] == 1.0


def test_gradcheck_command(tmp_path):
    assert run(["gradcheck", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "gradcheck.json").read_text())
    assert rep["passed"] and rep["max_rel_error"] < 1e-4
    assert run(["gradcheck", "--tolerance", "1e-30"]) == 1


def test_alpha_sweep(data_dir, small_cfg, tmp_path):
    for flag in ([], ["--pretrained"]):
        out = tmp_path / ("pre" if flag else "plain")
        assert run(["alpha-sweep", "--config", small_cfg, "--data", str(data_dir), "--out", str(out),
                    "--alphas", "0.3,0.7", "--epochs", "1", "--folds", "2"] + flag) == 0
        with open(out / "alpha_sweep.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["alpha"]) for r in rows] == [0.3, 0.7]
        assert {r["pretrained"] for r in rows} == {"true" if flag else "false"}


@pytest.mark.parametrize("argv", [[], ["bogus"], ["train", "--out", "x", "--no-such-flag", "1"], ["train"]])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_validation_errors_exit_1(data_dir, small_cfg, tmp_path, capsys):
    base = ["train", "--config", small_cfg, "--data", str(data_dir)]
    assert run(base + ["--out", str(tmp_path / "a"), "--alpha", "1.5"]) == 1
    assert "alpha" in capsys.readouterr().err
    assert run(base + ["--out", str(tmp_path / "b"), "--mode", "nope"]) == 1
    assert run(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "c")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("unknown_key = 3\n")
    assert run(["train", "--config", str(bad), "--out", str(tmp_path / "d")]) == 1
    other = tmp_path / "other.cfg"
    other.write_text("command=evaluate\n")
    assert run(["train", "--config", str(other), "--out", str(tmp_path / "e")]) == 1
    assert run(base + ["--out", str(tmp_path / "f"), "--emb-dim", "7"]) == 1


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "clmn.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
