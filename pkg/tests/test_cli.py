"""CLI behavior: exit codes, artifacts, determinism, thread invariance."""

import json
from pathlib import Path

import numpy as np
import pytest

from causal_crowds.cli import main
from causal_crowds.dataset_io import read_predictions, read_split
from causal_crowds.model import ToyModel


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def split_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "id"
    assert run("generate", "--split", "id", "--scenes", "8",
               "--seed", "3", "--out", out) == 0
    return out


# ---- generate ---------------------------------------------------------

def test_generate_writes_split(split_dir):
    records, manifest = read_split(split_dir)
    assert len(records) == 8
    assert manifest.num_scenes == 8


def test_generate_rerun_byte_identical(split_dir, tmp_path):
    other = tmp_path / "again"
    assert run("generate", "--split", "id", "--scenes", "8",
               "--seed", "3", "--out", other) == 0
    for name in ("scenes.ndjson", "manifest.json"):
        assert (other / name).read_bytes() == \
            (split_dir / name).read_bytes()


def test_generate_threads_invariant(split_dir, tmp_path):
    other = tmp_path / "threaded"
    assert run("generate", "--split", "id", "--scenes", "8", "--seed", "3",
               "--threads", "8", "--out", other) == 0
    assert (other / "scenes.ndjson").read_bytes() == \
        (split_dir / "scenes.ndjson").read_bytes()


def test_generate_zero_scenes_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--split", "id", "--scenes", "0",
            "--out", tmp_path / "x")
    assert exc.value.code == 2


def test_generate_bad_split_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--split", "bogus", "--scenes", "1",
            "--out", tmp_path / "x")
    assert exc.value.code == 2


def test_threads_env_fallback(split_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("CAUSAL_CROWDS_THREADS", "4")
    other = tmp_path / "env"
    assert run("generate", "--split", "id", "--scenes", "8",
               "--seed", "3", "--out", other) == 0
    assert (other / "scenes.ndjson").read_bytes() == \
        (split_dir / "scenes.ndjson").read_bytes()


# ---- predict-toy / evaluate -------------------------------------------

def test_oracle_predictions_evaluate_zero(split_dir, tmp_path, capsys):
    pred = tmp_path / "oracle.ndjson"
    assert run("predict-toy", "--model", "oracle", "--data", split_dir,
               "--out", pred, "--include-noncausal") == 0
    out_dir = tmp_path / "rep"
    assert run("evaluate", "--data", split_dir, "--predictions", pred,
               "--out", out_dir) == 0
    text = capsys.readouterr().out
    assert "ace        0.000000" in text
    row = list((out_dir / "report.csv").read_text().splitlines())
    assert row[0].startswith("ade,fde,ace")
    values = dict(zip(row[0].split(","), row[1].split(",")))
    assert float(values["ace"]) == 0.0


def test_cv_predictions_identical_entries(split_dir, tmp_path):
    pred = tmp_path / "cv.ndjson"
    assert run("predict-toy", "--model", "cv", "--data", split_dir,
               "--out", pred) == 0
    records, _ = read_split(split_dir)
    for ps in read_predictions(pred, records):
        factual = ps.entries["factual"]
        for key, value in ps.entries.items():
            assert np.array_equal(value, factual)


def test_predictions_entry_count(split_dir, tmp_path):
    pred = tmp_path / "cv.ndjson"
    run("predict-toy", "--model", "cv", "--data", split_dir, "--out", pred)
    records, _ = read_split(split_dir)
    lines = pred.read_text().splitlines()
    expected = {r.scene_id: len(r.annotations) + 1 for r in records}
    for line in lines:
        obj = json.loads(line)
        assert len(obj["entries"]) == expected[obj["scene_id"]]


def test_evaluate_missing_scene_exit_1(split_dir, tmp_path, capsys):
    pred = tmp_path / "cv.ndjson"
    run("predict-toy", "--model", "cv", "--data", split_dir, "--out", pred)
    lines = pred.read_text().splitlines()
    dropped = json.loads(lines[0])["scene_id"]
    pred.write_text("\n".join(lines[1:]) + "\n")
    assert run("evaluate", "--data", split_dir,
               "--predictions", pred) == 1
    assert dropped in capsys.readouterr().err


def test_evaluate_missing_predictions_exit_1(split_dir, tmp_path):
    assert run("evaluate", "--data", split_dir,
               "--predictions", tmp_path / "nope.ndjson") == 1


def test_evaluate_fig_joint_svg(split_dir, tmp_path):
    pred = tmp_path / "cv.ndjson"
    run("predict-toy", "--model", "cv", "--data", split_dir, "--out", pred)
    out_dir = tmp_path / "rep"
    assert run("evaluate", "--data", split_dir, "--predictions", pred,
               "--out", out_dir, "--fig", "joint", "--max-k", "2") == 0
    svg = (out_dir / "joint_curve.svg").read_text()
    assert svg.startswith("<svg ") and svg.rstrip().endswith("</svg>")
    curve = (out_dir / "joint_curve.csv").read_text().splitlines()
    assert curve[0] == "k,mean_effect,fraction_exceeding,num_scenes," \
        "num_skipped"
    assert len(curve) == 3  # header + k=1,2


def test_evaluate_idempotent(split_dir, tmp_path):
    pred = tmp_path / "cv.ndjson"
    run("predict-toy", "--model", "cv", "--data", split_dir, "--out", pred)
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        assert run("evaluate", "--data", split_dir, "--predictions", pred,
                   "--out", out_dir, "--fig", "joint") == 0
        outs.append({p.name: p.read_bytes()
                     for p in sorted(out_dir.iterdir())})
    assert outs[0] == outs[1]


# ---- train-toy --------------------------------------------------------

def test_train_toy_writes_model_and_log(split_dir, tmp_path):
    model_path = tmp_path / "model.npz"
    log_path = tmp_path / "log.csv"
    assert run("train-toy", "--mode", "ranking", "--data", split_dir,
               "--epochs", "2", "--seed", "1", "--out", model_path,
               "--log", log_path) == 0
    assert model_path.exists()
    lines = log_path.read_text().splitlines()
    assert lines[0] == "epoch,task_loss,causal_loss,ade,ace"
    assert len(lines) == 3


def test_train_toy_epochs_zero_equals_init(split_dir, tmp_path):
    a = tmp_path / "a.npz"
    b = tmp_path / "b.npz"
    for path in (a, b):
        assert run("train-toy", "--mode", "baseline", "--data", split_dir,
                   "--epochs", "0" if path is a else "2", "--seed", "5",
                   "--out", path) == 0
    init = ToyModel.load(a)
    trained = ToyModel.load(b)
    # epochs=0 leaves the zero-initialized decoder untouched
    assert np.array_equal(init.params["Wg"],
                          np.zeros_like(init.params["Wg"]))
    assert not np.array_equal(trained.params["W1"], init.params["W1"])


def test_train_predict_roundtrip(split_dir, tmp_path):
    model_path = tmp_path / "model.npz"
    run("train-toy", "--mode", "baseline", "--data", split_dir,
        "--epochs", "1", "--out", model_path)
    pred = tmp_path / "toy.ndjson"
    assert run("predict-toy", "--model", model_path, "--data", split_dir,
               "--out", pred) == 0
    assert run("evaluate", "--data", split_dir,
               "--predictions", pred) == 0


def test_predict_toy_missing_model_exit_1(split_dir, tmp_path):
    assert run("predict-toy", "--model", tmp_path / "nope.npz",
               "--data", split_dir, "--out", tmp_path / "p.ndjson") == 1


def test_help_exits_zero():
    for sub in ("generate", "evaluate", "train-toy", "predict-toy"):
        with pytest.raises(SystemExit) as exc:
            run(sub, "--help")
        assert exc.value.code == 0
