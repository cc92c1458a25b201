import json

import numpy as np
import pandas as pd

from remede.cell import RemedeCell, save_checkpoint
from remede.main import main


def _generate(out, seed=7, n=60, task="poc1"):
    return main(["generate", "--task", task, "--seed", str(seed), "--n-sequences", str(n), "--out", str(out)])


def test_generate_is_byte_identical(tmp_path):
    assert _generate(tmp_path / "a") == 0
    assert _generate(tmp_path / "b") == 0
    a = (tmp_path / "a" / "dataset.jsonl").read_bytes()
    b = (tmp_path / "b" / "dataset.jsonl").read_bytes()
    assert a == b and len(a.splitlines()) == 60


def test_generate_writes_manifest(tmp_path):
    _generate(tmp_path)
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["command"] == "generate"
    assert manifest["seed"] == 7
    assert manifest["config"]["gen"]["seed"] == 7
    assert manifest["artifacts"][0]["path"].endswith("dataset.jsonl")
    assert not any(p.name.startswith(".staging") for p in tmp_path.iterdir())


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"task": "poc2", "seed": 3, "gen": {"n_sequences": 10}}))
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["task"] == "poc2"
    first = json.loads((out / "dataset.jsonl").read_text().splitlines()[0])
    assert len(first["inputs"][0]) == 2


def test_train_writes_checkpoint_and_history(tmp_path):
    _generate(tmp_path, n=80)
    out = tmp_path / "train"
    code = main(["train", "--data", str(tmp_path / "dataset.jsonl"), "--depth", "2", "--memory-dim", "2",
                 "--epochs", "2", "--lr", "0.01", "--out", str(out)])
    assert code == 0
    assert (out / "checkpoint.json").exists()
    history = pd.read_csv(out / "history.csv")
    assert list(history.columns) == ["epoch", "train_loss", "val_accuracy", "val_loss", "best_val_accuracy"]


def test_evaluate_untrained_checkpoint(tmp_path, capsys):
    _generate(tmp_path, n=80)
    ckpt = tmp_path / "ckpt.json"
    save_checkpoint(RemedeCell.init(np.random.default_rng(0), n_x=1, n_m=2, depth=2), ckpt)
    out = tmp_path / "eval"
    assert main(["evaluate", "--checkpoint", str(ckpt), "--data", str(tmp_path / "dataset.jsonl"),
                 "--out", str(out)]) == 0
    frame = pd.read_csv(out / "report.csv")
    assert {"accuracy", "random_guess", "naive", "tree_size"} <= set(frame.columns)
    text = capsys.readouterr().out
    assert "ReMeDe" in text and "Random guess" in text and "Naive" in text


def test_evaluate_rejects_empty_split(tmp_path, capsys):
    _generate(tmp_path, n=1)
    ckpt = tmp_path / "ckpt.json"
    save_checkpoint(RemedeCell.init(np.random.default_rng(0), n_x=1, n_m=2, depth=2), ckpt)
    out = tmp_path / "eval"
    code = main(["evaluate", "--checkpoint", str(ckpt), "--data", str(tmp_path / "dataset.jsonl"),
                 "--out", str(out)])
    assert code == 1
    last = capsys.readouterr().err.strip().splitlines()[-1]
    assert last.startswith("error:") and "empty train or test split" in last
    assert not (out / "report.csv").exists()


def test_export_dot_and_json(tmp_path):
    _generate(tmp_path, n=20)
    ckpt = tmp_path / "ckpt.json"
    save_checkpoint(RemedeCell.init(np.random.default_rng(1), n_x=1, n_m=2, depth=3), ckpt)
    for fmt in ("dot", "json"):
        out = tmp_path / fmt
        assert main(["export", "--checkpoint", str(ckpt), "--data", str(tmp_path / "dataset.jsonl"),
                     "--format", fmt, "--out", str(out)]) == 0
    assert (tmp_path / "dot" / "tree.dot").read_text().startswith("digraph Tree {")
    assert "root" in json.loads((tmp_path / "json" / "tree.json").read_text())


def test_search_writes_trial_log(tmp_path):
    _generate(tmp_path, n=60)
    out = tmp_path / "search"
    assert main(["search", "--data", str(tmp_path / "dataset.jsonl"), "--depth", "2", "--memory-dim", "1",
                 "--search-trials", "2", "--out", str(out)]) == 0
    log = pd.read_csv(out / "search_trials.csv")
    assert list(log.columns) == ["trial", "lr", "val_accuracy", "epochs_run"]
    best = json.loads((out / "best_config.json").read_text())
    assert np.min(np.abs(log["lr"].to_numpy() - best["train"]["learning_rate"])) < 1e-12


def test_trials_writes_search_log_next_to_report(tmp_path):
    _generate(tmp_path, n=60)
    out = tmp_path / "trials"
    assert main(["trials", "--data", str(tmp_path / "dataset.jsonl"), "--depth", "2", "--memory-dim", "1",
                 "--search-trials", "2", "--trials", "1", "--epochs", "1", "--out", str(out)]) == 0
    log = pd.read_csv(out / "search_trials.csv")
    assert len(log) == 2
    report = json.loads((out / "trial_report.json").read_text())
    assert np.min(np.abs(log["lr"].to_numpy() - report["learning_rate"])) < 1e-12
    assert len(pd.read_csv(out / "report.csv")) == 1


def test_trials_without_search_has_no_log(tmp_path):
    _generate(tmp_path, n=60)
    out = tmp_path / "trials"
    assert main(["trials", "--data", str(tmp_path / "dataset.jsonl"), "--depth", "2", "--memory-dim", "1",
                 "--trials", "1", "--epochs", "1", "--lr", "0.01", "--skip-search", "--out", str(out)]) == 0
    assert (out / "report.csv").exists()
    assert not (out / "search_trials.csv").exists()


def test_missing_dataset_fails_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["train", "--data", str(tmp_path / "missing.jsonl"), "--out", str(out)])
    assert code == 1
    last = capsys.readouterr().err.strip().splitlines()[-1]
    assert last.startswith("error:") and "missing.jsonl" in last
    assert not out.exists() or not any(out.iterdir())


def test_malformed_dataset_fails(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"task": "poc1", "inputs": [[0.1]], "targets": [7]}\n')
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "out")]) == 1


def test_bad_argument_exit_code():
    assert main(["generate", "--task", "poc9"]) == 2
