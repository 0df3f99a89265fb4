import json

import pytest

from difftransfer.cli import DEFAULTS, main, parse_config
from difftransfer.exceptions import ConfigError


def test_defaults_mirror_training_setup(monkeypatch):
    monkeypatch.delenv("DIFFTRANSFER_SEED", raising=False)
    cfg = parse_config()
    assert cfg["learning_rate"] == 2e-5
    assert cfg["batch_size"] == 16
    assert cfg["epochs"] == 5000 and cfg["weight_decay"] == 1e-4 and cfg["steps"] == 50
    assert (cfg["window_s"], cfg["overlap"], cfg["mel_bins"]) == (0.020, 0.5, 128)


def test_precedence_flag_over_file_over_default(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"epochs": 200, "batch_size": 8}))
    cfg = parse_config(path, {"epochs": 300})
    assert cfg["epochs"] == 300
    assert cfg["batch_size"] == 8
    assert cfg["learning_rate"] == DEFAULTS["learning_rate"]


def test_unknown_key_suggests_fix(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"learning_rte": 1e-3}))
    with pytest.raises(ConfigError, match="learning_rate"):
        parse_config(path)


def test_type_mismatch(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"epochs": "many"}))
    with pytest.raises(ConfigError, match="expected int"):
        parse_config(path)


def test_fixed_front_end_keys():
    with pytest.raises(ConfigError, match="fixed"):
        parse_config(None, {"mel_bins": 80})


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("DIFFTRANSFER_SEED", "42")
    assert parse_config()["seed"] == 42
    assert parse_config(None, {"seed": 1})["seed"] == 1


def test_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_evaluate_missing_dir(tmp_path, capsys):
    missing = tmp_path / "nowhere"
    code = main(["evaluate", "--generated", str(missing), "--reference", str(tmp_path), "--report", "r.json"])
    assert code != 0
    err = capsys.readouterr().err
    assert str(missing) in err and len(err.strip().splitlines()) == 1


def test_end_to_end_commands(tmp_path, capsys):
    data, ckpt, out = tmp_path / "data", tmp_path / "ckpt", tmp_path / "out"
    assert main(["make-toy-dataset", "--out", str(data), "--tracks", "2", "--duration", "1.5"]) == 0
    assert main(["train", "--data", str(data), "--out", str(ckpt), "--epochs", "2", "--batch-size", "2",
                 "--learning-rate", "1e-3", "--stage-filters", "4,8,8", "--blocks-per-stage", "1",
                 "--bottleneck-filters", "8"]) == 0
    assert (ckpt / "manifest.json").exists() and (ckpt / "weights.pt").exists()
    assert len((ckpt / "train_log.jsonl").read_text().splitlines()) == 2
    printed = capsys.readouterr().out
    assert "resolved config" in printed

    assert main(["info", "--ckpt", str(ckpt)]) == 0
    info = capsys.readouterr().out
    assert "max_signal_rate=0.95" in info and "min_signal_rate=0.02" in info
    assert "lo=" in info and "hi=" in info

    assert main(["transfer", "--ckpt", str(ckpt), "--in", str(data / "timbreA"), "--out", str(out),
                 "--steps", "2", "--seed", "0"]) == 0
    assert sorted(p.name for p in out.glob("*.wav")) == ["track_0000.wav", "track_0001.wav"]

    report = tmp_path / "report.json"
    assert main(["evaluate", "--generated", str(out), "--reference", str(data / "timbreB"),
                 "--report", str(report)]) == 0
    fields = json.loads(report.read_text())
    assert {"fad", "jd_mean", "jd_per_track"} <= set(fields)


def test_info_missing_checkpoint(tmp_path, capsys):
    assert main(["info", "--ckpt", str(tmp_path)]) == 1
    assert "manifest.json" in capsys.readouterr().err
