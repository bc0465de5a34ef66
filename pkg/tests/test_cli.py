import json
import shutil

import pytest

from fbhebb import acceptance
from fbhebb.cli import main
from fbhebb.harness import read_probe_csv
from fbhebb.metrics import TrajectoryRecord


def _run(tmp_path, name, *flags):
    out = tmp_path / name
    assert main(["run", "--out", str(out), *flags]) == 0
    return out


def test_run_writes_artifacts(tmp_path, capsys):
    out = _run(tmp_path, "r")
    for f in ("config.ini", "trajectory.csv", "probes.csv", "summary.json",
              "snapshots/epoch_000.json", "snapshots/epoch_010.json", "snapshots/epoch_020.json"):
        assert (out / f).is_file(), f
    summary = json.loads((out / "summary.json").read_text())
    fwd = summary["retention"]["forward_output"]
    assert [s["site"] for s in fwd["sites"]] == [5, 6, 8, 9]
    assert fwd["matrix"] == "forward layer 2" and fwd["direction"] == "output"
    fb = summary["retention"]["feedback_input"]
    assert [s["site"] for s in fb["sites"]] == [8, 9] and fb["matrix"] == "feedback layer 2"
    assert TrajectoryRecord.read_csv(out / "trajectory.csv").recorded_epochs == list(range(21))
    assert "R5=" in capsys.readouterr().out


def test_zero_epochs_gives_baseline_only(tmp_path):
    out = _run(tmp_path, "z", "--epochs", "0")
    assert TrajectoryRecord.read_csv(out / "trajectory.csv").recorded_epochs == [0]
    assert {k[0] for k in read_probe_csv(out / "probes.csv")} == {0}
    assert "retention" not in json.loads((out / "summary.json").read_text())


def test_same_seed_byte_identical(tmp_path):
    a = _run(tmp_path, "a", "--seed", "3", "--epochs", "2")
    b = _run(tmp_path, "b", "--seed", "3", "--epochs", "2")
    for f in ("trajectory.csv", "probes.csv", "summary.json", "snapshots/epoch_004.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    c = _run(tmp_path, "c", "--seed", "4", "--epochs", "2")
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nseed = 9\narch = 2ff\nepochs = 1\n")
    out = _run(tmp_path, "o", "--config", str(cfg), "--seed", "2")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seed"] == 2 and summary["config"]["arch"] == "2ff"


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nepochs = many\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "epochs" in capsys.readouterr().err


def test_probe_commands(tmp_path, capsys):
    out = _run(tmp_path, "p", "--epochs", "2")
    capsys.readouterr()
    snap = str(out / "snapshots" / "epoch_002.json")
    assert main(["probe", snap, "--probe", "predict", "--pair", "A"]) == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert res["status"] == "ok" and len(res["values"]) == 10 and res["target_sites"] == [8, 9]
    assert main(["probe", snap, "--probe", "regenerate", "--pair", "A"]) == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert res["target_sites"] == [3]


def test_regenerate_without_feedback_fails(tmp_path, capsys):
    out = _run(tmp_path, "f", "--arch", "2ff", "--epochs", "1")
    capsys.readouterr()
    assert main(["probe", str(out / "snapshots" / "epoch_002.json"), "--probe", "regenerate"]) == 1
    cap = capsys.readouterr()
    assert json.loads(cap.out.strip())["status"] == "unsupported"
    assert "unsupported" in cap.err


def test_small_matrix(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["matrix", "controls", "--seeds", "1", "--epochs", "1", "--out", str(out)]) == 0
    report = json.loads((out / "grid_controls.json").read_text())
    assert not report["errors"]
    assert len(list(out.rglob("config.ini"))) == 6
    assert "2ff" in capsys.readouterr().out


def test_report_on_empty_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    assert "no artifacts" in capsys.readouterr().err


def test_report_lines_and_json(acceptance_dir, tmp_path, capsys):
    js = tmp_path / "r.json"
    code = main(["report", str(acceptance_dir), "--json", str(js)])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 11 and lines[-1].endswith("criteria passed")
    assert [d["id"] for d in json.loads(js.read_text())] == [str(i) for i in range(1, 11)]


def test_tampered_artifact_fails_only_its_criteria(acceptance_dir, tmp_path):
    clean = {r.id: r for r in acceptance.evaluate([acceptance_dir])}
    copy = tmp_path / "copy"
    shutil.copytree(acceptance_dir, copy)
    (copy / "2ff2fb_full_sequential_s1" / "probes.csv").write_text("garbage\n")
    tampered = {r.id: r for r in acceptance.evaluate([copy])}
    for cid in ("1", "2"):
        assert not tampered[cid].passed
        assert any("2ff2fb_full_sequential_s1" in m for m in tampered[cid].missing)
    for cid in ("3", "4", "5", "7", "8", "9", "10"):
        assert tampered[cid].passed == clean[cid].passed and not tampered[cid].missing
