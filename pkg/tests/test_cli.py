import json

import pytest

from flowmots.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "7", "--frames", "8", "--objects", "3", "--out-dir", str(d)]) == 0
    return d


def test_synth_deterministic(synth_dir, tmp_path):
    assert main(["synth", "--seed", "7", "--frames", "8", "--objects", "3", "--out-dir", str(tmp_path)]) == 0
    for name in ("gt.txt", "detections.txt", "scene.json"):
        assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_eval_self(synth_dir, capsys, tmp_path):
    gt = str(synth_dir / "gt.txt")
    csv = tmp_path / "r.csv"
    assert main(["eval", "--gt", gt, "--pred", gt, "--csv", str(csv)]) == 0
    out = capsys.readouterr().out
    last = out.strip().splitlines()[-1].split()
    assert last[:5] == ["all", "1.0000", "1.0000", "1.0000", "0"]
    assert csv.read_text().splitlines()[0].startswith("class,sMOTSA")


def test_eval_class_filter(synth_dir, capsys):
    gt = str(synth_dir / "gt.txt")
    rc = main(["eval", "--gt", gt, "--pred", gt, "--class", "pedestrian"])
    out = capsys.readouterr().out
    if rc == 0:
        assert "car" not in out
    else:
        assert rc == 2  # scene happened to hold no pedestrians


def test_track_perfect(synth_dir, tmp_path):
    summary = tmp_path / "s.json"
    out = tmp_path / "out.txt"
    rc = main([
        "track", "--detections", str(synth_dir / "detections.txt"), "--gt", str(synth_dir / "gt.txt"),
        "--out", str(out), "--summary", str(summary),
    ])
    assert rc == 0
    s = json.loads(summary.read_text())
    assert s["metrics"]["all"]["sMOTSA"] == 1.0 and s["metrics"]["all"]["ids"] == 0
    assert s["params"]["temporal_range"] == 8
    assert out.read_text()


def test_track_without_scene_uses_mask_features(synth_dir, tmp_path, capsys):
    det = tmp_path / "d.txt"
    det.write_bytes((synth_dir / "detections.txt").read_bytes())
    cfg = tmp_path / "c.cfg"
    cfg.write_text("temporal_range = 2\n")
    assert main(["track", "--detections", str(det), "--gt", str(synth_dir / "gt.txt"),
                 "--config", str(cfg)]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["params"]["temporal_range"] == 2
    assert s["metrics"]["all"]["MOTSA"] <= 1.0


def test_cost(tmp_path, capsys):
    cfg = tmp_path / "cost.cfg"
    cfg.write_text("fm = 100\nfl = 5\nconv3d = 20\nn = 8\nm = 8\n")
    assert main(["cost", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "ratio 0.538462"


def test_usage_errors(capsys):
    assert main(["eval", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["nope"]) == 1
    assert main(["synth", "--seed", "x", "--out-dir", "d"]) == 1


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1001 1 2 2 04\n0 1002 1 2 2\n")
    assert main(["eval", "--gt", str(bad), "--pred", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["eval", "--gt", str(tmp_path / "missing"), "--pred", str(bad)]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("fm = 100\n")
    assert main(["cost", "--config", str(cfg)]) == 2
