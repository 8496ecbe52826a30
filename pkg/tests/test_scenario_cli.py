import json
import os

import numpy as np
import pytest

from vlpfleet import scenario_cli
from vlpfleet.beacon_codec import LedBeacon
from vlpfleet.camera_synth import CameraModel, NoiseParams, render_frame
from vlpfleet.geometry import Pose2D


def run_cli(capsys, *argv):
    code = scenario_cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def golden_corpus(tmp_path):
    """Ten synthesized frames with known ids."""
    camera = CameraModel()
    rng = np.random.default_rng(8)
    expected = {}
    for i in range(10):
        led_id = int(rng.integers(0, 256))
        beacon = LedBeacon(id=led_id, position_xy=(4.16, 2.40))
        pose = Pose2D(4.16 + float(rng.uniform(-0.2, 0.2)),
                      2.40 + float(rng.uniform(-0.15, 0.15)), 0.0)
        frame = render_frame(pose, camera, beacon, t0=float(rng.uniform(0, 0.01)),
                             noise=NoiseParams(8.0), seed=i)
        path = tmp_path / f"frame_{i:02d}.pgm"
        frame.save_pgm(str(path))
        expected[path.name] = led_id
    return tmp_path, expected


def test_decode_golden_corpus(capsys, golden_corpus):
    corpus_dir, expected = golden_corpus
    code, out, _ = run_cli(capsys, "decode", str(corpus_dir / "*.pgm"))
    assert code == 0
    lines = [json.loads(line) for line in out.strip().splitlines()]
    assert len(lines) == 10
    for entry in lines:
        name = os.path.basename(entry["file"])
        assert entry["led_id"] == expected[name]
        assert entry["diagnostic"] == "ok"
        assert 0 < entry["quality"] <= 1
        assert entry["u"] is not None and entry["v"] is not None


def test_decode_empty_glob(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "decode", str(tmp_path / "*.pgm"))
    assert code == 0
    assert out.strip() == ""


def test_decode_non_pgm_file(capsys, tmp_path):
    bad = tmp_path / "fake.pgm"
    bad.write_text("definitely not a pgm")
    code, out, _ = run_cli(capsys, "decode", str(bad))
    assert code == 1
    entry = json.loads(out.strip().splitlines()[0])
    assert "error" in entry


def test_decode_mixes_good_and_bad(capsys, tmp_path, golden_corpus):
    corpus_dir, _ = golden_corpus
    bad = corpus_dir / "zz_bad.pgm"
    bad.write_text("nope")
    code, out, _ = run_cli(capsys, "decode", str(corpus_dir / "*.pgm"))
    assert code == 1
    lines = [json.loads(line) for line in out.strip().splitlines()]
    assert len(lines) == 11


def test_simulate_subcommand(capsys, tmp_path):
    config = {
        "seed": 2,
        "duration_s": 3.0,
        "robots": [{"id": "A", "start": [4.0, 2.4, 0.0],
                    "goals": [{"x": 4.3, "y": 2.4}]}],
    }
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps(config))
    metrics_path = tmp_path / "m.csv"
    code, out, _ = run_cli(capsys, "simulate", str(config_path),
                           "--metrics", str(metrics_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["seed"] == 2
    assert "A" in summary["robots"]
    assert metrics_path.exists()
    header = metrics_path.read_text().splitlines()[0]
    assert header == "t_ms,robot_id,true_x,true_y,est_x,est_y,err_m,in_coverage,fix_rate,boundary_peak_m"


def test_simulate_bad_config_exit_2(capsys, tmp_path):
    config_path = tmp_path / "bad.json"
    config_path.write_text(json.dumps({"robots": []}))
    code, _, err = run_cli(capsys, "simulate", str(config_path))
    assert code == 2
    assert "config error" in err


def test_simulate_missing_file_exit_2(capsys, tmp_path):
    code, _, err = run_cli(capsys, "simulate", str(tmp_path / "absent.json"))
    assert code == 2


def test_seed_env_override(capsys, tmp_path, monkeypatch):
    config = {
        "seed": 2,
        "duration_s": 1.0,
        "robots": [{"id": "A", "start": [4.0, 2.4, 0.0]}],
    }
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps(config))
    monkeypatch.setenv("VLP_FLEET_SEED", "99")
    code, out, _ = run_cli(capsys, "simulate", str(config_path),
                           "--metrics", str(tmp_path / "m.csv"))
    assert code == 0
    assert json.loads(out)["seed"] == 99


def test_experiment_summary_shape(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "experiment", "coverage-handoff", "--seed", "1",
                           "--metrics", str(tmp_path / "m.csv"))
    assert code == 0
    summary = json.loads(out)
    assert summary["both_window_peak_m"] is not None
    assert summary["robots"]["A"]["entry_error_m"] is not None
    assert summary["robots"]["B"]["post2m_boundary_contrib_m"] is not None
