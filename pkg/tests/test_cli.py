import json
import subprocess
import sys

import pytest

from parkscan.cli import main

SCENARIO = {
    "rows": 2,
    "cols": 3,
    "slot_pitch": 40.0,
    "slot_size": [22.0, 30.0],
    "frame_count": 40,
    "occupancy_prob": 0.8,
    "center_noise_sigma": 0.5,
    "camera": "identity",
    "seed": 77,
}

RUN_CONFIG = {
    "filter": {"classes": ["car", "truck"], "min_confidence": 0.5},
    "homography": {"identity": True},
    "n_bottom": 6,
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps(SCENARIO))
    (tmp_path / "run.json").write_text(json.dumps(RUN_CONFIG))
    return tmp_path


def simulate(workdir, out="sim"):
    rc = main(
        ["simulate", "--scenario", str(workdir / "scenario.json"), "--out-dir", str(workdir / out)]
    )
    assert rc == 0
    return workdir / out


def test_simulate_writes_files(workdir):
    out = simulate(workdir)
    assert (out / "detections.jsonl").exists()
    assert (out / "slots_truth.json").exists()
    assert (out / "occupancy_truth.jsonl").exists()


def test_simulate_is_deterministic(workdir):
    a = simulate(workdir, "a")
    b = simulate(workdir, "b")
    for name in ("detections.jsonl", "slots_truth.json", "occupancy_truth.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_seed_flag_overrides(workdir):
    a = simulate(workdir, "a")
    rc = main(
        [
            "simulate",
            "--scenario", str(workdir / "scenario.json"),
            "--out-dir", str(workdir / "c"),
            "--seed", "5151",
        ]
    )
    assert rc == 0
    assert (a / "detections.jsonl").read_bytes() != (workdir / "c" / "detections.jsonl").read_bytes()


def test_simulate_missing_config_exits_2(workdir):
    assert main(["simulate", "--scenario", str(workdir / "nope.json"), "--out-dir", str(workdir / "x")]) == 2


def test_detect_slots_end_to_end(workdir, capsys):
    sim = simulate(workdir)
    out = workdir / "slots.json"
    rc = main(
        [
            "detect-slots",
            "--detections", str(sim / "detections.jsonl"),
            "--config", str(workdir / "run.json"),
            "--out", str(out),
        ]
    )
    assert rc == 0
    diagnostics = json.loads(capsys.readouterr().out)
    assert diagnostics["slots"] == 6
    assert diagnostics["shortfall"] is False
    doc = json.loads(out.read_text())
    assert len(doc["slots"]) == 6
    assert doc["config_echo"]["n_bottom"] == 6


def test_detect_slots_shortfall_flag(workdir, capsys):
    sim = simulate(workdir)
    rc = main(
        [
            "detect-slots",
            "--detections", str(sim / "detections.jsonl"),
            "--config", str(workdir / "run.json"),
            "--n-bottom", "44",
            "--out", str(workdir / "slots.json"),
        ]
    )
    assert rc == 0
    diagnostics = json.loads(capsys.readouterr().out)
    assert diagnostics["shortfall"] is True
    assert diagnostics["slots"] == 6


def test_detect_slots_is_deterministic(workdir, capsys):
    sim = simulate(workdir)
    args = [
        "detect-slots",
        "--detections", str(sim / "detections.jsonl"),
        "--config", str(workdir / "run.json"),
    ]
    assert main(args + ["--out", str(workdir / "s1.json")]) == 0
    assert main(args + ["--out", str(workdir / "s2.json")]) == 0
    assert (workdir / "s1.json").read_bytes() == (workdir / "s2.json").read_bytes()


def test_detect_slots_corrupt_line_exits_2(workdir, capsys):
    bad = workdir / "bad.jsonl"
    bad.write_text('{"frame": "f1", "dets": []}\n{{{\n')
    rc = main(
        [
            "detect-slots",
            "--detections", str(bad),
            "--config", str(workdir / "run.json"),
            "--out", str(workdir / "slots.json"),
        ]
    )
    assert rc == 2
    assert "line 2" in capsys.readouterr().err


def test_detect_slots_no_detections_exits_3(workdir):
    empty = workdir / "empty.jsonl"
    empty.write_text('{"frame": "f1", "dets": []}\n{"frame": "f2", "dets": []}\n')
    rc = main(
        [
            "detect-slots",
            "--detections", str(empty),
            "--config", str(workdir / "run.json"),
            "--out", str(workdir / "slots.json"),
        ]
    )
    assert rc == 3


def test_detect_slots_plot_data(workdir, capsys):
    sim = simulate(workdir)
    out = workdir / "slots.json"
    rc = main(
        [
            "detect-slots",
            "--detections", str(sim / "detections.jsonl"),
            "--config", str(workdir / "run.json"),
            "--out", str(out),
            "--emit-plot-data",
        ]
    )
    assert rc == 0
    clusters = (workdir / "slots.json.clusters.tsv").read_text().splitlines()
    spreads = (workdir / "slots.json.spreads.tsv").read_text().splitlines()
    assert clusters[0] == "x\ty\tcluster"
    assert spreads[0] == "cluster_id\tspread\tmembers\tkept_by_iqr\tselected"
    assert len(clusters) > 1 and len(spreads) == 7  # 6 clusters + header


def _detect(workdir, sim):
    out = workdir / "slots.json"
    rc = main(
        [
            "detect-slots",
            "--detections", str(sim / "detections.jsonl"),
            "--config", str(workdir / "run.json"),
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


def test_classify_oracle_matches_ground_truth(workdir, capsys):
    sim = simulate(workdir)
    slots = _detect(workdir, sim)
    rc = main(
        [
            "classify",
            "--slots", str(slots),
            "--mode", "oracle",
            "--input", str(sim / "occupancy_truth.jsonl"),
            "--out-records", str(workdir / "recs.jsonl"),
            "--out-report", str(workdir / "report.json"),
        ]
    )
    assert rc == 0
    report = json.loads((workdir / "report.json").read_text())
    truth_lines = [json.loads(l) for l in (sim / "occupancy_truth.jsonl").read_text().splitlines()]
    # Slot ids differ between prediction and truth, but per-frame occupied
    # counts must match exactly on noise-free-enough data.
    for line in truth_lines:
        expected = sum(line["occupancy"].values())
        assert report[line["frame"]]["occupied"] == expected
        assert report[line["frame"]]["occupied"] + report[line["frame"]]["vacant"] == 6


def test_classify_scores_mode_constant_one(workdir, capsys):
    sim = simulate(workdir)
    slots = _detect(workdir, sim)
    table = workdir / "scores.jsonl"
    with open(table, "w") as fh:
        for slot in range(6):
            fh.write(json.dumps({"frame": "f000000", "slot": slot, "score": 1.0}) + "\n")
    rc = main(
        [
            "classify",
            "--slots", str(slots),
            "--mode", "scores",
            "--input", str(table),
            "--out-records", str(workdir / "recs.jsonl"),
            "--out-report", str(workdir / "report.json"),
        ]
    )
    assert rc == 0
    report = json.loads((workdir / "report.json").read_text())
    assert report["f000000"]["occupied"] == 6


def test_classify_unknown_mode_exits_2(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--slots", "x", "--mode", "banana", "--input", "y",
              "--out-records", "r", "--out-report", "p"])
    assert exc.value.code == 2


def test_classify_empty_ground_truth_exits_3(workdir):
    sim = simulate(workdir)
    slots = _detect(workdir, sim)
    empty = workdir / "empty.jsonl"
    empty.write_text("")
    rc = main(
        [
            "classify",
            "--slots", str(slots),
            "--mode", "oracle",
            "--input", str(empty),
            "--out-records", str(workdir / "r.jsonl"),
            "--out-report", str(workdir / "p.json"),
        ]
    )
    assert rc == 3


def _write_registry(path, centers):
    doc = {
        "slots": [
            {"id": i, "cx": cx, "cy": cy, "w": 20.0, "h": 20.0, "spread": 0.0, "members": 1}
            for i, (cx, cy) in enumerate(centers)
        ],
        "config_echo": {},
    }
    path.write_text(json.dumps(doc))


def test_evaluate_perfect_predictions(workdir, capsys):
    centers = [(10.0 * i, 0.0) for i in range(5)]
    _write_registry(workdir / "pred.json", centers)
    _write_registry(workdir / "truth.json", centers)
    rc = main(
        [
            "evaluate",
            "--pred-slots", str(workdir / "pred.json"),
            "--truth-slots", str(workdir / "truth.json"),
            "--out", str(workdir / "metrics.json"),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "precision: 100.00" in out
    assert "recall: 100.00" in out


def test_evaluate_prints_two_decimal_percentages(workdir, capsys):
    # 43 aligned pairs, one stray prediction, one unmatched truth:
    # tp=43, fp=1, fn=1.
    truth = [(10.0 * i, 0.0) for i in range(43)] + [(0.0, 500.0)]
    pred = [(10.0 * i, 0.0) for i in range(43)] + [(2000.0, 2000.0)]
    _write_registry(workdir / "pred.json", pred)
    _write_registry(workdir / "truth.json", truth)
    rc = main(
        [
            "evaluate",
            "--pred-slots", str(workdir / "pred.json"),
            "--truth-slots", str(workdir / "truth.json"),
            "--tolerance", "1.0",
            "--out", str(workdir / "metrics.json"),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "precision: 97.73" in out
    assert "recall: 97.73" in out
    doc = json.loads((workdir / "metrics.json").read_text())
    assert (doc["detection"]["tp"], doc["detection"]["fp"], doc["detection"]["fn"]) == (43, 1, 1)


def test_evaluate_single_class_auc_is_null_with_exit_0(workdir, capsys):
    sim = simulate(workdir)
    slots = _detect(workdir, sim)
    # Constant-1.0 scores for every frame/slot: every matched label is
    # compared, but predictions are all OCCUPIED.
    truth_lines = [json.loads(l) for l in (sim / "occupancy_truth.jsonl").read_text().splitlines()]
    all_occupied = workdir / "occ_all.jsonl"
    with open(all_occupied, "w") as fh:
        for line in truth_lines:
            line["occupancy"] = {k: True for k in line["occupancy"]}
            fh.write(json.dumps(line) + "\n")
    table = workdir / "scores.jsonl"
    with open(table, "w") as fh:
        for line in truth_lines:
            for slot in range(6):
                fh.write(json.dumps({"frame": line["frame"], "slot": slot, "score": 1.0}) + "\n")
    rc = main(
        [
            "classify",
            "--slots", str(slots),
            "--mode", "scores",
            "--input", str(table),
            "--out-records", str(workdir / "recs.jsonl"),
            "--out-report", str(workdir / "report.json"),
        ]
    )
    assert rc == 0
    rc = main(
        [
            "evaluate",
            "--pred-slots", str(slots),
            "--truth-slots", str(sim / "slots_truth.json"),
            "--records", str(workdir / "recs.jsonl"),
            "--truth-occupancy", str(all_occupied),
            "--out", str(workdir / "metrics.json"),
        ]
    )
    assert rc == 0
    doc = json.loads((workdir / "metrics.json").read_text())
    assert doc["classification"]["auc"] is None
    assert doc["classification"]["accuracy"] == 1.0


def test_run_pipeline_matches_manual_steps(workdir, capsys):
    sim = simulate(workdir)

    # Manual composition.
    slots = _detect(workdir, sim)
    assert main(
        [
            "classify",
            "--slots", str(slots),
            "--mode", "oracle",
            "--input", str(sim / "occupancy_truth.jsonl"),
            "--config", str(workdir / "run.json"),
            "--out-records", str(workdir / "occupancy.jsonl"),
            "--out-report", str(workdir / "report.json"),
        ]
    ) == 0
    assert main(
        [
            "evaluate",
            "--pred-slots", str(slots),
            "--truth-slots", str(sim / "slots_truth.json"),
            "--records", str(workdir / "occupancy.jsonl"),
            "--truth-occupancy", str(sim / "occupancy_truth.jsonl"),
            "--config", str(workdir / "run.json"),
            "--out", str(workdir / "metrics.json"),
        ]
    ) == 0

    pipe_dir = workdir / "pipe"
    assert main(
        [
            "run-pipeline",
            "--detections", str(sim / "detections.jsonl"),
            "--config", str(workdir / "run.json"),
            "--truth-slots", str(sim / "slots_truth.json"),
            "--truth-occupancy", str(sim / "occupancy_truth.jsonl"),
            "--out-dir", str(pipe_dir),
        ]
    ) == 0

    assert (pipe_dir / "slots.json").read_bytes() == slots.read_bytes()
    assert (pipe_dir / "occupancy.jsonl").read_bytes() == (workdir / "occupancy.jsonl").read_bytes()
    assert (pipe_dir / "report.json").read_bytes() == (workdir / "report.json").read_bytes()
    assert (pipe_dir / "metrics.json").read_bytes() == (workdir / "metrics.json").read_bytes()

    metrics = json.loads((pipe_dir / "metrics.json").read_text())
    assert metrics["detection"]["precision"] == 1.0
    assert metrics["detection"]["recall"] == 1.0
    assert metrics["classification"]["accuracy"] == 1.0


def test_cli_module_entry_point(workdir):
    result = subprocess.run(
        [sys.executable, "-m", "parkscan.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "detect-slots" in result.stdout
