import csv
import json

import pytest
import yaml

from cr_webster import cli

STRONG = {"points": [{"label": "y1", "K": 1.0, "lapK": -3.0, "A": 0.0, "morse": 3},
                     {"label": "y2", "K": 1.0, "lapK": -3.0, "A": 0.0, "morse": 3}],
          "pairs": [["y1", "y2", 0.6]]}


def write_data(tmp_path, G=0.6, name="data.yaml"):
    doc = dict(STRONG, pairs=[["y1", "y2", G]])
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = cli.main(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_calibrate(tmp_path):
    code, doc = run(["calibrate"], tmp_path)
    assert code == 0
    assert doc["calibration"]["quarter_R"] == pytest.approx(4.0)


def test_analyze_abstract_strong_and_weak(tmp_path):
    code, doc = run(["analyze", "--mode", "abstract", "--data", write_data(tmp_path, 0.6)], tmp_path)
    assert code == 0 and doc["conclusion"] == "exists; morse <= 1; count >= 1"
    assert all(f["agrees"] for f in doc["flow"])
    code, doc = run(["analyze", "--mode", "abstract", "--data", write_data(tmp_path, 0.4, "w.yaml")], tmp_path, "w.json")
    assert code == 0 and doc["conclusion"] == "inconclusive"


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["analyze", "--k-expr", "1"]) == cli.EXIT_C0
    assert cli.main(["analyze", "--k-expr", "x1"]) == cli.EXIT_INPUT
    assert cli.main(["analyze", "--mode", "abstract", "--data", write_data(tmp_path, 0.5)]) == cli.EXIT_C1
    assert cli.main(["analyze", "--mode", "abstract"]) == cli.EXIT_INPUT
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense_key: 1\n")
    assert cli.main(["analyze", "--config", str(bad)]) == cli.EXIT_INPUT
    err = capsys.readouterr().err
    assert "error (C0ViolationError)" in err and "unknown config keys" in err


def test_c0_failure_report_lists_offending_points(tmp_path, capsys):
    code, doc = run(["analyze", "--k-expr", "1"], tmp_path)
    assert code == cli.EXIT_C0
    assert doc["status"] == "failed" and doc["offending"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"mode": "abstract", "data": write_data(tmp_path, 0.4), "seed": 1}))
    code, doc = run(["analyze", "--config", str(cfg), "--seed", "5"], tmp_path)
    assert code == 0 and doc["config"]["seed"] == 5 and doc["conclusion"] == "inconclusive"


def test_geometric_and_abstract_runs_agree(tmp_path):
    expr = "2 + x2 + 0.3*x1*y2"
    exported = tmp_path / "twin.yaml"
    assert cli.main(["export-abstract", "--k-expr", expr, "--out", str(exported)]) == 0
    _, geo = run(["analyze", "--k-expr", expr], tmp_path, "geo.json")
    _, ab = run(["analyze", "--mode", "abstract", "--data", str(exported)], tmp_path, "ab.json")
    assert geo["criterion"] == ab["criterion"]
    assert geo["conclusion"] == ab["conclusion"]


def test_flow_command_writes_csv(tmp_path):
    csv_dir = tmp_path / "traj"
    code, doc = run(["flow", "--mode", "abstract", "--data", write_data(tmp_path, 0.6), "--tuple", "y1,y2",
                     "--csv", str(csv_dir), "--samples", "11"], tmp_path)
    assert code == 0 and doc["agrees"]
    assert doc["flow"][0]["classification"] == "not_attained"
    rows = list(csv.reader((csv_dir / doc["flow"][0]["csv"]).open()))
    assert rows[0][0] == "s" and len(rows) == 12


def test_flow_rejects_unknown_tuple(tmp_path):
    code = cli.main(["flow", "--mode", "abstract", "--data", write_data(tmp_path), "--tuple", "y1,zz"])
    assert code == cli.EXIT_INPUT


def test_verify_single_suite(tmp_path):
    prof = tmp_path / "h.csv"
    code, doc = run(["verify", "--suite", "bubble_identity", "--suite", "H_profile", "--csv", str(prof)], tmp_path)
    assert code == 0 and doc["passed"]
    assert [c["name"] for c in doc["checks"]] == ["bubble_identity", "H_profile"]
    assert prof.read_text().startswith("gauge_radius,H,lambda")


def test_verify_unknown_suite(tmp_path):
    assert cli.main(["verify", "--suite", "nope"]) == cli.EXIT_INPUT


def test_reports_contain_no_nan(tmp_path):
    _, doc = run(["analyze", "--k-expr", "2 + x2"], tmp_path)
    assert "NaN" not in json.dumps(doc)


def test_analyze_single_maximum_is_inconclusive(tmp_path):
    p = tmp_path / "one.yaml"
    p.write_text(yaml.safe_dump({"points": [STRONG["points"][0]]}))
    code, doc = run(["analyze", "--mode", "abstract", "--data", str(p)], tmp_path)
    assert code == 0 and doc["conclusion"] == "inconclusive"


def test_analyze_linear_K_pipeline(tmp_path):
    code, doc = run(["analyze", "--k-expr", "2 + x2"], tmp_path)
    assert code == 0
    assert len(doc["critical_points"]) == 2
    assert doc["criterion"]["kplus"] == ["y0"]
    assert [t["labels"] for t in doc["criterion"]["main"]["F1"]] == [["y0"]]
    assert doc["conclusion"] == "inconclusive"
