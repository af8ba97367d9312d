import csv
import json
import subprocess
import sys

import pytest

from attrseg import __version__
from attrseg.cli import THREADS_ENV, default_threads, main, run

from golden import DATA, golden_metrics

GT = str(DATA / "fixture_gt.json")
PRED = str(DATA / "fixture_pred.json")
ONTO = str(DATA / "fixture_ontology.json")
GOLDEN = json.loads((DATA / "fixture_golden.json").read_text())


def evaluate_fixture(tmp_path, *extra, name="report.json"):
    out = tmp_path / name
    assert main(["evaluate", "--gt", GT, "--pred", PRED, "--ontology", ONTO, "--out", str(out),
                 "--threads", "1", *extra]) == 0
    return json.loads(out.read_text())


# -- evaluate --------------------------------------------------------------------


def test_golden_file_is_current():
    assert golden_metrics() == GOLDEN


def test_evaluate_matches_golden(tmp_path):
    metrics = evaluate_fixture(tmp_path)["metrics"]
    for key, want in GOLDEN.items():
        assert metrics[key] == want, key


def test_report_layout(tmp_path):
    doc = evaluate_fixture(tmp_path)
    assert doc["format_version"] == "1"
    assert doc["params"]["f1_mode"] == "binary-macro"
    assert doc["f1_sweep"] is None and doc["error_breakdown"] is None
    assert len(doc["metrics"]["per_category"]) == 46


def test_evaluate_optional_sections(tmp_path):
    doc = evaluate_fixture(tmp_path, "--sweep", "--breakdown")
    assert len(doc["f1_sweep"]) == 101
    assert set(doc["error_breakdown"]) == {"overall"}


def test_no_f1_drops_constrained_metrics(tmp_path):
    metrics = evaluate_fixture(tmp_path, "--no-f1")["metrics"]
    assert metrics["AP_IoU"] == GOLDEN["AP_IoU"]
    assert "AP_IoU_F1" not in metrics


def test_threshold_flags(tmp_path):
    metrics = evaluate_fixture(tmp_path, "--iou-thrs", "0.5", "--f1-thrs", "0.5:0.1:0.9",
                               "--max-dets", "100")["metrics"]
    assert metrics["AP_IoU"] == GOLDEN["AP50"] and "AP75" not in metrics
    assert "AR@100" in metrics and "AR@1" not in metrics


def test_threads_byte_identical(tmp_path):
    evaluate_fixture(tmp_path, name="a.json")
    out = tmp_path / "b.json"
    assert main(["evaluate", "--gt", GT, "--pred", PRED, "--ontology", ONTO, "--out", str(out),
                 "--threads", "4"]) == 0
    assert (tmp_path / "a.json").read_bytes() == out.read_bytes()


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_threads() == 3
    monkeypatch.delenv(THREADS_ENV)
    assert default_threads() >= 1


# -- other commands -----------------------------------------------------------------


def test_analyze_outputs(tmp_path):
    out = tmp_path / "analysis"
    assert main(["analyze", "--gt", GT, "--pred", PRED, "--out", str(out),
                 "--scope", "supercategory", "--threads", "1"]) == 0
    doc = json.loads((out / "breakdown.json").read_text())
    rows = list(csv.DictReader((out / "auc.csv").open()))
    assert {r["scope"] for r in rows} == set(doc)
    assert len(list(out.glob("pr_*.csv"))) == len(doc)
    for scope in doc:
        auc = [float(r["auc"]) for r in rows if r["scope"] == scope]
        assert all(a <= b for a, b in zip(auc, auc[1:])) and auc[-1] == 1.0


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--gt", GT, "--pred", PRED, "--out", str(out), "--grid-step", "0.1",
                 "--f1-mode", "micro", "--threads", "1"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["f1_threshold"]) for r in rows] == [round(0.1 * i, 10) for i in range(11)]
    assert {r["f1_mode"] for r in rows} == {"micro"}
    aps = [float(r["ap"]) for r in rows]
    assert all(a >= b for a, b in zip(aps, aps[1:]))


def test_stats_outputs(tmp_path):
    out = tmp_path / "stats"
    assert main(["stats", "--gt", GT, "--replicates", "200", "--seed", "4", "--out", str(out),
                 "--threads", "1"]) == 0
    doc = json.loads((out / "stats.json").read_text())
    assert doc["seed"] == 4 and doc["replicates"] == 200
    names = [s["metric"] for s in doc["summaries"]]
    assert sorted(p.stem for p in out.glob("hist_*.csv")) == sorted(f"hist_{n}" for n in names)
    again = tmp_path / "again"
    main(["stats", "--gt", GT, "--replicates", "200", "--seed", "4", "--out", str(again),
          "--threads", "2"])
    assert (out / "stats.json").read_bytes() == (again / "stats.json").read_bytes()


def test_validate(capsys):
    assert main(["validate", "--gt", GT]) == 0
    assert capsys.readouterr().out == ""
    assert main(["validate", "--gt", str(DATA / "bad_gt.json")]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and "inapplicable" in lines[0].lower()


def test_validate_limit(tmp_path, capsys):
    doc = json.loads((DATA / "bad_gt.json").read_text())
    bad = next(a for a in doc["annotations"] if a["id"] == 3)
    extra = dict(bad, id=999)
    doc["annotations"].append(extra)
    path = tmp_path / "bad2.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--gt", str(path), "--max-violations", "1"]) == 1
    captured = capsys.readouterr()
    assert len(captured.out.splitlines()) == 1 and "1 more" in captured.err


def test_convert_idempotent(tmp_path):
    once, twice = tmp_path / "once.json", tmp_path / "twice.json"
    assert main(["convert", "--gt", GT, "--to", "mask", "--out", str(once)]) == 0
    assert main(["convert", "--gt", str(once), "--to", "mask", "--out", str(twice)]) == 0
    assert once.read_bytes() == twice.read_bytes()
    anns = json.loads(once.read_text())["annotations"]
    assert all(isinstance(a["segmentation"], dict) for a in anns)


def test_convert_passthrough_keeps_polygons(tmp_path):
    out = tmp_path / "same.json"
    assert main(["convert", "--gt", GT, "--to", "polygon-passthrough", "--out", str(out)]) == 0
    anns = json.loads(out.read_text())["annotations"]
    assert any(isinstance(a["segmentation"], list) for a in anns)


# -- exit codes -------------------------------------------------------------------

USAGE = {
    "evaluate": ["--gt", GT, "--pred", PRED, "--out", "x.json"],
    "analyze": ["--gt", GT, "--pred", PRED, "--out", "x"],
    "sweep": ["--gt", GT, "--pred", PRED, "--out", "x.csv"],
    "stats": ["--gt", GT, "--out", "x"],
    "validate": ["--gt", GT],
    "convert": ["--gt", GT, "--to", "mask", "--out", "x.json"],
}


@pytest.mark.parametrize("command", sorted(USAGE))
def test_unknown_flag_is_usage_error(command, capsys):
    assert main([command, *USAGE[command], "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("command", sorted(USAGE))
def test_help_exits_zero(command, capsys):
    assert main([command, "--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["evaluate", "--gt", GT]) == 2
    assert main(["evaluate", "--gt", GT, "--pred", PRED, "--out", "x", "--iou-thrs", "a:b"]) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == f"attrseg {__version__} (report format 1)"


def test_data_error_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    code = run(["analyze", "--gt", GT, "--pred", str(tmp_path / "missing.json"),
                "--out", str(out)]).exit_code
    assert code == 3 and "error" in capsys.readouterr().err
    assert not out.exists()
    bad = tmp_path / "bad.json"
    bad.write_text("[{\"image_id\": 1}]")
    assert main(["evaluate", "--gt", GT, "--pred", str(bad), "--out", str(tmp_path / "r.json")]) == 3
    assert list(tmp_path.iterdir()) == [bad]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "attrseg", "validate", "--gt", GT],
                          capture_output=True, text=True)
    assert proc.returncode == 0
