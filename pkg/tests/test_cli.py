import json
import os
import subprocess
import sys
from pathlib import Path

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "holoscope", *args],
                          capture_output=True, text=True, cwd=cwd)


def export(name, directory) -> Path:
    target = Path(directory) / f"{name}.json"
    result = run_cli("gallery", "export", name, "--out", str(target))
    assert result.returncode == 0, result.stderr
    return target


def test_gallery_list_contains_builtins():
    result = run_cli("gallery", "list")
    assert result.returncode == 0
    names = result.stdout.split()
    assert "mobius" in names
    assert "annulus" in names


def test_gallery_unknown_name_exits_2():
    result = run_cli("gallery", "export", "definitely_not_a_thing")
    assert result.returncode == 2
    assert "unknown gallery instance" in result.stderr


def test_missing_config_exits_2(tmp_path):
    result = run_cli("run", str(tmp_path / "absent.json"))
    assert result.returncode == 2


def test_schema_error_reports_pointer(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"codim": 1, "leaf_dim": 1, "charts": [{"id": "A"}],
                                  "transitions": [{"src": "A"}]}))
    result = run_cli("run", str(config))
    assert result.returncode == 2
    assert "/transitions/0" in result.stderr


def test_expression_error_reports_offset(tmp_path):
    config = tmp_path / "bad_expr.json"
    config.write_text(json.dumps({
        "codim": 1, "leaf_dim": 1,
        "charts": [{"id": "A"}, {"id": "B"}],
        "transitions": [
            {"src": "A", "dst": "B", "y_map": ["y1 +"], "domain": {"lo": [-1], "hi": [1]}},
            {"src": "B", "dst": "A", "y_map": ["y1"], "domain": {"lo": [-1], "hi": [1]}},
        ],
        "paths": [], "tasks": [],
    }))
    result = run_cli("run", str(config))
    assert result.returncode == 2
    assert "offset" in result.stderr


def test_mobius_golden_report(tmp_path):
    config = export("mobius", tmp_path)
    result = run_cli("run", str(config), "--order", "1")
    assert result.returncode == 0, result.stderr
    assert result.stdout == (GOLDEN / "mobius_order1.json").read_text()


def test_mobius_classify_classes(tmp_path):
    config = export("mobius", tmp_path)
    result = run_cli("run", str(config), "--order", "1")
    report = json.loads(result.stdout)
    assert report["schema"] == "holoscope/1"
    classify = next(t for t in report["tasks"] if t["kind"] == "classify")
    assert [c["members"] for c in classify["classes"]] == \
        [["id", "loop2"], ["loop", "loop3"], ["arc"]]
    assert "caveat" in classify


def test_reports_are_deterministic_across_runs_and_jobs(tmp_path):
    for name in ("mobius", "annulus", "mobius_bundle"):
        config = export(name, tmp_path)
        outputs = {run_cli("run", str(config), "--jobs", str(jobs)).stdout
                   for jobs in (1, 1, 8)}
        assert len(outputs) == 1, name


def test_broken_cocycle_exits_1(tmp_path):
    config = tmp_path / "broken.json"
    box = {"lo": [-1.0], "hi": [1.0]}
    config.write_text(json.dumps({
        "codim": 1, "leaf_dim": 1,
        "charts": [{"id": c} for c in "ABC"],
        "transitions": [
            {"src": "A", "dst": "B", "y_map": ["2*y1"], "domain": box},
            {"src": "B", "dst": "A", "y_map": ["y1/2"], "domain": box},
            {"src": "B", "dst": "C", "y_map": ["3*y1"], "domain": box},
            {"src": "C", "dst": "B", "y_map": ["y1/3"], "domain": box},
            {"src": "A", "dst": "C", "y_map": ["5*y1"], "domain": box},
            {"src": "C", "dst": "A", "y_map": ["y1/5"], "domain": box},
        ],
        "paths": [],
        "tasks": [{"kind": "validate", "params": {}}],
    }))
    result = run_cli("run", str(config))
    assert result.returncode == 1
    report = json.loads(result.stdout)
    assert not report["ok"]
    assert report["tasks"][0]["cocycle"]["violations"]


def test_order_zero_reduces_classify_to_endpoints(tmp_path):
    config = export("mobius", tmp_path)
    result = run_cli("run", str(config), "--order", "0")
    report = json.loads(result.stdout)
    classify = next(t for t in report["tasks"] if t["kind"] == "classify")
    # at order 0 only endpoints count: all loops collapse, the arc stays apart
    assert [c["members"] for c in classify["classes"]] == \
        [["id", "loop", "loop2", "loop3"], ["arc"]]


def test_huge_tolerance_collapses_classes(tmp_path):
    config = export("annulus", tmp_path)
    strict = run_cli("run", str(config), "--order", "1")
    loose = run_cli("run", str(config), "--order", "1", "--tol", "10")

    def classes(result):
        report = json.loads(result.stdout)
        task = next(t for t in report["tasks"] if t["kind"] == "classify")
        return [c["members"] for c in task["classes"]]

    # at the default tolerance the loop powers are distinct; a huge tolerance
    # collapses them (documented footgun); chart mismatches never collapse
    assert classes(strict) == [["id"], ["loop"], ["loop2"], ["loop3"], ["arc"]]
    assert classes(loose) == [["id", "loop", "loop2", "loop3"], ["arc"]]


def test_pretty_rendering(tmp_path):
    config = export("mobius", tmp_path)
    result = run_cli("run", str(config), "--pretty")
    assert result.returncode == 0
    assert "classes" in result.stdout
    assert "holoscope report" in result.stdout


def test_export_reimport_reports_identical(tmp_path):
    # exporting, then exporting the reloaded document again, changes nothing
    first = export("suspension", tmp_path)
    report_a = run_cli("run", str(first), "--order", "2").stdout
    report_b = run_cli("run", str(first), "--order", "2").stdout
    assert report_a == report_b
    data = json.loads(first.read_text())
    clone = tmp_path / "clone.json"
    clone.write_text(json.dumps(data, indent=2) + "\n")
    report_c = run_cli("run", str(clone), "--order", "2").stdout
    assert report_a == report_c


def test_bundle_transport_task(tmp_path):
    config = export("mobius_bundle", tmp_path)
    result = run_cli("run", str(config))
    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    transport = next(t for t in report["tasks"] if t["kind"] == "transport")
    assert transport["fibre_point"] == [0.5]
    assert transport["fibre_image"] == [-0.5]


def test_figures_written(tmp_path):
    config = export("mobius", tmp_path)
    figure_dir = tmp_path / "figs"
    result = run_cli("run", str(config), "--figures", str(figure_dir))
    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    produced = [t.get("figure") for t in report["tasks"] if "figure" in t]
    assert produced
    for path in produced:
        assert os.path.exists(path)


def test_order_flag_bounds(tmp_path):
    config = export("mobius", tmp_path)
    result = run_cli("run", str(config), "--order", "99")
    assert result.returncode == 2
