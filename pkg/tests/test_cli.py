from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import pytest

from bifurcate import svg
from bifurcate.cli import run
from bifurcate.config import ConfigError, parse_config
from bifurcate.outputs import csv_text, fmt, json_text, read_csv, read_json, write_json
from bifurcate.reference_diagrams import case_fixture, letter_fixture

ROOT = Path(__file__).resolve().parents[1]
QUICK = ROOT / "configs" / "quick.cfg"


def _cfg(tmp_path: Path, text: str, name: str = "run.cfg") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def _call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("text, line, fragment", [
    ("family = elliptic\ncolour = red\n", 2, "unknown key 'colour'"),
    ("# header\nfamily elliptic\n", 2, "expected 'key = value'"),
    ("family = elliptic\nregion = 1,0,0,1\n", 2, "nonempty"),
    ("family = elliptic\ngrid = 41\ngrid = 11\n", 3, "repeats line 2"),
    ("family = elliptic\n\n\nscan_n = 2\n", 4, "at least 3"),
    ("family = elliptic\natol = -1\n", 2, "positive"),
    ("family = bump\nbump.sigma = 0\n", 2, "sigma"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "run.cfg")
    assert info.value.line == line
    assert f"run.cfg:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_config_comments_and_defaults():
    cfg = parse_config("family = perturbed  # trailing comment\n# full line\nx = 0.5, -0.25\nfigures = no\n")
    assert cfg.family.name == "perturbed"
    assert cfg.x == (0.5, -0.25)
    assert cfg.figures is False
    assert (cfg.circle_n, cfg.grid, cfg.scan_n) == (720, 41, 360)
    with pytest.raises(ConfigError, match="family"):
        parse_config("grid = 3\n")


def test_config_error_exit_code(tmp_path, capsys):
    code, _, err = _call(capsys, "caustic", "--config", _cfg(tmp_path, "family = elliptic\nwat = 1\n"))
    assert code == 1
    assert "error [config]" in err and ":2:" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = _call(capsys, "caustic", "--config", tmp_path / "nope.cfg")
    assert code == 1 and "error [config]" in err


def test_usage_errors_exit_with_one(capsys):
    with pytest.raises(SystemExit) as info:
        run(["fly", "--config", str(QUICK)])
    assert info.value.code == 1
    assert "error [cli]" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        run(["portrait", "--config", str(QUICK), "--x", "1"])
    assert info.value.code == 1


def test_downstream_errors_name_their_module(tmp_path, capsys):
    cfg = _cfg(tmp_path, "family = fold\nwindow = 1,2,-1,1\n")
    code, _, err = _call(capsys, "caustic", "--config", cfg, "--out", tmp_path / "o")
    assert code == 1
    assert "error [caustic]: EmptyCaustic" in err


def test_invalid_thread_cap_is_an_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("BIFURCATE_THREADS", "many")
    code, _, err = _call(capsys, "critpts", "--config", QUICK, "--out", tmp_path)
    assert code == 1 and "error [parallel]" in err


def test_caustic_and_critpts(tmp_path, capsys):
    code, out, _ = _call(capsys, "caustic", "--config", QUICK, "--out", tmp_path)
    assert code == 0 and "wrote" in out
    rows = read_csv(tmp_path / "caustic.csv")
    assert list(rows[0]) == ["arc_id", "x1", "x2", "feature"]
    assert sum(r["feature"] == "cusp_vertex" for r in rows) == 3
    code, _, _ = _call(capsys, "critpts", "--config", QUICK, "--out", tmp_path, "--x", "0,0")
    assert code == 0
    rows = read_csv(tmp_path / "critical_points.csv")
    assert list(rows[0]) == ["x1", "x2", "y1", "y2", "lambda1", "lambda2", "class", "label"]
    assert sorted(r["label"] for r in rows) == ["n", "s1", "s2", "s3"]


def test_portrait_of_the_inner_region(tmp_path, capsys):
    code, _, _ = _call(capsys, "portrait", "--config", QUICK, "--out", tmp_path, "--x", "0,0")
    assert code == 0
    data = read_json(tmp_path / "portrait.json")
    assert len(data["nodes"]) == 4
    assert [(e["kind"], e["source"]) for e in data["edges"]] == [("node_to_saddle", "n")] * 3
    assert read_csv(tmp_path / "trajectory.csv")[0].keys() == {"t", "y1", "y2"}


def test_scan_writes_samples_and_zeros(tmp_path, capsys):
    code, _, _ = _call(capsys, "scan", "--config", QUICK, "--out", tmp_path, "--r", "1")
    assert code == 0
    zeros = read_csv(tmp_path / "scan_zeros.csv")
    assert len(zeros) == 3
    code, _, err = _call(capsys, "scan", "--config", QUICK, "--out", tmp_path, "--r", "-1")
    assert code == 1 and "[config]" in err


def test_validate_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    bad = tmp_path / "bad.json"
    write_json(good, letter_fixture("A").to_dict())
    write_json(bad, case_fixture("d").to_dict())
    code, out, _ = _call(capsys, "validate", "--config", QUICK, "--out", tmp_path, "--diagram", good)
    assert code == 0
    assert read_json(tmp_path / "topology.json")["letter"] == "A"
    code, out, _ = _call(capsys, "validate", "--config", QUICK, "--out", tmp_path, "--diagram", bad)
    assert code == 2
    assert "violation R5" in out
    assert read_json(tmp_path / "violations.json")["summary"] == {"R5": 1}
    code, _, err = _call(capsys, "validate", "--config", QUICK, "--out", tmp_path / "empty")
    assert code == 1 and "FileNotFoundError" in err


def test_svgs_are_functions_of_their_sibling_files(tmp_path, capsys):
    assert _call(capsys, "caustic", "--config", QUICK, "--out", tmp_path)[0] == 0
    assert _call(capsys, "scan", "--config", QUICK, "--out", tmp_path)[0] == 0
    assert _call(capsys, "portrait", "--config", QUICK, "--out", tmp_path)[0] == 0
    assert (tmp_path / "caustic.svg").read_text() == svg.caustic_svg(tmp_path / "caustic.csv")
    assert (tmp_path / "scan.svg").read_text() == svg.scan_svg(tmp_path / "scan.csv")
    assert (tmp_path / "portrait.svg").read_text() == svg.portrait_svg(tmp_path / "portrait.json")
    # editing the data changes the figure
    csv_path = tmp_path / "caustic.csv"
    csv_path.write_text(csv_path.read_text().replace("cusp_vertex", "fold"))
    assert svg.caustic_svg(csv_path) != (tmp_path / "caustic.svg").read_text()


def test_outputs_do_not_depend_on_the_worker_count(tmp_path, capsys, monkeypatch):
    texts = []
    for threads in ("1", "2"):
        monkeypatch.setenv("BIFURCATE_THREADS", threads)
        out = tmp_path / threads
        for cmd in ("critpts", "scan"):
            assert _call(capsys, cmd, "--config", QUICK, "--out", out)[0] == 0
        texts.append([(out / n).read_bytes() for n in ("critical_points.csv", "scan.csv", "scan_zeros.csv")])
    assert texts[0] == texts[1]


def test_number_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(-0.0) == "0"
    assert fmt(None) == "" and fmt(True) == "true"
    assert csv_text(["a", "b"], [[1.5, "x"]]) == "a,b\n1.5,x\n"
    assert json_text({"b": [1.0, float("nan")], "a": None}) == '{\n "b": [1, null],\n "a": null\n}\n'


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "bifurcate", "caustic", "--config", str(QUICK), "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "caustic.svg").read_text().startswith("<svg")
