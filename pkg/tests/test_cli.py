import hashlib
import json
import shutil
import subprocess

import pytest

from conftest import DATA
from jordanhydro.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main

JB3 = str(DATA / "jb3.toml")


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def manifest(out):
    m = json.loads((out / "manifest.json").read_text())
    for f in m["files"]:
        data = (out / f["name"]).read_bytes()
        assert f["bytes"] == len(data)
        assert f["sha256"] == hashlib.sha256(data).hexdigest()
    return m


def test_check_passes_and_is_deterministic(tmp_path):
    code, a = run(tmp_path, "a", "check", "--config", JB3)
    assert code == EXIT_OK
    m = manifest(a)
    assert m["passed"] and m["exit_code"] == 0 and m["command"] == "check"
    rep = json.loads((a / "report.json").read_text())
    assert rep["points"] == 100 and all(r["passed"] for r in rep["checks"])
    _, b = run(tmp_path, "b", "check", "--config", JB3)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


@pytest.mark.parametrize("name", ["blocks21", "blocks22", "blocks32", "blocks4", "blocks211",
                                  "diagonal"])
def test_check_bundled_examples(tmp_path, name):
    code, _ = run(tmp_path, name, "check", "--config", str(DATA / f"{name}.toml"))
    assert code == EXIT_OK


def test_non_darboux_tsarev_field_fails(tmp_path):
    text = (DATA / "jb3.toml").read_text().replace('"u1 - eps1*u1"', '"u1 - eps1*u1 - 0.5*u2"')
    cfg = tmp_path / "eps2.toml"
    cfg.write_text(text)
    code, out = run(tmp_path, "check", "check", "--config", str(cfg))
    assert code == EXIT_FAIL
    rep = json.loads((out / "report.json").read_text())
    dep = rep["checks"][0]
    assert dep["check"] == "Darboux-Tsarev dependence" and not dep["passed"]
    code, out = run(tmp_path, "solve", "solve", "symmetries", "--config", str(cfg))
    assert code == EXIT_FAIL
    assert manifest(out)["exit_code"] == EXIT_FAIL


def test_solve_symmetries_writes_csv(tmp_path):
    code, out = run(tmp_path, "s", "solve", "symmetries", "--config", JB3)
    assert code == EXIT_OK
    lines = (out / "symmetries.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["u_1", "u_2", "u_3"]
    assert len(lines) == 4
    assert [f["name"] for f in manifest(out)["files"]] == ["symmetries.csv", "report.json"]


def test_hodograph(tmp_path):
    code, out = run(tmp_path, "h", "hodograph", "--config", JB3)
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"]
    assert len((out / "hodograph.csv").read_text().splitlines()) == 41 * 41 + 1


@pytest.mark.parametrize("args, fragment", [
    (["check"], "--config is required"),
    (["check", "--config", "/nonexistent.toml"], "cannot read"),
    (["check", "--config", JB3, "--step", "-1"], "--step"),
    (["solve", "metric", "--config", str(DATA / "blocks21.toml")], "metric"),
])
def test_config_errors_exit_2(tmp_path, capsys, args, fragment):
    assert main([*args, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_malformed_expression_reports_offset(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text((DATA / "jb3.toml").read_text().replace('"u2", "u3"]', '"u2 *", "u3"]', 1))
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "byte offset 4" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("jordanhydro") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["jordanhydro", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "jordanhydro" in res.stdout


def test_solve_metric_checks_flatness(tmp_path):
    code, out = run(tmp_path, "m", "solve", "metric", "--config", JB3)
    assert code == EXIT_OK
    assert (out / "metric.csv").exists()


def test_reproduce_jb3_uses_bundled_data(tmp_path):
    code, out = run(tmp_path, "r", "reproduce-jb3")
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and manifest(out)["arguments"]["config"].endswith("jb3.toml")
