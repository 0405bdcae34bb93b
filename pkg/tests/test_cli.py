import json
import math
import subprocess
import sys

import numpy as np
import pytest

from crgeom import cli


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_invariants_pass(tmp_path):
    code, out = _run(tmp_path, "--task", "invariants", "--grid", "6x6x6")
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["schema"] == cli.SCHEMA and s["status"] == "pass"
    assert {r["name"] for r in s["records"]} >= {"levi_min", "max_R"}
    assert (out / "invariants.csv").exists()


def test_violation_exits_2_and_names_record(tmp_path, capsys):
    code, out = _run(tmp_path, "--task", "invariants", "--grid", "6x6x6", "--threshold", "-1")
    assert code == 2
    assert "contract violation" in capsys.readouterr().err
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "fail"
    assert any(r["name"] == "max_R" and not r["pass"] for r in s["records"])


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "green", "model": "nilmanifold", "grid": [6, 6, 6]}))
    code, out = _run(tmp_path, "--config", str(cfg), "--task", "invariants")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["task"] == "invariants"


@pytest.mark.parametrize(
    "args",
    [["--task", "nope"], ["--task", "invariants", "--grid", "6x"], ["--config", "/nonexistent/c.json"], ["--bogus-flag"], ["--seed", "x"]],
)
def test_bad_input_exits_1(tmp_path, capsys, args):
    code, _ = _run(tmp_path, *args)
    assert code == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


def test_invalid_json_and_model(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{task: 1")
    assert _run(tmp_path, "--config", str(bad))[0] == 1
    bad.write_text(json.dumps({"task": "invariants", "model": "torus"}))
    assert _run(tmp_path, "--config", str(bad))[0] == 1
    bad.write_text(json.dumps({"task": "invariants", "grid": [4, 4]}))
    assert _run(tmp_path, "--config", str(bad))[0] == 1


def test_parse_grid():
    assert cli.parse_grid("8x16X4") == [8, 16, 4]
    with pytest.raises(cli.ConfigError):
        cli.parse_grid("0x4x4")


def test_clean_non_finite():
    out = cli._clean({"a": np.float64(math.nan), "b": [np.int64(3), np.bool_(True)], "c": np.array([1.0, math.inf])})
    assert out == {"a": "nan", "b": [3, True], "c": [1.0, "inf"]}
    json.dumps(out, allow_nan=False)


def test_record_relations():
    assert cli.record("x", 0.5, [0.4, 0.6], "in")["pass"]
    assert not cli.record("x", math.nan, 1.0)["pass"]
    assert cli.record("x", 2.0, 1.0, ">")["pass"]
    with pytest.raises(ValueError):
        cli.record("x", 1.0, 1.0, "~")


def test_trig_field_spec():
    f = cli.trig_field({"terms": [[2.0, [1, 0, 0], 0.0]]})
    assert float(f.values(np.zeros((1, 3)))[0]) == pytest.approx(2.0)
    with pytest.raises(cli.ConfigError):
        cli.trig_field({"terms": [[1.0]]})


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "crgeom", "--task", "bogus", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 1 and r.stderr.startswith("error:")
