from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from cylends.cli import main
from cylends.config import DEFAULTS, ConfigError, load, validate
from cylends.report import dumps


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_run_is_deterministic(tmp_path, capsys):
    blobs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main(["run", "--scenario", "flat", "--out", str(out), "--format", "both"]) == 0
        blobs.append((out / "flat.json").read_bytes())
    assert blobs[0] == blobs[1]
    report = json.loads(blobs[0])
    assert report["status"] == "PASS"
    assert "timings" not in report
    with open(tmp_path / "0" / "flat_spectrum.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) > 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cylends", "indicial", "--scenario", "flat"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "indicial.roots" in proc.stdout


def test_schema_error_names_field_and_line(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.json", '{\n  "name": "x",\n  "manifold": {\n    "grid_h": -1\n  }\n}\n')
    assert main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "manifold.grid_h" in err and "line 4" in err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.json", '{"name": "x", "grid": 3}')
    assert main(["spectrum", "--config", cfg]) == 2
    assert "grid" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.json", '{\n  "name": "x",\n}\n')
    assert main(["run", "--config", cfg]) == 2
    assert "line 3" in capsys.readouterr().err


def test_inconsistent_model_is_config_error():
    with pytest.raises(ConfigError):
        validate({"manifold": {"warp": {"kind": "cigar", "params": [1.0]}}})
    with pytest.raises(ConfigError):
        validate({"asymptotics": {"C": [1.0]}})


def test_tampered_tolerance_fails(tmp_path, capsys):
    cfg = _write(tmp_path / "t.json", json.dumps({"name": "tamper", "stages": ["bochner"],
                                                  "manifold": {"warp": {"kind": "sech_bump",
                                                                        "params": [1.0, 0.3, 0.0, 1.0]}},
                                                  "tolerances": {"bochner_c": 0.0}}))
    assert main(["run", "--config", cfg]) == 1
    assert "FAIL " in capsys.readouterr().out


def test_cigar_slope_is_expected_failure(capsys):
    assert main(["harmonic", "--scenario", "cigar", "--C", "1"]) == 0
    out = capsys.readouterr().out
    assert "FAIL-expected harmonic.obstruction" in out


def test_suite_filter(tmp_path, capsys):
    assert main(["suite", "--filter", "indicial", "--out", str(tmp_path), "--format", "both"]) == 0
    report = json.loads((tmp_path / "suite.json").read_text())
    assert [c["criterion"] for c in report["criteria"]] == [1, 2]
    assert (tmp_path / "suite_criteria.csv").exists()
    assert main(["suite", "--filter", "nothing-matches"]) == 2


def test_config_roundtrip(tmp_path):
    path = _write(tmp_path / "full.json", dumps(DEFAULTS))
    assert load(path) == validate(json.loads(dumps(DEFAULTS)))


def test_canonical_json_special_values():
    text = dumps({"b": float("nan"), "a": [float("inf"), 0.1], "c": {"z": 1, "y": True}})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert '"NaN"' in text and '"Infinity"' in text and "0.10000000000000001" in text
