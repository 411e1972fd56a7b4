"""Every acceptance criterion at its stated tolerance, one PASS/FAIL line each."""
from __future__ import annotations

import subprocess
import sys

import pytest

from cylends import acceptance


@pytest.mark.parametrize("entry", acceptance.CRITERIA, ids=[f"c{c[0]:02d}_{c[1]}" for c in acceptance.CRITERIA])
def test_criterion(entry, capsys):
    result = acceptance.run_criterion(entry)
    with capsys.disabled():
        print("\n" + result.line() + f" [{result.seconds:.2f}s]")
        for v in result.verdicts:
            print("    " + v.line())
    failing = [v.line() for v in result.verdicts if v.status == "FAIL"]
    assert not failing, failing
    if result.limit_seconds is not None:
        assert result.seconds <= result.limit_seconds


def test_cli_suite_is_byte_identical(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "cylends", "suite", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outputs.append((out / "suite.json").read_bytes())
    assert outputs[0] == outputs[1]
