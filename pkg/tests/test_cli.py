from __future__ import annotations

import json
import math
import shutil
import subprocess

import pytest

from torsimax import cli

C = 1.0 / 3.0 + math.log(3.0) / 4.0


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_energy_inscribed_equilateral(capsys):
    code, out, _ = run(capsys, "energy", "--sides", "1.7320508,1.7320508,1.7320508", "--inscribed")
    assert code == 0
    assert json.loads(out)["energy"] == pytest.approx(C, abs=1e-7)


def test_energy_points_with_oracle(capsys):
    code, out, _ = run(capsys, "energy", "--points", "0,0 1,0 0,1", "--oracle")
    rep = json.loads(out)
    assert code == 0 and rep["method"] == "closed_form"
    assert rep["quadrature_relative_difference"] < 1e-6


def test_energy_exit_codes(capsys):
    assert run(capsys, "energy", "--points", "0,0 1,0 2,0")[0] == 3
    assert run(capsys, "energy", "--points", "0,0 1,x 2,0")[0] == 2
    assert run(capsys, "energy", "--points", "0,0 1,0")[0] == 2
    assert run(capsys, "energy", "--sides", "1,1,1", "--inscribed")[0] == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["energy", "--bogus"])
    assert exc.value.code == 2


def test_floats_have_twelve_significant_digits(capsys):
    _, out, _ = run(capsys, "energy", "--sides", "1.7320508,1.7320508,1.7320508", "--inscribed")
    text = json.dumps(json.loads(out)["energy"])
    assert len(text.replace("0.", "", 1)) <= 12


def test_phi_disc(capsys):
    code, out, _ = run(capsys, "phi", "--domain", "disc", "--radius", "1", "--h", "0.004")
    assert code == 0 and json.loads(out)["ratio"] == pytest.approx(1 / 3, abs=1e-3)


def test_torsion_disc_centre(capsys):
    code, out, _ = run(capsys, "torsion", "--domain", "disc", "--p", "2", "--h", "0.01")
    rep = json.loads(out)
    assert code == 0 and rep["w_at_point"] == pytest.approx(0.25, rel=0.02)


def test_torsion_not_converged_exit_code(capsys):
    code, _, err = run(capsys, "torsion", "--domain", "disc", "--p", "6", "--h", "0.05",
                       "--max-iterations", "1")
    assert code == 4 and "converge" in err


def test_resolution_exit_code(capsys):
    code, _, _ = run(capsys, "sweep", "honeycomb", "--eps", "0.2", "--h", "0.1")
    assert code == 5


def test_corrupted_domain_file_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"eps": 1,\n "cells": [[1,1], [2,}\n')
    code, _, err = run(capsys, "phi-d", "--domain-file", str(bad))
    assert code == 2 and "line 2, column" in err
    bad.write_text('{"eps": 1, "cells": [[1, 1], [2]]}')
    assert run(capsys, "phi-d", "--domain-file", str(bad))[0] == 2
    assert run(capsys, "phi-d", "--domain-file", str(tmp_path / "missing.json"))[0] == 2


def test_phi_d_from_file_and_manifest(tmp_path, capsys):
    f = tmp_path / "q.json"
    f.write_text(json.dumps({"eps": 1.0, "cells": [[1, 1]]}))
    out = tmp_path / "rep.json"
    code, text, _ = run(capsys, "phi-d", "--domain-file", str(f), "--out", str(out))
    rep = json.loads(text)
    assert code == 0 and rep["ratio"] == pytest.approx(0.541075080047, rel=1e-10)
    manifest = json.loads((tmp_path / "rep.json.manifest.json").read_text())
    assert manifest["command"] == "phi-d" and manifest["outputs"] == [str(out)]
    assert {"parameters", "timestamp", "version"} <= set(manifest)


def test_sweep_is_deterministic_and_sorted(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "sweep", "honeycomb", "--eps", "0.2,0.1", "--h", "auto", "--out", str(a))[0] == 0
    monkeypatch.setenv("TORSIMAX_THREADS", "2")
    assert run(capsys, "sweep", "honeycomb", "--eps", "0.1,0.2", "--h", "auto", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "eps,h,ratio,limit_gap"
    eps = [float(l.split(",")[0]) for l in lines[1:]]
    assert eps == sorted(eps)
    assert float(lines[1].split(",")[1]) == pytest.approx(0.1 / 16)
    assert (tmp_path / "a.csv.manifest.json").exists()


@pytest.mark.parametrize("kind,extra", [
    ("perforated", ["--eps", "0.25", "--h", "0.03125"]),
    ("eps-lattice", ["--eps", "0.5,0.25"]),
    ("disc-union", ["--n", "1,2", "--h", "0.05"]),
])
def test_other_sweeps(capsys, kind, extra):
    code, out, _ = run(capsys, "sweep", kind, *extra)
    lines = out.splitlines()
    assert code == 0 and len(lines) >= 2 and "," in lines[0]


def test_verify_subset(capsys):
    code, out, _ = run(capsys, "verify", "--only", "1")
    assert code == 0
    assert "[PASS]  1." in out and "ln(3)/4" in out


@pytest.mark.skipif(shutil.which("torsimax") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["torsimax", "energy", "--points", "0,0 1,0 2,0"], capture_output=True, text=True)
    assert res.returncode == 3
