from __future__ import annotations

import json
import subprocess
import sys

import pytest
import yaml

from nsklab import __version__
from nsklab.cli import EXIT_ABORT, EXIT_INVALID, EXIT_OK, run
from nsklab.config import RunConfig
from nsklab.io import read_snapshot, read_trajectory

from test_solver import run_doc


def write_cfg(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


class TestExitCodes:
    def test_codes(self):
        assert (EXIT_OK, EXIT_INVALID, EXIT_ABORT) == (0, 1, 2)

    def test_unknown_flag(self, capsys):
        assert run(["simulate", "--bogus"]) == EXIT_INVALID
        assert "usage error" in capsys.readouterr().err

    def test_missing_subcommand(self):
        assert run([]) == EXIT_INVALID

    def test_invalid_config(self, tmp_path, capsys):
        p = write_cfg(tmp_path, run_doc(params={"lambda": -3.0}))
        assert run(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_INVALID
        assert "2μ+λ>0 violated" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        p = write_cfg(tmp_path, run_doc())
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run(["simulate", "--config", str(p), "--out", str(blocker / "sub")]) == EXIT_INVALID
        assert "cannot write output directory" in capsys.readouterr().err

    def test_numerical_abort(self, tmp_path):
        doc = run_doc(stepper={"dt": 0.05, "T": 0.5}, data={"velocity_amplitude": 200.0})
        p = write_cfg(tmp_path, doc)
        out = tmp_path / "o"
        assert run(["simulate", "--config", str(p), "--out", str(out), "--quiet"]) == EXIT_ABORT
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"].startswith("aborted")

    def test_version_subprocess(self):
        res = subprocess.run([sys.executable, "-m", "nsklab", "--version"], capture_output=True, text=True)
        assert res.returncode == 0
        assert __version__ in res.stdout


class TestSimulate:
    def test_outputs_and_manifest(self, tmp_path):
        doc = run_doc()
        p = write_cfg(tmp_path, doc)
        out = tmp_path / "o"
        assert run(["simulate", "--config", str(p), "--out", str(out), "--quiet"]) == EXIT_OK
        for name in ("trajectory.bin", "diagnostics.csv", "energy.csv", "linf.csv", "manifest.json"):
            assert (out / name).exists()
        m = json.loads((out / "manifest.json").read_text())
        assert m["version"] == __version__
        assert m["config_hash"] == RunConfig.from_dict(doc).hash()
        assert m["verdicts"]["energy"]["passed"]
        assert len(read_trajectory(out / "trajectory.bin")) == 11

    def test_deterministic_with_seed(self, tmp_path):
        p = write_cfg(tmp_path, run_doc())
        for d in ("a", "b"):
            assert run(["simulate", "--config", str(p), "--out", str(tmp_path / d), "--seed", "5", "--quiet"]) == 0
        for name in ("diagnostics.csv", "energy.csv", "trajectory.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        m = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert m["config"]["seed"] == 5


class TestData:
    def test_profile_field(self, tmp_path):
        doc = {"grid": {"dim": 1, "n": 1024}, "data": {"kind": "homogeneous_profile", "sigma": 0.5}}
        p = write_cfg(tmp_path, doc)
        out = tmp_path / "o"
        assert run(["data", "--config", str(p), "--out", str(out), "--quiet"]) == EXIT_OK
        f = read_snapshot(out / "field.bin")
        assert f.grid.n == 1024
        norms = json.loads((out / "norms.json").read_text())
        assert set(norms) >= {"l2", "linf", "besov", "block_l2_norms"}
        assert (out / "slice.csv").read_text().startswith("x,value\n")

    def test_besov_of_snapshot(self, tmp_path, capsys):
        doc = {"grid": {"dim": 1, "n": 256}, "data": {"kind": "gaussian_bump", "amplitude": 0.3, "width": 0.4}}
        p = write_cfg(tmp_path, doc)
        out = tmp_path / "o"
        run(["data", "--config", str(p), "--out", str(out), "--quiet"])
        capsys.readouterr()
        assert run(["besov", "--input", str(out / "field.bin"), "--spec", "0,2,2", "--spec", "1,2,inf"]) == 0
        res = json.loads(capsys.readouterr().out)
        assert set(res) == {"0,2,2", "1,2,inf"}

    def test_besov_bad_spec(self, tmp_path):
        doc = {"grid": {"dim": 1, "n": 64}, "data": {"kind": "gaussian_bump", "amplitude": 0.3}}
        p = write_cfg(tmp_path, doc)
        assert run(["besov", "--config", str(p), "--spec", "1,2"]) == EXIT_INVALID

    def test_besov_missing_input(self, tmp_path):
        assert run(["besov", "--input", str(tmp_path / "none.bin")]) == EXIT_INVALID


class TestSemigroup:
    def test_csv_and_verdict(self, tmp_path):
        out = tmp_path / "o"
        args = ["semigroup", "--mu", "1", "--kappa", "2", "--block", "2", "--samples", "20", "--out", str(out), "--quiet"]
        assert run(args) == EXIT_OK
        rows = (out / "semigroup.csv").read_text().strip().split("\n")
        assert rows[0] == "t,block_norm,k_l" and len(rows) == 21
        v = json.loads((out / "verdict.json").read_text())
        assert v["regime"] == "trigonometric" and v["k_l_monotone"]

    @pytest.mark.parametrize("args", [["--lambda", "-3"], ["--samples", "2"], ["--block", "40"]])
    def test_invalid(self, args):
        assert run(["semigroup", "--quiet", *args]) == EXIT_INVALID


class TestVerify:
    def test_fast_suite(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert run(["verify", "--suite", "tensor-identity", "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "[PASS] criterion  1" in text
        v = json.loads((out / "verdicts.json").read_text())
        assert v["tensor-identity"]["passed"]

    def test_unknown_suite(self):
        assert run(["verify", "--suite", "nope", "--quiet"]) == EXIT_INVALID

    def test_energy_suite_with_config(self, tmp_path):
        p = write_cfg(tmp_path, run_doc())
        assert run(["verify", "--suite", "energy", "--config", str(p), "--quiet"]) == EXIT_OK
