import csv
import subprocess
import sys

import pytest

from multisaddle.cli import EXIT_OK, EXIT_USAGE, mesh_width, run
from multisaddle.verify import CHECKS, run_all


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestMeshWidth:
    @pytest.mark.parametrize("text", ["0.0625", "1/16", "2^-4"])
    def test_forms(self, text):
        assert mesh_width(text) == 0.0625

    @pytest.mark.parametrize("text", ["0.1", "1", "2^0", "-0.5", "abc", "0"])
    def test_rejects(self, text):
        import argparse
        with pytest.raises(argparse.ArgumentTypeError):
            mesh_width(text)


class TestSubcommands:
    def test_eig_bounds(self, tmp_path, capsys):
        out = tmp_path / "eig.csv"
        assert run(["eig-bounds", "--k", "2", "--trials", "5", "--seed", "1", "--out", str(out)]) == EXIT_OK
        rows = _csv(out)
        assert rows[0] == ["k", "trial", "preconditioner", "eigenvalue"]
        assert len(rows) > 1 and all(r[0] == "2" for r in rows[1:])
        assert "0 outside" in capsys.readouterr().err

    def test_iters_random(self, tmp_path):
        out = tmp_path / "it.csv"
        assert run(["iters-random", "--k", "1", "--trials", "10", "--seed", "1", "--out", str(out)]) == EXIT_OK
        rows = _csv(out)[1:]
        pk = [int(r[3]) for r in rows if r[1] == "Pkhat"]
        assert len(pk) == 10 and 6 <= sum(pk) / 10 <= 12

    def test_cheb_sweep_small(self, tmp_path):
        out = tmp_path / "c.csv"
        code = run(["cheb-sweep", "--h", "2^-3", "--cheb-m", "1", "5", "--out", str(out)])
        assert code == EXIT_OK
        rows = _csv(out)
        assert rows[0] == ["h", "m", "preconditioner", "iterations", "converged"]
        assert len(rows) == 5

    def test_verify(self, capsys):
        assert run(["verify"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == len(CHECKS) and all(l.startswith("PASS") for l in lines)

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            run(["eig-perturbed", "--k", "1", "--trials", "2", "--seed", "3", "--out", str(p)])
        assert a.read_bytes() == b.read_bytes()

    def test_full_precision(self, tmp_path):
        out = tmp_path / "e.csv"
        run(["eig-bounds", "--k", "1", "--trials", "1", "--out", str(out)])
        value = _csv(out)[1][3]
        assert float(value) == float("%.17g" % float(value))
        assert len(value.lstrip("-").replace(".", "").split("e")[0]) >= 15


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["bogus"],
        ["pde-double", "--h", "0.1"],
        ["eig-bounds", "--k", "0"],
        ["cheb-sweep", "--alpha", "1", "0.1"],
        ["pde-double", "--cheb-m", "1", "2"],
        ["iters-random", "--stopping", "nope"],
    ])
    def test_exit_two(self, argv):
        assert run(argv) == EXIT_USAGE

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "multisaddle", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "verify" in proc.stdout


def test_run_all_reports_every_check():
    results = run_all()
    assert [r[0] for r in results] == list(CHECKS)
    assert all(r[1] for r in results)
