import subprocess
import sys

import numpy as np
import pytest

from swapqoc.cli import run_command
from swapqoc.controls import ControlSet

QUICK_CFG = """\
[propagation]
dt = 1e-4
[adiabatic]
phase_stride = 10
[grape]
cascade = 32:5e-4
stage_iterations = 2
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "quick.cfg").write_text(QUICK_CFG)
    ControlSet.linear_ramp(0.06, 1e-4).to_csv(d / "merge.csv")
    return d


def _run(workdir, *argv):
    return run_command([*argv, "--config", str(workdir / "quick.cfg")])


def test_eigen_separated(workdir, capsys):
    out = workdir / "eigen"
    assert _run(workdir, "eigen", "--out", str(out)) == 0
    text = capsys.readouterr().out
    line = [l for l in text.splitlines() if l.startswith("lowest other state")][0]
    assert float(line.split(":")[1].split()[0]) == pytest.approx(3.0, abs=0.5)
    for name in ("eigen_1p.csv", "eigen_2p.csv", "densities_1p.csv", "densities_2p.csv", "resolved_config.ini"):
        assert (out / name).is_file()


def test_adiabatic_writes_phase_and_densities(workdir, capsys):
    out = workdir / "adiabatic"
    assert _run(workdir, "adiabatic", "--T", "0.05", "--out", str(out)) == 0
    assert "alpha(T^m)" in capsys.readouterr().out
    phase = np.loadtxt(out / "phase.csv", delimiter=",", skiprows=1)
    assert phase[-1, 0] == pytest.approx(0.05)
    assert np.all(np.diff(phase[:, 2]) >= 0)
    assert (out / "density_a.csv").is_file() and (out / "density_b.csv").is_file()


def test_optimize_merge_deterministic(workdir, capsys):
    a, b = workdir / "opt_a", workdir / "opt_b"
    assert _run(workdir, "optimize-merge", "--T", "0.05", "--seeds", "2", "--rng", "3", "--out", str(a)) == 0
    assert _run(workdir, "optimize-merge", "--T", "0.05", "--seeds", "2", "--rng", "3", "--out", str(b)) == 0
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    assert (a / "summary.csv").read_text().startswith("T,best_one_minus_F,best_one_minus_Fprime,n_seeds,n_converged\n")
    assert len(list((a / "runs").glob("*.txt"))) == 2
    echo = [(d / "resolved_config.ini").read_text().splitlines() for d in (a, b)]
    assert [l for l in echo[0] if not l.startswith("out =")] == [l for l in echo[1] if not l.startswith("out =")]


def test_batch_summary_rebuilds(workdir, capsys):
    a = workdir / "opt_a"
    if not (a / "summary.csv").exists():
        _run(workdir, "optimize-merge", "--T", "0.05", "--seeds", "2", "--rng", "3", "--out", str(a))
    before = (a / "summary.csv").read_bytes()
    (a / "summary.csv").unlink()
    assert _run(workdir, "batch-summary", "--out", str(a)) == 0
    assert (a / "summary.csv").read_bytes() == before


def test_extend_and_evaluate(workdir, capsys):
    out = workdir / "extend"
    assert _run(workdir, "extend", "--control", str(workdir / "merge.csv"), "--out", str(out)) == 0
    text = capsys.readouterr().out
    assert "extended" in text and "naive" in text
    full = ControlSet.from_csv(out / "full_gate.csv")
    assert full.duration > 2 * 0.06
    ev = workdir / "evaluate"
    assert _run(workdir, "evaluate", "--control", str(out / "full_gate.csv"), "--problem", "full", "--out", str(ev)) == 0
    header = (ev / "evaluation.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["T", "F", "F_prime", "alpha", "J"]
    assert "Lg->Lg" in header and "Rg->Rg" in header


def test_optimize_full_from_merge_control(workdir, capsys):
    out = workdir / "full"
    assert _run(workdir, "optimize-full", "--control", str(workdir / "merge.csv"), "--out", str(out)) == 0
    assert (out / "runs" / "given-0000.txt").is_file()


def test_propagate_exports_observables(workdir):
    out = workdir / "prop"
    assert _run(workdir, "propagate", "--control", str(workdir / "merge.csv"), "--out", str(out)) == 0
    for name in ("norm.csv", "plus_population.csv", "minus_phase.csv"):
        assert (out / name).is_file()


def test_errors_give_nonzero_exit(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[lattice]\na = 0.4x\n")
    assert run_command(["eigen", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "'a'" in capsys.readouterr().err
    assert run_command(["eigen", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert _run(workdir, "evaluate", "--out", str(tmp_path)) == 2
    assert "--control" in capsys.readouterr().err
    assert _run(workdir, "extend", "--control", str(tmp_path / "none.csv"), "--out", str(tmp_path)) == 2
    assert run_command(["frobnicate"]) == 2
    assert _run(workdir, "batch-summary", "--out", str(tmp_path / "empty")) == 1
    assert _run(workdir, "optimize-merge", "--T", "abc", "--out", str(tmp_path)) == 2


def test_provenance_echo_everywhere(workdir):
    for d in workdir.iterdir():
        if d.is_dir():
            assert (d / "resolved_config.ini").is_file(), d


def test_console_entry_point_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "swapqoc.cli", "eigen", "--config", str(tmp_path / "nope.cfg")],
                       capture_output=True, text=True)
    assert r.returncode == 2
    assert "error" in r.stderr
