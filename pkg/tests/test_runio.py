import csv
import io

import numpy as np
import pytest

from swapqoc.controls import ControlSet
from swapqoc.grape import MERGE, Batch, GridSpec, OptimizationProblem, RunRecord, multistart
from swapqoc.propagation import PropagationConfig, pair_superposition, split_step_2p
from swapqoc.runio import (
    RUNS_COLUMNS,
    SUMMARY_COLUMNS,
    export_results,
    export_trajectory,
    load_batch,
    read_run_record,
    runs_csv,
    summary_csv,
    write_run_record,
)

QUICK = (GridSpec(32, 5e-4, max_iterations=2),)


@pytest.fixture(scope="module")
def small_batch():
    p = OptimizationProblem.merge(0.05, cascade=QUICK)
    return multistart(p, [0.05, 0.06], 2, master_seed=4)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_record_round_trip(small_batch, tmp_path):
    rec = small_batch.records[0]
    path = write_run_record(rec, tmp_path / "r.txt")
    back = read_run_record(path)
    assert back.seed_id == rec.seed_id and back.kind == rec.kind and back.duration == rec.duration
    assert back.reason == rec.reason and back.grids == rec.grids
    assert back.wall_time == rec.wall_time
    assert back.metrics == {k: rec.metrics[k] for k in ("F", "F_prime", "alpha")}
    np.testing.assert_array_equal(back.controls.values, rec.controls.values)
    np.testing.assert_array_equal(back.controls.times, rec.controls.times)
    assert len(back.history) == len(rec.history)
    for a, b in zip(back.history, rec.history):
        for k, v in a.items():
            assert v == b[k]
    text = path.read_text()
    assert text.index("[metadata]") < text.index("[iterations]") < text.index("[control]")


def test_failed_run_record_round_trip(tmp_path):
    rec = RunRecord("bad", MERGE, 0.1, reason="error", error="ValueError: boom")
    back = read_run_record(write_run_record(rec, tmp_path / "bad.txt"))
    assert back.error == "ValueError: boom"
    assert back.controls is None and back.metrics == {} and back.history == []


def test_read_rejects_incomplete_file(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("[metadata]\nseed_id = a\n")
    with pytest.raises(ValueError, match="missing sections"):
        read_run_record(p)


def test_summary_csv_columns(small_batch):
    rows = _rows(summary_csv(small_batch))
    assert tuple(_rows(summary_csv(small_batch))[0]) == SUMMARY_COLUMNS
    assert [float(r["T"]) for r in rows] == [0.05, 0.06]
    assert all(int(r["n_seeds"]) == 2 for r in rows)
    for r in rows:
        best = min(1 - x.metrics["F_prime"] for x in small_batch.records if x.duration == float(r["T"]))
        assert float(r["best_one_minus_Fprime"]) == best


def test_one_run_one_row():
    rec = RunRecord("a", MERGE, 0.1, metrics={"F": 0.4, "F_prime": 0.6, "alpha": 0.2}, reason="max iterations")
    rows = _rows(summary_csv(Batch(OptimizationProblem.merge(0.1), [rec])))
    assert len(rows) == 1
    assert rows[0]["n_converged"] == "0"
    assert float(rows[0]["best_one_minus_F"]) == pytest.approx(0.6)


def test_runs_csv_marks_monotone_best():
    p = OptimizationProblem.merge(0.1)
    recs = [
        RunRecord("a", MERGE, 0.1, metrics={"F": 0.5, "F_prime": 0.90, "alpha": 0.1}),
        RunRecord("b", MERGE, 0.1, metrics={"F": 0.5, "F_prime": 0.95, "alpha": 0.1}),
        RunRecord("c", MERGE, 0.2, metrics={"F": 0.5, "F_prime": 0.93, "alpha": 0.1}),
        RunRecord("d", MERGE, 0.3, metrics={"F": 0.5, "F_prime": 0.99, "alpha": 0.1}),
    ]
    rows = _rows(runs_csv(Batch(p, recs)))
    assert tuple(rows[0]) == RUNS_COLUMNS
    flags = {r["seed_id"]: r["monotone_best"] for r in rows}
    assert flags == {"a": "0", "b": "1", "c": "0", "d": "1"}


def test_export_and_reload(small_batch, tmp_path):
    paths = export_results(small_batch, tmp_path)
    assert paths["summary"].is_file() and paths["runs"].is_file()
    assert len(list((tmp_path / "runs").glob("*.txt"))) == 4
    back = load_batch(tmp_path, small_batch.problem)
    assert summary_csv(back) == summary_csv(small_batch)


def test_export_is_deterministic(tmp_path):
    p = OptimizationProblem.merge(0.05, cascade=QUICK)
    a = export_results(multistart(p, [0.05], 1, master_seed=8), tmp_path / "a")
    b = export_results(multistart(p, [0.05], 1, master_seed=8), tmp_path / "b")
    assert a["summary"].read_bytes() == b["summary"].read_bytes()
    assert (tmp_path / "a/runs/T0.0500-s000.txt").read_text().split("[iterations]")[1] == (
        tmp_path / "b/runs/T0.0500-s000.txt"
    ).read_text().split("[iterations]")[1]


def test_export_errors(tmp_path):
    with pytest.raises(ValueError):
        export_results(Batch(OptimizationProblem.merge(0.1), []), tmp_path)
    with pytest.raises(FileNotFoundError):
        load_batch(tmp_path / "none", OptimizationProblem.merge(0.1))


def test_export_trajectory(merged32, tmp_path):
    c = ControlSet.constant(0.001, 1e-4)
    psi0 = pair_superposition(merged32.plus, merged32.minus)
    traj = split_step_2p(psi0, c, PropagationConfig(1e-4), observe={"plus": merged32.plus})
    files = {p.name for p in export_trajectory(traj, tmp_path, "x_")}
    assert files == {"x_norm.csv", "x_plus_population.csv", "x_plus_phase.csv"}
    data = np.loadtxt(tmp_path / "x_plus_population.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 1], np.abs(traj.observables["plus"]) ** 2, rtol=1e-15)
    assert (tmp_path / "x_norm.csv").read_text().startswith("t,value\n")
