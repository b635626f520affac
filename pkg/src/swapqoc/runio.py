"""Plain-text persistence of optimization runs and batch summaries."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .controls import ControlSet
from .grape import Batch, RunRecord, monotone_best
from .propagation import Trajectory

HISTORY_COLUMNS = ("stage", "iteration", "J", "J_F", "J_gamma", "J_sigma", "grad_norm", "F", "F_prime", "alpha")
SUMMARY_COLUMNS = ("T", "best_one_minus_F", "best_one_minus_Fprime", "n_seeds", "n_converged")
RUNS_COLUMNS = ("T", "seed_id", "one_minus_F", "one_minus_Fprime", "alpha", "converged", "reason", "monotone_best")
METADATA_KEYS = ("seed_id", "kind", "duration", "reason", "wall_time", "F", "F_prime", "alpha", "grids", "error")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def format_run_record(record: RunRecord) -> str:
    """Metadata header, ``[iterations]`` table and ``[control]`` CSV."""
    meta = {
        "seed_id": record.seed_id,
        "kind": record.kind,
        "duration": record.duration,
        "reason": record.reason,
        "wall_time": record.wall_time,
        "F": record.metrics.get("F", float("nan")),
        "F_prime": record.metrics.get("F_prime", float("nan")),
        "alpha": record.metrics.get("alpha", float("nan")),
        "grids": ";".join(f"{n}:{dt!r}" for n, dt in record.grids),
        "error": record.error or "",
    }
    parts = ["[metadata]"] + [f"{k} = {_fmt(meta[k])}" for k in METADATA_KEYS]
    parts.append("")
    parts.append("[iterations]")
    parts.append(_write_csv(record.history, HISTORY_COLUMNS).rstrip("\n"))
    parts.append("")
    parts.append("[control]")
    if record.controls is not None:
        parts.append(record.controls.to_csv().rstrip("\n"))
    return "\n".join(parts) + "\n"


def write_run_record(record: RunRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_run_record(record))
    return path


def _split_sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]") and "," not in s:
            current = s[1:-1]
            sections[current] = []
        elif current is not None and s:
            sections[current].append(line)
    return sections


def read_run_record(path) -> RunRecord:
    """Inverse of :func:`write_run_record`."""
    sections = _split_sections(Path(path).read_text())
    missing = {"metadata", "iterations", "control"} - set(sections)
    if missing:
        raise ValueError(f"{path}: missing sections {sorted(missing)}")
    meta = {}
    for line in sections["metadata"]:
        k, _, v = line.partition("=")
        meta[k.strip()] = v.strip()
    history = []
    rows = list(csv.DictReader(io.StringIO("\n".join(sections["iterations"]))))
    for r in rows:
        history.append({k: (int(v) if k in ("stage", "iteration") else float(v)) for k, v in r.items()})
    controls = ControlSet.from_csv("\n".join(sections["control"]) + "\n") if len(sections["control"]) > 1 else None
    grids = []
    for item in meta.get("grids", "").split(";"):
        if item:
            n, dt = item.split(":")
            grids.append((int(n), float(dt)))
    rec = RunRecord(meta["seed_id"], meta["kind"], float(meta["duration"]))
    rec.history = history
    rec.controls = controls
    rec.metrics = {k: float(meta[k]) for k in ("F", "F_prime", "alpha") if not math.isnan(float(meta[k]))}
    rec.grids = grids
    rec.wall_time = float(meta["wall_time"])
    rec.reason = meta["reason"]
    rec.error = meta.get("error") or None
    return rec


def summary_csv(batch: Batch) -> str:
    return _write_csv(batch.summary_rows(), SUMMARY_COLUMNS)


def runs_csv(batch: Batch) -> str:
    """One row per run with the monotone-best flag (Pareto points over duration)."""
    metric = "F_prime" if batch.problem.kind == "merge" else "F"
    best = {}
    for r in batch.records:
        if r.metrics:
            v = r.one_minus(metric)
            if r.duration not in best or v < best[r.duration][0]:
                best[r.duration] = (v, r.seed_id)
    durs = sorted(best)
    _, mask = monotone_best(durs, [best[T][0] for T in durs])
    front = {best[T][1] for T, m in zip(durs, mask) if m}
    rows = []
    for r in batch.records:
        rows.append(
            {
                "T": r.duration,
                "seed_id": r.seed_id,
                "one_minus_F": r.one_minus("F"),
                "one_minus_Fprime": r.one_minus("F_prime"),
                "alpha": r.metrics.get("alpha", float("nan")),
                "converged": int(r.converged),
                "reason": r.reason,
                "monotone_best": int(r.seed_id in front),
            }
        )
    return _write_csv(rows, RUNS_COLUMNS)


def export_results(batch: Batch, out) -> dict[str, Path]:
    """Write ``summary.csv``, ``runs.csv`` and ``runs/<seed_id>.txt`` under ``out``."""
    if not batch.records:
        raise ValueError("cannot export an empty batch")
    out = Path(out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.csv", "runs": out / "runs.csv"}
    paths["summary"].write_text(summary_csv(batch))
    paths["runs"].write_text(runs_csv(batch))
    for r in batch.records:
        write_run_record(r, out / "runs" / f"{r.seed_id}.txt")
    return paths


def load_batch(directory, problem) -> Batch:
    """Rebuild a batch from the per-run files in ``directory/runs``."""
    files = sorted(Path(directory, "runs").glob("*.txt"))
    if not files:
        raise FileNotFoundError(f"no run records under {Path(directory, 'runs')}")
    return Batch(problem, [read_run_record(f) for f in files])


def export_trajectory(traj: Trajectory, directory, prefix: str = "") -> list[Path]:
    """One ``t,value`` CSV per observable (complex overlaps as |.|^2 and arg)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, values in traj.observables.items():
        values = np.asarray(values)
        if np.iscomplexobj(values):
            series = {f"{name}_population": np.abs(values) ** 2, f"{name}_phase": np.angle(values)}
        else:
            series = {name: values}
        for key, col in series.items():
            path = directory / f"{prefix}{key}.csv"
            np.savetxt(path, np.column_stack([traj.times, col]), delimiter=",", header="t,value", comments="", fmt="%.17g")
            written.append(path)
    return written
