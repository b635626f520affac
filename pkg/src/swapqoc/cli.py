"""Command-line entry point: ``swapqoc <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .controls import MERGED, SEPARATED, ControlSet
from .eigen import EigenSolverError, export_densities
from .exchange import (
    PhaseWindowError,
    TrackingLostError,
    adiabatic_phase,
    independent_densities,
    merged_hold_time,
    swap_durations,
)
from .grape import (
    FULL_GATE,
    MERGE,
    GridProblem,
    GridSpec,
    evaluate,
    extend_to_full_gate,
    measure_merge_phase,
    multistart,
    naive_extension,
    single_particle_fidelities,
    spectral_basis,
)
from .grid import energy_to_khz
from .lattice import TransverseFrequencyError
from .propagation import PropagationConfig, SamplingMismatchError, split_step_2p
from .runio import export_results, export_trajectory, load_batch, runs_csv, summary_csv

COMMANDS = ("eigen", "adiabatic", "propagate", "optimize-merge", "optimize-full", "extend", "evaluate", "batch-summary")


class UsageError(ValueError):
    """Missing or inconsistent command-line input."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swapqoc", description="Optimal control of a collisional sqrt(SWAP) gate.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--T", dest="durations", help="duration(s) in ms, comma separated")
    parser.add_argument("--seeds", type=int, help="seeds per duration")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--rng", type=int, help="master random seed")
    parser.add_argument("--control", action="append", help="control CSV (repeatable)")
    parser.add_argument("--problem", choices=("merge", "full"), help="problem kind for evaluate/propagate")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    if args.durations:
        try:
            over["durations"] = tuple(float(v) for v in args.durations.split(",") if v.strip())
        except ValueError:
            raise UsageError(f"--T expects numbers, got {args.durations!r}") from None
    if args.seeds is not None:
        over["seeds"] = args.seeds
    if args.out:
        over["out"] = args.out
    if args.rng is not None:
        over["rng"] = args.rng
    if args.problem:
        over["kind"] = MERGE if args.problem == "merge" else FULL_GATE
    return replace(cfg, **over)


def _controls(args, cfg: RunConfig) -> list[ControlSet]:
    if not args.control:
        raise UsageError(f"{args.command} needs --control <file.csv>")
    out = []
    for path in args.control:
        if not Path(path).is_file():
            raise UsageError(f"control file not found: {path}")
        out.append(ControlSet.from_csv(Path(path), cfg.scaling()))
    return out


def _table(rows, columns) -> str:
    lines = ["  ".join(f"{c:>14}" for c in columns)]
    for r in rows:
        lines.append("  ".join(f"{r[c]:>14.6g}" if isinstance(r[c], float) else f"{str(r[c]):>14}" for c in columns))
    return "\n".join(lines)


def _write_rows(path: Path, rows, columns) -> None:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else str(r[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_eigen(args, cfg: RunConfig, out: Path) -> int:
    scaled = SEPARATED if cfg.configuration == "separated" else MERGED
    basis = spectral_basis(scaled, cfg.n, cfg.configuration, cfg.lattice(), cfg.scaling())
    e0 = basis.states[0].energy_khz
    rows2 = [
        {"label": s.label or f"state{i}", "parity": s.parity, "E_kHz": s.energy_khz, "E_minus_E0_kHz": s.energy_khz - e0}
        for i, s in enumerate(basis.states)
    ]
    rows1 = [{"label": s.label or f"orbital{i}", "E_kHz": s.energy_khz} for i, s in enumerate(basis.singles)]
    _write_rows(out / "eigen_1p.csv", rows1, ("label", "E_kHz"))
    _write_rows(out / "eigen_2p.csv", rows2, ("label", "parity", "E_kHz", "E_minus_E0_kHz"))
    export_densities(basis.singles, out / "densities_1p.csv")
    export_densities(basis.states, out / "densities_2p.csv")
    pair = {basis.plus.label, basis.minus.label}
    pair_e = np.mean([basis.plus.energy_khz, basis.minus.energy_khz])
    others = [s.energy_khz for s in basis.states if s.label not in pair]
    print(f"configuration: {cfg.configuration}  (n = {cfg.n})")
    print(_table(rows2, ("label", "parity", "E_kHz", "E_minus_E0_kHz")))
    print(f"exchange splitting E(+) - E(-): {energy_to_khz(basis.exchange_splitting):.6g} kHz")
    if others:
        print(f"lowest other state relative to the pair: {min(others) - pair_e:.6g} kHz")
    return 0


def cmd_adiabatic(args, cfg: RunConfig, out: Path) -> int:
    T = cfg.durations[0] if args.durations else cfg.ramp_duration
    ramp = ControlSet.linear_ramp(T, cfg.dt, SEPARATED, MERGED, cfg.scaling())
    lattice = cfg.lattice()
    trace = adiabatic_phase(ramp, n=cfg.n, lattice=lattice, mode=cfg.mode, stride=cfg.phase_stride)
    trace.to_csv(out / "phase.csv")
    stride = max(1, ramp.n_steps // 100)
    pc = PropagationConfig(dt=cfg.dt, absorber=cfg.absorber(), store_stride=stride)
    ta, tb = independent_densities(ramp, n=cfg.n, cfg=pc, lattice=lattice)
    for name, traj in (("a", ta), ("b", tb)):
        dens = np.array([s.density() for s in traj.snapshots])
        x = np.asarray(traj.final.grid.points)
        header = "t," + ",".join(f"{v!r}" for v in x)
        np.savetxt(out / f"density_{name}.csv", np.column_stack([traj.snapshot_times, dens]), delimiter=",",
                   header=header, comments="", fmt="%.10g")
    merged = spectral_basis(MERGED, cfg.n, "merged", lattice, cfg.scaling())
    alpha = float(trace.alpha[-1])
    hold = merged_hold_time(merged.exchange_splitting, alpha)
    print(f"ramp duration T^m = {T:.6g} ms, mode = {cfg.mode}")
    print(f"alpha(T^m) = {alpha:.6g} rad ({alpha / (np.pi / 4):.4g} x pi/4)")
    print(f"exchange energy in merged trap: {energy_to_khz(merged.exchange_splitting):.6g} kHz")
    print(f"static hold to sqrt(SWAP): {hold:.6g} ms")
    if alpha <= np.pi / 4:
        print(f"merge-hold-separate wait: {swap_durations(merged.exchange_splitting, alpha)[2]:.6g} ms")
    return 0


def cmd_propagate(args, cfg: RunConfig, out: Path) -> int:
    (controls,) = _controls(args, cfg)[:1]
    problem = cfg.problem(duration=controls.duration)
    gp = GridProblem(problem, cfg.n)
    pc = PropagationConfig(dt=controls.dt, absorber=cfg.absorber(), store_stride=cfg.store_stride)
    traj = split_step_2p(gp.initial, controls, pc, problem.lattice, observe={"plus": gp.plus, "minus": gp.minus})
    export_trajectory(traj, out)
    m = gp.metrics(traj.final)
    print(_table([m], ("F", "F_prime", "alpha", "norm")))
    return 0


def cmd_optimize_merge(args, cfg: RunConfig, out: Path) -> int:
    problem = cfg.problem(MERGE)
    batch = multistart(problem, list(cfg.durations), cfg.seeds, cfg.rng, amplitude=cfg.seed_amplitude,
                       workers=cfg.workers, sines=cfg.seed_sines)
    export_results(batch, out)
    print(summary_csv(batch), end="")
    return 0


def cmd_optimize_full(args, cfg: RunConfig, out: Path) -> int:
    seeds = []
    for c in _controls(args, cfg):
        merge_problem = cfg.problem(MERGE, c.duration)
        basis = spectral_basis(MERGED, cfg.n, "merged", cfg.lattice(), cfg.scaling())
        try:
            seeds.append(extend_to_full_gate(c, basis, problem=merge_problem))
        except PhaseWindowError as exc:
            print(f"skipping seed: {exc}", file=sys.stderr)
    if not seeds:
        raise UsageError("no merge control qualified for extension (all had alpha >= pi/4)")
    problem = cfg.problem(FULL_GATE, seeds[0].duration)
    batch = multistart(problem, [], seed_controls=seeds, workers=cfg.workers)
    export_results(batch, out)
    print(summary_csv(batch), end="")
    return 0


def cmd_extend(args, cfg: RunConfig, out: Path) -> int:
    (merge,) = _controls(args, cfg)[:1]
    merge_problem = cfg.problem(MERGE, merge.duration)
    basis = spectral_basis(MERGED, cfg.n, "merged", cfg.lattice(), cfg.scaling())
    alpha = measure_merge_phase(merge, merge_problem, cfg.n)
    full = extend_to_full_gate(merge, basis, alpha)
    naive = naive_extension(merge, basis)
    full.to_csv(out / "full_gate.csv")
    naive.to_csv(out / "naive_full_gate.csv")
    spec = GridSpec(cfg.n, merge.dt)
    rows = []
    for name, c in (("extended", full), ("naive", naive)):
        p = cfg.problem(FULL_GATE, c.duration)
        r = evaluate(c, p, spec)
        rows.append({"control": name, "T": c.duration, "F": r.F, "F_prime": r.F_prime, "alpha": r.alpha})
    print(f"alpha(T^m) = {alpha:.6g} rad")
    print(_table(rows, ("control", "T", "F", "F_prime", "alpha")))
    return 0


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> int:
    rows = []
    for c in _controls(args, cfg):
        p = cfg.problem(duration=c.duration)
        dt = min(c.dt, cfg.dt)
        r = evaluate(c, p, GridSpec(cfg.n, dt))
        c_eval = c if c.dt <= dt * (1 + 1e-9) else c.resample(dt)
        row = {"T": c.duration, "F": r.F, "F_prime": r.F_prime, "alpha": r.alpha, "J": r.J}
        row.update(single_particle_fidelities(c_eval, p, cfg.n))
        rows.append(row)
    cols = tuple(rows[0])
    _write_rows(out / "evaluation.csv", rows, cols)
    print(_table(rows, cols))
    return 0


def cmd_batch_summary(args, cfg: RunConfig, out: Path) -> int:
    batch = load_batch(out, cfg.problem())
    (out / "summary.csv").write_text(summary_csv(batch))
    (out / "runs.csv").write_text(runs_csv(batch))
    print(summary_csv(batch), end="")
    return 0


HANDLERS = {
    "eigen": cmd_eigen,
    "adiabatic": cmd_adiabatic,
    "propagate": cmd_propagate,
    "optimize-merge": cmd_optimize_merge,
    "optimize-full": cmd_optimize_full,
    "extend": cmd_extend,
    "evaluate": cmd_evaluate,
    "batch-summary": cmd_batch_summary,
}


def run_command(argv=None) -> int:
    """Run one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.write_echo(out)
        return HANDLERS[args.command](args, cfg, out)
    except (ConfigError, UsageError) as exc:
        print(f"swapqoc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (
        OSError,
        ValueError,
        EigenSolverError,
        TrackingLostError,
        TransverseFrequencyError,
        SamplingMismatchError,
    ) as exc:
        print(f"swapqoc {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
