"""GRAPE optimal control of the merge and full-gate state transfers.

Cost functional on a discrete time grid t_n = n dt, n = 0..N::

    J = (1 - F) / 2
        + sum_i gamma/2 * sum_n ((u_i[n+1] - u_i[n]) / dt)**2 dt
        + sum_i sigma/2 * sum_{n<N} b(u_i[n]) dt

with F the state-transfer fidelity after split-step propagation and b the
quadratic out-of-bounds penalty. The gradient is the exact derivative of
this discrete functional, assembled from a backward (adjoint) sweep.
Controls are in scaled units; the first and last samples are fixed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .controls import MERGED, SEPARATED, ControlScaling, ControlSet, DEFAULT_SCALING
from .eigen import SpectralBasis, build_basis, product_state
from .exchange import PhaseWindowError, swap_durations
from .grid import Grid2D, Wavefunction
from .lattice import DEFAULT_LATTICE, LatticeParams, TransverseFrequencyError
from .propagation import (
    FINAL_DT,
    Absorber,
    PropagationConfig,
    SplitStepPropagator,
    UndefinedPhaseError,
    fidelity,
    pair_superposition,
    relative_phase,
    split_step_1p,
)

MERGE = "merge"
FULL_GATE = "full_gate"
INVALID_COST = 1e6


@dataclass(frozen=True)
class CostWeights:
    gamma: float = 1e-7
    sigma: float = 1e5
    lower: tuple[float, float, float] = (-np.inf, 0.0, 0.2)
    upper: tuple[float, float, float] = (np.inf, 2.1, 1.15)


@dataclass(frozen=True)
class GridSpec:
    """One cascade stage: spatial points, nominal time step, optimize or only evaluate.

    ``max_iterations`` overrides the problem-wide iteration limit for this stage.
    """

    n: int
    dt: float
    evaluate_only: bool = False
    max_iterations: int | None = None


MERGE_CASCADE = (GridSpec(32, 5e-4), GridSpec(64, 1e-4), GridSpec(64, FINAL_DT))
FULL_GATE_CASCADE = (GridSpec(32, 5e-4), GridSpec(64, 1e-4), GridSpec(64, FINAL_DT, evaluate_only=True))


@dataclass(frozen=True)
class OptimizationProblem:
    """State-transfer problem definition (grid independent)."""

    kind: str = MERGE
    duration: float = 0.12
    alpha_target: float = 0.33
    weights: CostWeights = field(default_factory=CostWeights)
    cascade: tuple[GridSpec, ...] = MERGE_CASCADE
    threshold: float = 0.99
    max_iterations: int = 200
    gradient_tol: float = 1e-9
    wall_time: float = 3600.0
    lattice: LatticeParams = DEFAULT_LATTICE
    scaling: ControlScaling = DEFAULT_SCALING
    absorber: Absorber | None = field(default_factory=Absorber)

    def __post_init__(self):
        if self.kind not in (MERGE, FULL_GATE):
            raise ValueError(f"unknown problem kind {self.kind!r}")

    @classmethod
    def merge(cls, duration=0.12, **kw) -> "OptimizationProblem":
        return cls(kind=MERGE, duration=duration, cascade=kw.pop("cascade", MERGE_CASCADE), **kw)

    @classmethod
    def full_gate(cls, duration, **kw) -> "OptimizationProblem":
        return cls(kind=FULL_GATE, duration=duration, cascade=kw.pop("cascade", FULL_GATE_CASCADE), **kw)

    @property
    def start(self) -> tuple[float, float, float]:
        return SEPARATED

    @property
    def end(self) -> tuple[float, float, float]:
        return MERGED if self.kind == MERGE else SEPARATED

    @property
    def target_phase(self) -> float:
        return self.alpha_target if self.kind == MERGE else np.pi / 2

    @property
    def stop_metric(self) -> str:
        """Figure of merit compared against ``threshold``."""
        return "F_prime" if self.kind == MERGE else "F"

    def reference(self, dt: float) -> ControlSet:
        """Heuristic reference control: linear ramp for merging, constant otherwise."""
        return ControlSet.linear_ramp(self.duration, dt, self.start, self.end, self.scaling)

    def grid_problem(self, spec: GridSpec | int) -> "GridProblem":
        return GridProblem(self, spec.n if isinstance(spec, GridSpec) else int(spec))


@lru_cache(maxsize=16)
def _cached_basis(controls: tuple, n: int, configuration: str, lattice: LatticeParams) -> SpectralBasis:
    return build_basis(controls, n, configuration, lattice)


def spectral_basis(scaled, n, configuration, lattice=DEFAULT_LATTICE, scaling=DEFAULT_SCALING) -> SpectralBasis:
    """Cached labelled basis at scaled control values."""
    phys = tuple(float(v) for v in np.asarray(scaled, dtype=float) * scaling.factors)
    return _cached_basis(phys, n, configuration, lattice)


class GridProblem:
    """An :class:`OptimizationProblem` bound to one spatial grid.

    Holds the initial state, target state and the reference pair used for
    the phase-insensitive population and the relative phase.
    """

    def __init__(self, problem: OptimizationProblem, n: int):
        self.problem = problem
        self.n = n
        lat = problem.lattice
        self.grid = lat.grid(n)
        self.grid2 = Grid2D(self.grid)
        self.separated = spectral_basis(problem.start, n, "separated", lat, problem.scaling)
        self.initial = product_state(self.separated.single("Lg"), self.separated.single("Rg"))
        if problem.kind == MERGE:
            self.reference_basis = spectral_basis(problem.end, n, "merged", lat, problem.scaling)
        else:
            self.reference_basis = self.separated
        self.plus = self.reference_basis.plus.wavefunction
        self.minus = self.reference_basis.minus.wavefunction
        self.target = pair_superposition(self.plus, self.minus, problem.target_phase)
        self.propagator = SplitStepPropagator(self.grid, 2, lat, problem.absorber)

    def propagate(self, controls: ControlSet) -> Wavefunction:
        psi = self.propagator.evolve(self.initial.amplitudes, controls)
        return Wavefunction(self.grid2, psi)

    def metrics(self, psi: Wavefunction) -> dict[str, float]:
        vol = self.grid2.volume_element
        o = np.vdot(self.target.amplitudes, psi.amplitudes) * vol
        cp = np.vdot(self.plus.amplitudes, psi.amplitudes) * vol
        cm = np.vdot(self.minus.amplitudes, psi.amplitudes) * vol
        try:
            alpha = relative_phase(psi, self.plus, self.minus)
        except UndefinedPhaseError:
            alpha = float("nan")
        return {
            "F": float(abs(o) ** 2),
            "F_prime": float(abs(cp) ** 2 + abs(cm) ** 2),
            "alpha": alpha,
            "norm": psi.norm(),
        }


# ---------------------------------------------------------------------------
# cost and gradient


def penalty_terms(controls: ControlSet, weights: CostWeights):
    """(J_gamma, J_sigma, dJ_gamma/du, dJ_sigma/du) for scaled controls."""
    u = controls.values
    dt = controls.dt
    du = np.diff(u, axis=1)
    j_gamma = 0.5 * weights.gamma * float(np.sum(du ** 2)) / dt
    g_gamma = np.zeros_like(u)
    g_gamma[:, :-1] -= weights.gamma * du / dt
    g_gamma[:, 1:] += weights.gamma * du / dt

    lo = np.asarray(weights.lower, dtype=float)[:, None]
    hi = np.asarray(weights.upper, dtype=float)[:, None]
    excess = np.where(u > hi, u - hi, 0.0) + np.where(u < lo, u - lo, 0.0)
    excess[:, -1] = 0.0
    j_sigma = 0.5 * weights.sigma * float(np.sum(excess ** 2)) * dt
    g_sigma = weights.sigma * excess * dt
    return j_gamma, j_sigma, g_gamma, g_sigma


@dataclass
class CostResult:
    J: float
    J_F: float
    J_gamma: float
    J_sigma: float
    F: float
    F_prime: float
    alpha: float
    gradient: np.ndarray | None = None
    valid: bool = True

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("J", "J_F", "J_gamma", "J_sigma", "F", "F_prime", "alpha")}


def _as_grid_problem(problem, n) -> GridProblem:
    if isinstance(problem, GridProblem):
        return problem
    if n is None:
        n = problem.cascade[-1].n
    return GridProblem(problem, n)


def cost(controls: ControlSet, problem: OptimizationProblem | GridProblem, n: int | None = None) -> CostResult:
    """Evaluate J and its parts for ``controls`` on an ``n``-point grid."""
    gp = _as_grid_problem(problem, n)
    weights = gp.problem.weights
    psi = gp.propagate(controls)
    m = gp.metrics(psi)
    j_gamma, j_sigma, _, _ = penalty_terms(controls, weights)
    j_f = 0.5 * (1 - m["F"])
    return CostResult(j_f + j_gamma + j_sigma, j_f, j_gamma, j_sigma, m["F"], m["F_prime"], m["alpha"])


def _step_overlap_gradient(prop: SplitStepPropagator, chi_next, psi_n, u, dt):
    """Contribution of one step to d<chi_N|psi_N>/du (3 physical controls).

    Returns (derivative, psi_{n+1}, chi_n).
    """
    half = prop.half_factor(u, dt)
    a = half * psi_n
    psi_next = half * prop.kinetic_step(a, dt)
    chi_mid = prop.kinetic_step(half.conj() * chi_next, dt, adjoint=True)
    dv, dint = prop.field_gradients(u)
    w1 = chi_next.conj() * psi_next
    w2 = chi_mid.conj() * a
    w = w1 + w2
    if prop.particles == 1:
        terms = dv @ w
    else:
        r = w.sum(axis=1) + w.sum(axis=0)
        terms = dv @ r + dint @ np.diagonal(w)
    return -0.5j * dt * terms, psi_next, half.conj() * chi_mid


def gradient(controls: ControlSet, problem: OptimizationProblem | GridProblem, n: int | None = None) -> CostResult:
    """Cost and exact gradient dJ/du (shape (3, N+1), endpoints zeroed)."""
    gp = _as_grid_problem(problem, n)
    weights = gp.problem.weights
    prop = gp.propagator
    dt = controls.dt
    N = controls.n_steps
    u_steps = controls.step_values()
    vol = gp.grid2.volume_element

    seg = max(1, int(math.ceil(math.sqrt(N))))
    checkpoints = {}
    psi = np.array(gp.initial.amplitudes, dtype=complex)
    for k in range(N):
        if k % seg == 0:
            checkpoints[k] = psi
        psi = prop.step(psi, u_steps[:, k], dt)
    final = Wavefunction(gp.grid2, psi)
    m = gp.metrics(final)
    o = np.vdot(gp.target.amplitudes, psi) * vol

    d_overlap = np.zeros((3, N), dtype=complex)
    chi = np.array(gp.target.amplitudes, dtype=complex)
    for start in sorted(checkpoints, reverse=True):
        stop = min(start + seg, N)
        states = [checkpoints[start]]
        for k in range(start, stop - 1):
            states.append(prop.step(states[-1], u_steps[:, k], dt))
        for k in range(stop - 1, start - 1, -1):
            d, _, chi = _step_overlap_gradient(prop, chi, states[k - start], u_steps[:, k], dt)
            d_overlap[:, k] = d * vol
    dj_dstep = -np.real(np.conj(o) * d_overlap)
    factors = controls.scaling.factors[:, None]
    grad = np.zeros_like(controls.values)
    grad[:, :-1] += 0.5 * dj_dstep * factors
    grad[:, 1:] += 0.5 * dj_dstep * factors

    j_gamma, j_sigma, g_gamma, g_sigma = penalty_terms(controls, weights)
    grad += g_gamma + g_sigma
    grad[:, 0] = 0.0
    grad[:, -1] = 0.0
    j_f = 0.5 * (1 - m["F"])
    return CostResult(j_f + j_gamma + j_sigma, j_f, j_gamma, j_sigma, m["F"], m["F_prime"], m["alpha"], grad)


# ---------------------------------------------------------------------------
# seeds


def generate_seed(reference: ControlSet, M: int | None = None, amplitude: float = 0.15, rng_seed=None) -> ControlSet:
    """Reference control plus a random sine series vanishing at both ends.

    Each control gets ``sum_m c_m sin(m pi t / T)`` with ``c_m`` uniform in
    [-1, 1] weighted by 1/m, rescaled to peak magnitude ``amplitude``.
    """
    rng = np.random.default_rng(rng_seed)
    if M is None:
        M = int(rng.integers(40, 61))
    t = reference.times - reference.times[0]
    T = reference.duration
    m = np.arange(1, M + 1)
    basis = np.sin(np.pi * np.outer(m, t) / T)
    basis[:, 0] = 0.0
    basis[:, -1] = 0.0
    vals = reference.values.copy()
    for i in range(3):
        c = rng.uniform(-1.0, 1.0, size=M) / m
        s = c @ basis
        peak = np.max(np.abs(s))
        if peak > 0 and amplitude != 0:
            vals[i] = vals[i] + amplitude * s / peak
    return reference.with_values(vals)


# ---------------------------------------------------------------------------
# optimization


@dataclass
class RunRecord:
    seed_id: str
    kind: str
    duration: float
    history: list[dict] = field(default_factory=list)
    controls: ControlSet | None = None
    metrics: dict[str, float] = field(default_factory=dict)
    grids: list[tuple[int, float]] = field(default_factory=list)
    wall_time: float = 0.0
    reason: str = ""
    stage_reasons: list[str] = field(default_factory=list)
    error: str | None = None
    optimizer_message: str = ""

    @property
    def converged(self) -> bool:
        return self.reason == "threshold met"

    def one_minus(self, key: str) -> float:
        v = self.metrics.get(key, float("nan"))
        return 1.0 - v


class _Objective:
    """Maps the flat optimizer vector to controls and caches evaluations.

    Interior samples are scaled by sqrt(dt) so the Euclidean inner product
    of the optimizer equals the L2 inner product of control functions.
    """

    def __init__(self, gp: GridProblem, template: ControlSet):
        self.gp = gp
        self.template = template
        self.root_dt = math.sqrt(template.dt)
        self.cache: dict[bytes, CostResult] = {}
        self.evaluations = 0

    def pack(self, controls: ControlSet) -> np.ndarray:
        return (controls.values[:, 1:-1] * self.root_dt).ravel()

    def unpack(self, x: np.ndarray) -> ControlSet:
        vals = self.template.values.copy()
        vals[:, 1:-1] = x.reshape(3, -1) / self.root_dt
        return self.template.with_values(vals)

    def result(self, x: np.ndarray) -> CostResult:
        key = x.tobytes()
        res = self.cache.get(key)
        if res is None:
            controls = self.unpack(x)
            try:
                res = gradient(controls, self.gp)
            except (TransverseFrequencyError, FloatingPointError):
                # finite so the line search can backtrack; inf breaks its interpolation
                res = CostResult(INVALID_COST, INVALID_COST, 0, 0, 0, 0, float("nan"), np.zeros_like(controls.values), False)
            self.evaluations += 1
            if len(self.cache) > 8:
                self.cache.clear()
            self.cache[key] = res
        return res

    def __call__(self, x):
        res = self.result(x)
        g = res.gradient[:, 1:-1].ravel() / self.root_dt
        return res.J, g


def _history_row(stage: int, iteration: int, res: CostResult, gnorm: float) -> dict:
    row = {"stage": stage, "iteration": iteration}
    row.update(res.as_dict())
    row["grad_norm"] = gnorm
    return row


def optimize(
    seed: ControlSet,
    problem: OptimizationProblem,
    spec: GridSpec | None = None,
    record: RunRecord | None = None,
    stage: int = 0,
    deadline: float | None = None,
    seed_id: str = "seed",
) -> RunRecord:
    """L-BFGS (memory 10, strong-Wolfe line search) on one grid.

    Stops on the problem threshold, a vanishing gradient, the iteration
    limit, the wall-time budget or a failed line search.
    """
    spec = spec or problem.cascade[-1]
    t0 = time.perf_counter()
    if record is None:
        record = RunRecord(seed_id, problem.kind, problem.duration)
    if deadline is None:
        deadline = t0 + problem.wall_time
    controls = seed.resample(spec.dt) if not np.isclose(seed.dt, spec.dt, rtol=1e-9) else seed.copy()
    gp = problem.grid_problem(spec)
    record.grids.append((spec.n, controls.dt))
    obj = _Objective(gp, controls)
    x0 = obj.pack(controls)
    res0 = obj.result(x0)
    if not res0.valid:
        raise ValueError("seed control leaves the physical domain (imaginary transverse frequency)")
    record.history.append(_history_row(stage, 0, res0, float(np.linalg.norm(obj(x0)[1]))))
    metric = problem.stop_metric

    def finish(x, reason):
        res = obj.result(x)
        # the sqrt(dt) packing does not round-trip bit-exactly
        record.controls = controls if np.array_equal(x, x0) else obj.unpack(x)
        record.metrics = res.as_dict()
        record.reason = reason
        record.stage_reasons.append(reason)
        record.wall_time += time.perf_counter() - t0
        return record

    if getattr(res0, metric) >= problem.threshold:
        return finish(x0, "threshold met")
    max_iter = problem.max_iterations if spec.max_iterations is None else spec.max_iterations
    if spec.evaluate_only or max_iter == 0:
        return finish(x0, "evaluated" if spec.evaluate_only else "max iterations")
    if x0.size == 0:
        return finish(x0, "no free parameters")

    state = {"reason": None, "iteration": 0, "x": x0}

    def callback(intermediate_result):
        x = intermediate_result.x
        res = obj.result(x)
        state["iteration"] += 1
        state["x"] = x
        record.history.append(_history_row(stage, state["iteration"], res, float(np.linalg.norm(obj(x)[1]))))
        if getattr(res, metric) >= problem.threshold:
            state["reason"] = "threshold met"
            raise StopIteration
        if time.perf_counter() > deadline:
            state["reason"] = "wall time"
            raise StopIteration

    out = minimize(
        obj,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxcor": 10,
            "maxiter": max_iter,
            "gtol": problem.gradient_tol,
            "ftol": 1e-14,
            "maxls": 30,
        },
    )
    if state["reason"] is not None:
        reason = state["reason"]
        x_final = state["x"]
    else:
        x_final = out.x
        msg = str(out.message).upper()
        record.optimizer_message = str(out.message)
        if "ABNORMAL" in msg or "LINE SEARCH" in msg:
            reason = "line search failure"
        elif out.nit >= max_iter or "ITERATIONS" in msg:
            reason = "max iterations"
        else:
            reason = "converged"
        if obj.result(x_final).J > obj.result(state["x"]).J:
            x_final = state["x"]
    return finish(x_final, reason)


def cascade_optimize(seed: ControlSet, problem: OptimizationProblem, seed_id: str = "seed") -> RunRecord:
    """Optimize on each cascade grid in turn, interpolating the control linearly."""
    if not problem.cascade:
        raise ValueError("empty grid cascade")
    t0 = time.perf_counter()
    deadline = t0 + problem.wall_time
    record = RunRecord(seed_id, problem.kind, problem.duration)
    controls = seed
    reason = ""
    for stage, spec in enumerate(problem.cascade):
        optimize(controls, problem, spec, record, stage, deadline, seed_id)
        controls = record.controls
        reason = record.reason
        if reason == "wall time":
            break
    record.reason = reason
    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# full-gate construction


def measure_merge_phase(merge_control: ControlSet, problem: OptimizationProblem | None = None, n: int = 64) -> float:
    """alpha(T^m) of the product initial state propagated along a merge control."""
    problem = problem or OptimizationProblem.merge(merge_control.duration)
    gp = GridProblem(problem, n)
    psi = gp.propagate(merge_control)
    return relative_phase(psi, gp.plus, gp.minus)


def extend_to_full_gate(
    merge_control: ControlSet,
    basis: SpectralBasis,
    alpha: float | None = None,
    problem: OptimizationProblem | None = None,
) -> ControlSet:
    """Merge, hold for the phase-corrected wait, then separate by time reversal.

    ``basis`` is the merged-trap basis supplying the exchange energy. When
    ``alpha`` is omitted it is measured by propagating along the merge
    control on the basis grid.
    """
    if alpha is None:
        alpha = measure_merge_phase(merge_control, problem, basis.plus.grid.n)
    if alpha >= np.pi / 4:
        raise PhaseWindowError(f"merge phase {alpha:.3f} >= pi/4; extension rejected")
    _, _, wait = swap_durations(basis.exchange_splitting, max(alpha, 0.0))
    n_wait = int(round(wait / merge_control.dt))
    full = merge_control.then(merge_control.hold(n_wait)) if n_wait else merge_control
    return full.then(merge_control.reversed())


def naive_extension(merge_control: ControlSet, basis: SpectralBasis) -> ControlSet:
    """Extension that ignores the merge phase (wait = pi/2 / U)."""
    return extend_to_full_gate(merge_control, basis, alpha=0.0)


def evaluate(controls: ControlSet, problem: OptimizationProblem, spec: GridSpec | None = None) -> CostResult:
    """Cost and metrics of ``controls`` on ``spec`` (default: last cascade grid)."""
    spec = spec or problem.cascade[-1]
    c = controls if controls.dt <= spec.dt * (1 + 1e-9) else controls.resample(spec.dt)
    return cost(c, problem.grid_problem(spec))


def single_particle_fidelities(controls: ControlSet, problem: OptimizationProblem, n: int = 64) -> dict[str, float]:
    """Independent-particle transfer fidelities of the two initial orbitals.

    Merge: Lg -> e and Rg -> g in the merged trap. Full gate: Lg -> Lg and
    Rg -> Rg after separation.
    """
    gp = GridProblem(problem, n)
    cfg = PropagationConfig(dt=controls.dt, absorber=problem.absorber)
    start, ref = gp.separated, gp.reference_basis
    pairs = (("Lg", "e"), ("Rg", "g")) if problem.kind == MERGE else (("Lg", "Lg"), ("Rg", "Rg"))
    out = {}
    for a, b in pairs:
        psi = split_step_1p(start.single(a).wavefunction, controls, cfg, problem.lattice).final
        out[f"{a}->{b}"] = fidelity(psi, ref.single(b).wavefunction)
    return out


# ---------------------------------------------------------------------------
# batches


@dataclass
class Batch:
    problem: OptimizationProblem
    records: list[RunRecord]

    def durations(self) -> list[float]:
        return sorted({r.duration for r in self.records})

    def summary_rows(self) -> list[dict]:
        rows = []
        for T in self.durations():
            runs = [r for r in self.records if r.duration == T]
            ok = [r for r in runs if r.error is None and r.metrics]
            rows.append(
                {
                    "T": T,
                    "best_one_minus_F": min((r.one_minus("F") for r in ok), default=float("nan")),
                    "best_one_minus_Fprime": min((r.one_minus("F_prime") for r in ok), default=float("nan")),
                    "n_seeds": len(runs),
                    "n_converged": sum(r.converged for r in ok),
                }
            )
        return rows


def monotone_best(durations, values):
    """Running minimum of ``values`` over increasing duration and the mask of points that set it."""
    order = np.argsort(durations, kind="stable")
    vals = np.asarray(values, dtype=float)[order]
    running = np.minimum.accumulate(vals)
    is_front = np.zeros(vals.size, dtype=bool)
    best = np.inf
    for i, v in enumerate(vals):
        if v < best:
            is_front[i] = True
            best = v
    mask = np.empty_like(is_front)
    mask[order] = is_front
    curve = np.empty_like(running)
    curve[order] = running
    return curve, mask


def _run_one(args):
    problem, T, seed_controls, seed_id = args
    p = replace(problem, duration=T)
    try:
        return cascade_optimize(seed_controls, p, seed_id)
    except Exception as exc:  # recorded, batch continues
        rec = RunRecord(seed_id, p.kind, T, reason="error", error=f"{type(exc).__name__}: {exc}")
        return rec


def multistart(
    problem: OptimizationProblem,
    durations,
    seeds_per_T: int = 1,
    master_seed: int = 0,
    seed_controls: list[ControlSet] | None = None,
    amplitude: float = 0.15,
    workers: int = 1,
    stop_when=None,
    sines: int | None = None,
) -> Batch:
    """Independent cascade runs over a (duration, seed) grid.

    Merge seeds perturb the linear reference with random sines; for the
    full gate ``seed_controls`` (e.g. extended merge optima) are used as
    given and ``durations`` is ignored. ``stop_when(record)`` may end the
    batch early once it returns True.
    """
    jobs = []
    if seed_controls is not None:
        for i, c in enumerate(seed_controls):
            jobs.append((problem, c.duration, c, f"given-{i:04d}"))
    else:
        seq = np.random.SeedSequence(master_seed)
        children = iter(seq.spawn(len(durations) * seeds_per_T))
        first_dt = problem.cascade[0].dt
        for T in durations:
            ref = replace(problem, duration=T).reference(first_dt)
            for s in range(seeds_per_T):
                child = next(children)
                rng_seed = int(child.generate_state(1)[0])
                jobs.append((problem, T, generate_seed(ref, sines, amplitude, rng_seed), f"T{T:.4f}-s{s:03d}"))
    records = []
    if workers > 1 and stop_when is None:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_one, jobs))
    else:
        for job in jobs:
            rec = _run_one(job)
            records.append(rec)
            if stop_when is not None and stop_when(rec):
                break
    return Batch(problem, records)
