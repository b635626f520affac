"""Independent-particle exchange phase, swap timings and the spin picture."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .controls import ControlSet
from .eigen import (
    EigenState,
    interaction_energy,
    localized_pair,
    single_particle_eigenstates,
)
from .grid import Wavefunction, energy_to_khz, inner_product
from .lattice import DEFAULT_LATTICE, GridPotential, LatticeParams
from .propagation import PropagationConfig, Trajectory, split_step_1p

SPIN_BASIS = ("dd", "ud", "du", "uu")


class TrackingLostError(RuntimeError):
    """An instantaneous eigenstate could not be followed between samples."""


class PhaseWindowError(ValueError):
    """The accrued phase exceeds pi/4, so the wait formula has no solution."""


@dataclass(eq=False)
class PhaseTrace:
    """Interaction energy (hbar/ms) and accumulated phase (rad) along a ramp."""

    times: np.ndarray
    U: np.ndarray
    alpha: np.ndarray

    @property
    def U_khz(self) -> np.ndarray:
        return energy_to_khz(self.U)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.U_khz, self.alpha])
        np.savetxt(path, data, delimiter=",", header="t,U,alpha", comments="", fmt="%.17g")


def _initial_singles(controls: ControlSet, labels, grid, lattice):
    states = single_particle_eigenstates(controls.physical_at(0), grid, 6, lattice)
    if set(labels) <= {"Lg", "Rg"}:
        left, right = localized_pair(states, lattice)
        named = {"Lg": left, "Rg": right}
    else:
        names = ["g", "e", "e2", "e3", "e4", "e5"]
        named = {}
        for name, s in zip(names, states):
            s.label = name
            named[name] = s
    try:
        return [named[l] for l in labels]
    except KeyError as exc:
        raise ValueError(f"unknown state label {exc.args[0]!r}") from None


def _track(prev: np.ndarray, states: list[EigenState], dx: float, cluster_tol: float, threshold: float):
    vecs = np.stack([s.amplitudes for s in states], axis=1)
    energies = np.array([s.energy for s in states])
    ov = vecs.conj().T @ prev * dx
    j = int(np.argmax(np.abs(ov)))
    cluster = np.abs(energies - energies[j]) < cluster_tol
    proj = vecs[:, cluster] @ ov[cluster]
    weight = np.sqrt(np.sum(np.abs(proj) ** 2) * dx)
    if weight < threshold:
        raise TrackingLostError(f"overlap with previous sample dropped to {weight:.3f}")
    return proj / weight


def adiabatic_phase(
    controls: ControlSet,
    tracked_labels=("Lg", "Rg"),
    n: int = 64,
    lattice: LatticeParams = DEFAULT_LATTICE,
    mode: str = "eigen",
    stride: int = 1,
    cluster_tol_khz: float = 0.01,
    threshold: float = 0.9,
    cfg: PropagationConfig | None = None,
) -> PhaseTrace:
    """Accumulated exchange phase alpha(t) = int U_{a(t),b(t)} dt.

    ``mode="eigen"`` follows instantaneous single-particle eigenstates by
    maximal-overlap continuation (nearly degenerate levels are followed as a
    projected cluster). ``mode="propagate"`` uses independently propagated
    single-particle states instead, valid for diabatic ramps.
    """
    grid = lattice.grid(n)
    gp = GridPotential(grid, lattice)
    idx = np.arange(0, controls.n_steps + 1, stride)
    if idx[-1] != controls.n_steps:
        idx = np.append(idx, controls.n_steps)
    a0, b0 = _initial_singles(controls, tracked_labels, grid, lattice)
    if mode == "propagate":
        cfg = cfg or PropagationConfig(dt=controls.dt, store_stride=1)
        cfg = PropagationConfig(dt=cfg.dt, absorber=cfg.absorber, store_stride=1)
        ta = split_step_1p(a0.wavefunction, controls, cfg, lattice)
        tb = split_step_1p(b0.wavefunction, controls, cfg, lattice)
        pairs = [(ta.snapshots[i].amplitudes, tb.snapshots[i].amplitudes) for i in idx]
    elif mode == "eigen":
        tol = 2 * np.pi * cluster_tol_khz
        a, b = a0.amplitudes, b0.amplitudes
        pairs = []
        for i in idx:
            states = single_particle_eigenstates(controls.physical_at(i), grid, 6, lattice)
            a = _track(a, states, grid.dx, tol, threshold)
            b = _track(b, states, grid.dx, tol, threshold)
            pairs.append((a, b))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    U = np.array(
        [
            interaction_energy(Wavefunction(grid, pa), Wavefunction(grid, pb), gp.coupling(*controls.physical_at(i)))
            for i, (pa, pb) in zip(idx, pairs)
        ]
    )
    t = controls.times[idx]
    alpha = cumulative_trapezoid(U, t, initial=0.0)
    return PhaseTrace(t, U, alpha)


def swap_durations(U: float, alpha_accrued: float = 0.0):
    """(T_SWAP, T_sqrtSWAP, wait) for exchange energy U (hbar/ms).

    ``wait`` is the static hold needed between a merge and its time-reversed
    separation when each of them accrues ``alpha_accrued``.
    """
    if U <= 0:
        raise ValueError("exchange energy must be positive")
    if alpha_accrued > np.pi / 4:
        raise PhaseWindowError(f"accrued phase {alpha_accrued:.3f} exceeds pi/4")
    t_swap = np.pi / U
    return t_swap, t_swap / 2, (np.pi / 2 - 2 * alpha_accrued) / U


def merged_hold_time(U: float, alpha_accrued: float) -> float:
    """Static hold in the merged trap that takes alpha from ``alpha_accrued`` to pi/2."""
    if U <= 0:
        raise ValueError("exchange energy must be positive")
    return (np.pi / 2 - alpha_accrued) / U


@dataclass(eq=False)
class SpinState:
    """Amplitudes on |dd>, |ud>, |du>, |uu>."""

    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        nrm = np.linalg.norm(self.amplitudes)
        if not np.isclose(nrm, 1.0, atol=1e-12):
            raise ValueError("spin state must be normalized")

    @classmethod
    def basis(cls, name: str) -> "SpinState":
        amp = np.zeros(4, dtype=complex)
        amp[SPIN_BASIS.index(name)] = 1.0
        return cls(amp)

    def populations(self) -> dict[str, float]:
        return dict(zip(SPIN_BASIS, np.abs(self.amplitudes) ** 2))

    def magnetization(self) -> float:
        """Total S_z in units of hbar."""
        p = np.abs(self.amplitudes) ** 2
        return float(-p[0] + p[3])


def spin_hamiltonian(j_ex: float) -> np.ndarray:
    """J_ex S1.S2 in the (dd, ud, du, uu) basis, hbar = 1."""
    return j_ex / 4 * np.array(
        [[1, 0, 0, 0], [0, -1, 2, 0], [0, 2, -1, 0], [0, 0, 0, 1]], dtype=float
    )


def spin_evolution(j_ex: float, t: float, s0: SpinState) -> SpinState:
    energies, vecs = np.linalg.eigh(spin_hamiltonian(j_ex))
    amp = vecs @ (np.exp(-1j * energies * t) * (vecs.conj().T @ s0.amplitudes))
    return SpinState(amp / np.linalg.norm(amp))


def spin_populations_from_pair(psi: Wavefunction, plus, minus) -> tuple[float, float]:
    """(P_ud, P_du) read off the exchange pair components of a spatial state.

    |up_a, down_b> pairs with plus + minus and |down_a, up_b> with plus - minus.
    """
    p = plus.wavefunction if isinstance(plus, EigenState) else plus
    m = minus.wavefunction if isinstance(minus, EigenState) else minus
    cp = inner_product(p, psi)
    cm = inner_product(m, psi)
    return abs(cp + cm) ** 2 / 2, abs(cp - cm) ** 2 / 2


def independent_densities(
    controls: ControlSet,
    labels=("Lg", "Rg"),
    n: int = 64,
    cfg: PropagationConfig | None = None,
    lattice: LatticeParams = DEFAULT_LATTICE,
) -> tuple[Trajectory, Trajectory]:
    """Propagate the two single-particle states separately (no interaction)."""
    grid = lattice.grid(n)
    cfg = cfg or PropagationConfig(dt=controls.dt)
    a, b = _initial_singles(controls, labels, grid, lattice)
    return (
        split_step_1p(a.wavefunction, controls, cfg, lattice),
        split_step_1p(b.wavefunction, controls, cfg, lattice),
    )
