"""Split-step Fourier propagation of one- and two-particle states.

Each step of length dt is the symmetric splitting
``exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2)`` with the potential evaluated
at the step-midpoint control values (average of the two bracketing
samples). The potential includes an imaginary absorber in the padding
region outside the physical cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .controls import ControlSet, steps_for
from .eigen import EigenState, interaction_diagonal
from .grid import Grid1D, Grid2D, Wavefunction, inner_product, khz_to_energy, wavenumbers
from .lattice import DEFAULT_LATTICE, GridPotential, LatticeParams

FINAL_DT = 1.2e-5


class SamplingMismatchError(ValueError):
    """Controls are sampled more coarsely than the requested time step."""


class UndefinedPhaseError(ValueError):
    """A relative phase was requested for a vanishing component."""


@dataclass(frozen=True)
class Absorber:
    """Imaginary potential ``-i * strength * ((|x| - edge) / width)**2`` past the cell edge.

    ``width`` is a fraction of the lattice constant; the default covers the
    whole padding region.
    """

    strength_khz: float = 50.0
    width: float = 0.2

    def profile(self, grid: Grid1D, lattice: LatticeParams = DEFAULT_LATTICE) -> np.ndarray:
        x = np.abs(np.asarray(grid.points))
        edge = lattice.cell_half_width * lattice.a
        depth = np.clip((x - edge) / (self.width * lattice.a), 0.0, None)
        return float(khz_to_energy(self.strength_khz)) * np.minimum(depth, 1.0) ** 2


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = FINAL_DT
    absorber: Absorber | None = field(default_factory=Absorber)
    store_stride: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    snapshots: list[Wavefunction]
    snapshot_times: np.ndarray
    observables: dict[str, np.ndarray]
    final: Wavefunction


class SplitStepPropagator:
    """Reusable split-step machinery for one grid and particle number.

    Works on raw amplitude arrays so the optimizer can drive single steps.
    ``g1d`` overrides the interaction field for two particles (scalar or
    per-point array); ``None`` uses the control-dependent lattice coupling.
    """

    def __init__(
        self,
        grid: Grid1D,
        particles: int = 2,
        lattice: LatticeParams = DEFAULT_LATTICE,
        absorber: Absorber | None = None,
        g1d=None,
    ):
        if particles not in (1, 2):
            raise ValueError("particles must be 1 or 2")
        self.grid = grid
        self.particles = particles
        self.lattice = lattice
        self.potential = GridPotential(grid, lattice)
        self.k = wavenumbers(grid)
        self.kinetic = 0.5 * lattice.hbar_over_m * self.k ** 2
        self.damping = absorber.profile(grid, lattice) if absorber is not None else np.zeros(grid.n)
        self.g1d = None if g1d is None else np.broadcast_to(np.asarray(g1d, dtype=float), (grid.n,)).copy()
        self.diag = np.arange(grid.n) * (grid.n + 1)
        self._kin_cache: dict[float, np.ndarray] = {}
        self._half_cache: tuple | None = None

    @property
    def wave_grid(self):
        return self.grid if self.particles == 1 else Grid2D(self.grid)

    # -- fields -----------------------------------------------------------

    def interaction(self, u) -> np.ndarray:
        g = self.potential.coupling(*u) if self.g1d is None else self.g1d
        return interaction_diagonal(g, self.grid)

    def fields(self, u):
        """Real single-particle potential and diagonal interaction at physical controls u."""
        v = self.potential.potential(*u)
        inter = self.interaction(u) if self.particles == 2 else None
        return v, inter

    def field_gradients(self, u):
        """d/du of the single-particle potential and of the diagonal interaction (3 x n each)."""
        _, dv = self.potential.potential_and_gradients(*u)
        if self.particles == 1:
            return np.array(dv), None
        if self.g1d is not None:
            dint = np.zeros((3, self.grid.n))
        else:
            _, dg = self.potential.coupling_and_gradients(*u)
            dint = np.array([interaction_diagonal(d, self.grid) for d in dg])
        return np.array(dv), dint

    # -- factors ----------------------------------------------------------

    def kinetic_factor(self, dt: float) -> np.ndarray:
        f = self._kin_cache.get(dt)
        if f is None:
            k1 = np.exp(-1j * dt * self.kinetic)
            f = k1 if self.particles == 1 else np.outer(k1, k1)
            self._kin_cache[dt] = f
        return f

    def half_factor(self, u, dt: float) -> np.ndarray:
        key = (tuple(float(c) for c in u), dt)
        if self._half_cache is not None and self._half_cache[0] == key:
            return self._half_cache[1]
        v, inter = self.fields(u)
        e1 = np.exp(-0.5j * dt * (v - 1j * self.damping))
        if self.particles == 1:
            f = e1
        else:
            f = np.outer(e1, e1)
            f.ravel()[self.diag] *= np.exp(-0.5j * dt * inter)
        self._half_cache = (key, f)
        return f

    # -- stepping ---------------------------------------------------------

    def _fft(self, a):
        return sfft.fft(a) if self.particles == 1 else sfft.fft2(a)

    def _ifft(self, a):
        return sfft.ifft(a) if self.particles == 1 else sfft.ifft2(a)

    def kinetic_step(self, psi: np.ndarray, dt: float, adjoint: bool = False) -> np.ndarray:
        kf = self.kinetic_factor(dt)
        return self._ifft((kf.conj() if adjoint else kf) * self._fft(psi))

    def step(self, psi: np.ndarray, u, dt: float) -> np.ndarray:
        half = self.half_factor(u, dt)
        return half * self.kinetic_step(half * psi, dt)

    def evolve(self, psi: np.ndarray, controls: ControlSet, start: int = 0, stop: int | None = None, callback=None) -> np.ndarray:
        """Apply steps ``start .. stop-1`` of ``controls`` to amplitudes ``psi``.

        ``callback(n, psi)`` is invoked after each step with the step index.
        """
        u_steps = controls.step_values()
        stop = controls.n_steps if stop is None else stop
        dt = controls.dt
        psi = np.array(psi, dtype=complex)
        for n in range(start, stop):
            psi = self.step(psi, u_steps[:, n], dt)
            if callback is not None:
                callback(n, psi)
        return psi


def check_sampling(controls: ControlSet, cfg: PropagationConfig) -> None:
    if controls.dt > cfg.dt * (1 + 1e-9) and steps_for(controls.duration, cfg.dt) > controls.n_steps:
        raise SamplingMismatchError(
            f"controls sampled at dt={controls.dt:.3g} ms, coarser than requested {cfg.dt:.3g} ms"
        )


def _propagate(prop: SplitStepPropagator, psi0: Wavefunction, controls: ControlSet, cfg: PropagationConfig, observe):
    check_sampling(controls, cfg)
    grid = prop.wave_grid
    if not psi0.grid.same_as(grid):
        raise ValueError("initial state does not live on the propagation grid")
    vol = grid.volume_element
    norms = np.empty(controls.n_steps + 1)
    norms[0] = psi0.norm()
    obs_states = {name: s.wavefunction.amplitudes if isinstance(s, EigenState) else s.amplitudes for name, s in (observe or {}).items()}
    overlaps = {name: np.empty(controls.n_steps + 1, dtype=complex) for name in obs_states}
    for name, ref in obs_states.items():
        overlaps[name][0] = np.vdot(ref, psi0.amplitudes) * vol
    snaps = [psi0.copy()]
    snap_t = [0.0]
    stride = cfg.store_stride

    def record(n, psi):
        norms[n + 1] = np.sqrt(np.sum(np.abs(psi) ** 2) * vol)
        for name, ref in obs_states.items():
            overlaps[name][n + 1] = np.vdot(ref, psi) * vol
        if stride and (n + 1) % stride == 0:
            snaps.append(Wavefunction(grid, psi.copy()))
            snap_t.append(controls.times[n + 1])

    final = prop.evolve(psi0.amplitudes, controls, callback=record)
    obs = {"norm": norms}
    obs.update(overlaps)
    return Trajectory(controls.times.copy(), snaps, np.array(snap_t), obs, Wavefunction(grid, final))


def split_step_1p(
    psi0: Wavefunction,
    controls: ControlSet,
    cfg: PropagationConfig = PropagationConfig(),
    lattice: LatticeParams = DEFAULT_LATTICE,
    observe: dict | None = None,
) -> Trajectory:
    """Propagate a one-particle state; ``observe`` maps names to states whose overlaps are recorded."""
    if isinstance(psi0.grid, Grid2D):
        raise ValueError("split_step_1p needs a one-particle state")
    prop = SplitStepPropagator(psi0.grid, 1, lattice, cfg.absorber)
    return _propagate(prop, psi0, controls, cfg, observe)


def split_step_2p(
    psi0: Wavefunction,
    controls: ControlSet,
    cfg: PropagationConfig = PropagationConfig(),
    lattice: LatticeParams = DEFAULT_LATTICE,
    observe: dict | None = None,
    g1d=None,
) -> Trajectory:
    """Propagate a two-particle state including the contact interaction."""
    if not isinstance(psi0.grid, Grid2D):
        raise ValueError("split_step_2p needs a two-particle state")
    prop = SplitStepPropagator(psi0.grid.base, 2, lattice, cfg.absorber, g1d)
    return _propagate(prop, psi0, controls, cfg, observe)


def fidelity(psi: Wavefunction, target: Wavefunction) -> float:
    return abs(inner_product(target, psi)) ** 2


def _state(s):
    return s.wavefunction if isinstance(s, EigenState) else s


def merge_population(psi: Wavefunction, plus, minus) -> float:
    """Total population in the exchange-split pair (phase insensitive)."""
    return abs(inner_product(_state(plus), psi)) ** 2 + abs(inner_product(_state(minus), psi)) ** 2


def relative_phase(psi: Wavefunction, plus, minus, min_overlap: float = 1e-3) -> float:
    """arg<minus|psi> - arg<plus|psi> wrapped to [0, 2 pi)."""
    cp = inner_product(_state(plus), psi)
    cm = inner_product(_state(minus), psi)
    if abs(cp) < min_overlap or abs(cm) < min_overlap:
        raise UndefinedPhaseError("relative phase undefined: a component is (nearly) absent")
    return float(np.mod(np.angle(cm) - np.angle(cp), 2 * np.pi))


def pair_superposition(plus, minus, alpha: float = 0.0) -> Wavefunction:
    """Normalized plus + exp(i alpha) minus."""
    p, m = _state(plus), _state(minus)
    return (p + m * np.exp(1j * alpha)).normalized()
