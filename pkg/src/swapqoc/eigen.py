"""Stationary one- and two-particle states of the lattice unit cell.

The kinetic term uses the fourth-order five-point Laplacian with zero
boundary values. The contact interaction is discretized on the diagonal
x1 == x2 with weight g1D(x)/dx. Two-particle problems are diagonalized
separately in the exchange-symmetric and antisymmetric sectors so every
returned state has a definite exchange parity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    Grid1D,
    Grid2D,
    GridMismatchError,
    Wavefunction,
    energy_to_khz,
    inner_product,
)
from .lattice import DEFAULT_LATTICE, GridPotential, LatticeParams

RESIDUAL_TOL = 1e-8


class EigenSolverError(RuntimeError):
    """Diagonalization did not converge to the requested accuracy."""


@dataclass(eq=False)
class EigenState:
    wavefunction: Wavefunction
    energy: float
    parity: int | None = None
    label: str | None = None

    @property
    def energy_khz(self) -> float:
        return float(energy_to_khz(self.energy))

    @property
    def amplitudes(self) -> np.ndarray:
        return self.wavefunction.amplitudes

    @property
    def grid(self):
        return self.wavefunction.grid


@dataclass(eq=False)
class SpectralBasis:
    """Labelled eigenstates of one control configuration.

    ``singles`` holds one-particle states, ``states`` the two-particle
    ones. ``pair`` names the two single-particle labels ``(a, b)`` whose
    exchange-split partner states are ``plus`` and ``minus``.
    """

    configuration: str
    controls: tuple[float, float, float]
    singles: list[EigenState]
    states: list[EigenState]
    pair: tuple[str, str]
    coupling: np.ndarray = field(repr=False)

    def single(self, label: str) -> EigenState:
        for s in self.singles:
            if s.label == label:
                return s
        raise KeyError(label)

    def get(self, label: str) -> EigenState:
        for s in self.states:
            if s.label == label:
                return s
        raise KeyError(label)

    @property
    def plus(self) -> EigenState:
        return self.get(pair_label(+1, *self.pair))

    @property
    def minus(self) -> EigenState:
        return self.get(pair_label(-1, *self.pair))

    @property
    def exchange_splitting(self) -> float:
        """E(plus) - E(minus) in hbar/ms: the exchange energy of the pair."""
        return self.plus.energy - self.minus.energy

    @property
    def u_eg(self) -> float:
        return self.exchange_splitting


def pair_label(parity: int, a: str, b: str) -> str:
    return f"Psi{'+' if parity > 0 else '-'}_{a},{b}"


# ---------------------------------------------------------------------------
# one particle


def laplacian_5pt(n: int, dx: float) -> sp.csr_matrix:
    """Fourth-order central difference Laplacian with zero boundary values."""
    ones = np.ones(n)
    diags = [-ones[2:], 16 * ones[1:], -30 * ones, 16 * ones[1:], -ones[2:]]
    return sp.diags(diags, [-2, -1, 0, 1, 2], format="csr") / (12 * dx * dx)


def single_particle_hamiltonian(potential: np.ndarray, grid: Grid1D, hbar_over_m: float) -> sp.csr_matrix:
    kin = -0.5 * hbar_over_m * laplacian_5pt(grid.n, grid.dx)
    return (kin + sp.diags(potential)).tocsr()


def _banded_upper(potential, grid, hbar_over_m):
    n = grid.n
    c = -0.5 * hbar_over_m / (12 * grid.dx ** 2)
    ab = np.zeros((3, n))
    ab[0, 2:] = -1 * c
    ab[1, 1:] = 16 * c
    ab[2, :] = -30 * c + potential
    return ab


def single_particle_eigenstates(
    controls,
    grid: Grid1D,
    count: int = 4,
    lattice: LatticeParams = DEFAULT_LATTICE,
) -> list[EigenState]:
    """Lowest ``count`` eigenpairs of the single-particle Hamiltonian.

    ``controls`` are physical (beta, theta, v0).
    """
    if count < 1 or count > 10:
        raise ValueError("count must be between 1 and 10")
    pot = GridPotential(grid, lattice).potential(*controls)
    ab = _banded_upper(pot, grid, lattice.hbar_over_m)
    try:
        energies, vecs = la.eig_banded(ab, lower=False, select="i", select_range=(0, count - 1))
    except la.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    out = []
    for j in range(count):
        v = vecs[:, j]
        v = v * np.sign(v[np.argmax(np.abs(v))])
        wf = Wavefunction(grid, v / np.sqrt(grid.dx))
        out.append(EigenState(wf, float(energies[j])))
    return out


def localized_pair(states: list[EigenState], lattice: LatticeParams = DEFAULT_LATTICE) -> tuple[EigenState, EigenState]:
    """Left/right localized combinations of the two lowest states.

    Diagonalizes the position operator inside their span and orders the
    result by the sign of <x>.
    """
    s0, s1 = states[0], states[1]
    grid = s0.grid
    x = np.asarray(grid.points)
    basis = np.stack([s0.amplitudes, s1.amplitudes], axis=1)
    xmat = (basis.conj().T * x) @ basis * grid.dx
    xmat = 0.5 * (xmat + xmat.conj().T)
    _, rot = np.linalg.eigh(xmat)
    hmat = np.diag([s0.energy, s1.energy])
    loc = []
    for j in range(2):
        amp = basis @ rot[:, j]
        amp = amp * np.exp(-1j * np.angle(amp[np.argmax(np.abs(amp))]))
        amp = amp.real if np.allclose(amp.imag, 0, atol=1e-12) else amp
        energy = float(np.real(rot[:, j].conj() @ hmat @ rot[:, j]))
        loc.append(EigenState(Wavefunction(grid, amp).normalized(), energy))
    loc.sort(key=lambda s: float(np.sum(x * s.wavefunction.density()) * grid.dx))
    loc[0].label, loc[1].label = "Lg", "Rg"
    return loc[0], loc[1]


# ---------------------------------------------------------------------------
# two particles


@lru_cache(maxsize=8)
def exchange_sector_maps(n: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Orthonormal embeddings of the symmetric and antisymmetric sectors.

    Columns are (|i,j> +- |j,i>)/sqrt(2) for i < j, plus |i,i> in the
    symmetric sector. Flattening is row-major (index i1 * n + i2).
    """
    iu, ju = np.triu_indices(n, k=1)
    m = iu.size
    r = 1 / np.sqrt(2)
    diag = np.arange(n)
    rows_s = np.concatenate([diag * n + diag, iu * n + ju, ju * n + iu])
    cols_s = np.concatenate([np.arange(n), n + np.arange(m), n + np.arange(m)])
    vals_s = np.concatenate([np.ones(n), np.full(2 * m, r)])
    sym = sp.csr_matrix((vals_s, (rows_s, cols_s)), shape=(n * n, n + m))
    rows_a = np.concatenate([iu * n + ju, ju * n + iu])
    cols_a = np.concatenate([np.arange(m), np.arange(m)])
    vals_a = np.concatenate([np.full(m, r), np.full(m, -r)])
    anti = sp.csr_matrix((vals_a, (rows_a, cols_a)), shape=(n * n, m))
    return sym, anti


def interaction_diagonal(g1d, grid: Grid1D) -> np.ndarray:
    """Grid delta function: g1D(x_i)/dx on the cells x1 == x2."""
    g = np.broadcast_to(np.asarray(g1d, dtype=float), (grid.n,))
    return g / grid.dx


def two_particle_hamiltonian(controls, grid2: Grid2D, g1d=None, lattice: LatticeParams = DEFAULT_LATTICE) -> sp.csr_matrix:
    base = grid2.base
    gp = GridPotential(base, lattice)
    h = single_particle_hamiltonian(gp.potential(*controls), base, lattice.hbar_over_m)
    eye = sp.identity(base.n, format="csr")
    if g1d is None:
        g1d = gp.coupling(*controls)
    inter = np.zeros(base.n * base.n)
    inter[np.arange(base.n) * (base.n + 1)] = interaction_diagonal(g1d, base)
    return (sp.kron(h, eye) + sp.kron(eye, h) + sp.diags(inter)).tocsr()


def exchange_parity(psi: Wavefunction) -> float:
    """<P12>, the expectation of the particle exchange operator."""
    a = psi.amplitudes
    return float(np.real(np.vdot(a, a.T)) / np.real(np.vdot(a, a)))


def _sector_eigs(hs: sp.spmatrix, count: int, sigma: float):
    count = min(count, hs.shape[0] - 2)
    try:
        energies, vecs = spla.eigsh(hs.tocsc(), k=count, sigma=sigma, which="LM", tol=1e-13)
    except spla.ArpackNoConvergence as exc:
        raise EigenSolverError("two-particle diagonalization did not converge") from exc
    order = np.argsort(energies)
    return energies[order], vecs[:, order]


def two_particle_eigenstates(
    controls,
    grid2: Grid2D,
    g1d=None,
    count: int = 6,
    lattice: LatticeParams = DEFAULT_LATTICE,
) -> list[EigenState]:
    """Lowest ``count`` two-particle eigenpairs tagged with exchange parity.

    ``g1d`` overrides the coupling field (scalar or per-grid-point array);
    ``None`` evaluates the lattice coupling for the given controls.
    """
    base = grid2.base
    n = base.n
    h = two_particle_hamiltonian(controls, grid2, g1d, lattice)
    sym, anti = exchange_sector_maps(n)
    vmin = GridPotential(base, lattice).potential(*controls).min()
    sigma = 2 * vmin - 1.0
    found = []
    for parity, emb in ((+1, sym), (-1, anti)):
        hs = (emb.T @ h @ emb).tocsr()
        energies, vecs = _sector_eigs(hs, count, sigma)
        full = emb @ vecs
        for j in range(energies.size):
            v = full[:, j]
            # unit l2 vector: its l2 residual equals the grid-norm residual of the normalized state
            res = np.linalg.norm(h @ v - energies[j] * v)
            if res > RESIDUAL_TOL:
                raise EigenSolverError(f"residual {res:.2e} too large for eigenpair {j}")
            v = v * np.sign(v[np.argmax(np.abs(v))])
            wf = Wavefunction(grid2, v.reshape(n, n) / base.dx)
            found.append(EigenState(wf, float(energies[j]), parity))
    found.sort(key=lambda s: s.energy)
    return found[:count]


def symmetrized_product(a: EigenState | Wavefunction, b: EigenState | Wavefunction, parity: int) -> Wavefunction:
    """Normalized a(x1) b(x2) + parity * b(x1) a(x2)."""
    wa = a.wavefunction if isinstance(a, EigenState) else a
    wb = b.wavefunction if isinstance(b, EigenState) else b
    if not wa.grid.same_as(wb.grid):
        raise GridMismatchError("single-particle states live on different grids")
    grid2 = Grid2D(wa.grid)
    amp = np.outer(wa.amplitudes, wb.amplitudes) + parity * np.outer(wb.amplitudes, wa.amplitudes)
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid2.volume_element)
    if norm < 1e-10:
        raise ValueError("symmetrized product vanishes (identical states with odd parity)")
    return Wavefunction(grid2, amp / norm)


def product_state(a: EigenState | Wavefunction, b: EigenState | Wavefunction) -> Wavefunction:
    """Unsymmetrized product a(x1) b(x2), normalized."""
    wa = a.wavefunction if isinstance(a, EigenState) else a
    wb = b.wavefunction if isinstance(b, EigenState) else b
    return Wavefunction(Grid2D(wa.grid), np.outer(wa.amplitudes, wb.amplitudes)).normalized()


def interaction_energy(a: EigenState | Wavefunction, b: EigenState | Wavefunction, g1d) -> float:
    """Perturbative exchange energy 2 * int |a|^2 |b|^2 g1D dx."""
    wa = a.wavefunction if isinstance(a, EigenState) else a
    wb = b.wavefunction if isinstance(b, EigenState) else b
    if not wa.grid.same_as(wb.grid):
        raise GridMismatchError("single-particle states live on different grids")
    return float(2 * np.sum(wa.density() * wb.density() * np.asarray(g1d)) * wa.grid.dx)


def classify_state(psi: Wavefunction, basis: SpectralBasis | list[EigenState]):
    """Populations |<basis_i|psi>|^2 keyed by label and the best label."""
    states = basis.states if isinstance(basis, SpectralBasis) else basis
    if not states:
        raise ValueError("empty basis")
    pops = {}
    for i, s in enumerate(states):
        key = s.label or f"state{i}"
        pops[key] = abs(inner_product(s.wavefunction, psi)) ** 2
    best = max(pops, key=pops.get)
    return pops, best


def _label_pair(states: list[EigenState], a: EigenState, b: EigenState) -> None:
    for parity in (+1, -1):
        ref = symmetrized_product(a, b, parity)
        cands = [s for s in states if s.parity == parity]
        if not cands:
            raise EigenSolverError(f"no states of parity {parity:+d} found")
        overlaps = [inner_product(s.wavefunction, ref) for s in cands]
        j = int(np.argmax(np.abs(overlaps)))
        best = cands[j]
        phase = overlaps[j] / abs(overlaps[j])
        best.wavefunction = Wavefunction(best.grid, best.amplitudes * phase)
        best.label = pair_label(parity, a.label, b.label)


def build_basis(
    controls,
    n: int,
    configuration: str = "merged",
    lattice: LatticeParams = DEFAULT_LATTICE,
    count: int = 6,
    g1d=None,
) -> SpectralBasis:
    """Diagonalize and label one configuration.

    ``configuration`` is ``"separated"`` (labels Lg/Rg from the localized
    ground doublet) or ``"merged"`` (labels g/e from the two lowest
    states). The two-particle states built from that pair are labelled
    ``Psi+_{a,b}`` and ``Psi-_{a,b}`` with phases chosen so their overlap
    with the symmetrized product is real and positive.
    """
    grid = lattice.grid(n)
    controls = tuple(float(c) for c in controls)
    singles = single_particle_eigenstates(controls, grid, 4, lattice)
    gp = GridPotential(grid, lattice)
    coupling = gp.coupling(*controls) if g1d is None else np.broadcast_to(np.asarray(g1d, dtype=float), (n,)).copy()
    if configuration == "separated":
        a, b = localized_pair(singles, lattice)
        named = [a, b] + singles[2:]
    elif configuration == "merged":
        singles[0].label, singles[1].label = "g", "e"
        a, b = singles[1], singles[0]
        named = singles
    else:
        raise ValueError(f"unknown configuration {configuration!r}")
    states = two_particle_eigenstates(controls, Grid2D(grid), coupling, count, lattice)
    _label_pair(states, a, b)
    return SpectralBasis(configuration, controls, named, states, (a.label, b.label), coupling)


def export_densities(states, path) -> None:
    """CSV of |psi|^2; columns are states, rows grid points (row-major for 2p)."""
    cols = [s.wavefunction.density().ravel() for s in states]
    grid = states[0].grid
    if isinstance(grid, Grid2D):
        x = np.asarray(grid.base.points)
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        coords = [x1.ravel(), x2.ravel()]
        head = ["x1", "x2"]
    else:
        coords = [np.asarray(grid.points)]
        head = ["x"]
    labels = [s.label or f"state{i}" for i, s in enumerate(states)]
    data = np.column_stack(coords + cols)
    np.savetxt(path, data, delimiter=",", header=",".join(head + labels), comments="")
