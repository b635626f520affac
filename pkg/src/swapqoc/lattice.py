"""Controllable double-well/single-well lattice potential and 1D coupling.

All energies are in hbar/ms (see :mod:`swapqoc.grid`). Control angles are
in radians and ``v0`` is the physical lattice depth in hbar/ms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RUBIDIUM87, Grid1D, UnitSystem, khz_to_energy, make_grid_1d


class TransverseFrequencyError(ValueError):
    """The transverse curvature is negative, so x is not a transverse minimum."""


@dataclass(frozen=True)
class LatticeParams:
    """Physical constants of the lattice unit cell (lengths in um)."""

    a: float = 0.408
    v_z_khz: float = 186.0
    a_s: float = 5.45e-3
    units: UnitSystem = field(default=RUBIDIUM87)
    cell_half_width: float = 1.0
    padded_half_width: float = 1.2

    @property
    def k(self) -> float:
        return np.pi / self.a

    @property
    def v_z(self) -> float:
        return float(khz_to_energy(self.v_z_khz))

    @property
    def hbar_over_m(self) -> float:
        return self.units.hbar_over_m

    @property
    def x_min(self) -> float:
        return -self.padded_half_width * self.a

    @property
    def x_max(self) -> float:
        return self.padded_half_width * self.a

    def cell_mask(self, x) -> np.ndarray:
        """True on points inside the physical unit cell ``|x| <= a``."""
        return np.abs(np.asarray(x)) <= self.cell_half_width * self.a * (1 + 1e-12)

    def grid(self, n: int) -> Grid1D:
        return make_grid_1d(n, self.x_min, self.x_max)


DEFAULT_LATTICE = LatticeParams()


def _phase(x, theta, k):
    return k * np.asarray(x, dtype=float) - theta - np.pi / 2


def potential_1d(x, beta, theta, v0, lattice: LatticeParams = DEFAULT_LATTICE):
    """Lattice potential along x for physical control values."""
    k = lattice.k
    c2 = np.cos(beta / 2) ** 2
    s2 = np.sin(beta / 2) ** 2
    x = np.asarray(x, dtype=float)
    return -v0 * (c2 * (1 + np.cos(k * x - np.pi / 2) ** 2) + s2 * (1 + np.cos(_phase(x, theta, k))) ** 2)


def potential_gradients(x, beta, theta, v0, lattice: LatticeParams = DEFAULT_LATTICE):
    """Analytic (dV/dbeta, dV/dtheta, dV/dv0) of :func:`potential_1d`.

    The scaled-control chain rule factors are left to the caller.
    """
    k = lattice.k
    x = np.asarray(x, dtype=float)
    sin_kx2 = np.cos(k * x - np.pi / 2) ** 2
    phi = _phase(x, theta, k)
    well = (1 + np.cos(phi)) ** 2
    d_beta = -v0 * 0.5 * np.sin(beta) * (well - 1 - sin_kx2)
    d_theta = -v0 * np.sin(beta / 2) ** 2 * 2 * (1 + np.cos(phi)) * np.sin(phi)
    d_v0 = -(np.cos(beta / 2) ** 2 * (1 + sin_kx2) + np.sin(beta / 2) ** 2 * well)
    return d_beta, d_theta, d_v0


def _omega_y_squared(x, beta, theta, v0, lattice):
    k = lattice.k
    radial = np.cos(beta / 2) ** 2 + np.sin(beta / 2) ** 2 * (1 + np.cos(_phase(x, theta, k)))
    return 2 * v0 * k ** 2 * lattice.hbar_over_m * radial


def local_frequencies(x, beta, theta, v0, v_z=None, lattice: LatticeParams = DEFAULT_LATTICE):
    """Transverse harmonic frequencies (omega_y(x), omega_z) in rad/ms.

    ``v_z`` defaults to the lattice's transverse depth.
    """
    if v_z is None:
        v_z = lattice.v_z
    wy2 = _omega_y_squared(x, beta, theta, v0, lattice)
    if np.any(wy2 < 0) or v_z < 0:
        raise TransverseFrequencyError(
            "negative transverse curvature: controls do not give a minimum along y/z"
        )
    omega_z = np.sqrt(2 * v_z * lattice.k ** 2 * lattice.hbar_over_m)
    return np.sqrt(wy2), omega_z


def coupling_g1d(x, beta, theta, v0, v_z=None, a_s=None, lattice: LatticeParams = DEFAULT_LATTICE):
    """Effective 1D contact coupling ``2 a_s sqrt(omega_y omega_z)`` (hbar/ms * um)."""
    if a_s is None:
        a_s = lattice.a_s
    wy, wz = local_frequencies(x, beta, theta, v0, v_z, lattice)
    return 2 * a_s * np.sqrt(wy * wz)


def coupling_gradients(x, beta, theta, v0, v_z=None, a_s=None, lattice: LatticeParams = DEFAULT_LATTICE):
    """(dg/dbeta, dg/dtheta, dg/dv0) of :func:`coupling_g1d`."""
    g = coupling_g1d(x, beta, theta, v0, v_z, a_s, lattice)
    k = lattice.k
    phi = _phase(x, theta, k)
    pref = 2 * v0 * k ** 2 * lattice.hbar_over_m
    wy2 = _omega_y_squared(x, beta, theta, v0, lattice)
    # g ~ (wy^2)^(1/4)  =>  dg = g * d(wy^2) / (4 wy^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(wy2 > 0, g / (4 * wy2), 0.0)
    d_beta = scale * pref * 0.5 * np.sin(beta) * np.cos(phi)
    d_theta = scale * pref * np.sin(beta / 2) ** 2 * np.sin(phi)
    d_v0 = scale * wy2 / v0 if v0 != 0 else np.zeros_like(g)
    return d_beta, d_theta, d_v0


def potential_3d(x, y, z, beta, theta, v0, v_z=None, lattice: LatticeParams = DEFAULT_LATTICE):
    """Full 3D lattice potential; used only to cross-check transverse curvatures."""
    if v_z is None:
        v_z = lattice.v_z
    k = lattice.k
    return -v_z * np.cos(k * z) ** 2 - v0 * (
        np.cos(beta / 2) ** 2 * (np.cos(k * y) ** 2 + np.cos(k * x - np.pi / 2) ** 2)
        + np.sin(beta / 2) ** 2 * (np.cos(k * y) + np.cos(k * x - theta - np.pi / 2)) ** 2
    )


class GridPotential:
    """Potential and interaction fields sampled on a padded cell grid.

    Outside the physical cell the potential is clamped to the largest
    in-cell grid value, which keeps diagonalization stable.
    """

    def __init__(self, grid: Grid1D, lattice: LatticeParams = DEFAULT_LATTICE, a_s=None):
        self.grid = grid
        self.lattice = lattice
        self.a_s = lattice.a_s if a_s is None else a_s
        self.x = np.asarray(grid.points)
        self.cell = lattice.cell_mask(self.x)
        self._cell_index = np.flatnonzero(self.cell)

    def _argmax(self, v):
        return self._cell_index[np.argmax(v[self._cell_index])]

    def potential(self, beta, theta, v0) -> np.ndarray:
        v = potential_1d(self.x, beta, theta, v0, self.lattice)
        v[~self.cell] = v[self._argmax(v)]
        return v

    def potential_and_gradients(self, beta, theta, v0):
        v = potential_1d(self.x, beta, theta, v0, self.lattice)
        grads = [np.array(gr, dtype=float) for gr in potential_gradients(self.x, beta, theta, v0, self.lattice)]
        j = self._argmax(v)
        v[~self.cell] = v[j]
        for gr in grads:
            gr[~self.cell] = gr[j]
        return v, grads

    def coupling(self, beta, theta, v0) -> np.ndarray:
        return coupling_g1d(self.x, beta, theta, v0, None, self.a_s, self.lattice)

    def coupling_and_gradients(self, beta, theta, v0):
        g = self.coupling(beta, theta, v0)
        if self.a_s == 0:
            return g, [np.zeros_like(g)] * 3
        grads = coupling_gradients(self.x, beta, theta, v0, None, self.a_s, self.lattice)
        return g, [np.asarray(gr, dtype=float) for gr in grads]
