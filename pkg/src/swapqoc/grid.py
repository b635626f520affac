"""Uniform grids, wavefunctions and the shared unit system.

Natural units throughout: hbar = 1, lengths in micrometers, times in
milliseconds. Energies are therefore angular frequencies in rad/ms; an
energy quoted as ``f`` kHz times Planck's constant is ``2*pi*f`` here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const

ALLOWED_POINTS = (32, 64, 128, 256, 512, 1024)


class GridMismatchError(ValueError):
    """Two wavefunctions do not live on the same grid."""


def khz_to_energy(f_khz):
    """Energy ``h * f`` with ``f`` in kHz expressed in hbar/ms."""
    return 2.0 * np.pi * np.asarray(f_khz, dtype=float)


def energy_to_khz(energy):
    return np.asarray(energy, dtype=float) / (2.0 * np.pi)


@dataclass(frozen=True)
class UnitSystem:
    """hbar = 1, micrometers, milliseconds; carries the atomic mass."""

    mass_amu: float = 87.0

    @property
    def hbar_over_m(self) -> float:
        """hbar/m in um^2/ms."""
        m = self.mass_amu * const.atomic_mass
        return const.hbar / m * 1e12 / 1e3

    def energy_to_khz(self, energy):
        return energy_to_khz(energy)

    def khz_to_energy(self, f_khz):
        return khz_to_energy(f_khz)


RUBIDIUM87 = UnitSystem(87.0)


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Periodic uniform grid of ``n`` points starting at ``x_min``.

    The right end ``x_max`` is the periodic image of ``x_min`` and is not a
    grid point, so ``dx = (x_max - x_min) / n``.
    """

    n: int
    x_min: float
    x_max: float
    points: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def volume_element(self) -> float:
        return self.dx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, Grid1D)
            and self.n == other.n
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )

    def __eq__(self, other):
        return self.same_as(other)

    def __hash__(self):
        return hash((self.n, self.x_min, self.x_max))


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor square of a :class:`Grid1D`; axis 0 is x1, axis 1 is x2."""

    base: Grid1D

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def n_total(self) -> int:
        return self.base.n ** 2

    @property
    def dx(self) -> float:
        return self.base.dx

    @property
    def volume_element(self) -> float:
        return self.base.dx ** 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.base.n, self.base.n)

    def same_as(self, other) -> bool:
        return isinstance(other, Grid2D) and self.base.same_as(other.base)

    def __eq__(self, other):
        return self.same_as(other)

    def __hash__(self):
        return hash(("2d", hash(self.base)))


def make_grid_1d(n: int, x_min: float, x_max: float) -> Grid1D:
    if n not in ALLOWED_POINTS:
        raise ValueError(f"grid size must be one of {ALLOWED_POINTS}, got {n}")
    if not x_min < x_max:
        raise ValueError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    dx = (x_max - x_min) / n
    points = x_min + dx * np.arange(n)
    points.flags.writeable = False
    return Grid1D(int(n), float(x_min), float(x_max), points)


def make_grid_2d(n: int, x_min: float, x_max: float) -> Grid2D:
    return Grid2D(make_grid_1d(n, x_min, x_max))


def wavenumbers(grid: Grid1D) -> np.ndarray:
    """Angular wavenumbers in standard DFT order, ``2*pi*j/(n*dx)``."""
    return 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)


@dataclass(eq=False)
class Wavefunction:
    """Complex amplitudes on a 1D (one particle) or 2D (two particle) grid."""

    grid: Grid1D | Grid2D
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.amplitudes.shape} does not match grid {self.grid.shape}"
            )

    @property
    def kind(self) -> str:
        return "2p" if isinstance(self.grid, Grid2D) else "1p"

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.volume_element))

    def normalized(self) -> "Wavefunction":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return Wavefunction(self.grid, self.amplitudes / nrm)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes.copy())

    def __add__(self, other: "Wavefunction") -> "Wavefunction":
        _check_same_grid(self, other)
        return Wavefunction(self.grid, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "Wavefunction") -> "Wavefunction":
        _check_same_grid(self, other)
        return Wavefunction(self.grid, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes * scalar)

    __rmul__ = __mul__


def normalized_wavefunction(grid, amplitudes) -> Wavefunction:
    return Wavefunction(grid, amplitudes).normalized()


def _check_same_grid(a: Wavefunction, b: Wavefunction) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("wavefunctions live on different grids")


def inner_product(a: Wavefunction, b: Wavefunction) -> complex:
    """<a|b> including the grid volume element."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.volume_element)


def momentum_norm(psi: Wavefunction) -> float:
    """Norm evaluated from the unitary DFT of the amplitudes."""
    phi = np.fft.fftn(psi.amplitudes, norm="ortho")
    return float(np.sqrt(np.sum(np.abs(phi) ** 2) * psi.grid.volume_element))
