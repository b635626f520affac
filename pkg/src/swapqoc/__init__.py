"""Optimal control of a collisional sqrt(SWAP) gate between two atoms in a lattice cell."""
from .controls import MERGED, SEPARATED, ControlScaling, ControlSet
from .eigen import SpectralBasis, build_basis
from .grape import (
    CostWeights,
    GridSpec,
    OptimizationProblem,
    RunRecord,
    cascade_optimize,
    cost,
    extend_to_full_gate,
    generate_seed,
    gradient,
    multistart,
    optimize,
)
from .grid import RUBIDIUM87, Grid1D, Grid2D, Wavefunction, make_grid_1d, make_grid_2d
from .lattice import DEFAULT_LATTICE, LatticeParams
from .propagation import PropagationConfig, split_step_1p, split_step_2p

__version__ = "0.1.0"

__all__ = [
    "MERGED",
    "SEPARATED",
    "ControlScaling",
    "ControlSet",
    "SpectralBasis",
    "build_basis",
    "CostWeights",
    "GridSpec",
    "OptimizationProblem",
    "RunRecord",
    "cascade_optimize",
    "cost",
    "extend_to_full_gate",
    "generate_seed",
    "gradient",
    "multistart",
    "optimize",
    "RUBIDIUM87",
    "Grid1D",
    "Grid2D",
    "Wavefunction",
    "make_grid_1d",
    "make_grid_2d",
    "DEFAULT_LATTICE",
    "LatticeParams",
    "PropagationConfig",
    "split_step_1p",
    "split_step_2p",
]
