import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swapqoc.controls import MERGED, SEPARATED, ControlSet
from swapqoc.eigen import exchange_parity, product_state, symmetrized_product
from swapqoc.grape import spectral_basis
from swapqoc.grid import Wavefunction, inner_product, make_grid_1d
from swapqoc.lattice import DEFAULT_LATTICE, LatticeParams
from swapqoc.propagation import (
    Absorber,
    PropagationConfig,
    SamplingMismatchError,
    SplitStepPropagator,
    UndefinedPhaseError,
    fidelity,
    merge_population,
    pair_superposition,
    relative_phase,
    split_step_1p,
    split_step_2p,
)

NO_ABSORBER = PropagationConfig(dt=1e-4, absorber=None)


def _free(prop):
    prop.potential.potential = lambda *u: np.zeros(prop.grid.n)
    return prop


def test_absorber_profile(grid64):
    prof = Absorber().profile(grid64)
    x = np.abs(np.asarray(grid64.points))
    a = DEFAULT_LATTICE.a
    assert np.all(prof[x <= a] == 0)
    assert np.all(prof[x > a] > 0)
    assert prof.max() <= 2 * np.pi * 50 + 1e-9


def test_stationary_ground_state(merged64):
    g = merged64.single("g")
    T = 0.05
    c = ControlSet.constant(T, 1.2e-5, MERGED)
    psi = split_step_1p(g.wavefunction, c, PropagationConfig(1.2e-5)).final
    ov = inner_product(g.wavefunction, psi)
    assert abs(ov) == pytest.approx(1.0, abs=1e-6)
    assert abs(ov - np.exp(-1j * g.energy * T)) <= 1e-3


def test_free_gaussian_spreading():
    grid = make_grid_1d(1024, -20.0, 20.0)
    prop = _free(SplitStepPropagator(grid, 1, DEFAULT_LATTICE, None))
    x = np.asarray(grid.points)
    s0 = 0.5
    psi = Wavefunction(grid, np.exp(-(x ** 2) / (4 * s0 ** 2))).normalized()
    c = ControlSet.constant(1.0, 1e-3, SEPARATED)
    out = Wavefunction(grid, prop.evolve(psi.amplitudes, c))
    width = np.sqrt(np.sum(x ** 2 * out.density()) * grid.dx)
    tau = DEFAULT_LATTICE.hbar_over_m * 1.0 / (2 * s0 ** 2)
    assert width == pytest.approx(s0 * np.sqrt(1 + tau ** 2), rel=1e-4)


def test_adiabatic_merge_single_particle(separated64, merged64):
    c = ControlSet.linear_ramp(1.0, 1e-4)
    cfg = PropagationConfig(1e-4)
    fa = fidelity(split_step_1p(separated64.single("Lg").wavefunction, c, cfg).final, merged64.single("e").wavefunction)
    fb = fidelity(split_step_1p(separated64.single("Rg").wavefunction, c, cfg).final, merged64.single("g").wavefunction)
    assert fa >= 0.999
    assert fb >= 0.999


def test_sampling_mismatch(merged32):
    c = ControlSet.constant(0.01, 1e-3)
    with pytest.raises(SamplingMismatchError):
        split_step_1p(merged32.single("g").wavefunction, c, PropagationConfig(1e-4))


def test_state_dimensionality_checked(merged32, separated64):
    c = ControlSet.constant(0.001, 1e-4)
    cfg = PropagationConfig(1e-4)
    with pytest.raises(ValueError):
        split_step_1p(merged32.plus.wavefunction, c, cfg)
    with pytest.raises(ValueError):
        split_step_2p(separated64.single("Lg").wavefunction, c, cfg)


def test_separability_without_interaction(separated64, merged64):
    c = ControlSet.linear_ramp(0.05, 1e-4)
    a, b = separated64.single("Lg").wavefunction, separated64.single("Rg").wavefunction
    psi2 = split_step_2p(product_state(a, b), c, NO_ABSORBER, g1d=0.0).final
    pa = split_step_1p(a, c, NO_ABSORBER).final
    pb = split_step_1p(b, c, NO_ABSORBER).final
    ref = Wavefunction(psi2.grid, np.outer(pa.amplitudes, pb.amplitudes))
    assert abs(inner_product(ref, psi2)) ** 2 >= 1 - 1e-6


def test_unitarity_without_absorber(separated64):
    c = ControlSet.linear_ramp(0.1, 1e-5)
    assert c.n_steps == 10_000
    psi0 = product_state(separated64.single("Lg"), separated64.single("Rg"))
    traj = split_step_2p(psi0, c, PropagationConfig(1e-5, absorber=None))
    assert np.max(np.abs(traj.observables["norm"] - 1.0)) <= 1e-10


def test_norm_non_increasing_with_absorber(separated64):
    c = ControlSet.linear_ramp(0.06, 1e-4)
    psi0 = product_state(separated64.single("Lg"), separated64.single("Rg"))
    norms = split_step_2p(psi0, c, PropagationConfig(1e-4)).observables["norm"]
    assert np.all(np.diff(norms) <= 1e-13)
    assert 1 - norms[-1] <= 1e-4


def test_time_reversal(separated64):
    c = ControlSet.linear_ramp(0.08, 1e-4)
    psi0 = product_state(separated64.single("Lg"), separated64.single("Rg"))
    fwd = split_step_2p(psi0, c, NO_ABSORBER).final
    back = split_step_2p(Wavefunction(fwd.grid, fwd.amplitudes.conj()), c.reversed(), NO_ABSORBER).final
    returned = Wavefunction(back.grid, back.amplitudes.conj())
    assert fidelity(returned, psi0) >= 1 - 1e-6


@pytest.mark.parametrize("parity", [1, -1])
def test_parity_conservation(separated64, parity):
    c = ControlSet.linear_ramp(0.05, 1e-4)
    psi0 = symmetrized_product(separated64.single("Lg"), separated64.single("Rg"), parity)
    traj = split_step_2p(psi0, c, PropagationConfig(1e-4, store_stride=50))
    for snap in traj.snapshots:
        assert exchange_parity(snap) == pytest.approx(parity, abs=1e-8)


def _static_phase(basis, duration, dt=1.2e-5):
    c = ControlSet.constant(duration, dt, MERGED)
    psi0 = pair_superposition(basis.plus, basis.minus)
    obs = {"p": basis.plus, "m": basis.minus, "s": psi0}
    traj = split_step_2p(psi0, c, PropagationConfig(dt), observe=obs)
    o = traj.observables
    alpha = np.angle(o["m"]) - np.angle(o["p"])
    err = np.angle(np.exp(1j * (alpha - basis.exchange_splitting * traj.times)))
    return traj, err


def test_static_merged_beating_period(merged64):
    period = 2 * np.pi / merged64.exchange_splitting
    traj, _ = _static_phase(merged64, period)
    survival = np.abs(traj.observables["s"]) ** 2
    assert survival[0] == pytest.approx(1.0)
    assert survival[len(survival) // 2] == pytest.approx(0.0, abs=1e-3)
    assert survival[-1] == pytest.approx(1.0, abs=1e-3)
    assert np.argmin(survival) == pytest.approx(len(survival) // 2, rel=0.01)


def test_static_merged_phase_tracks_eigen_splitting(merged64):
    # alpha(t) = U t over one sqrt(SWAP) time, within 1e-3 rad
    _, err = _static_phase(merged64, (np.pi / 2) / merged64.exchange_splitting)
    assert np.max(np.abs(err)) <= 1e-3


def test_static_phase_mismatch_shrinks_with_grid(merged64):
    # stencil versus spectral kinetic mismatch in the beat frequency
    _, e64 = _static_phase(merged64, 0.02)
    _, e128 = _static_phase(spectral_basis(True, 128, "merged"), 0.02)
    slope64 = abs(e64[-1]) / 0.02 / merged64.exchange_splitting
    slope128 = abs(e128[-1]) / 0.02 / spectral_basis(True, 128, "merged").exchange_splitting
    assert slope64 < 5e-3
    assert slope128 < slope64


def test_fidelity_examples(merged64):
    p, m = merged64.plus.wavefunction, merged64.minus.wavefunction
    assert fidelity(p, p) == pytest.approx(1.0)
    assert fidelity(p, m) == pytest.approx(0.0, abs=1e-14)
    assert fidelity((p + m).normalized(), p) == pytest.approx(0.5)


@given(st.floats(0, 2 * np.pi))
def test_merge_population_phase_insensitive(merged32, phi):
    psi = pair_superposition(merged32.plus, merged32.minus, phi)
    assert merge_population(psi, merged32.plus, merged32.minus) == pytest.approx(1.0, abs=1e-12)


def test_merge_population_orthogonal(merged32):
    other = [s for s in merged32.states if s.label not in (merged32.plus.label, merged32.minus.label)][0]
    assert merge_population(other.wavefunction, merged32.plus, merged32.minus) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0.05, 1.0))
def test_f_prime_bounds_fidelity(merged32, alpha, alpha_t, leak):
    other = [s for s in merged32.states if s.label not in (merged32.plus.label, merged32.minus.label)][0]
    psi = (pair_superposition(merged32.plus, merged32.minus, alpha) + other.wavefunction * leak).normalized()
    target = pair_superposition(merged32.plus, merged32.minus, alpha_t)
    assert fidelity(psi, target) <= merge_population(psi, merged32.plus, merged32.minus) + 1e-12


def test_fidelity_equals_population_at_target_phase(merged32):
    other = [s for s in merged32.states if s.label not in (merged32.plus.label, merged32.minus.label)][0]
    psi = (pair_superposition(merged32.plus, merged32.minus, 0.33) + other.wavefunction * 0.2).normalized()
    target = pair_superposition(merged32.plus, merged32.minus, 0.33)
    assert fidelity(psi, target) == pytest.approx(merge_population(psi, merged32.plus, merged32.minus), abs=1e-12)


def test_relative_phase_examples(merged32):
    p, m = merged32.plus, merged32.minus
    assert relative_phase(p.wavefunction + m.wavefunction, p, m) == pytest.approx(0.0, abs=1e-12)
    assert relative_phase(p.wavefunction + m.wavefunction * 1j, p, m) == pytest.approx(np.pi / 2)
    assert relative_phase(p.wavefunction - m.wavefunction * 1j, p, m) == pytest.approx(3 * np.pi / 2)
    with pytest.raises(UndefinedPhaseError):
        relative_phase(p.wavefunction, p, m)


def test_dt_halving_final_grid(separated64):
    psi0 = product_state(separated64.single("Lg"), separated64.single("Rg"))
    coarse = ControlSet.linear_ramp(0.06, 1.2e-5)
    fine = coarse.resample(6e-6)
    a = split_step_2p(psi0, coarse, PropagationConfig(1.2e-5)).final
    b = split_step_2p(psi0, fine, PropagationConfig(6e-6)).final
    target = product_state(separated64.single("Lg"), separated64.single("Rg"))
    assert abs(fidelity(a, target) - fidelity(b, target)) <= 1e-4


def _layer_echo(k_factor: float, strength_khz: float = 50.0) -> float:
    """Norm re-entering a long free region after a packet hits the absorber layer.

    The layer has the production thickness and grid spacing; only the free
    region is stretched so the incident packet and its echoes separate.
    """
    n = 1024
    lat = LatticeParams(cell_half_width=19.0, padded_half_width=19.2)
    grid = lat.grid(n)
    prop = _free(SplitStepPropagator(grid, 1, lat, Absorber(strength_khz, 0.2)))
    x = np.asarray(grid.points)
    edge = 19.0 * lat.a
    k0 = k_factor * np.pi / lat.a
    sig, x0 = 0.5, edge - 3.5
    psi = Wavefunction(grid, np.exp(-((x - x0) ** 2) / (4 * sig ** 2) + 1j * k0 * x)).normalized()
    v = lat.hbar_over_m * k0
    T = (edge - x0 + 0.2 * lat.a + 4 * sig) / v
    c = ControlSet.constant(T, min(2e-4, 5e-3 / v), SEPARATED)
    out = Wavefunction(grid, prop.evolve(psi.amplitudes, c))
    return float(np.sum(out.density()[np.abs(x) <= edge]) * grid.dx)


@pytest.mark.parametrize("k_factor", [1.0, 2.0])
def test_absorber_reflection_and_transmission(k_factor):
    # design target: reflection and transmission each <= 1e-4 at lattice momenta
    assert _layer_echo(k_factor) <= 2e-4
