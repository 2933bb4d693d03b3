'''Effective spin-model construction and band-fit tests'''

import itertools
from dataclasses import replace

import numpy as np
import pytest

from conftest import single_loop
from parityarray.core.charge_basis import (
    Truncation,
    build_hamiltonian,
    converged_spectrum,
    lowest_eigenvalues,
)
from parityarray.core.circuit import CircuitSpec, InterferometerLoop, JunctionArm
from parityarray.core.effective_spin import (
    BandGrid,
    PauliHamiltonian,
    band_structure,
    build_spin_hamiltonian,
    extract_single_loop,
    extract_two_loop,
    ferro_doublet,
    inject_error_terms,
    model_single_loop_gap,
    model_two_loop_spectrum,
)
from parityarray.core.errors import FitDegenerateError, InvalidSpecError


def synthetic_grid(n, energy_fn, grid_points=9, span=0.5):
    axis = np.linspace(0.0, span, grid_points)
    axes = [axis.copy() for _ in range(n)]
    points = np.array(list(itertools.product(*axes)))
    return BandGrid(axes=axes, points=points, energies=energy_fn(points))


def with_offset_charges(spec, charges):
    return replace(spec, loops=[replace(loop, offset_charge=float(ng))
                                for loop, ng in zip(spec.loops, charges)])


def test_two_spin_spectrum_at_zero_offset_charge():
    t, j = -0.03, 0.2
    energies = build_spin_hamiltonian(2, t, j, [0.0, 0.0], [0.0, 0.0]).eigenvalues()
    half = j / 2.0
    expected = np.sort([4 * t - 2 * half, 2 * half, 2 * half, -4 * t - 2 * half])
    assert np.allclose(energies, expected, atol=1e-12)


def test_single_spin_vanishes_at_half_offset_charge():
    h = build_spin_hamiltonian(1, -0.1, 0.0, [0.0], [0.5])
    assert np.max(np.abs(h.to_dense())) < 1e-14


@pytest.mark.parametrize("ng1, ng2", [(0.0, 0.0), (0.1, 0.35), (0.25, -0.25), (0.5, 0.2)])
def test_spin_hamiltonian_matches_two_loop_model(ng1, ng2):
    t, j = -0.02, 0.12
    h = build_spin_hamiltonian(2, t, j, [0.0, 0.0], [ng1, ng2])
    model = model_two_loop_spectrum(t, 0.0, -j / 2.0, [[ng1, ng2]])[0]
    assert np.allclose(h.eigenvalues(), model, atol=1e-12)


def test_spin_hamiltonian_argument_checks():
    with pytest.raises(InvalidSpecError):
        build_spin_hamiltonian(2, 0.1, 0.1, [0.0], [0.0, 0.0])
    with pytest.raises(InvalidSpecError):
        build_spin_hamiltonian(0, 0.1, 0.1, [], [])
    with pytest.raises(InvalidSpecError):
        PauliHamiltonian(2, ((1.0, "XQ"),))


def test_zero_error_terms_leave_hamiltonian_unchanged():
    h = build_spin_hamiltonian(3, -0.05, 0.3, [0.0] * 3, [0.1, 0.2, 0.3])
    injected = inject_error_terms(h, [0.0] * 3, [0.0] * 3)
    assert np.allclose(injected.to_dense(), h.to_dense(), atol=0)


def test_ferro_doublet_has_no_local_z_elements():
    h = build_spin_hamiltonian(3, -0.01, 0.5, [0.0] * 3, [0.0] * 3)
    _, elements = ferro_doublet(h)
    assert elements.shape == (3, 2, 2)
    assert np.max(np.abs(elements)) < 1e-12


def test_imbalance_splits_doublet_linearly():
    h = build_spin_hamiltonian(2, 0.0, 2.0, [0.0, 0.0], [0.0, 0.0])
    splits = []
    for delta in (1e-3, 2e-3):
        energies = inject_error_terms(h, [delta, delta], [0.0, 0.0]).eigenvalues()
        splits.append(energies[1] - energies[0])
    assert splits[0] == pytest.approx(4e-3, rel=1e-9)
    assert splits[1] / splits[0] == pytest.approx(2.0, rel=1e-9)


def test_single_loop_fit_recovers_synthetic_hopping():
    t = -0.0123

    def bands(points):
        half = 0.5 * model_single_loop_gap(t, points[:, 0])
        return np.column_stack([-half, half])

    fit = extract_single_loop(synthetic_grid(1, bands))
    assert fit.t == pytest.approx(t, rel=1e-12)
    assert fit.residual_rms < 1e-12
    assert fit.bandwidth == pytest.approx(4 * abs(t), rel=1e-12)


def test_single_loop_fit_rejects_degenerate_bands():
    grid = synthetic_grid(1, lambda points: np.zeros((len(points), 2)))
    with pytest.raises(FitDegenerateError):
        extract_single_loop(grid)


def test_single_loop_fit_needs_zero_offset_charge():
    grid = synthetic_grid(1, lambda points: np.column_stack([-np.ones(len(points)), np.ones(len(points))]))
    grid = BandGrid(axes=grid.axes, points=grid.points + 0.1, energies=grid.energies)
    with pytest.raises(FitDegenerateError):
        extract_single_loop(grid)


@pytest.mark.parametrize("t_parallel, t_plus, t_minus", [
    (-0.05, 0.002, -0.5),
    (-0.01, -0.003, -0.08),
])
def test_two_loop_fit_recovers_synthetic_parameters(t_parallel, t_plus, t_minus):
    grid = synthetic_grid(2, lambda points: model_two_loop_spectrum(t_parallel, t_plus, t_minus, points))
    fit = extract_two_loop(grid)
    assert abs(fit.t - t_parallel) < 1e-10
    assert abs(fit.t_plus - t_plus) < 1e-10
    assert abs(fit.t_minus - t_minus) < 1e-10
    assert fit.j == pytest.approx(-t_minus)
    assert fit.residual_rms < 1e-10


def test_two_loop_fit_rejects_single_point():
    points = np.array([[0.0, 0.0]])
    grid = BandGrid(axes=[np.zeros(1), np.zeros(1)], points=points,
                    energies=model_two_loop_spectrum(-0.05, 0.0, -0.5, points))
    with pytest.raises(FitDegenerateError):
        extract_two_loop(grid)


def test_band_structure_argument_checks(single_loop_spec):
    with pytest.raises(InvalidSpecError):
        band_structure(single_loop_spec, grid_points=4)
    with pytest.raises(InvalidSpecError):
        band_structure(single_loop_spec, span=0.3)


def test_single_loop_band_fit():
    grid = band_structure(single_loop(), grid_points=9, bands=2)
    assert grid.energies.shape == (9, 2)
    fit = extract_single_loop(grid)
    e01_zero = grid.energies[0, 1] - grid.energies[0, 0]
    assert abs(4 * fit.t) == pytest.approx(e01_zero, rel=1e-12)
    assert fit.residual_rms < 0.03 * e01_zero


@pytest.mark.slow
def test_two_loop_full_model_fit(two_loop_spec):
    grid = band_structure(two_loop_spec, grid_points=5, bands=4, trunc=Truncation(n_max=10))
    fit = extract_two_loop(grid)
    assert fit.j > 5 * abs(fit.t)
    assert abs(fit.t_plus) < 0.1 * abs(fit.t_minus)
    assert fit.residual_rms < 0.05 * fit.bandwidth


@pytest.mark.slow
def test_uncoupled_loops_form_independent_ladder(two_loop_spec):
    spec = replace(two_loop_spec, c_big=0.0)
    levels = converged_spectrum(spec, k=4).energies
    ladder = levels - levels[0]
    gap = ladder[1]
    assert np.allclose(ladder, [0.0, gap, gap, 2 * gap], atol=1e-8)

    fit = extract_two_loop(band_structure(spec, grid_points=5, bands=4, trunc=Truncation(n_max=10)))
    assert fit.t == pytest.approx(-gap / 4, rel=0.1)


def flux_detuned_e01(n, detuning):
    c_big = {1: 100.0, 2: 200.0, 3: 350.0}[n]
    spec = CircuitSpec.uniform(n, c_big=c_big, c_small=10.0, ej2=10.0, flux=0.5 + detuning,
                               linearized_flux=True, flux_slope=250.0)
    if n < 3:
        return converged_spectrum(spec, k=4).e01
    return lowest_eigenvalues(build_hamiltonian(spec, Truncation(n_max=8)), k=4).e01


@pytest.mark.slow
def test_flux_splitting_shrinks_with_array_length():
    gaps = {n: flux_detuned_e01(n, 0.01) for n in (1, 2, 3)}
    assert gaps[3] < gaps[2] < gaps[1]


@pytest.mark.slow
def test_protection_window_broadens_with_array_length():
    gaps = {n: flux_detuned_e01(n, 1e-5) for n in (1, 2, 3)}
    assert gaps[2] < 0.25 * gaps[1]
    assert gaps[3] < gaps[2]
    assert gaps[3] < 0.1 * gaps[1]


@pytest.mark.slow
def test_junction_imbalance_lifts_two_loop_degeneracy():
    def array(ej1_a, ej1_b):
        loop = InterferometerLoop(arm1=JunctionArm(ej1=ej1_a, ej2=5.0), arm2=JunctionArm(ej1=ej1_b, ej2=5.0),
                                  flux=0.5, offset_charge=0.0)
        return CircuitSpec(loops=[loop, loop], c_big=200.0, c_small=10.0)

    balanced = converged_spectrum(array(1.0, 1.0), k=4).e01
    imbalanced = converged_spectrum(array(2.0, 0.0), k=4).e01
    assert balanced > 0
    assert imbalanced > 10 * balanced


@pytest.mark.slow
def test_two_loop_offset_charge_map_symmetries(two_loop_spec):
    trunc = Truncation(n_max=14)

    def levels(ng1, ng2):
        spec = with_offset_charges(two_loop_spec, (ng1, ng2))
        return lowest_eigenvalues(build_hamiltonian(spec, trunc), k=4).energies

    for ng1, ng2 in ((0.1, 0.3), (0.2, -0.35), (0.45, 0.05)):
        base = levels(ng1, ng2)
        assert np.allclose(levels(-ng1, -ng2), base, atol=1e-8)
        assert np.allclose(levels(ng2, ng1), base, atol=1e-8)
        assert np.allclose(levels(ng1 + 1.0, ng2), base, atol=1e-8)
        assert np.allclose(levels(ng1, ng2 - 1.0), base, atol=1e-8)

    def upper_gap(ng1, ng2):
        energies = levels(ng1, ng2)
        return energies[2] - energies[1]

    assert upper_gap(0.0, 0.0) > upper_gap(0.25, -0.25)
