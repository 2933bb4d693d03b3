'''Charge-basis Hamiltonian and eigensolver tests'''

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import SINGLE_LOOP_EC, SINGLE_LOOP_EJ2, single_loop
from parityarray.core.charge_basis import (
    ChargeOperator,
    Truncation,
    basis_parity,
    build_hamiltonian,
    charge_distribution,
    charge_states,
    converged_spectrum,
    lowest_eigenvalues,
    parity_expectation,
    result_parities,
    spectra_at_points,
)
from parityarray.core.circuit import CircuitSpec, InterferometerLoop, JunctionArm
from parityarray.core.errors import DimensionOverflowError, InvalidSpecError


def dense_single_loop(ec, ej2, ng, n_max):
    """Independent oracle: 4 E_C (n - ng)^2 - (E_J,2 / 2)(|n+2><n| + h.c.)"""
    charges = np.arange(-n_max, n_max + 1)
    matrix = np.diag(4.0 * ec * (charges - ng) ** 2)
    matrix += np.diag(np.full(len(charges) - 2, -ej2 / 2.0), 2)
    matrix += np.diag(np.full(len(charges) - 2, -ej2 / 2.0), -2)
    return np.linalg.eigvalsh(matrix)


def test_charge_states_order():
    states = charge_states(2, 1)
    assert states.shape == (9, 2)
    assert states[0].tolist() == [-1, -1]
    assert states[1].tolist() == [-1, 0]
    assert states[-1].tolist() == [1, 1]


def test_hamiltonian_is_hermitian(two_loop_spec):
    op = build_hamiltonian(two_loop_spec, Truncation(n_max=4))
    assert op.dim == 81
    assert abs(op.matrix - op.matrix.conj().T).max() < 1e-14


def test_single_loop_matches_dense_oracle():
    spec = single_loop(offset_charge=0.0)
    result = lowest_eigenvalues(build_hamiltonian(spec, Truncation(n_max=30)), k=4)
    oracle = dense_single_loop(SINGLE_LOOP_EC, SINGLE_LOOP_EJ2, 0.0, 30)[:4]
    assert np.allclose(result.energies, oracle, atol=1e-9)


def test_single_loop_degenerate_at_half_offset_charge():
    result = converged_spectrum(single_loop(offset_charge=0.5), k=4)
    assert result.converged
    assert result.e01 < 1e-8


def test_single_loop_dispersion_follows_cosine():
    reference = converged_spectrum(single_loop(offset_charge=0.0), k=2).e01
    assert reference > 1e-6
    for ng in np.linspace(0.0, 0.5, 11):
        e01 = converged_spectrum(single_loop(offset_charge=float(ng)), k=2).e01
        assert abs(e01 / reference - abs(np.cos(np.pi * ng))) < 0.03


def test_parity_blocks_decouple():
    spec = single_loop(offset_charge=0.13)
    op = build_hamiltonian(spec, Truncation(n_max=10))
    parity = basis_parity(op)
    even = np.nonzero(parity > 0)[0]
    odd = np.nonzero(parity < 0)[0]
    cross = op.matrix[even][:, odd]
    assert cross.nnz == 0 or abs(cross).max() == 0


def test_pure_cos2phi_states_have_definite_parity():
    op = build_hamiltonian(single_loop(offset_charge=0.0), Truncation(n_max=16))
    lowest_eigenvalues(op, k=4, keep_vectors=True)
    p0, p1 = parity_expectation(op, 0), parity_expectation(op, 1)
    assert abs(abs(p0) - 1.0) < 1e-9
    assert abs(abs(p1) - 1.0) < 1e-9
    assert p0 * p1 < 0
    assert p0 > 0


def test_imbalance_breaks_parity():
    loop = InterferometerLoop(arm1=JunctionArm(ej1=1.0, ej2=5.0), arm2=JunctionArm(ej1=0.0, ej2=5.0))
    spec = CircuitSpec(loops=[loop], c_big=86.85, c_small=10.0)
    op = build_hamiltonian(spec, Truncation(n_max=16))
    lowest_eigenvalues(op, k=2, keep_vectors=True)
    assert abs(parity_expectation(op, 0)) < 1.0 - 1e-6


def test_basis_parity_is_plus_minus_one(two_loop_spec):
    op = build_hamiltonian(two_loop_spec, Truncation(n_max=3))
    assert set(np.unique(basis_parity(op)).tolist()) == {-1.0, 1.0}


def test_parity_needs_vectors():
    op = build_hamiltonian(single_loop(), Truncation(n_max=4))
    lowest_eigenvalues(op, k=2)
    with pytest.raises(InvalidSpecError):
        parity_expectation(op, 0)
    lowest_eigenvalues(op, k=2, keep_vectors=True)
    with pytest.raises(IndexError):
        parity_expectation(op, 5)


def test_charge_distribution_sums_to_one():
    op = build_hamiltonian(single_loop(), Truncation(n_max=12))
    lowest_eigenvalues(op, k=2, keep_vectors=True)
    values, probabilities = charge_distribution(op, 0, 0)
    assert len(values) == 25
    assert probabilities.sum() == pytest.approx(1.0)
    # the ground state only occupies even charges
    assert probabilities[values % 2 != 0].max() < 1e-16
    with pytest.raises(IndexError):
        charge_distribution(op, 0, 1)


def test_diagonal_matrix():
    op = ChargeOperator.from_matrix(np.diag([3.0, 1.0, 2.0]))
    result = lowest_eigenvalues(op, k=2)
    assert np.allclose(result.energies, [1.0, 2.0])
    with pytest.raises(InvalidSpecError):
        lowest_eigenvalues(op, k=3)


def test_krylov_matches_dense_on_random_hermitian():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(500, 500)) + 1j * rng.normal(size=(500, 500))
    op = ChargeOperator.from_matrix(sp.csr_matrix((a + a.conj().T) / 2))
    dense = lowest_eigenvalues(op, k=6, solver="dense").energies
    krylov = lowest_eigenvalues(op, k=6, solver="krylov").energies
    assert np.max(np.abs(dense - krylov)) < 1e-9 * np.max(np.abs(dense))


def test_krylov_matches_dense_on_circuit(two_loop_spec):
    op = build_hamiltonian(two_loop_spec, Truncation(n_max=8))
    dense = lowest_eigenvalues(op, k=4, solver="dense").energies
    krylov = lowest_eigenvalues(op, k=4, solver="krylov").energies
    assert np.allclose(dense, krylov, atol=1e-9)


def test_krylov_resolves_triply_degenerate_levels():
    rng = np.random.default_rng(11)
    block = sp.diags([rng.normal(size=200), np.full(199, 0.3), np.full(199, 0.3)], [0, 1, -1])
    op = ChargeOperator.from_matrix(sp.kron(sp.identity(3), block))
    krylov = lowest_eigenvalues(op, k=6, solver="krylov").energies
    single = np.linalg.eigvalsh(block.toarray())[:2]
    assert np.allclose(krylov, np.repeat(single, 3), atol=1e-9)


def test_krylov_matches_dense_on_three_loop_array():
    spec = CircuitSpec.uniform(3, c_big=350.0, c_small=10.0, ej2=10.0)
    op = build_hamiltonian(spec, Truncation(n_max=5))
    dense = lowest_eigenvalues(op, k=6, solver="dense").energies
    krylov = lowest_eigenvalues(op, k=6, solver="krylov").energies
    assert np.allclose(dense, krylov, atol=1e-8)


def test_protected_two_loop_has_near_degenerate_doublet(two_loop_spec):
    result = converged_spectrum(two_loop_spec, k=4)
    assert result.e01 < 0.1 * result.e02


def test_truncation_convergence():
    spec = single_loop(offset_charge=0.0)
    coarse = lowest_eigenvalues(build_hamiltonian(spec, Truncation(n_max=12)), k=2).energies
    fine = lowest_eigenvalues(build_hamiltonian(spec, Truncation(n_max=24)), k=2).energies
    assert np.max(np.abs(coarse - fine)) < 1e-9


def test_gauge_periodicity():
    for ng in (0.0, 0.17, 0.4):
        base = converged_spectrum(single_loop(offset_charge=ng), k=4).energies
        shifted = converged_spectrum(single_loop(offset_charge=ng + 1.0), k=4).energies
        assert np.allclose(base, shifted, atol=1e-9)


def test_free_rotor_does_not_converge():
    spec = CircuitSpec.uniform(1, c_big=0.0, c_small=1e9, ej2=10.0)
    result = converged_spectrum(spec, Truncation(n_max=2, max_dim=129), k=2)
    assert not result.converged
    assert result.n_max_used == 64


def test_dimension_ceiling():
    spec = CircuitSpec.uniform(3, c_big=350.0, c_small=10.0, ej2=10.0)
    with pytest.raises(DimensionOverflowError) as info:
        build_hamiltonian(spec, Truncation(n_max=12, max_dim=10_000))
    assert info.value.dim == 25 ** 3
    with pytest.raises(DimensionOverflowError):
        converged_spectrum(spec, Truncation(n_max=12, max_dim=10_000))


def test_result_parities_follow_basis():
    result = converged_spectrum(single_loop(offset_charge=0.0), k=2, keep_vectors=True)
    parities = result_parities(result, 1)
    assert parities[0] == pytest.approx(1.0, abs=1e-9)
    assert parities[1] == pytest.approx(-1.0, abs=1e-9)


def test_spectra_at_points_preserves_order():
    specs = [single_loop(offset_charge=ng) for ng in (0.0, 0.25, 0.5)]
    results = spectra_at_points(specs, Truncation(n_max=12), k=2, converge=False)
    gaps = [r.e01 for r in results]
    assert gaps[0] > gaps[1] > gaps[2]
    parallel = spectra_at_points(specs, Truncation(n_max=12), k=2, workers=2, converge=False)
    assert np.allclose([r.e01 for r in parallel], gaps, atol=1e-12)
