'''Capacitance network and charging-energy tests'''

import numpy as np
import pytest

from parityarray.core.circuit import (
    E_CHARGE_GHZ_PER_INV_FF,
    CircuitSpec,
    InterferometerLoop,
    JunctionArm,
    branch_transformation,
    build_node_capacitance,
    capacitance_for_charging_energy,
    charging_energies,
    closed_form_inverse,
    reduce_to_branch,
)
from parityarray.core.errors import InvalidSpecError, SingularMatrixError


def test_single_loop_node_matrix_has_parallel_capacitors():
    spec = CircuitSpec.uniform(1, c_big=100.0, c_small=10.0, ej2=1.0)
    expected = np.array([[110.0, -110.0], [-110.0, 110.0]])
    assert np.allclose(build_node_capacitance(spec), expected, atol=0)


def test_two_loop_node_matrix():
    spec = CircuitSpec.uniform(2, c_big=200.0, c_small=10.0, ej2=1.0)
    expected = np.array([[210.0, -10.0, -200.0], [-10.0, 20.0, -10.0], [-200.0, -10.0, 210.0]])
    assert np.array_equal(build_node_capacitance(spec), expected)


def test_node_matrix_rows_sum_to_zero():
    spec = CircuitSpec.uniform(5, c_big=123.0, c_small=7.0, ej2=1.0)
    node_cap = build_node_capacitance(spec)
    assert np.allclose(node_cap, node_cap.T)
    assert np.allclose(node_cap.sum(axis=1), 0.0)


def test_negative_or_zero_capacitance_rejected():
    with pytest.raises(InvalidSpecError):
        CircuitSpec.uniform(2, c_big=0.0, c_small=0.0, ej2=1.0)
    with pytest.raises(InvalidSpecError):
        CircuitSpec.uniform(2, c_big=100.0, c_small=-1.0, ej2=1.0)
    with pytest.raises(InvalidSpecError):
        CircuitSpec.uniform(2, c_big=-5.0, c_small=10.0, ej2=1.0)


def test_negative_junction_energy_rejected():
    with pytest.raises(InvalidSpecError):
        JunctionArm(ej1=-1.0)


@pytest.mark.parametrize("n, c_big, diagonal, off_diagonal", [
    (2, 200.0, 210.0 / 4100.0, -200.0 / 4100.0),
    (3, 350.0, 710.0 / 10600.0, -350.0 / 10600.0),
])
def test_reduced_inverse_matches_known_values(n, c_big, diagonal, off_diagonal):
    spec = CircuitSpec.uniform(n, c_big=c_big, c_small=10.0, ej2=1.0)
    inv_cap = reduce_to_branch(build_node_capacitance(spec), n).inv_cap
    assert np.allclose(np.diag(inv_cap), diagonal, rtol=1e-12)
    off = inv_cap[~np.eye(n, dtype=bool)]
    assert np.allclose(off, off_diagonal, rtol=1e-12)


def test_single_loop_inverse_is_parallel_capacitance():
    assert np.isclose(closed_form_inverse(1, 100.0, 10.0)[0, 0], 1.0 / 110.0, rtol=1e-14)
    spec = CircuitSpec.uniform(1, c_big=100.0, c_small=10.0, ej2=1.0)
    assert np.isclose(charging_energies(spec).inv_cap[0, 0], 1.0 / 110.0, rtol=1e-12)


def test_zero_big_capacitance_gives_diagonal_inverse():
    for n in (1, 2, 4):
        spec = CircuitSpec.uniform(n, c_big=0.0, c_small=8.0, ej2=1.0)
        assert np.allclose(charging_energies(spec).inv_cap, np.eye(n) / 8.0, rtol=1e-12, atol=1e-15)


def test_closed_form_matches_numerical_reduction_for_random_arrays():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        c_small = float(rng.uniform(1.0, 100.0))
        c_big = float(rng.uniform(0.0, 1000.0))
        spec = CircuitSpec.uniform(n, c_big=c_big, c_small=c_small, ej2=1.0)
        numeric = charging_energies(spec).inv_cap
        closed = closed_form_inverse(n, c_big, c_small)
        worst = max(worst, float(np.max(np.abs(numeric - closed)) / np.max(np.abs(closed))))
    assert worst < 1e-10


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_uniform_charging_matrix_is_positive_definite_with_two_values(n):
    charging = charging_energies(CircuitSpec.uniform(n, c_big=200.0, c_small=10.0, ej2=1.0))
    assert np.all(np.linalg.eigvalsh(charging.ec) > 0)
    assert np.unique(np.round(charging.inv_cap / charging.inv_cap[0, 0], 9)).size == 2


def test_charging_energy_units():
    # e^2/2h per fF is about 19.37 GHz
    assert 19.36 < E_CHARGE_GHZ_PER_INV_FF < 19.38
    total = capacitance_for_charging_energy(0.2)
    spec = CircuitSpec.uniform(1, c_big=total - 10.0, c_small=10.0, ej2=1.0)
    assert np.isclose(charging_energies(spec).ec[0, 0], 0.2, rtol=1e-12)


def test_branch_transformation_is_invertible():
    for n in range(1, 6):
        transform = branch_transformation(n)
        assert abs(np.linalg.det(transform)) > 0.5


def test_singular_node_matrix_raises():
    with pytest.raises(SingularMatrixError):
        reduce_to_branch(np.zeros((3, 3)), 2)


def test_closed_form_rejects_bad_arguments():
    with pytest.raises(InvalidSpecError):
        closed_form_inverse(2, 100.0, 0.0)
    with pytest.raises(InvalidSpecError):
        closed_form_inverse(0, 100.0, 10.0)


def test_spec_dict_round_trip():
    spec = CircuitSpec(
        loops=[
            InterferometerLoop(arm1=JunctionArm(1.0, 2.0), arm2=JunctionArm(0.5, 3.0), flux=0.48, offset_charge=0.1),
            InterferometerLoop(arm1=JunctionArm(0.0, 5.0), arm2=JunctionArm(0.0, 5.0)),
        ],
        c_big=200.0,
        c_small=10.0,
    )
    assert CircuitSpec.from_dict(spec.to_dict()) == spec
