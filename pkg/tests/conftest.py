"""
Shared fixtures for the parityarray test suite
"""
import json
import os
import sys

import pytest

# Add the src directory to the path, as the launcher does
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from parityarray.core.circuit import CircuitSpec, capacitance_for_charging_energy  # noqa: E402

SINGLE_LOOP_EC = 0.2  # GHz
SINGLE_LOOP_EJ2 = 10.0  # GHz
SHUNT = 10.0  # fF


def single_loop(offset_charge: float = 0.0, **kwargs) -> CircuitSpec:
    """Single cos 2phi loop with E_C = 0.2 GHz and E_J,2 = 10 GHz"""
    total = capacitance_for_charging_energy(SINGLE_LOOP_EC)
    return CircuitSpec.uniform(1, c_big=total - SHUNT, c_small=SHUNT, ej2=SINGLE_LOOP_EJ2,
                               offset_charge=offset_charge, **kwargs)


@pytest.fixture
def single_loop_spec():
    return single_loop()


@pytest.fixture
def two_loop_spec():
    """Protected two-loop array: C_B = 200 fF, C_S = 10 fF, E_J,2 = 10 GHz"""
    return CircuitSpec.uniform(2, c_big=200.0, c_small=SHUNT, ej2=10.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a configuration document to a temporary file and return its path"""
    def _write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document, indent=2))
        return str(path)

    return _write
