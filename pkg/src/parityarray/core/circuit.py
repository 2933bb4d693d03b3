"""
Circuit description and capacitance-network algebra for parityarray

Units are fixed throughout the package: energies in GHz (E/h), capacitances in
fF, flux in units of the flux quantum and charge in units of 2e.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import constants
from scipy.linalg import lu_factor, lu_solve

from .errors import InvalidSpecError, SingularMatrixError

logger = logging.getLogger("parityarray")

CAP_UNIT = 1e-15  # fF
FREQ_UNIT = 1e9  # GHz

# e^2 / (2h) for a 1 fF capacitor, in GHz (about 19.3701)
E_CHARGE_GHZ_PER_INV_FF = constants.e ** 2 / (2 * constants.h * CAP_UNIT) / FREQ_UNIT


@dataclass(frozen=True)
class JunctionArm:
    """First and second Josephson harmonics of one interferometer arm (GHz)"""
    ej1: float = 0.0
    ej2: float = 0.0

    def __post_init__(self):
        for name in ("ej1", "ej2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidSpecError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class InterferometerLoop:
    """Two-arm interferometer threaded by a flux, with its island offset charge"""
    arm1: JunctionArm
    arm2: JunctionArm
    flux: float = 0.5
    offset_charge: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.flux):
            raise InvalidSpecError(f"flux must be finite, got {self.flux}")
        if not math.isfinite(self.offset_charge):
            raise InvalidSpecError(f"offset_charge must be finite, got {self.offset_charge}")


@dataclass(frozen=True)
class CircuitSpec:
    """
    Declarative description of an N-loop interferometer array

    Attributes:
        loops: The interferometer loops, in array order
        c_big: Capacitance C_B closing the array (fF)
        c_small: Capacitance C_S across every loop (fF)
        linearized_flux: Use the linearized flux-error expansion for every loop
        flux_slope: First-harmonic slope in GHz per flux quantum for the
            linearized expansion (defaults to the arms' mean E_J,1)
    """
    loops: List[InterferometerLoop]
    c_big: float
    c_small: float
    linearized_flux: bool = False
    flux_slope: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "loops", list(self.loops))
        if len(self.loops) < 1:
            raise InvalidSpecError("a circuit needs at least one loop")
        if not math.isfinite(self.c_small) or self.c_small <= 0:
            raise InvalidSpecError(f"c_small must be > 0 fF, got {self.c_small}")
        if not math.isfinite(self.c_big) or self.c_big < 0:
            raise InvalidSpecError(f"c_big must be >= 0 fF, got {self.c_big}")
        if self.flux_slope is not None and not math.isfinite(self.flux_slope):
            raise InvalidSpecError(f"flux_slope must be finite, got {self.flux_slope}")

    @property
    def n(self) -> int:
        return len(self.loops)

    @property
    def offset_charges(self) -> np.ndarray:
        return np.array([loop.offset_charge for loop in self.loops], dtype=float)

    @classmethod
    def uniform(cls, n: int, c_big: float, c_small: float, ej2: float,
                ej1: float = 0.0, flux: float = 0.5, offset_charge: float = 0.0,
                **kwargs) -> "CircuitSpec":
        """
        Build a symmetric array of identical balanced loops

        The loop-level second harmonic ``ej2`` is split evenly over the two arms,
        so a loop at half flux carries the pure element -ej2 cos 2phi. ``ej1`` is
        the first harmonic of each arm.
        """
        if n < 1:
            raise InvalidSpecError(f"a circuit needs at least one loop, got n={n}")
        arm = JunctionArm(ej1=ej1, ej2=ej2 / 2.0)
        loops = [InterferometerLoop(arm1=arm, arm2=arm, flux=flux, offset_charge=offset_charge)
                 for _ in range(n)]
        return cls(loops=loops, c_big=c_big, c_small=c_small, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CircuitSpec":
        loops = []
        for raw in data.get("loops", []):
            loops.append(InterferometerLoop(
                arm1=JunctionArm(**raw.get("arm1", {})),
                arm2=JunctionArm(**raw.get("arm2", {})),
                flux=raw.get("flux", 0.5),
                offset_charge=raw.get("offset_charge", 0.0),
            ))
        return cls(
            loops=loops,
            c_big=data["c_big"],
            c_small=data["c_small"],
            linearized_flux=data.get("linearized_flux", False),
            flux_slope=data.get("flux_slope"),
        )


@dataclass(frozen=True)
class ChargingMatrix:
    """Inverse branch capacitance (fF^-1) and the matching charging energies (GHz)"""
    inv_cap: np.ndarray
    ec: np.ndarray = field(repr=False)

    @classmethod
    def from_inverse(cls, inv_cap: np.ndarray) -> "ChargingMatrix":
        inv_cap = 0.5 * (inv_cap + inv_cap.T)
        return cls(inv_cap=inv_cap, ec=E_CHARGE_GHZ_PER_INV_FF * inv_cap)


def capacitance_for_charging_energy(ec: float) -> float:
    """Total capacitance in fF whose single-island charging energy is ``ec`` GHz"""
    if ec <= 0:
        raise InvalidSpecError(f"charging energy must be > 0, got {ec}")
    return E_CHARGE_GHZ_PER_INV_FF / ec


def _stamp(matrix: np.ndarray, a: int, b: int, c: float) -> None:
    matrix[a, a] += c
    matrix[b, b] += c
    matrix[a, b] -= c
    matrix[b, a] -= c


def build_node_capacitance(spec: CircuitSpec) -> np.ndarray:
    """
    Assemble the (N+1)x(N+1) node capacitance matrix of the array

    Each loop contributes C_S between neighbouring nodes and C_B joins the two
    outer nodes. For a single loop both capacitors sit across the same branch.

    Args:
        spec: The circuit to assemble

    Returns:
        Symmetric node capacitance matrix in fF
    """
    if spec.c_big == 0 and spec.c_small == 0:
        raise InvalidSpecError("c_big and c_small cannot both be zero")
    n = spec.n
    node_cap = np.zeros((n + 1, n + 1))
    for i in range(n):
        _stamp(node_cap, i, i + 1, spec.c_small)
    _stamp(node_cap, 0, n, spec.c_big)
    return node_cap


def branch_transformation(n: int) -> np.ndarray:
    """Node-to-branch matrix: rows are V_i - V_(i-1), last row the total (free) mode"""
    transform = np.zeros((n + 1, n + 1))
    for i in range(n):
        transform[i, i] = -1.0
        transform[i, i + 1] = 1.0
    transform[n, :] = 1.0
    return transform


def _lu_inverse(matrix: np.ndarray) -> np.ndarray:
    lu, piv = lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    if scale == 0 or np.min(pivots) <= 1e-12 * scale:
        raise SingularMatrixError("reduced capacitance matrix is singular")
    return lu_solve((lu, piv), np.eye(matrix.shape[0]))


def reduce_to_branch(node_cap: np.ndarray, n: int) -> ChargingMatrix:
    """
    Transform a node capacitance matrix to branch variables and invert it

    Args:
        node_cap: The (N+1)x(N+1) node matrix from build_node_capacitance
        n: Number of loops N

    Returns:
        ChargingMatrix holding C^-1 and E_C = e^2 C^-1 / 2h

    Raises:
        SingularMatrixError: If the N x N branch matrix is not invertible
    """
    node_cap = np.asarray(node_cap, dtype=float)
    if node_cap.shape != (n + 1, n + 1):
        raise InvalidSpecError(f"expected a {(n + 1, n + 1)} node matrix, got {node_cap.shape}")

    r_inv = _lu_inverse(branch_transformation(n))
    branch_cap = r_inv.T @ node_cap @ r_inv

    free_mode = np.max(np.abs(branch_cap[n, :]))
    if free_mode > 1e-9 * max(np.max(np.abs(node_cap)), 1.0):
        logger.warning(f"Free charge mode couples to branches ({free_mode:.3e} fF); dropping it anyway")

    reduced = branch_cap[:n, :n]
    return ChargingMatrix.from_inverse(_lu_inverse(reduced))


def closed_form_inverse(n: int, c_big: float, c_small: float) -> np.ndarray:
    """Inverse branch capacitance kappa*Q + I/C_S of a uniform array (fF^-1)"""
    if c_small <= 0:
        raise InvalidSpecError(f"c_small must be > 0 fF, got {c_small}")
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    kappa = -c_big / (c_small * (c_small + c_big * n))
    return kappa * np.ones((n, n)) + np.eye(n) / c_small


def charging_energies(spec: CircuitSpec) -> ChargingMatrix:
    return reduce_to_branch(build_node_capacitance(spec), spec.n)
