"""
Interferometer potential module for parityarray

Each arm carries V_k(phi) = -E_J,1 cos(phi) + E_J,2 cos(2 phi). Threading a flux f
through the loop shifts the two arms by -pi f and +pi f, and the sum is expanded
back into cos/sin harmonics of the loop phase.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft

from .circuit import InterferometerLoop, JunctionArm
from .errors import InvalidSpecError

logger = logging.getLogger("parityarray")

QUADRATURE_NODES = 2048
RESIDUAL_HARMONICS = (3, 4, 5, 6)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class HarmonicPotential:
    """V(phi) = a1 cos(phi) + b1 sin(phi) + a2 cos(2 phi) + b2 sin(2 phi), in GHz"""
    a1: float
    b1: float
    a2: float
    b2: float

    def evaluate(self, phi: ArrayLike) -> ArrayLike:
        phi = np.asarray(phi, dtype=float)
        return (self.a1 * np.cos(phi) + self.b1 * np.sin(phi)
                + self.a2 * np.cos(2 * phi) + self.b2 * np.sin(2 * phi))


@dataclass(frozen=True)
class ChannelSet:
    """Andreev channel transmissions and the superconducting gap (GHz)"""
    transmissions: Tuple[float, ...]
    gap: float

    def __post_init__(self):
        object.__setattr__(self, "transmissions", tuple(float(t) for t in self.transmissions))
        if not all(0.0 <= t <= 1.0 for t in self.transmissions):
            raise InvalidSpecError(f"transmissions must lie in [0, 1], got {self.transmissions}")
        if not math.isfinite(self.gap) or self.gap <= 0:
            raise InvalidSpecError(f"gap must be > 0, got {self.gap}")


def arm_potential(arm: JunctionArm, phi: ArrayLike) -> ArrayLike:
    phi = np.asarray(phi, dtype=float)
    return -arm.ej1 * np.cos(phi) + arm.ej2 * np.cos(2 * phi)


def loop_potential(loop: InterferometerLoop, linearized: bool = False,
                   flux_slope: Optional[float] = None) -> HarmonicPotential:
    """
    Expand V_1(phi - pi f) + V_2(phi + pi f) into harmonics of phi

    Args:
        loop: The interferometer loop
        linearized: Use the first-order expansion around half flux instead of
            the exact angle-addition result
        flux_slope: First-harmonic slope (GHz per flux quantum) for the
            linearized path; defaults to the mean E_J,1 of the two arms

    Returns:
        HarmonicPotential of the loop
    """
    e11, e12 = loop.arm1.ej1, loop.arm2.ej1
    e21, e22 = loop.arm1.ej2, loop.arm2.ej2

    if linearized:
        detuning = loop.flux - 0.5
        slope = flux_slope if flux_slope is not None else 0.5 * (e11 + e12)
        return HarmonicPotential(
            a1=-2.0 * slope * detuning,
            b1=-(e11 - e12),
            a2=-(e21 + e22),
            b2=-2.0 * math.pi * (e21 - e22) * detuning,
        )

    angle = math.pi * loop.flux
    return HarmonicPotential(
        a1=-(e11 + e12) * math.cos(angle),
        b1=-(e11 - e12) * math.sin(angle),
        a2=(e21 + e22) * math.cos(2 * angle),
        b2=(e21 - e22) * math.sin(2 * angle),
    )


def short_junction_energy(channels: ChannelSet, phi: ArrayLike) -> ArrayLike:
    """Josephson energy -gap * sum_m sqrt(1 - T_m sin^2(phi/2)) of a short junction"""
    phi = np.asarray(phi, dtype=float)
    energy = np.zeros_like(phi)
    half_sin_sq = np.sin(phi / 2) ** 2
    for transmission in channels.transmissions:
        energy = energy - channels.gap * np.sqrt(1.0 - transmission * half_sin_sq)
    return energy


def harmonic_series(channels: ChannelSet, n_harmonics: int,
                    nodes: int = QUADRATURE_NODES) -> np.ndarray:
    """
    Cosine Fourier coefficients c_0..c_n of the short-junction energy

    The energy is even in phi, so V(phi) = sum_m c_m cos(m phi). The trapezoidal
    rule on a uniform periodic grid is used, which is exact up to aliasing.
    """
    if nodes < 2 * (n_harmonics + 1):
        raise InvalidSpecError(f"{nodes} nodes cannot resolve {n_harmonics} harmonics")
    phi = 2 * np.pi * np.arange(nodes) / nodes
    spectrum = fft.rfft(short_junction_energy(channels, phi))
    coefficients = 2.0 * spectrum.real[: n_harmonics + 1] / nodes
    coefficients[0] /= 2.0
    return coefficients


def fit_harmonics(channels: ChannelSet, nodes: int = QUADRATURE_NODES) -> Tuple[float, float, float]:
    """
    Fit the short-junction energy to -E_J,1 cos(phi) + E_J,2 cos(2 phi)

    Returns:
        Tuple of (ej1, ej2, residual) where residual is the RMS of the cosine
        harmonics 3..6 left out of the fit
    """
    coefficients = harmonic_series(channels, max(RESIDUAL_HARMONICS), nodes=nodes)
    ej1 = -coefficients[1]
    ej2 = coefficients[2]
    residual = float(np.sqrt(np.mean(coefficients[list(RESIDUAL_HARMONICS)] ** 2)))
    logger.debug(f"Harmonic fit: E_J,1={ej1:.6g} GHz, E_J,2={ej2:.6g} GHz, residual={residual:.3g}")
    return float(ej1), float(ej2), residual


def arm_from_channels(channels: ChannelSet) -> JunctionArm:
    """Junction arm whose harmonics are fitted from an Andreev channel set"""
    ej1, ej2, _ = fit_harmonics(channels)
    return JunctionArm(ej1=max(ej1, 0.0), ej2=max(ej2, 0.0))


def loop_potentials(loops: Sequence[InterferometerLoop], linearized: bool = False,
                    flux_slope: Optional[float] = None) -> List[HarmonicPotential]:
    return [loop_potential(loop, linearized=linearized, flux_slope=flux_slope) for loop in loops]
