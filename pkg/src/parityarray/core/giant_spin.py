"""
Giant-spin module for parityarray

Collective Hamiltonian H = -2 eps S_z + 4t S_x - (4J/N) S_x^2 in the maximal
total-spin sector S = N/2, its symmetries, the spin-coherent-state mean field
and the gap-closing scan across eps = 2J.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eig_banded, eigh, eigh_tridiagonal
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import norm as sparse_norm

from .errors import InvalidSpecError

logger = logging.getLogger("parityarray")

LMG_DENSE_LIMIT = 10_000
DEFAULT_GAP_FRACTION = 0.05
MEAN_FIELD_GRID = 10_001
SYMMETRY_TOL = 1e-10
EXPECTATION_TOL = 1e-9


@dataclass(frozen=True)
class LMGProblem:
    """Giant-spin parameters: N loops, hopping t, coupling J and field eps (GHz)"""
    n: int
    t: float = 0.0
    j: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidSpecError(f"n must be an integer >= 1, got {self.n}")
        if self.j < 0:
            raise InvalidSpecError(f"j must be >= 0, got {self.j}")

    @property
    def spin(self) -> float:
        return self.n / 2.0


@dataclass
class LMGResult:
    energies: np.ndarray
    gap_e10: float
    sz_mean: float
    sx_mean: float
    sy_mean: float
    vectors: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class MeanFieldMinimum:
    """
    Minimum of the coherent-state energy

    Attributes:
        theta0: Polar angle of the minimum
        chi0: Azimuth, 0 (pi is equivalent when ``degenerate``)
        energy: E_var at the minimum (GHz)
        degenerate: True when chi0 = 0 and chi0 = pi give distinct states
        theta_large_n_form: arccos(eps/2J), the large-N estimate
        theta_finite_n_form: arccos(eps N / (2J (N-1))), the exact stationary point
    """
    theta0: float
    chi0: float
    energy: float
    degenerate: bool
    theta_large_n_form: float
    theta_finite_n_form: float


@dataclass
class SymmetryReport:
    s2_commutator: float
    spin_flip_commutator: float
    spin_flip_preserved: bool
    sx_means: Tuple[float, float]
    sy_means: Tuple[float, float]
    passed: bool


@dataclass
class TransitionScan:
    """Gap and magnetisation along an eps grid, with the gap-threshold transition estimate"""
    n: int
    j: float
    epsilon: np.ndarray
    eps_over_2j: np.ndarray
    gap: np.ndarray
    gap_over_4j: np.ndarray
    sz_mean: np.ndarray
    transition_epsilon: Optional[float]
    fraction: float

    @property
    def transition(self) -> float:
        """Transition estimate in units of eps/2J"""
        if self.transition_epsilon is None or self.j == 0:
            return float("nan")
        return self.transition_epsilon / (2.0 * self.j)


def _ladder(n: int) -> Tuple[np.ndarray, np.ndarray]:
    s = n / 2.0
    m = np.arange(n + 1) - s
    # <m+1| S_x |m>
    coupling = 0.5 * np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    return m, coupling


def spin_matrices(n: int) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """S_x, S_y, S_z for S = n/2 in the basis m = -S..S"""
    m, coupling = _ladder(n)
    raise_op = sp.diags(2.0 * coupling, offsets=-1, format="csr")
    lower_op = raise_op.T.tocsr()
    sx = 0.5 * (raise_op + lower_op)
    sy = (raise_op - lower_op) / 2j
    sz = sp.diags(m, format="csr")
    return sx.tocsr(), sy.tocsr(), sz


def _bands(p: LMGProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal, first and second off-diagonals of H, plus the m values"""
    n = p.n
    m, a = _ladder(n)
    padded = np.concatenate(([0.0], a, [0.0]))
    sx2_diag = padded[:-1] ** 2 + padded[1:] ** 2
    diag = -2.0 * p.epsilon * m - (4.0 * p.j / n) * sx2_diag
    off1 = 4.0 * p.t * a
    off2 = -(4.0 * p.j / n) * a[:-1] * a[1:]
    return diag, off1, off2, m


def lmg_hamiltonian(p: LMGProblem) -> sp.csr_matrix:
    diag, off1, off2, _ = _bands(p)
    return sp.diags([off2, off1, diag, off1, off2], offsets=[-2, -1, 0, 1, 2], format="csr")


def _solve_tridiagonal(diag: np.ndarray, off: np.ndarray, count: int) -> Tuple[np.ndarray, np.ndarray]:
    if len(diag) == 1:
        return diag.copy(), np.ones((1, 1))
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, count - 1))


def _lowest_states(p: LMGProblem, k: int) -> Tuple[np.ndarray, np.ndarray]:
    diag, off1, off2, _ = _bands(p)
    dim = p.n + 1

    if p.t == 0:
        # H commutes with the spin flip: split into even/odd m-index blocks
        values, vectors = [], []
        for start in (0, 1):
            block_diag = diag[start::2]
            if len(block_diag) == 0:
                continue
            count = min(k, len(block_diag))
            block_values, block_vectors = _solve_tridiagonal(block_diag, off2[start::2], count)
            embedded = np.zeros((dim, count))
            embedded[start::2, :] = block_vectors
            values.append(block_values)
            vectors.append(embedded)
        values = np.concatenate(values)
        vectors = np.hstack(vectors)
        order = np.argsort(values, kind="stable")[:k]
        return values[order], vectors[:, order]

    if dim <= LMG_DENSE_LIMIT:
        return eigh(lmg_hamiltonian(p).toarray(), subset_by_index=[0, k - 1])

    banded = np.zeros((3, dim))
    banded[0, :] = diag
    banded[1, :-1] = off1
    banded[2, :-2] = off2
    return eig_banded(banded, lower=True, select="i", select_range=(0, k - 1))


def lmg_spectrum(p: LMGProblem, k: int = 2) -> LMGResult:
    """
    Lowest k levels of the giant spin and its ground-state spin expectations

    Args:
        p: The problem
        k: Number of levels, 2 <= k <= N + 1

    Returns:
        LMGResult with spin expectations normalised by S
    """
    if not 2 <= k <= p.n + 1:
        raise InvalidSpecError(f"need 2 <= k <= n + 1, got k={k}, n={p.n}")

    energies, vectors = _lowest_states(p, k)
    ground = vectors[:, 0]
    sx, sy, sz = spin_matrices(p.n)
    s = p.spin
    return LMGResult(
        energies=energies,
        gap_e10=float(max(energies[1] - energies[0], 0.0)),
        sz_mean=float(np.real(ground @ (sz @ ground)) / s),
        sx_mean=float(np.real(ground @ (sx @ ground)) / s),
        sy_mean=float(np.real(np.vdot(ground, sy @ ground)) / s),
        vectors=vectors,
    )


def _relative_commutator(a: sp.spmatrix, b: sp.spmatrix, scale: float) -> float:
    commutator = a @ b - b @ a
    return float(sparse_norm(commutator) / scale) if scale > 0 else float(sparse_norm(commutator))


def check_symmetries(p: LMGProblem) -> SymmetryReport:
    """
    Check total-spin conservation and the spin-flip symmetry prod_i sigma_z^(i)

    The spin flip acts as (-1)^(S - m) in the maximal sector. With t = 0 the two
    lowest states must also have <S_x> = <S_y> = 0.
    """
    hamiltonian = lmg_hamiltonian(p)
    scale = max(float(sparse_norm(hamiltonian)), 1e-300)
    sx, sy, sz = spin_matrices(p.n)
    s_squared = (sx @ sx + sy @ sy + sz @ sz).real
    flip = sp.diags((-1.0) ** np.arange(p.n, -1, -1), format="csr")

    s2_commutator = _relative_commutator(hamiltonian, s_squared, scale)
    flip_commutator = _relative_commutator(hamiltonian, flip, scale)
    flip_preserved = flip_commutator < SYMMETRY_TOL

    result = lmg_spectrum(p, k=2)
    sx_means = tuple(float(np.real(np.vdot(v, sx @ v))) for v in result.vectors.T)
    sy_means = tuple(float(np.real(np.vdot(v, sy @ v))) for v in result.vectors.T)

    passed = s2_commutator < SYMMETRY_TOL
    if p.t == 0:
        passed = passed and flip_preserved and max(map(abs, sx_means + sy_means)) < EXPECTATION_TOL
    else:
        passed = passed and not flip_preserved
        logger.debug(f"Spin-flip symmetry broken by t={p.t} (commutator {flip_commutator:.3e})")

    return SymmetryReport(
        s2_commutator=s2_commutator,
        spin_flip_commutator=flip_commutator,
        spin_flip_preserved=flip_preserved,
        sx_means=sx_means,
        sy_means=sy_means,
        passed=passed,
    )


def variational_energy(p: LMGProblem, theta, chi=0.0):
    """Coherent-state energy -eps N cos(theta) - J (N-1) (sin(theta) cos(chi))^2"""
    theta = np.asarray(theta, dtype=float)
    return -p.epsilon * p.n * np.cos(theta) - p.j * (p.n - 1) * (np.sin(theta) * np.cos(chi)) ** 2


def _arccos_ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        if numerator == 0:
            return float(np.pi / 2)
        return 0.0 if numerator > 0 else float(np.pi)
    return float(np.arccos(np.clip(numerator / denominator, -1.0, 1.0)))


def mean_field_minimum(p: LMGProblem) -> MeanFieldMinimum:
    """
    Minimise the coherent-state energy over theta in [0, pi], chi in {0, pi}

    A coarse grid locates the minimum and golden-section search refines it
    between the neighbouring grid points. The t term is not part of the
    variational energy.
    """
    if p.t != 0:
        logger.debug("Mean-field minimum ignores t")

    grid = np.linspace(0.0, np.pi, MEAN_FIELD_GRID)
    energies = variational_energy(p, grid)
    index = int(np.argmin(energies))

    if np.ptp(energies) <= 1e-15 * max(np.max(np.abs(energies)), 1.0):
        theta0 = np.pi / 2
    elif index in (0, len(grid) - 1):
        theta0 = grid[index]
    else:
        bracket = (grid[index - 1], grid[index], grid[index + 1])
        try:
            refined = minimize_scalar(lambda th: float(variational_energy(p, th)),
                                      bracket=bracket, method="golden",
                                      options={"xtol": 1e-10})
            theta0 = float(np.clip(refined.x, 0.0, np.pi))
        except ValueError:
            theta0 = grid[index]
        if variational_energy(p, theta0) > energies[index]:
            theta0 = grid[index]

    theta0 = float(theta0)
    return MeanFieldMinimum(
        theta0=theta0,
        chi0=0.0,
        energy=float(variational_energy(p, theta0)),
        degenerate=bool(p.j * (p.n - 1) > 0 and abs(np.sin(theta0)) > 1e-12),
        theta_large_n_form=_arccos_ratio(p.epsilon, 2.0 * p.j),
        theta_finite_n_form=_arccos_ratio(p.epsilon * p.n, 2.0 * p.j * (p.n - 1)),
    )


def variational_excess(p: LMGProblem) -> float:
    """
    Relative excess of the mean-field energy over the exact ground state

    The coherent-state energy belongs to the pair form of the coupling, which
    equals the giant-spin Hamiltonian plus J.
    """
    exact = lmg_spectrum(p, k=2).energies[0] + p.j
    return float((mean_field_minimum(p).energy - exact) / max(abs(exact), 1e-300))


def transition_scan(n: int, j: float, eps_grid: Sequence[float], t: float = 0.0,
                    fraction: float = DEFAULT_GAP_FRACTION) -> TransitionScan:
    """
    Scan the giant-spin gap over an ascending eps grid

    The transition estimate is the first eps whose gap E10 reaches
    ``fraction`` * 4J.
    """
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or len(eps) == 0:
        raise InvalidSpecError("eps_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(eps) < 0):
        raise InvalidSpecError("eps_grid must be ascending")

    gaps, sz = [], []
    for value in eps:
        result = lmg_spectrum(LMGProblem(n=n, t=t, j=j, epsilon=float(value)), k=2)
        gaps.append(result.gap_e10)
        sz.append(result.sz_mean)
    gaps = np.array(gaps)

    threshold = fraction * 4.0 * j
    crossing = np.nonzero(gaps >= threshold - 1e-12 * max(threshold, 1.0))[0]
    transition = float(eps[crossing[0]]) if len(crossing) else None

    with np.errstate(divide="ignore", invalid="ignore"):
        eps_over_2j = eps / (2.0 * j) if j > 0 else np.full_like(eps, np.nan)
        gap_over_4j = gaps / (4.0 * j) if j > 0 else np.full_like(gaps, np.nan)

    logger.info(f"Transition scan N={n}: {len(eps)} points, estimate eps={transition}")
    return TransitionScan(n=n, j=j, epsilon=eps, eps_over_2j=eps_over_2j, gap=gaps,
                          gap_over_4j=gap_over_4j, sz_mean=np.array(sz),
                          transition_epsilon=transition, fraction=fraction)


def finite_size_scan(ns: Sequence[int], j: float, eps_grid: Sequence[float], t: float = 0.0,
                     fraction: float = DEFAULT_GAP_FRACTION) -> Dict[int, float]:
    """Transition estimate (eps/2J) for every array length"""
    return {n: transition_scan(n, j, eps_grid, t=t, fraction=fraction).transition for n in ns}
