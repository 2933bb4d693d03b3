"""
Effective spin-model module for parityarray

Every loop's ground doublet is treated as a spin-1/2. Hopping parameters are
read off the band structure over the offset-charge Brillouin zone, and the
explicit few-spin Pauli Hamiltonians are built for cross-checks.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from functools import reduce
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh

from .charge_basis import Truncation, spectra_at_points
from .circuit import CircuitSpec
from .errors import FitDegenerateError, InvalidSpecError, ParityArrayError

logger = logging.getLogger("parityarray")

DEFAULT_GRID_POINTS = 9
DEFAULT_SPAN = 0.5
MAX_LABEL_ITERATIONS = 100

# Spin labels (s1, s2) of the two-loop model, one row per state
TWO_LOOP_STATES = np.array([(1, 1), (1, -1), (-1, 1), (-1, -1)], dtype=float)

PAULI = {
    "I": sp.identity(2, format="csr", dtype=complex),
    "X": sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex)),
    "Y": sp.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex)),
    "Z": sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex)),
}


@dataclass
class BandGrid:
    """
    Band energies sampled over the offset charges of every loop

    Attributes:
        axes: Sample points of each loop's offset charge
        points: Offset-charge tuple of every grid point, shape (P, N)
        energies: Ascending band energies at every grid point, shape (P, bands)
    """
    axes: List[np.ndarray]
    points: np.ndarray
    energies: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def bands(self) -> int:
        return self.energies.shape[1]


@dataclass
class SpinModelFit:
    """Effective spin-model parameters (GHz) extracted from a band grid"""
    t: float
    t_plus: float = 0.0
    t_minus: float = 0.0
    j: float = 0.0
    epsilon: List[float] = field(default_factory=list)
    residual_rms: float = 0.0
    bandwidth: float = 0.0
    t_in: Optional[float] = None
    t_out: Optional[float] = None

    @property
    def t_parallel(self) -> float:
        return self.t


@dataclass(frozen=True)
class PauliHamiltonian:
    """Sum of real coefficients (GHz) times Pauli strings such as "XIZ" """
    n_spins: int
    terms: Tuple[Tuple[float, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), str(label)) for c, label in self.terms))
        for _, label in self.terms:
            if len(label) != self.n_spins or set(label) - set(PAULI):
                raise InvalidSpecError(f"bad Pauli string {label!r} for {self.n_spins} spins")

    def with_terms(self, extra: Sequence[Tuple[float, str]]) -> "PauliHamiltonian":
        return replace(self, terms=self.terms + tuple(extra))

    def to_sparse(self) -> sp.csr_matrix:
        dim = 2 ** self.n_spins
        matrix = sp.csr_matrix((dim, dim), dtype=complex)
        for coefficient, label in self.terms:
            string = reduce(lambda a, b: sp.kron(a, b, format="csr"), [PAULI[c] for c in label])
            matrix = matrix + coefficient * string
        return matrix.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.to_dense())


def _pauli_label(n: int, ops: dict) -> str:
    return "".join(ops.get(i, "I") for i in range(n))


def _check_lengths(n: int, **values) -> None:
    for name, value in values.items():
        if len(value) != n:
            raise InvalidSpecError(f"{name} has length {len(value)}, expected {n}")


def build_spin_hamiltonian(n: int, t: float, j: float, eps: Sequence[float],
                           offset_charges: Sequence[float]) -> PauliHamiltonian:
    """
    Build the N-spin array Hamiltonian

    H = 2t sum_i cos(pi ng_i) X~_i
        - (2J/N) sum_{i<j} cos(pi (ng_i - ng_j)) X~_i X~_j
        - sum_i eps_i Z_i

    where X~ = cos(pi ng) X + sin(pi ng) Y is X rotated about z by pi ng.

    Args:
        n: Number of spins (loops)
        t: Single-loop hopping (GHz)
        j: Collective coupling J (GHz)
        eps: Flux-detuning field of every spin (GHz)
        offset_charges: Offset charge of every loop

    Returns:
        PauliHamiltonian of the array
    """
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    _check_lengths(n, eps=eps, offset_charges=offset_charges)

    ng = np.asarray(offset_charges, dtype=float)
    c, s = np.cos(np.pi * ng), np.sin(np.pi * ng)
    terms: List[Tuple[float, str]] = []

    for i in range(n):
        amplitude = 2.0 * t * c[i]
        terms.append((amplitude * c[i], _pauli_label(n, {i: "X"})))
        terms.append((amplitude * s[i], _pauli_label(n, {i: "Y"})))

    for i, k in itertools.combinations(range(n), 2):
        coupling = -(2.0 * j / n) * np.cos(np.pi * (ng[i] - ng[k]))
        for op_i, w_i in (("X", c[i]), ("Y", s[i])):
            for op_k, w_k in (("X", c[k]), ("Y", s[k])):
                terms.append((coupling * w_i * w_k, _pauli_label(n, {i: op_i, k: op_k})))

    for i in range(n):
        terms.append((-float(eps[i]), _pauli_label(n, {i: "Z"})))

    return PauliHamiltonian(n_spins=n, terms=tuple((cf, lb) for cf, lb in terms if cf != 0.0))


def inject_error_terms(h: PauliHamiltonian, imbalance: Sequence[float],
                       flux_detuning: Sequence[float]) -> PauliHamiltonian:
    """Add (t_in - t_out) X_i and -eps_i Z_i error terms to every spin"""
    _check_lengths(h.n_spins, imbalance=imbalance, flux_detuning=flux_detuning)
    extra = []
    for i in range(h.n_spins):
        if imbalance[i] != 0:
            extra.append((float(imbalance[i]), _pauli_label(h.n_spins, {i: "X"})))
        if flux_detuning[i] != 0:
            extra.append((-float(flux_detuning[i]), _pauli_label(h.n_spins, {i: "Z"})))
    return h.with_terms(extra)


def dicke_isometry(n: int) -> np.ndarray:
    """
    Columns are the symmetric Dicke states |S=N/2, m>, m = -S..S ascending

    Basis state bits mark down spins, so m = S - popcount.
    """
    down_counts = np.array([bin(b).count("1") for b in range(2 ** n)])
    isometry = np.zeros((2 ** n, n + 1))
    for column in range(n + 1):
        k = n - column
        isometry[down_counts == k, column] = 1.0 / np.sqrt(comb(n, k))
    return isometry


def symmetric_subspace_spectrum(h: PauliHamiltonian) -> np.ndarray:
    """Eigenvalues of h restricted to the maximal total-spin sector"""
    isometry = dicke_isometry(h.n_spins)
    block = isometry.T @ (h.to_sparse() @ isometry)
    return np.linalg.eigvalsh(0.5 * (block + block.conj().T))


def ferro_doublet(h: PauliHamiltonian) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lowest two eigenvectors and the single-site Z matrix elements between them

    Returns:
        Tuple of (vectors with shape (2^N, 2), elements with shape (N, 2, 2))
    """
    _, vectors = eigh(h.to_dense(), subset_by_index=[0, 1])
    elements = []
    for i in range(h.n_spins):
        z_i = PauliHamiltonian(h.n_spins, ((1.0, _pauli_label(h.n_spins, {i: "Z"})),)).to_sparse()
        elements.append(vectors.conj().T @ (z_i @ vectors))
    return vectors, np.array(elements)


def model_single_loop_gap(t: float, ng, eps: float = 0.0):
    """E01 of a single loop with hopping t and detuning field eps"""
    return np.sqrt((4.0 * t * np.cos(np.pi * np.asarray(ng))) ** 2 + (2.0 * eps) ** 2)


def _two_loop_design(points: np.ndarray) -> np.ndarray:
    """Design tensor of shape (P, 4, 3) over (t_parallel, t_plus, t_minus)"""
    ng1, ng2 = points[:, 0], points[:, 1]
    c1, c2 = np.cos(np.pi * ng1), np.cos(np.pi * ng2)
    c_plus, c_minus = np.cos(np.pi * (ng1 + ng2)), np.cos(np.pi * (ng1 - ng2))
    s1, s2 = TWO_LOOP_STATES[:, 0], TWO_LOOP_STATES[:, 1]
    design = np.empty((len(points), 4, 3))
    design[:, :, 0] = 2.0 * (c1[:, None] * s1[None, :] + c2[:, None] * s2[None, :])
    design[:, :, 1] = 2.0 * c_plus[:, None] * (s1 * s2)[None, :]
    design[:, :, 2] = 2.0 * c_minus[:, None] * (s1 * s2)[None, :]
    return design


def model_two_loop_spectrum(t_parallel: float, t_plus: float, t_minus: float,
                            points: np.ndarray) -> np.ndarray:
    """Sorted two-loop model energies at every (ng1, ng2) point, shape (P, 4)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    energies = _two_loop_design(points) @ np.array([t_parallel, t_plus, t_minus])
    return np.sort(energies, axis=1)


def band_structure(spec: CircuitSpec, grid_points: int = DEFAULT_GRID_POINTS, bands: int = 4,
                   trunc: Optional[Truncation] = None, span: float = DEFAULT_SPAN,
                   workers: int = 1) -> BandGrid:
    """
    Converged spectra over a grid of offset charges

    Every loop's offset charge runs over linspace(0, span, grid_points); all
    other circuit parameters stay fixed.

    Args:
        spec: The circuit
        grid_points: Points per axis, odd and >= 5
        bands: Number of bands to keep
        trunc: Charge truncation
        span: Axis extent, 0.5 for the symmetry-reduced zone or 1.0
        workers: Worker processes for the grid points

    Returns:
        BandGrid of the circuit
    """
    if grid_points < 5 or grid_points % 2 == 0:
        raise InvalidSpecError(f"grid_points must be odd and >= 5, got {grid_points}")
    if span not in (0.5, 1.0):
        raise InvalidSpecError(f"span must be 0.5 or 1.0, got {span}")
    if bands < 2:
        raise InvalidSpecError(f"bands must be >= 2, got {bands}")

    axis = np.linspace(0.0, span, grid_points)
    axes = [axis.copy() for _ in range(spec.n)]
    points = np.array(list(itertools.product(*axes)))
    specs = [
        replace(spec, loops=[replace(loop, offset_charge=float(ng))
                             for loop, ng in zip(spec.loops, point)])
        for point in points
    ]

    logger.info(f"Band structure: {len(points)} offset-charge points, N={spec.n}, {bands} bands")
    if workers > 1:
        results = spectra_at_points(specs, trunc, k=bands, workers=workers)
    else:
        results = []
        for point, point_spec in zip(points, specs):
            try:
                results.extend(spectra_at_points([point_spec], trunc, k=bands))
            except ParityArrayError:
                logger.error(f"Band structure failed at n_g={tuple(point)}")
                raise

    unconverged = sum(not r.converged for r in results)
    if unconverged:
        logger.warning(f"{unconverged} band-structure points did not converge")
    energies = np.array([r.energies for r in results])
    return BandGrid(axes=axes, points=points, energies=energies)


def _point_index(bands: BandGrid, target: Sequence[float]) -> int:
    distance = np.abs(bands.points - np.asarray(target)[None, :])
    distance = np.minimum(distance % 1.0, 1.0 - distance % 1.0)
    index = int(np.argmin(np.max(distance, axis=1)))
    if np.max(distance[index]) > 1e-9:
        raise FitDegenerateError(f"band grid does not contain n_g={tuple(target)}")
    return index


def extract_single_loop(bands: BandGrid) -> SpinModelFit:
    """
    Single-loop hopping t from the band gap at n_g = 0

    t = -E01(0)/4 (negative by convention); the residual is the RMS deviation of
    E01(n_g) from |4t cos(pi n_g)| over the grid.
    """
    if bands.n != 1 or bands.bands < 2:
        raise InvalidSpecError("single-loop extraction needs an N=1 grid with >= 2 bands")
    gaps = bands.energies[:, 1] - bands.energies[:, 0]
    e01_zero = gaps[_point_index(bands, [0.0])]
    if e01_zero < 1e-10:
        raise FitDegenerateError(f"E01(n_g=0) = {e01_zero:.3e} GHz is too small to fit")

    t = -e01_zero / 4.0
    ng = bands.points[:, 0]
    residual = float(np.sqrt(np.mean((gaps - np.abs(4.0 * t * np.cos(np.pi * ng))) ** 2)))
    logger.info(f"Single-loop fit: t={t:.6g} GHz, residual={residual:.3g} GHz")
    return SpinModelFit(t=float(t), epsilon=[0.0], residual_rms=residual,
                        bandwidth=float(e01_zero), t_in=float(t), t_out=float(t))


def _initial_guesses(centered_zero: np.ndarray) -> List[np.ndarray]:
    # at n_g = (0, 0): ferro pair 2T +- 4 t_par, antiferro pair degenerate at -2T
    levels = np.sort(centered_zero)
    gaps = np.diff(levels)
    pair = int(np.argmin(gaps))
    antiferro = levels[pair:pair + 2]
    ferro = np.delete(levels, [pair, pair + 1])
    total = (np.mean(ferro) - np.mean(antiferro)) / 4.0
    t_parallel = -abs(ferro[-1] - ferro[0]) / 8.0
    return [np.array([t_parallel, 0.0, total]), np.array([t_parallel, total, 0.0])]


def _fit_labels(design: np.ndarray, data_sorted: np.ndarray, params: np.ndarray) -> Tuple[np.ndarray, float]:
    labels = None
    for _ in range(MAX_LABEL_ITERATIONS):
        model = design @ params
        new_labels = np.argsort(model, axis=1, kind="stable")
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        rows = np.take_along_axis(design, labels[:, :, None], axis=1).reshape(-1, 3)
        params, _, _, _ = np.linalg.lstsq(rows, data_sorted.reshape(-1), rcond=None)
    model_sorted = np.sort(design @ params, axis=1)
    residual = float(np.sqrt(np.mean((model_sorted - data_sorted) ** 2)))
    return params, residual


def extract_two_loop(bands: BandGrid) -> SpinModelFit:
    """
    Fit the two-loop spin model to the lowest four bands

    E(s1, s2) = 2 t_par (c1 s1 + c2 s2) + (2 t_plus c_plus + 2 t_minus c_minus) s1 s2

    with c_i = cos(pi ng_i) and c_pm = cos(pi (ng1 +- ng2)). Levels are matched
    to spin labels by sorted order at every point and the parameters are found by
    linear least squares, alternating until the labels stop changing. Two starts
    (all pair hopping in t_minus, or all in t_plus) are tried and the better
    fit is kept. t_par is reported <= 0, as its sign is a gauge choice.

    Raises:
        FitDegenerateError: If the grid cannot separate the three parameters
    """
    if bands.n != 2 or bands.bands < 4:
        raise InvalidSpecError("two-loop extraction needs an N=2 grid with >= 4 bands")

    data = bands.energies[:, :4]
    centered = np.sort(data - np.mean(data, axis=1, keepdims=True), axis=1)
    design = _two_loop_design(bands.points)

    rank = np.linalg.matrix_rank(design.reshape(-1, 3))
    if rank < 3:
        raise FitDegenerateError(f"band grid only constrains {rank} of 3 hopping parameters")

    zero = _point_index(bands, [0.0, 0.0])
    best_params, best_residual = None, np.inf
    for guess in _initial_guesses(centered[zero]):
        params, residual = _fit_labels(design, centered, guess)
        if residual < best_residual:
            best_params, best_residual = params, residual

    t_parallel, t_plus, t_minus = (float(v) for v in best_params)
    t_parallel = -abs(t_parallel)
    model = design @ best_params
    fit = SpinModelFit(
        t=t_parallel,
        t_plus=t_plus,
        t_minus=t_minus,
        j=-t_minus,
        epsilon=[0.0, 0.0],
        residual_rms=best_residual,
        bandwidth=float(np.ptp(model)),
    )
    logger.info(f"Two-loop fit: t_par={fit.t:.6g}, t_plus={fit.t_plus:.6g}, "
                f"t_minus={fit.t_minus:.6g}, residual={fit.residual_rms:.3g} GHz")
    return fit
