"""
Charge-basis Hamiltonian module for parityarray

The array Hamiltonian is written in the truncated Cooper-pair number basis
n_i in {-n_max..n_max} of every island. Phase harmonics e^{+-i m phi_i} act as
charge shifts by +-m on island i.
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial, reduce
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .circuit import CircuitSpec, charging_energies
from .errors import ConvergenceError, DimensionOverflowError, InvalidSpecError
from .interferometer import loop_potentials

logger = logging.getLogger("parityarray")

DEFAULT_N_MAX = 12
DEFAULT_CONVERGENCE_TOL = 1e-6  # GHz
DEFAULT_MAX_DIM = 2 ** 21
DEFAULT_NUM_LEVELS = 6
DENSE_DIM_LIMIT = 4096
KRYLOV_SEED = 1234
KRYLOV_MARGIN = 8
MAX_DEFLATION_ROUNDS = 8


@dataclass(frozen=True)
class Truncation:
    """Per-island charge cutoff, refinement tolerance (GHz) and basis-size ceiling"""
    n_max: int = DEFAULT_N_MAX
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise InvalidSpecError(f"n_max must be an integer >= 2, got {self.n_max}")
        if not self.convergence_tol > 0:
            raise InvalidSpecError(f"convergence_tol must be > 0, got {self.convergence_tol}")
        if int(self.max_dim) != self.max_dim or self.max_dim < 1:
            raise InvalidSpecError(f"max_dim must be a positive integer, got {self.max_dim}")

    def with_n_max(self, n_max: int) -> "Truncation":
        return replace(self, n_max=n_max)


@dataclass
class ChargeOperator:
    """
    Hermitian operator in the truncated multi-island charge basis

    Attributes:
        dim: Basis dimension (2 n_max + 1)^N
        matrix: The operator in CSR form
        charges: Charge of every island for every basis state, shape (dim, N);
            None for operators not built from a circuit
        n_max: Per-island cutoff used for the basis
        eigenvectors: Columns of the lowest eigenstates, filled in by
            lowest_eigenvalues(..., keep_vectors=True)
    """
    dim: int
    matrix: sp.csr_matrix = field(repr=False)
    charges: Optional[np.ndarray] = field(default=None, repr=False)
    n_max: int = 0
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, matrix) -> "ChargeOperator":
        matrix = sp.csr_matrix(matrix, dtype=complex)
        if matrix.shape[0] != matrix.shape[1]:
            raise InvalidSpecError(f"operator must be square, got {matrix.shape}")
        return cls(dim=matrix.shape[0], matrix=matrix)


@dataclass
class SpectrumResult:
    """Lowest eigenvalues in ascending order (GHz) with convergence metadata"""
    energies: np.ndarray
    e01: float
    converged: bool
    n_max_used: int
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def e02(self) -> float:
        return float(self.energies[2] - self.energies[0]) if len(self.energies) > 2 else float("nan")


def charge_states(n_islands: int, n_max: int) -> np.ndarray:
    """All charge configurations, first island varying slowest (matches the kron order)"""
    values = range(-n_max, n_max + 1)
    return np.array(list(itertools.product(values, repeat=n_islands)), dtype=np.int64)


def _embed(single: sp.spmatrix, island: int, n_islands: int, d: int) -> sp.csr_matrix:
    identity = sp.identity(d, format="csr")
    factors = [identity] * island + [single] + [identity] * (n_islands - island - 1)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


def _raise_charge(m: int, d: int) -> sp.csr_matrix:
    # <n+m| e^{i m phi} |n> = 1
    return sp.diags(np.ones(d - m), offsets=-m, shape=(d, d), format="csr")


def build_hamiltonian(spec: CircuitSpec, trunc: Optional[Truncation] = None) -> ChargeOperator:
    """
    Build the array Hamiltonian in the truncated charge basis

    H = sum_ij 4 E_C^(ij) (n_i - ng_i)(n_j - ng_j)
        + sum_i [a1 C1_i + b1 S1_i + a2 C2_i + b2 S2_i]

    with Cm = (e^{im phi} + e^{-im phi})/2 and Sm = (e^{im phi} - e^{-im phi})/2i.

    Args:
        spec: The circuit
        trunc: Charge cutoff and dimension ceiling

    Returns:
        ChargeOperator holding H as a complex CSR matrix

    Raises:
        DimensionOverflowError: If (2 n_max + 1)^N exceeds trunc.max_dim
    """
    trunc = trunc or Truncation()
    n_islands = spec.n
    d = 2 * trunc.n_max + 1
    dim = d ** n_islands
    if dim > trunc.max_dim:
        raise DimensionOverflowError(dim, trunc.max_dim)

    ec = charging_energies(spec).ec
    charges = charge_states(n_islands, trunc.n_max)
    shifted = charges - spec.offset_charges[np.newaxis, :]
    kinetic = 4.0 * np.einsum("pi,ij,pj->p", shifted, ec, shifted)
    hamiltonian = sp.diags(kinetic.astype(complex), format="csr")

    potentials = loop_potentials(spec.loops, linearized=spec.linearized_flux,
                                 flux_slope=spec.flux_slope)
    for island, potential in enumerate(potentials):
        for m, (a, b) in ((1, (potential.a1, potential.b1)), (2, (potential.a2, potential.b2))):
            if a == 0 and b == 0:
                continue
            up = _embed(_raise_charge(m, d), island, n_islands, d)
            down = up.T.tocsr()
            hamiltonian = hamiltonian + (0.5 * a) * (up + down) + (b / 2j) * (up - down)

    hamiltonian = hamiltonian.tocsr()
    hamiltonian.sum_duplicates()
    logger.debug(f"Built charge-basis Hamiltonian: N={n_islands}, n_max={trunc.n_max}, "
                 f"dim={dim}, nnz={hamiltonian.nnz}")
    return ChargeOperator(dim=dim, matrix=hamiltonian, charges=charges, n_max=trunc.n_max)


def _residual_norm(matrix, values, vectors) -> Optional[float]:
    if values is None or vectors is None or len(values) == 0:
        return None
    residual = matrix @ vectors - vectors * np.asarray(values)[np.newaxis, :]
    return float(np.max(np.linalg.norm(residual, axis=0)))


def _arpack(matrix, k: int, v0: np.ndarray, max_iterations: int) -> Tuple[np.ndarray, np.ndarray]:
    dim = matrix.shape[0]
    try:
        return eigsh(matrix, k=k, which="SA", v0=v0, tol=0,
                     ncv=min(dim, max(4 * k, 40)), maxiter=max_iterations)
    except ArpackNoConvergence as e:
        residual = _residual_norm(matrix, e.eigenvalues, e.eigenvectors)
        logger.warning(f"Krylov solver did not converge after {max_iterations} iterations")
        raise ConvergenceError(
            f"eigensolver did not converge ({len(e.eigenvalues)} of {k} eigenpairs found)",
            iterations=max_iterations, residual_norm=residual,
        ) from e


def _start_vector(rng: np.random.Generator, dim: int, dtype) -> np.ndarray:
    v0 = rng.standard_normal(dim).astype(dtype)
    return v0 / np.linalg.norm(v0)


def _krylov_lowest(matrix, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lowest k eigenpairs with degenerate multiplets resolved

    A single Lanczos start vector only sees its own projection onto a
    degenerate eigenspace. After the first ARPACK run the found subspace V is
    lifted out of the way (A + shift V V^H) and ARPACK runs again from a fresh
    vector; every eigenvalue that turns up below the current k-th level is a
    missed copy. The rounds repeat until none is found, and the final pairs
    come from a Rayleigh-Ritz solve on the collected subspace.
    """
    dim = matrix.shape[0]
    rng = np.random.default_rng(KRYLOV_SEED)
    max_iterations = 20 * dim
    k_eff = min(dim - 1, k + KRYLOV_MARGIN)
    values, vectors = _arpack(matrix, k_eff, _start_vector(rng, dim, matrix.dtype), max_iterations)
    order = np.argsort(values, kind="stable")
    values, vectors = np.real(values[order]), vectors[:, order]

    shift = 2.0 * float(spla.norm(matrix, 1)) + 1.0
    for _ in range(MAX_DEFLATION_ROUNDS):
        threshold = values[k - 1] - 1e-10 * max(1.0, abs(values[k - 1]))
        basis = vectors

        def deflated(x, basis=basis):
            return matrix @ x + shift * (basis @ (basis.conj().T @ x))

        op = LinearOperator((dim, dim), matvec=deflated, matmat=deflated, dtype=matrix.dtype)
        extra_values, extra_vectors = _arpack(op, min(k, dim - 1),
                                              _start_vector(rng, dim, matrix.dtype), max_iterations)
        missed = np.real(extra_values) < threshold
        if not np.any(missed):
            return values[:k], vectors[:, :k]

        logger.debug(f"Krylov solve missed {int(np.sum(missed))} degenerate eigenpair(s); refining")
        q, _ = np.linalg.qr(np.hstack([vectors, extra_vectors[:, missed]]))
        projected = q.conj().T @ (matrix @ q)
        values, ritz = eigh(0.5 * (projected + projected.conj().T))
        vectors = q @ ritz

    raise ConvergenceError(
        f"degenerate multiplets still unresolved after {MAX_DEFLATION_ROUNDS} deflation rounds",
        iterations=MAX_DEFLATION_ROUNDS, residual_norm=_residual_norm(matrix, values[:k], vectors[:, :k]),
    )


def lowest_eigenvalues(op: ChargeOperator, k: int = DEFAULT_NUM_LEVELS,
                       keep_vectors: bool = False, solver: str = "auto") -> SpectrumResult:
    """
    Lowest k eigenvalues of a charge-basis operator

    Dense LAPACK is used up to DENSE_DIM_LIMIT, above that ARPACK's implicitly
    restarted Lanczos iteration (which keeps the Krylov basis orthogonal),
    followed by deflation rounds that recover missed copies of degenerate
    levels. Start vectors are drawn from a fixed seed: they must overlap every
    symmetry sector, which the all-ones vector does not for symmetric arrays.

    Args:
        op: The operator
        k: Number of eigenvalues, 2 <= k < dim
        keep_vectors: Store eigenvectors on the result and on ``op``
        solver: "auto", "dense" or "krylov"

    Returns:
        SpectrumResult with ascending energies

    Raises:
        ConvergenceError: If the Krylov iteration does not converge
    """
    if k < 2 or k >= op.dim:
        raise InvalidSpecError(f"need 2 <= k < dim, got k={k}, dim={op.dim}")
    if solver not in ("auto", "dense", "krylov"):
        raise InvalidSpecError(f"unknown solver {solver!r}")

    use_dense = solver == "dense" or (solver == "auto" and op.dim <= DENSE_DIM_LIMIT)
    matrix = op.matrix
    if not np.any(matrix.data.imag):
        matrix = matrix.real.tocsr()
    vectors = None
    if use_dense:
        logger.debug(f"Dense eigensolve, dim={op.dim}, k={k}")
        dense = matrix.toarray()
        if keep_vectors:
            values, vectors = eigh(dense, subset_by_index=[0, k - 1])
        else:
            values = eigh(dense, subset_by_index=[0, k - 1], eigvals_only=True)
    else:
        logger.debug(f"Krylov eigensolve, dim={op.dim}, k={k}")
        values, vectors = _krylov_lowest(matrix, k)

    order = np.argsort(values, kind="stable")
    energies = np.asarray(values)[order]
    if vectors is not None:
        vectors = vectors[:, order]
    if keep_vectors:
        op.eigenvectors = vectors
    else:
        vectors = None

    return SpectrumResult(
        energies=energies,
        e01=float(max(energies[1] - energies[0], 0.0)),
        converged=True,
        n_max_used=op.n_max,
        eigenvectors=vectors,
    )


def converged_spectrum(spec: CircuitSpec, trunc: Optional[Truncation] = None,
                       k: int = DEFAULT_NUM_LEVELS, keep_vectors: bool = False) -> SpectrumResult:
    """
    Refine the charge cutoff until the lowest k levels stop moving

    n_max is doubled until every level shifts by less than trunc.convergence_tol
    between successive cutoffs. When the next cutoff would exceed the dimension
    ceiling the last result is returned with converged=False.
    """
    trunc = trunc or Truncation()
    n_max = trunc.n_max
    previous: Optional[SpectrumResult] = None

    while True:
        try:
            op = build_hamiltonian(spec, trunc.with_n_max(n_max))
        except DimensionOverflowError as e:
            if previous is None:
                raise
            logger.warning(f"Dimension ceiling reached at n_max={n_max} (dim={e.dim}); "
                           f"spectrum not converged")
            return replace(previous, converged=False)

        result = lowest_eigenvalues(op, k, keep_vectors=keep_vectors)
        if previous is not None:
            shift = float(np.max(np.abs(result.energies - previous.energies)))
            logger.debug(f"n_max {previous.n_max_used} -> {n_max}: max level shift {shift:.3e} GHz")
            if shift < trunc.convergence_tol:
                return result
        previous = result
        n_max *= 2


def basis_parity(op: ChargeOperator) -> np.ndarray:
    """Total Cooper-pair parity (-1)^(sum n_i) of every basis state"""
    if op.charges is None:
        raise InvalidSpecError("operator has no charge basis attached")
    return np.where(np.sum(op.charges, axis=1) % 2 == 0, 1.0, -1.0)


def _state(op: ChargeOperator, state_index: int) -> np.ndarray:
    if op.eigenvectors is None:
        raise InvalidSpecError("eigenvectors were not retained; solve with keep_vectors=True")
    count = op.eigenvectors.shape[1]
    if not 0 <= state_index < count:
        raise IndexError(f"state index {state_index} out of range for {count} stored states")
    return op.eigenvectors[:, state_index]


def parity_expectation(op: ChargeOperator, state_index: int) -> float:
    """Expectation of prod_i (-1)^{n_i} in a stored eigenstate"""
    state = _state(op, state_index)
    value = np.real(np.vdot(state, basis_parity(op) * state)) / np.real(np.vdot(state, state))
    return float(np.clip(value, -1.0, 1.0))


def result_parities(result: SpectrumResult, n_islands: int) -> np.ndarray:
    """Parity expectation of every eigenvector kept on a SpectrumResult"""
    if result.eigenvectors is None:
        raise InvalidSpecError("eigenvectors were not retained; solve with keep_vectors=True")
    charges = charge_states(n_islands, result.n_max_used)
    parity = np.where(np.sum(charges, axis=1) % 2 == 0, 1.0, -1.0)
    weights = np.abs(result.eigenvectors) ** 2
    values = parity @ weights / np.sum(weights, axis=0)
    return np.clip(values, -1.0, 1.0)


def charge_distribution(op: ChargeOperator, state_index: int, island: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Marginal charge distribution of one island in a stored eigenstate

    Returns:
        Tuple of (charge values, probabilities)
    """
    state = _state(op, state_index)
    if op.charges is None or not 0 <= island < op.charges.shape[1]:
        raise IndexError(f"island {island} out of range")
    weights = np.abs(state) ** 2
    weights = weights / np.sum(weights)
    values = np.arange(-op.n_max, op.n_max + 1)
    probabilities = np.bincount(op.charges[:, island] + op.n_max, weights=weights,
                                minlength=len(values))
    return values, probabilities


def _spectrum_worker(spec: CircuitSpec, trunc: Truncation, k: int, converge: bool) -> SpectrumResult:
    if converge:
        return converged_spectrum(spec, trunc, k)
    return lowest_eigenvalues(build_hamiltonian(spec, trunc), k)


def spectra_at_points(specs: Sequence[CircuitSpec], trunc: Optional[Truncation] = None,
                      k: int = DEFAULT_NUM_LEVELS, workers: int = 1,
                      converge: bool = True) -> List[SpectrumResult]:
    """Spectra of independent circuits, returned in input order"""
    trunc = trunc or Truncation()
    worker = partial(_spectrum_worker, trunc=trunc, k=k, converge=converge)
    if workers <= 1 or len(specs) <= 1:
        return [worker(spec) for spec in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, specs))
