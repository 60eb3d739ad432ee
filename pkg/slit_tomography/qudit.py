"""
Slit Tomography Qudit Module

Domain types for slit qudits and the state metrics used by every other module:
- QuditState: normalized amplitude vector (c_0 ... c_{d-1}) of a slit state
- DensityMatrix: Hermitian, unit-trace operator (reconstruction output)
- Uhlmann fidelity and projection of estimates onto physical states
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    NormalizationError,
    ValidationError,
)

NORM_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-12
EIGENVALUE_TOLERANCE = 1e-10
PURITY_TOLERANCE = 1e-10


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class QuditState:
    """Pure slit state |Psi> = sum_l c_l |l>"""
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.ndim != 1 or amplitudes.size < 2:
            raise ValidationError(
                f"Qudit state needs a 1-D amplitude vector with d >= 2, got shape {amplitudes.shape}")
        if not np.all(np.isfinite(amplitudes)):
            raise ValidationError("Qudit state amplitudes must be finite")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(f"Qudit state is not normalized (sum |c|^2 = {norm:.15g})")
        object.__setattr__(self, 'amplitudes', _frozen(amplitudes))

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize=False):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise NormalizationError("Cannot normalize the zero vector")
            amplitudes = amplitudes / norm
        return cls(amplitudes)

    @classmethod
    def uniform(cls, dim):
        """Equal-amplitude, equal-phase state (1/sqrt(d)) sum_l |l>"""
        return cls(np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian unit-trace operator rho_{i,j}"""
    elements: np.ndarray

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=complex)
        if elements.ndim != 2 or elements.shape[0] != elements.shape[1] or elements.shape[0] < 2:
            raise ValidationError(f"Density matrix must be square with d >= 2, got shape {elements.shape}")
        if not np.all(np.isfinite(elements)):
            raise ValidationError("Density matrix elements must be finite")
        if np.max(np.abs(elements - elements.conj().T)) > HERMITIAN_TOLERANCE:
            raise ValidationError("Density matrix is not Hermitian")
        trace = np.trace(elements)
        if abs(trace - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(f"Density matrix trace is {trace.real:.15g}, expected 1")
        object.__setattr__(self, 'elements', _frozen(elements))

    @property
    def dim(self) -> int:
        return int(self.elements.shape[0])

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.eye(dim, dtype=complex) / dim)

    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(self.elements)

    def purity(self) -> float:
        return float(np.real(np.trace(self.elements @ self.elements)))

    def is_physical(self, tolerance=EIGENVALUE_TOLERANCE) -> bool:
        return bool(self.eigenvalues().min() >= -tolerance)


def density_from_pure(state: QuditState) -> DensityMatrix:
    """rho = |Psi><Psi|, i.e. rho_{i,j} = c_i c_j*"""
    if not isinstance(state, QuditState):
        # Revalidates raw vectors, raising NormalizationError when needed
        state = QuditState(state)
    c = state.amplitudes
    return DensityMatrix(np.outer(c, c.conj()))


def _require_physical(rho: DensityMatrix, name):
    lowest = rho.eigenvalues().min()
    if lowest < -EIGENVALUE_TOLERANCE:
        raise ValidationError(f"{name} is not positive semidefinite (lowest eigenvalue {lowest:.3e})")


def _dominant_vector(rho: DensityMatrix) -> np.ndarray:
    _, vectors = linalg.eigh(rho.elements)
    return vectors[:, -1]


def _psd_sqrt(matrix):
    values, vectors = linalg.eigh(matrix)
    values = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * values) @ vectors.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """
    Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2

    Args:
        rho: First density matrix
        sigma: Second density matrix of the same dimension

    Returns:
        float: Fidelity clipped to [0, 1]. When either argument is pure the
        overlap <psi|other|psi> is returned directly.
    """
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"Cannot compare d={rho.dim} with d={sigma.dim}")
    _require_physical(rho, "First argument")
    _require_physical(sigma, "Second argument")

    if sigma.purity() >= 1.0 - PURITY_TOLERANCE:
        psi = _dominant_vector(sigma)
        value = np.real(np.vdot(psi, rho.elements @ psi))
    elif rho.purity() >= 1.0 - PURITY_TOLERANCE:
        psi = _dominant_vector(rho)
        value = np.real(np.vdot(psi, sigma.elements @ psi))
    else:
        # Nuclear norm of sqrt(rho) sqrt(sigma) equals Tr sqrt(sqrt(rho) sigma sqrt(rho))
        singular = linalg.svdvals(_psd_sqrt(rho.elements) @ _psd_sqrt(sigma.elements))
        value = float(np.sum(singular)) ** 2
    return float(min(max(value, 0.0), 1.0))


def hermitize(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    return (matrix + matrix.conj().T) / 2.0


def project_to_physical(matrix) -> DensityMatrix:
    """
    Map a (possibly non-physical) estimate onto the unit-trace PSD cone

    Hermitizes, clips negative eigenvalues to zero and renormalizes the trace.
    Inputs that are already positive semidefinite are only rescaled to unit
    trace, which keeps the projection idempotent.

    Raises:
        DegenerateInputError: When nothing positive is left after clipping
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("Cannot project a matrix with non-finite entries")

    hermitian = hermitize(matrix)
    values, vectors = linalg.eigh(hermitian)
    if values.min() >= 0.0:
        trace = float(np.sum(values))
        if trace <= 0.0:
            raise DegenerateInputError("Estimate has zero trace")
        return DensityMatrix(hermitize(hermitian / np.real(np.trace(hermitian))))

    clipped = np.clip(values, 0.0, None)
    total = float(np.sum(clipped))
    if total <= np.finfo(float).eps * max(1.0, float(np.max(np.abs(values)))):
        raise DegenerateInputError("Estimate has no positive spectrum left after clipping")
    logging.debug(f"[Qudit] Clipped {int(np.sum(values < 0))} negative eigenvalue(s), "
                  f"lowest {values.min():.3e}")
    projected = (vectors * (clipped / total)) @ vectors.conj().T
    return DensityMatrix(hermitize(projected))


def random_pure_state(dim, rng) -> QuditState:
    """Haar-random pure state from a normalized complex Gaussian vector"""
    vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return QuditState.from_amplitudes(vector, normalize=True)


def random_density_matrix(dim, rng, rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state of the requested rank (full rank by default)"""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ValidationError(f"Rank must lie in [1, {dim}], got {rank}")
    ginibre = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = ginibre @ ginibre.conj().T
    return DensityMatrix(hermitize(rho / np.real(np.trace(rho))))
