"""
Slit Tomography Reconstruction Module

Forward probability model and density-matrix reconstruction:
- Born probabilities p_m^(J) = Tr(rho |Phi_m^(J)><Phi_m^(J)|)
- Optical readout of the same table (d+1 multiplexed settings)
- Traditional readout, one projector per setting (d(d+1) settings)
- Least-squares linear inversion of p = M vec(rho) and physicality projection
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .bases import TomographySet
from .errors import (
    DimensionMismatchError,
    InvalidProbabilityError,
    NotInformationallyCompleteError,
    ValidationError,
)
from .optics import (
    OpticalConfig,
    canonical_readout,
    intensity_at,
    multiplex_intensities,
    probabilities_from_intensities,
)
from .qudit import DensityMatrix, QuditState, density_from_pure, hermitize, project_to_physical

ROW_SUM_TOLERANCE = 1e-9
ENTRY_TOLERANCE = 1e-12

Prepared = Union[QuditState, DensityMatrix]


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """(d+1) x d projection probabilities, one row per basis"""
    rows: np.ndarray
    counts: Optional[np.ndarray] = None
    settings: Optional[int] = None
    method: str = "born"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1] + 1:
            raise DimensionMismatchError(f"Probability table must be (d+1) x d, got {rows.shape}")
        if not np.all(np.isfinite(rows)) or np.any(rows < -ENTRY_TOLERANCE) or np.any(rows > 1.0 + ENTRY_TOLERANCE):
            raise InvalidProbabilityError("Probability table entries must lie in [0, 1]")
        rows = np.clip(rows, 0.0, 1.0)
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
            raise InvalidProbabilityError(f"Every setting must sum to 1, got row sums {sums}")
        object.__setattr__(self, 'rows', rows)
        if self.counts is not None:
            counts = np.asarray(self.counts, dtype=np.int64)
            if counts.shape != rows.shape:
                raise DimensionMismatchError(f"Counts shape {counts.shape} does not match table {rows.shape}")
            object.__setattr__(self, 'counts', counts)
        if self.settings is None:
            object.__setattr__(self, 'settings', rows.shape[0])

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @classmethod
    def from_counts(cls, counts, settings=None, method="multiplexed"):
        """Row-wise renormalization of raw photocounts"""
        counts = np.asarray(counts, dtype=np.int64)
        if np.any(counts < 0):
            raise InvalidProbabilityError("Photocounts must be nonnegative")
        totals = counts.sum(axis=1)
        if np.any(totals == 0):
            raise InvalidProbabilityError(f"Settings {np.flatnonzero(totals == 0).tolist()} recorded no photons")
        return cls(rows=counts / totals[:, np.newaxis], counts=counts, settings=settings, method=method)

    @classmethod
    def from_intensities(cls, intensities, settings=None, method="multiplexed"):
        """Normalize each row of measured (nonnegative) values to sum 1"""
        intensities = np.clip(np.asarray(intensities, dtype=float), 0.0, None)
        totals = intensities.sum(axis=1)
        if np.any(totals <= 0):
            raise InvalidProbabilityError("A setting recorded zero total intensity")
        return cls(rows=intensities / totals[:, np.newaxis], settings=settings, method=method)


@dataclass(frozen=True, eq=False)
class InversionResult:
    """Least-squares estimate and its residual ||M x - p||"""
    matrix: np.ndarray
    residual_norm: float
    rank: int


def _as_density(prepared: Prepared) -> DensityMatrix:
    return density_from_pure(prepared) if isinstance(prepared, QuditState) else prepared


def _check_dims(dim, tomography_set: TomographySet):
    if dim != tomography_set.dim:
        raise DimensionMismatchError(f"State has d={dim}, tomography set has d={tomography_set.dim}")


def born_probabilities(rho: DensityMatrix, vectors) -> np.ndarray:
    """<Phi_m| rho |Phi_m> for every row of vectors"""
    values = np.real(np.einsum('mi,ij,mj->m', vectors.conj(), rho.elements, vectors))
    return np.clip(values, 0.0, None)


def forward_probabilities(rho: Prepared, tomography_set: TomographySet) -> ProbabilityTable:
    """Direct Born-rule table Tr(rho |Phi_m^(J)><Phi_m^(J)|)"""
    rho = _as_density(rho)
    _check_dims(rho.dim, tomography_set)
    rows = np.array([born_probabilities(rho, basis.vectors) for basis in tomography_set.bases])
    return ProbabilityTable(rows=rows / rows.sum(axis=1, keepdims=True), method="born")


def multiplexed_probabilities(prepared: Prepared, tomography_set: TomographySet, config: OpticalConfig,
                              efficiencies: Optional[Sequence[float]] = None,
                              calibration: Optional[Sequence[float]] = None) -> ProbabilityTable:
    """
    The d+1 setting optical readout

    B_0 through the per-slit grating readout, every other basis from the
    multiplex positions of a single interference pattern whose projector is
    the basis seed.

    Args:
        prepared: Prepared state or ensemble density matrix
        tomography_set: Measurement bases
        config: Optical geometry (its dim must match the set)
        efficiencies: Grating efficiencies of the canonical readout
        calibration: Empirical envelope calibration, analytic when omitted
    """
    _check_dims(prepared.dim, tomography_set)
    if config.dim != tomography_set.dim:
        raise DimensionMismatchError(f"Optics configured for d={config.dim}, set has d={tomography_set.dim}")
    rows = []
    for basis in tomography_set.bases:
        if basis.is_canonical:
            rows.append(canonical_readout(prepared, efficiencies))
        else:
            intensities = multiplex_intensities(config, prepared, basis.seed)
            rows.append(probabilities_from_intensities(config, intensities, calibration))
    return ProbabilityTable(rows=np.array(rows), settings=tomography_set.dim + 1, method="multiplexed")


def traditional_scheme(rho: Prepared, tomography_set: TomographySet, config: OpticalConfig) -> ProbabilityTable:
    """
    One projector per setting, intensity read at the centre of the pattern

    Each of the d(d+1) basis vectors is programmed on its own and I(x=0) is
    recorded; the d readings of a basis are then normalized together.
    """
    _check_dims(rho.dim, tomography_set)
    rows = []
    for basis in tomography_set.bases:
        centre = [intensity_at(config, rho, vector, 0.0) for vector in basis.vectors]
        rows.append(centre)
    dim = tomography_set.dim
    return ProbabilityTable.from_intensities(np.array(rows), settings=dim * (dim + 1), method="traditional")


def linear_inversion(table: Union[ProbabilityTable, np.ndarray], tomography_set: TomographySet) -> InversionResult:
    """
    Least-squares solution of the overdetermined system p = M vec(rho)

    Args:
        table: Measured table, or a raw (d+1) x d array taken as-is
        tomography_set: Informationally complete set the table was measured with

    Returns:
        InversionResult with the Hermitized d x d estimate (not necessarily
        positive) and the residual norm

    Raises:
        NotInformationallyCompleteError: If M is rank deficient
    """
    rows = table.rows if isinstance(table, ProbabilityTable) else np.asarray(table, dtype=float)
    dim = tomography_set.dim
    if rows.shape != (dim + 1, dim):
        raise DimensionMismatchError(f"Expected a {(dim + 1, dim)} table, got {rows.shape}")
    if not np.isfinite(tomography_set.condition_number):
        raise NotInformationallyCompleteError("Tomography set is not informationally complete")

    probabilities = rows.ravel()
    solution, _, rank, _ = linalg.lstsq(tomography_set.matrix, probabilities.astype(complex))
    if rank < dim * dim:
        raise NotInformationallyCompleteError(f"Measurement matrix rank {rank} < d^2 = {dim * dim}")
    residual = float(np.linalg.norm(tomography_set.matrix @ solution - probabilities))
    estimate = hermitize(solution.reshape(dim, dim))
    logging.debug(f"[Tomography] Linear inversion residual {residual:.3e}")
    return InversionResult(matrix=estimate, residual_norm=residual, rank=int(rank))


def reconstruct(table: Union[ProbabilityTable, np.ndarray], tomography_set: TomographySet) -> DensityMatrix:
    """Linear inversion followed by projection onto the physical states"""
    return project_to_physical(linear_inversion(table, tomography_set).matrix)


def settings_count(dim, method) -> int:
    if method == "traditional":
        return dim * (dim + 1)
    if method in ("multiplexed", "born"):
        return dim + 1
    raise ValidationError(f"Unknown measurement method '{method}'")
