"""
Slit Tomography Optics Module

Fraunhofer forward model of the projection between a prepared slit state and
a projector encoded on a second array of d slits:
- Interference pattern in the focal plane of a lens
- Multiplex positions x^(m) = f lambda m / (s d) and their sinc^2 envelope
- Extraction of one basis worth of probabilities from a single pattern
- Per-slit (grating multiplexed) readout of the canonical basis
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    DegeneratePatternError,
    DimensionMismatchError,
    IllConditionedEnvelopeError,
    ValidationError,
)
from .qudit import DensityMatrix, QuditState

ENVELOPE_FLOOR = 1e-6
MIN_SAMPLES_PER_PERIOD = 8

Prepared = Union[QuditState, DensityMatrix]


def sinc(u):
    """sin(u)/u with u in radians"""
    return np.sinc(np.asarray(u, dtype=float) / np.pi)


@dataclass(frozen=True)
class OpticalConfig:
    """Geometry of the slit arrays and the Fourier lens (lengths in metres)"""
    slit_width: float = 5.0e-5
    slit_separation: float = 1.0e-4
    focal_length: float = 0.15
    wavelength: float = 4.05e-7
    dim: int = 6

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValidationError(f"Dimension must be an integer >= 2, got {self.dim}")
        if not 0.0 < self.slit_width < self.slit_separation:
            raise ValidationError(
                f"Need 0 < slit_width < slit_separation, got a={self.slit_width}, s={self.slit_separation}")
        if self.focal_length <= 0.0 or self.wavelength <= 0.0:
            raise ValidationError("Focal length and wavelength must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def omega(self) -> complex:
        return np.exp(2j * np.pi / self.dim)

    @property
    def multiplex_spacing(self) -> float:
        return self.focal_length * self.wavelength / (self.slit_separation * self.dim)

    def with_dim(self, dim):
        return OpticalConfig(self.slit_width, self.slit_separation, self.focal_length, self.wavelength, dim)


@dataclass(frozen=True, eq=False)
class InterferencePattern:
    """Sampled focal-plane intensity plus the exact values at the multiplex positions"""
    x_grid: np.ndarray
    intensities: np.ndarray
    config: OpticalConfig
    multiplex_indices: np.ndarray
    multiplex_intensities: np.ndarray = field(default=None)

    def __post_init__(self):
        if np.any(self.intensities < 0):
            raise ValidationError("Interference intensities must be nonnegative")
        if np.any(np.diff(self.x_grid) <= 0):
            raise ValidationError("Pattern grid must be strictly increasing")
        if self.multiplex_intensities is None:
            object.__setattr__(self, 'multiplex_intensities', self.intensities[self.multiplex_indices])


def _check_projector(config: OpticalConfig, prepared: Prepared, projector):
    projector = np.asarray(projector, dtype=complex)
    if projector.shape != (config.dim,) or prepared.dim != config.dim:
        raise DimensionMismatchError(
            f"Optics configured for d={config.dim}, got state d={prepared.dim} "
            f"and projector shape {projector.shape}")
    return projector


def _interference_term(prepared: Prepared, projector, phase):
    """|sum_l c_l b_l* exp(i l phase)|^2 for an array of phases"""
    ell = np.arange(projector.size)
    carrier = np.exp(1j * np.outer(phase, ell))
    if isinstance(prepared, DensityMatrix):
        # Time average over the ensemble: sum rho_{l,l'} b_l* b_l' e^{i(l-l')phase}
        weighted = prepared.elements * np.outer(projector.conj(), projector)
        return np.real(np.einsum('pl,lk,pk->p', carrier, weighted, carrier.conj()))
    amplitude = carrier @ (prepared.amplitudes * projector.conj())
    return np.abs(amplitude) ** 2


def intensity_at(config: OpticalConfig, prepared: Prepared, projector, x):
    """
    Focal-plane intensity I(x) = sinc^2(k x a / 2f) |sum_l c_l b_l* exp(i l s k x / f)|^2

    Args:
        config: Optical geometry
        prepared: Prepared slit state (a DensityMatrix gives the ensemble average)
        projector: Complex transmissivities b_l of the projector slits
        x: Position or array of positions in the focal plane (m)

    Returns:
        Nonnegative intensity with the same shape as x
    """
    projector = _check_projector(config, prepared, projector)
    x = np.asarray(x, dtype=float)
    k = config.wavenumber
    envelope = sinc(k * x.ravel() * config.slit_width / (2.0 * config.focal_length)) ** 2
    phase = config.slit_separation * k * x.ravel() / config.focal_length
    values = envelope * np.clip(_interference_term(prepared, projector, phase), 0.0, None)
    return values.reshape(x.shape) if x.ndim else float(values[0])


def multiplex_positions(config: OpticalConfig) -> np.ndarray:
    """x^(m) = f lambda m / (s d) for m = 0 .. d-1"""
    return config.multiplex_spacing * np.arange(config.dim)


def envelope_factors(config: OpticalConfig) -> np.ndarray:
    """sinc^2(pi (a/s) (m/d)) at every multiplex position"""
    m = np.arange(config.dim)
    factors = sinc(np.pi * (config.slit_width / config.slit_separation) * m / config.dim) ** 2
    if factors.min() < ENVELOPE_FLOOR:
        raise IllConditionedEnvelopeError(
            f"Envelope factor {factors.min():.3e} below {ENVELOPE_FLOOR:g}; "
            f"reduce a/s={config.slit_width / config.slit_separation:.3f}")
    return factors


def outcome_order(dim) -> np.ndarray:
    """
    Outcome index read at each multiplex position

    The phase exp(+i l s k x / f) of the pattern projects onto the vector with
    components b_l exp(-i l s k x / f), so position x^(m) carries the Born
    probability of |Phi_{-m mod d}>.
    """
    return (-np.arange(dim)) % dim


def multiplex_intensities(config: OpticalConfig, prepared: Prepared, projector) -> np.ndarray:
    """Exact intensities at x^(0) .. x^(d-1) (position order)"""
    return intensity_at(config, prepared, projector, multiplex_positions(config))


def multiplex_intensities_batch(config: OpticalConfig, amplitudes, projector) -> np.ndarray:
    """
    Multiplex intensities for many pure masks at once

    Args:
        amplitudes: (n, d) array, one normalized slit state per row
        projector: Projector transmissivities

    Returns:
        (n, d) array of intensities in position order
    """
    amplitudes = np.asarray(amplitudes, dtype=complex)
    projector = np.asarray(projector, dtype=complex)
    if amplitudes.ndim != 2 or amplitudes.shape[1] != config.dim or projector.shape != (config.dim,):
        raise DimensionMismatchError(
            f"Expected (n, {config.dim}) masks and a {config.dim}-vector projector")
    ell = np.arange(config.dim)
    powers = np.exp(2j * np.pi * (np.outer(ell, ell) % config.dim) / config.dim)
    amplitude = (amplitudes * projector.conj()) @ powers
    return envelope_factors(config) * np.abs(amplitude) ** 2


def render_pattern(config: OpticalConfig, prepared: Prepared, projector,
                   samples_per_period: int = 16) -> InterferencePattern:
    """
    Sample the interference pattern over [-x^(1)/2, x^(d-1) + x^(1)/2]

    The grid holds samples_per_period points per multiplex spacing; the grid
    point nearest to every x^(m) is placed exactly on it.
    """
    if samples_per_period < MIN_SAMPLES_PER_PERIOD:
        raise ValidationError(f"samples_per_period must be >= {MIN_SAMPLES_PER_PERIOD}, got {samples_per_period}")
    positions = multiplex_positions(config)
    spacing = config.multiplex_spacing
    start = positions[0] - spacing / 2.0
    stop = positions[-1] + spacing / 2.0
    count = config.dim * samples_per_period + 1
    x_grid = np.linspace(start, stop, count)
    step = (stop - start) / (count - 1)
    indices = np.rint((positions - start) / step).astype(int)
    x_grid[indices] = positions

    intensities = intensity_at(config, prepared, projector, x_grid)
    logging.debug(f"[Optics] Rendered {count} samples, peak {intensities.max():.3e}")
    return InterferencePattern(
        x_grid=x_grid,
        intensities=intensities,
        config=config,
        multiplex_indices=indices,
        multiplex_intensities=intensities[indices].copy(),
    )


def average_patterns(patterns: Sequence[InterferencePattern]) -> InterferencePattern:
    """Time average of patterns recorded on the same grid (mixed-state masks)"""
    if not patterns:
        raise ValidationError("Cannot average an empty list of patterns")
    first = patterns[0]
    for pattern in patterns[1:]:
        if pattern.config != first.config or not np.array_equal(pattern.x_grid, first.x_grid):
            raise DimensionMismatchError("Patterns must share optics and grid to be averaged")
    return InterferencePattern(
        x_grid=first.x_grid,
        intensities=np.mean([p.intensities for p in patterns], axis=0),
        config=first.config,
        multiplex_indices=first.multiplex_indices,
        multiplex_intensities=np.mean([p.multiplex_intensities for p in patterns], axis=0),
    )


def probabilities_from_intensities(config: OpticalConfig, intensities,
                                   calibration: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Envelope-correct and normalize multiplex intensities

    Args:
        config: Optical geometry (analytic envelope)
        intensities: Intensities at x^(0) .. x^(d-1)
        calibration: Optional measured flat-mask intensities per position,
            used instead of the analytic sinc^2 factors

    Returns:
        Probability vector indexed by basis outcome m
    """
    intensities = np.asarray(intensities, dtype=float)
    if intensities.shape != (config.dim,):
        raise DimensionMismatchError(f"Expected {config.dim} multiplex intensities, got {intensities.shape}")
    if calibration is None:
        factors = envelope_factors(config)
    else:
        factors = np.asarray(calibration, dtype=float)
        if factors.shape != (config.dim,) or np.any(factors <= 0):
            raise ValidationError("Calibration intensities must be d positive values")
        factors = factors / factors[0]
    corrected = np.clip(intensities, 0.0, None) / factors
    total = corrected.sum()
    if not total > 0.0:
        raise DegeneratePatternError("All multiplex intensities are zero")
    by_position = corrected / total
    probabilities = np.empty_like(by_position)
    probabilities[outcome_order(config.dim)] = by_position
    return probabilities


def extract_probabilities(pattern: InterferencePattern,
                          calibration: Optional[Sequence[float]] = None) -> np.ndarray:
    """p_m = I(x^(m)) / sum_j I(x^(j)) after dividing out the diffraction envelope"""
    return probabilities_from_intensities(pattern.config, pattern.multiplex_intensities, calibration)


def calibrate_efficiencies(efficiencies) -> np.ndarray:
    """
    Flat-mask calibration run of the grating readout

    A uniform slit state lights every grating equally, so the normalized
    readout is proportional to the per-slit diffraction efficiencies.
    """
    efficiencies = np.asarray(efficiencies, dtype=float)
    if efficiencies.ndim != 1 or np.any(efficiencies <= 0):
        raise ValidationError("Grating efficiencies must be positive")
    flat = QuditState.uniform(efficiencies.size)
    raw = efficiencies * np.abs(flat.amplitudes) ** 2
    return raw / raw.sum()


def canonical_readout(prepared: Prepared, efficiencies: Optional[Sequence[float]] = None,
                      calibration: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Canonical-basis probabilities from the per-slit grating readout

    Args:
        prepared: Prepared state (populations |c_l|^2 or rho_{l,l})
        efficiencies: Per-slit diffraction efficiencies eta_l (unit by default)
        calibration: Flat-mask calibration readout; derived from the
            efficiencies when omitted

    Returns:
        Calibrated probabilities p_l = |c_l|^2
    """
    dim = prepared.dim
    efficiencies = np.ones(dim) if efficiencies is None else np.asarray(efficiencies, dtype=float)
    if efficiencies.shape != (dim,) or np.any(efficiencies <= 0):
        raise ValidationError(f"Need {dim} positive grating efficiencies")
    if isinstance(prepared, DensityMatrix):
        populations = np.real(np.diag(prepared.elements))
    else:
        populations = np.abs(prepared.amplitudes) ** 2
    populations = np.clip(populations, 0.0, None)

    raw = efficiencies * populations
    if not raw.sum() > 0.0:
        raise DegeneratePatternError("Canonical readout collected no intensity")
    raw = raw / raw.sum()
    calibration = calibrate_efficiencies(efficiencies) if calibration is None else np.asarray(calibration, dtype=float)
    corrected = raw / calibration
    return corrected / corrected.sum()


def pattern_power_diagnostic(pattern: InterferencePattern) -> dict:
    """Share of the recorded power that sits on the multiplex positions"""
    multiplex_sum = float(np.sum(pattern.multiplex_intensities))
    pattern_power = float(trapezoid(pattern.intensities, pattern.x_grid))
    # Power per multiplex spacing, comparable with a sum over d positions
    per_spacing = pattern_power / pattern.config.multiplex_spacing
    return {
        'multiplex_sum': multiplex_sum,
        'pattern_power': pattern_power,
        'power_per_spacing': per_spacing,
        'ratio': multiplex_sum / per_spacing if per_spacing > 0 else float('nan'),
    }
