"""
Slit Tomography Experiments Module

End-to-end simulated experiments at desk scale:
- Photon-counting noise (multinomial per multiplexed setting, Poisson per
  single-projector setting)
- The random-phase mask ensemble and its closed-form density matrix
- Multiplexed (d+1 settings) and traditional (d(d+1) settings) pipelines
- Monte Carlo series with confidence intervals, run concurrently
"""

import asyncio
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .bases import TomographySet, build_tomography_set, load_paper_bases_d6
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidProbabilityError,
    NumericalError,
    ValidationError,
)
from .formats import decode_complex, encode_complex
from .optics import (
    OpticalConfig,
    canonical_readout,
    multiplex_intensities_batch,
    probabilities_from_intensities,
    sinc,
)
from .qudit import DensityMatrix, QuditState, density_from_pure, fidelity, hermitize, project_to_physical
from .tomography import (
    ProbabilityTable,
    linear_inversion,
    multiplexed_probabilities,
    settings_count,
    traditional_scheme,
)

BASES_SOURCES = ("paper-d6", "generated")
METHODS = ("multiplexed", "traditional")
PROBABILITY_TOLERANCE = 1e-9
CONFIDENCE_LEVEL = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a simulated experiment; photons_per_setting=None is noiseless"""
    dim: int = 6
    photons_per_setting: Optional[int] = 100000
    monte_carlo_runs: int = 100
    ensemble_samples: int = 1000
    rng_seed: int = 0
    optical: OpticalConfig = field(default_factory=OpticalConfig)
    bases_source: str = "paper-d6"
    trials: int = 100
    efficiencies: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.photons_per_setting is not None and self.photons_per_setting < 1:
            raise ConfigurationError(f"photons_per_setting must be positive, got {self.photons_per_setting}")
        for name in ("monte_carlo_runs", "ensemble_samples", "trials"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.optical.dim != self.dim:
            raise ConfigurationError(f"Optics configured for d={self.optical.dim}, experiment uses d={self.dim}")
        if self.bases_source not in BASES_SOURCES:
            raise ConfigurationError(f"bases_source must be one of {BASES_SOURCES}, got '{self.bases_source}'")
        if self.bases_source == "paper-d6" and self.dim != 6:
            raise ConfigurationError("The bundled paper-d6 bases only exist for d=6")
        if self.efficiencies is not None and len(self.efficiencies) != self.dim:
            raise ConfigurationError(f"Need {self.dim} grating efficiencies, got {len(self.efficiencies)}")

    def with_photons(self, photons):
        return dataclasses.replace(self, photons_per_setting=photons)


def load_tomography_set(config: ExperimentConfig) -> TomographySet:
    if config.bases_source == "paper-d6":
        return load_paper_bases_d6()
    return build_tomography_set(config.dim, trials=config.trials, rng_seed=config.rng_seed)


def run_rng(rng_seed, run_index):
    """Independent stream per Monte Carlo run"""
    return np.random.default_rng(np.random.SeedSequence([int(rng_seed), int(run_index)]))


def _validate_probabilities(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or not np.all(np.isfinite(probs)):
        raise InvalidProbabilityError("Probabilities must be a finite 1-D vector")
    if np.any(probs < -PROBABILITY_TOLERANCE):
        raise InvalidProbabilityError(f"Negative probability {probs.min():.3e}")
    if abs(probs.sum() - 1.0) > PROBABILITY_TOLERANCE:
        raise InvalidProbabilityError(f"Probabilities sum to {probs.sum():.12g}, expected 1")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _validate_photons(photons):
    if int(photons) != photons or photons < 1:
        raise ValidationError(f"Photon number must be a positive integer, got {photons}")
    return int(photons)


def sample_counts(probs, photons, rng) -> np.ndarray:
    """Multinomial photon counts for one multiplexed setting; sums to `photons`"""
    probs = _validate_probabilities(probs)
    return rng.multinomial(_validate_photons(photons), probs)


def sample_poisson_counts(probs, photons, rng) -> np.ndarray:
    """Independent Poisson counts with mean N p_m, one per single-projector setting"""
    probs = _validate_probabilities(probs)
    return rng.poisson(_validate_photons(photons) * probs)


# Random-phase mask ensemble

def random_phase_amplitudes(dim, samples, rng) -> np.ndarray:
    """(samples, d) masks (1/sqrt(d)) exp(i(2 pi l/d + Delta_l)), Delta_l ~ U[0, 2 pi l/d]"""
    ell = np.arange(dim)
    spread = 2.0 * np.pi * ell / dim
    delta = rng.uniform(0.0, spread, size=(samples, dim))
    return np.exp(1j * (spread + delta)) / np.sqrt(dim)


def random_phase_state(dim, rng) -> QuditState:
    return QuditState(random_phase_amplitudes(dim, 1, rng)[0])


def ensemble_density(amplitudes) -> DensityMatrix:
    """Average of |Psi><Psi| over the rows of `amplitudes`"""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    rho = amplitudes.T @ amplitudes.conj() / amplitudes.shape[0]
    return DensityMatrix(hermitize(rho / np.real(np.trace(rho))))


def rho3_reference(dim, samples, rng) -> DensityMatrix:
    """Monte Carlo ensemble average over `samples` random-phase masks"""
    if samples < 1:
        raise ValidationError(f"Need at least one sample, got {samples}")
    return ensemble_density(random_phase_amplitudes(dim, samples, rng))


def _phase_expectations(dim) -> np.ndarray:
    # E[exp(i phi_l)] for phi_l = 2 pi l/d + U[0, 2 pi l/d]
    ell = np.arange(dim)
    return np.exp(3j * np.pi * ell / dim) * sinc(np.pi * ell / dim)


def rho3_analytic(dim) -> DensityMatrix:
    """
    Closed-form ensemble density of the random-phase masks

    rho_{l,l'} = (1/d) E[exp(i phi_l)] E[exp(-i phi_l')] off the diagonal and
    1/d on it, the phases being independent.
    """
    v = _phase_expectations(dim)
    rho = np.outer(v, v.conj())
    np.fill_diagonal(rho, 1.0)
    return DensityMatrix(hermitize(rho / dim))


def rho3_printed(dim, normalized_sinc=False) -> np.ndarray:
    """
    The printed closed form, taken literally

    Off-diagonal entries (1/d) exp(i 3 pi l/d) sinc(l/d) sinc(l'/d), with
    sinc(u) = sin(u)/u or, when normalized_sinc is set, sin(pi u)/(pi u).
    The result is returned as a raw matrix since it need not be Hermitian.
    """
    ell = np.arange(dim)
    envelope = np.sinc(ell / dim) if normalized_sinc else sinc(ell / dim)
    rho = np.exp(3j * np.pi * ell / dim)[:, np.newaxis] * np.outer(envelope, envelope) / dim
    np.fill_diagonal(rho, 1.0 / dim)
    return rho


def rho3_discrepancy(dim) -> Dict[str, dict]:
    """Distance of the printed closed form from the ensemble expectation, per sinc convention"""
    oracle = rho3_analytic(dim).elements
    result = {}
    for name, normalized in (("unnormalized_sinc", False), ("normalized_sinc", True)):
        printed = rho3_printed(dim, normalized_sinc=normalized)
        result[name] = {
            'frobenius_distance': float(np.linalg.norm(printed - oracle)),
            'magnitude_distance': float(np.linalg.norm(np.abs(printed) - np.abs(oracle))),
            'max_abs_deviation': float(np.max(np.abs(printed - oracle))),
            'hermitian': bool(np.allclose(printed, printed.conj().T, atol=1e-12)),
            'trace': float(np.real(np.trace(printed))),
        }
    return result


@dataclass(frozen=True)
class RandomPhaseEnsemble:
    """Time-averaged sequence of `samples` random-phase masks"""
    dim: int = 6
    samples: int = 1000

    def __post_init__(self):
        if self.samples < 1:
            raise ValidationError(f"Ensemble needs at least one mask, got {self.samples}")

    def draw(self, rng) -> np.ndarray:
        return random_phase_amplitudes(self.dim, self.samples, rng)

    def target(self) -> DensityMatrix:
        return rho3_analytic(self.dim)


Target = Union[QuditState, DensityMatrix, RandomPhaseEnsemble]


def paper_state(name, samples=1000) -> Target:
    """psi1 (uniform), psi2 or the rho3 random-phase ensemble, all at d=6"""
    if name == "psi1":
        return QuditState.uniform(6)
    if name == "psi2":
        return QuditState(np.array([0.5, 0.0, 0.5j, -0.5j, -0.5, 0.0]))
    if name == "rho3":
        return RandomPhaseEnsemble(6, samples)
    raise ValidationError(f"Unknown reference state '{name}', expected psi1, psi2 or rho3")


def target_density(target: Target) -> DensityMatrix:
    if isinstance(target, RandomPhaseEnsemble):
        return target.target()
    if isinstance(target, QuditState):
        return density_from_pure(target)
    return target


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Outcome of one simulated run with every intermediate artifact"""
    method: str
    dim: int
    target: DensityMatrix
    reconstructed: DensityMatrix
    fidelity: float
    condition_number: float
    settings_used: int
    rng_seed: int
    run_index: int
    photons_per_setting: Optional[int]
    ideal_table: ProbabilityTable
    measured_table: ProbabilityTable
    linear_estimate: np.ndarray
    residual_norm: float
    set_reference: str = ""

    def __post_init__(self):
        if self.settings_used not in (self.dim + 1, self.dim * (self.dim + 1)):
            raise ValidationError(f"settings_used={self.settings_used} is neither d+1 nor d(d+1)")
        if not 0.0 <= self.fidelity <= 1.0:
            raise NumericalError(f"Fidelity {self.fidelity} outside [0, 1]")

    @property
    def counts(self) -> Optional[np.ndarray]:
        return self.measured_table.counts

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'dim': self.dim,
            'fidelity': self.fidelity,
            'condition_number': self.condition_number,
            'settings_used': self.settings_used,
            'rng_seed': self.rng_seed,
            'run_index': self.run_index,
            'photons_per_setting': self.photons_per_setting,
            'set_reference': self.set_reference,
            'target': encode_complex(self.target.elements),
            'reconstructed': encode_complex(self.reconstructed.elements),
            'linear_estimate': encode_complex(self.linear_estimate),
            'residual_norm': self.residual_norm,
            'ideal_table': self.ideal_table.rows.tolist(),
            'measured_table': self.measured_table.rows.tolist(),
            'counts': None if self.counts is None else self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict):
        try:
            settings = int(data['settings_used'])
            method = data['method']
            measured = ProbabilityTable(rows=data['measured_table'], counts=data.get('counts'),
                                        settings=settings, method=method)
            return cls(
                method=method,
                dim=int(data['dim']),
                target=DensityMatrix(decode_complex(data['target'])),
                reconstructed=DensityMatrix(decode_complex(data['reconstructed'])),
                fidelity=float(data['fidelity']),
                condition_number=float(data['condition_number']),
                settings_used=settings,
                rng_seed=int(data['rng_seed']),
                run_index=int(data.get('run_index', 0)),
                photons_per_setting=data.get('photons_per_setting'),
                ideal_table=ProbabilityTable(rows=data['ideal_table'], settings=settings, method=method),
                measured_table=measured,
                linear_estimate=decode_complex(data['linear_estimate']),
                residual_norm=float(data['residual_norm']),
                set_reference=data.get('set_reference', ""),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"Malformed experiment report: {e}")


def _check_target(config: ExperimentConfig, target: Target, tomography_set: TomographySet):
    if target.dim != config.dim or tomography_set.dim != config.dim:
        raise DimensionMismatchError(
            f"Target d={target.dim}, set d={tomography_set.dim}, experiment d={config.dim} must agree")
    if isinstance(target, RandomPhaseEnsemble) and target.samples != config.ensemble_samples:
        raise ConfigurationError(
            f"Ensemble target draws {target.samples} masks, experiment expects ensemble_samples="
            f"{config.ensemble_samples}")


def _finish(method, config, target, tomography_set, run_index, ideal, measured) -> ExperimentReport:
    inversion = linear_inversion(measured, tomography_set)
    reconstructed = project_to_physical(inversion.matrix)
    reference = target_density(target)
    value = fidelity(reconstructed, reference)
    logging.debug(f"[Experiments] {method} run {run_index}: fidelity {value:.6f}, "
                  f"residual {inversion.residual_norm:.3e}")
    return ExperimentReport(
        method=method,
        dim=config.dim,
        target=reference,
        reconstructed=reconstructed,
        fidelity=value,
        condition_number=tomography_set.condition_number,
        settings_used=settings_count(config.dim, method),
        rng_seed=config.rng_seed,
        run_index=run_index,
        photons_per_setting=config.photons_per_setting,
        ideal_table=ideal,
        measured_table=measured,
        linear_estimate=inversion.matrix,
        residual_norm=inversion.residual_norm,
        set_reference=tomography_set.reference_hash(),
    )


def _ensemble_table(config: ExperimentConfig, masks, tomography_set: TomographySet) -> ProbabilityTable:
    # Intensities of every mask are averaged before normalization
    rows = []
    for basis in tomography_set.bases:
        if basis.is_canonical:
            rows.append(canonical_readout(ensemble_density(masks), config.efficiencies))
        else:
            intensities = multiplex_intensities_batch(config.optical, masks, basis.seed).mean(axis=0)
            rows.append(probabilities_from_intensities(config.optical, intensities))
    return ProbabilityTable(rows=np.array(rows), settings=config.dim + 1, method="multiplexed")


def run_multiplexed_experiment(config: ExperimentConfig, target: Target,
                               tomography_set: Optional[TomographySet] = None,
                               run_index: int = 0) -> ExperimentReport:
    """
    Single-pattern multiplexed pipeline (d+1 settings)

    Mixed ensembles draw their masks first and average the recorded
    intensities over them; the table is then sampled with multinomial shot
    noise, renormalized, reconstructed and compared with the target density.
    """
    tomography_set = tomography_set or load_tomography_set(config)
    _check_target(config, target, tomography_set)
    ideal, measured = measure_multiplexed(config, target, tomography_set, run_rng(config.rng_seed, run_index))
    return _finish("multiplexed", config, target, tomography_set, run_index, ideal, measured)


def measure_multiplexed(config: ExperimentConfig, target: Target, tomography_set: TomographySet, rng):
    """Ideal and shot-noise sampled tables of the multiplexed readout"""
    if isinstance(target, RandomPhaseEnsemble):
        ideal = _ensemble_table(config, target.draw(rng), tomography_set)
    else:
        ideal = multiplexed_probabilities(target, tomography_set, config.optical, config.efficiencies)

    if config.photons_per_setting is None:
        return ideal, ideal
    counts = np.array([sample_counts(row, config.photons_per_setting, rng) for row in ideal.rows])
    return ideal, ProbabilityTable.from_counts(counts, settings=config.dim + 1, method="multiplexed")


def run_traditional_experiment(config: ExperimentConfig, target: Target,
                               tomography_set: Optional[TomographySet] = None,
                               run_index: int = 0) -> ExperimentReport:
    """
    One projector per setting (d(d+1) settings), read at the pattern centre

    Each setting records Poisson counts with mean N p_m, giving the same
    expected photon budget per basis as the multiplexed pipeline.
    """
    tomography_set = tomography_set or load_tomography_set(config)
    _check_target(config, target, tomography_set)
    ideal, measured = measure_traditional(config, target, tomography_set, run_rng(config.rng_seed, run_index))
    return _finish("traditional", config, target, tomography_set, run_index, ideal, measured)


def measure_traditional(config: ExperimentConfig, target: Target, tomography_set: TomographySet, rng):
    """Ideal and Poisson sampled tables of the single-projector readout"""
    prepared = ensemble_density(target.draw(rng)) if isinstance(target, RandomPhaseEnsemble) else target
    ideal = traditional_scheme(prepared, tomography_set, config.optical)

    if config.photons_per_setting is None:
        return ideal, ideal
    counts = np.array([sample_poisson_counts(row, config.photons_per_setting, rng) for row in ideal.rows])
    if np.any(counts.sum(axis=1) == 0):
        raise NumericalError(f"A basis recorded no photons at N={config.photons_per_setting}")
    return ideal, ProbabilityTable.from_counts(counts, settings=ideal.settings, method="traditional")


def simulate_table(method, config: ExperimentConfig, target: Target, tomography_set: TomographySet,
                   run_index: int = 0) -> ProbabilityTable:
    """Measured table of one run, without reconstruction"""
    _check_target(config, target, tomography_set)
    rng = run_rng(config.rng_seed, run_index)
    if method == "multiplexed":
        return measure_multiplexed(config, target, tomography_set, rng)[1]
    if method == "traditional":
        return measure_traditional(config, target, tomography_set, rng)[1]
    raise ValidationError(f"Unknown measurement method '{method}'")


def run_experiment(method, config, target, tomography_set=None, run_index=0) -> ExperimentReport:
    if method == "multiplexed":
        return run_multiplexed_experiment(config, target, tomography_set, run_index)
    if method == "traditional":
        return run_traditional_experiment(config, target, tomography_set, run_index)
    raise ValidationError(f"Unknown measurement method '{method}'")


def _report_fields(report) -> dict:
    if isinstance(report, ExperimentReport):
        return {'dim': report.dim, 'method': report.method, 'fidelity': report.fidelity,
                'settings_used': report.settings_used, 'condition_number': report.condition_number,
                'photons_per_setting': report.photons_per_setting}
    return {key: report[key] for key in
            ('dim', 'method', 'fidelity', 'settings_used', 'condition_number', 'photons_per_setting')}


def compare_report(a, b) -> dict:
    """
    Side-by-side fidelity, settings and conditioning of two reports

    Accepts ExperimentReport objects or dictionaries carrying the same keys
    (series summaries use their mean fidelity). Deltas are a - b.
    """
    left, right = _report_fields(a), _report_fields(b)
    if left['dim'] != right['dim']:
        raise DimensionMismatchError(f"Cannot compare d={left['dim']} with d={right['dim']}")
    return {
        'dim': left['dim'],
        'methods': [left['method'], right['method']],
        'fidelity': [left['fidelity'], right['fidelity']],
        'fidelity_delta': left['fidelity'] - right['fidelity'],
        'settings_used': [left['settings_used'], right['settings_used']],
        'settings_delta': left['settings_used'] - right['settings_used'],
        'condition_number': [left['condition_number'], right['condition_number']],
        'condition_number_delta': left['condition_number'] - right['condition_number'],
        'photons_per_setting': [left['photons_per_setting'], right['photons_per_setting']],
    }


def format_comparison(summary: dict) -> str:
    first, second = summary['methods']
    lines = [
        f"d = {summary['dim']}",
        f"{'':<20}{first:>16}{second:>16}{'delta':>16}",
        f"{'fidelity':<20}{summary['fidelity'][0]:>16.6f}{summary['fidelity'][1]:>16.6f}"
        f"{summary['fidelity_delta']:>16.3e}",
        f"{'settings':<20}{summary['settings_used'][0]:>16d}{summary['settings_used'][1]:>16d}"
        f"{summary['settings_delta']:>16d}",
        f"{'condition number':<20}{summary['condition_number'][0]:>16.6g}{summary['condition_number'][1]:>16.6g}"
        f"{summary['condition_number_delta']:>16.3e}",
    ]
    return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class SeriesSummary:
    """Monte Carlo statistics over independent runs"""
    label: str
    method: str
    dim: int
    photons_per_setting: Optional[int]
    settings_used: int
    condition_number: float
    fidelities: Tuple[float, ...]
    mean: float
    std: float
    ci95: Tuple[float, float]
    first_report: ExperimentReport
    counts: Tuple = ()

    @property
    def runs(self) -> int:
        return len(self.fidelities)

    def to_dict(self) -> dict:
        return {
            'label': self.label,
            'method': self.method,
            'dim': self.dim,
            'photons_per_setting': self.photons_per_setting,
            'settings_used': self.settings_used,
            'condition_number': self.condition_number,
            'runs': self.runs,
            'fidelity': self.mean,
            'fidelity_std': self.std,
            'fidelity_ci95': list(self.ci95),
            'fidelities': list(self.fidelities),
            'counts': list(self.counts),
            'report': self.first_report.to_dict(),
        }


def confidence_interval(values, level=CONFIDENCE_LEVEL) -> Tuple[float, float]:
    """Student-t interval of the mean; degenerate for a single or constant sample"""
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if values.size < 2 or np.std(values) == 0.0:
        return mean, mean
    low, high = stats.t.interval(level, values.size - 1, loc=mean, scale=stats.sem(values))
    return float(low), float(high)


def summarize_series(reports: Sequence[ExperimentReport], label="") -> SeriesSummary:
    if not reports:
        raise ValidationError("Cannot summarize an empty series")
    values = np.array([r.fidelity for r in reports])
    first = reports[0]
    return SeriesSummary(
        label=label,
        method=first.method,
        dim=first.dim,
        photons_per_setting=first.photons_per_setting,
        settings_used=first.settings_used,
        condition_number=first.condition_number,
        fidelities=tuple(float(v) for v in values),
        mean=float(values.mean()),
        std=float(values.std(ddof=1)) if values.size > 1 else 0.0,
        ci95=confidence_interval(values),
        first_report=first,
        counts=tuple(None if r.counts is None else r.counts.tolist() for r in reports),
    )


class ExperimentManager:
    """
    Runs Monte Carlo series for the integration

    Runs are independent and each owns its RNG stream, so they are offloaded
    to worker threads with at most `workers` in flight and gathered in run
    order.
    """

    def __init__(self, integration):
        self.integration = integration
        self.workers = max(1, int(getattr(integration, 'workers', 1)))

    async def run_series(self, config: ExperimentConfig, target: Target, method="multiplexed",
                         tomography_set: Optional[TomographySet] = None, label="") -> SeriesSummary:
        if method not in METHODS:
            raise ValidationError(f"Unknown measurement method '{method}'")
        tomography_set = tomography_set or load_tomography_set(config)
        semaphore = asyncio.Semaphore(self.workers)

        async def one_run(run_index):
            async with semaphore:
                return await asyncio.to_thread(run_experiment, method, config, target, tomography_set, run_index)

        logging.info(f"[Experiments] {label or method}: {config.monte_carlo_runs} runs, "
                     f"N={config.photons_per_setting}, {self.workers} workers")
        reports = await asyncio.gather(*(one_run(i) for i in range(config.monte_carlo_runs)))
        summary = summarize_series(list(reports), label=label)
        logging.info(f"[Experiments] {label or method}: mean fidelity {summary.mean:.4f} "
                     f"(95% CI {summary.ci95[0]:.4f} .. {summary.ci95[1]:.4f})")
        return summary

    async def fidelity_versus_photons(self, config: ExperimentConfig, target: Target,
                                      photon_counts: Sequence[int], method="multiplexed",
                                      tomography_set: Optional[TomographySet] = None) -> List[SeriesSummary]:
        """One series per photon number, in the order given"""
        tomography_set = tomography_set or load_tomography_set(config)
        summaries = []
        for photons in photon_counts:
            summaries.append(await self.run_series(config.with_photons(photons), target, method,
                                                   tomography_set, label=f"N={photons}"))
        return summaries
