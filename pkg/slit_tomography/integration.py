"""
Slit Tomography Integration
Main integration class that coordinates the tomography components

Reads the [slit_tomography] configuration section, owns the experiment
manager and implements every command line operation on top of the domain
modules (bases, optics, tomography, experiments, formats).
"""

import logging
from typing import Dict, Optional, Sequence

from . import formats
from .bases import build_tomography_set, load_paper_bases_d6
from .errors import ConfigurationError, ValidationError
from .experiments import (
    ExperimentConfig,
    ExperimentManager,
    ExperimentReport,
    compare_report,
    format_comparison,
    paper_state,
    simulate_table,
)
from .optics import OpticalConfig, extract_probabilities, pattern_power_diagnostic, render_pattern
from .qudit import project_to_physical
from .tomography import linear_inversion

PAPER_STATES = ("psi1", "psi2", "rho3")


def _optional_photons(value):
    if value is None or str(value).strip().lower() in ("", "none", "noiseless"):
        return None
    try:
        return int(float(value))
    except ValueError:
        raise ConfigurationError(f"photons_per_setting must be an integer or 'none', got '{value}'")


class SlitTomographyIntegration:
    """
    Main integration class for slit-qudit tomography

    Args:
        config: Configuration section exposing get/getint/getfloat/getboolean
            with a positional default, e.g. a configparser SectionProxy
    """

    def __init__(self, config):
        self.config = config

        self.dimension = self.config.getint('dimension', 6)
        self.optical = OpticalConfig(
            slit_width=self.config.getfloat('slit_width', 5.0e-5),
            slit_separation=self.config.getfloat('slit_separation', 1.0e-4),
            focal_length=self.config.getfloat('focal_length', 0.15),
            wavelength=self.config.getfloat('wavelength', 4.05e-7),
            dim=self.dimension,
        )
        self.photons_per_setting = _optional_photons(self.config.get('photons_per_setting', '100000'))
        self.monte_carlo_runs = self.config.getint('monte_carlo_runs', 100)
        self.ensemble_samples = self.config.getint('ensemble_samples', 1000)
        self.bases_source = self.config.get('bases_source', 'paper-d6')
        self.trials = self.config.getint('trials', 100)
        self.rng_seed = self.config.getint('rng_seed', 0)
        self.samples_per_period = self.config.getint('samples_per_period', 16)
        self.workers = self.config.getint('workers', 4)

        # Debug mode for verbose logging (default: False)
        self.debug_mode = self.config.getboolean('debug_mode', False)

        if self.workers < 1:
            raise ConfigurationError(f"workers must be positive, got {self.workers}")

        logging.info(f"[SlitTomography] d={self.dimension}, a={self.optical.slit_width}, "
                     f"s={self.optical.slit_separation}, f={self.optical.focal_length}, "
                     f"lambda={self.optical.wavelength}")
        logging.info(f"[SlitTomography] N={self.photons_per_setting}, runs={self.monte_carlo_runs}, "
                     f"bases={self.bases_source}, seed={self.rng_seed}")
        logging.info(f"[SlitTomography] Debug mode: {self.debug_mode}")

        self.experiment_manager = ExperimentManager(self)

    def experiment_config(self, dim: Optional[int] = None, noiseless=False, **overrides) -> ExperimentConfig:
        """ExperimentConfig from the configured values; overrides set to None are ignored"""
        dim = self.dimension if dim is None else dim
        values = {
            'dim': dim,
            'photons_per_setting': self.photons_per_setting,
            'monte_carlo_runs': self.monte_carlo_runs,
            'ensemble_samples': self.ensemble_samples,
            'rng_seed': self.rng_seed,
            'optical': self.optical.with_dim(dim),
            'bases_source': self.bases_source,
            'trials': self.trials,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        if noiseless:
            values['photons_per_setting'] = None
        return ExperimentConfig(**values)

    # Bases

    def gen_bases(self, dim=None, trials=None, seed=None, out=None):
        dim = self.dimension if dim is None else dim
        trials = self.trials if trials is None else trials
        seed = self.rng_seed if seed is None else seed
        tomography_set = build_tomography_set(dim, trials=trials, rng_seed=seed)
        if out:
            formats.save_tomography_set(out, tomography_set)
            logging.info(f"[SlitTomography] Wrote tomography set to {out}")
        return tomography_set

    def paper_bases(self, out=None):
        tomography_set = load_paper_bases_d6()
        logging.info(f"[SlitTomography] Bundled d=6 set, condition number {tomography_set.condition_number:.6g}")
        if out:
            formats.save_tomography_set(out, tomography_set)
            logging.info(f"[SlitTomography] Wrote tomography set to {out}")
        return tomography_set

    # Simulation and reconstruction

    def simulate(self, set_path, state_path, photons=None, seed=None, out=None, method="multiplexed",
                 noiseless=False):
        """Measured probability table of a prepared state; photons=None uses the configured N"""
        tomography_set = formats.load_tomography_set(set_path)
        state = formats.load_state(state_path)
        config = self.experiment_config(
            dim=tomography_set.dim,
            bases_source="generated",
            rng_seed=seed,
            photons_per_setting=photons,
            noiseless=noiseless,
        )
        table = simulate_table(method, config, state, tomography_set)
        if out:
            formats.save_table(out, table, tomography_set)
            logging.info(f"[SlitTomography] Wrote {method} table ({table.settings} settings) to {out}")
        return table

    def reconstruct(self, set_path, table_path, out=None):
        tomography_set = formats.load_tomography_set(set_path)
        table = formats.load_table(table_path, tomography_set)
        inversion = linear_inversion(table, tomography_set)
        rho = project_to_physical(inversion.matrix)
        logging.info(f"[SlitTomography] Reconstructed d={rho.dim} state, residual {inversion.residual_norm:.3e}, "
                     f"purity {rho.purity():.6f}")
        if out:
            formats.save_state(out, rho)
            logging.info(f"[SlitTomography] Wrote density matrix to {out}")
        return rho

    def pattern(self, set_path, state_path, basis, out=None, samples_per_period=None):
        """Interference pattern of a state against the seed of basis J (J >= 1)"""
        tomography_set = formats.load_tomography_set(set_path)
        state = formats.load_state(state_path)
        if not 0 <= basis <= tomography_set.dim:
            raise ValidationError(f"Basis index must lie in 0..{tomography_set.dim}, got {basis}")
        chosen = tomography_set.bases[basis]
        if chosen.is_canonical:
            raise ValidationError("The canonical basis is read per slit and has no interference pattern")
        config = self.optical.with_dim(tomography_set.dim)
        rendered = render_pattern(config, state, chosen.seed, samples_per_period or self.samples_per_period)
        diagnostic = pattern_power_diagnostic(rendered)
        logging.info(f"[SlitTomography] Basis {basis}: probabilities {extract_probabilities(rendered).round(6)}, "
                     f"multiplex/power ratio {diagnostic['ratio']:.4f}")
        if out:
            formats.save_pattern(out, rendered)
            logging.info(f"[SlitTomography] Wrote pattern ({rendered.x_grid.size} samples) to {out}")
        return rendered

    # Reference state reproduction

    async def reproduce_paper(self, states: Sequence[str] = PAPER_STATES, photons=None, runs=None, seed=None,
                              out=None, method="multiplexed", with_traditional=False) -> Dict:
        """
        Monte Carlo reproduction of the d=6 results

        Returns the summary document: one series summary per state, plus the
        traditional series and side-by-side comparisons when requested.
        """
        config = self.experiment_config(dim=6, photons_per_setting=photons, monte_carlo_runs=runs,
                                        rng_seed=seed)
        document = {
            'method': method,
            'dim': config.dim,
            'photons_per_setting': config.photons_per_setting,
            'runs': config.monte_carlo_runs,
            'rng_seed': config.rng_seed,
            'bases_source': config.bases_source,
            'ensemble_samples': config.ensemble_samples,
            'states': {},
        }
        if with_traditional:
            document['traditional'] = {}
            document['comparisons'] = {}

        for name in states:
            target = paper_state(name, samples=config.ensemble_samples)
            summary = await self.experiment_manager.run_series(config, target, method, label=name)
            document['states'][name] = summary.to_dict()
            if with_traditional:
                baseline = await self.experiment_manager.run_series(config, target, "traditional",
                                                                     label=f"{name} traditional")
                document['traditional'][name] = baseline.to_dict()
                document['comparisons'][name] = compare_report(document['states'][name],
                                                               document['traditional'][name])

        if out:
            formats.write_json(out, document)
            logging.info(f"[SlitTomography] Wrote reproduction summary to {out}")
        return document

    def compare(self, multiplexed_path, traditional_path) -> Dict[str, dict]:
        """Comparison per state; bare reports compare under the key 'report'"""
        left = _comparable_entries(formats.read_json(multiplexed_path))
        right = _comparable_entries(formats.read_json(traditional_path))
        shared = [name for name in left if name in right]
        if not shared:
            raise ValidationError("The two documents share no state to compare")
        return {name: compare_report(left[name], right[name]) for name in shared}


def _comparable_entries(document: dict) -> Dict[str, dict]:
    if 'states' in document:
        return dict(document['states'])
    if 'reconstructed' in document:
        return {'report': ExperimentReport.from_dict(document).to_dict()}
    if 'fidelity' in document:
        return {document.get('label') or 'report': document}
    raise ValidationError("Document is neither an experiment report nor a reproduction summary")


def summary_text(document: dict) -> str:
    """Human readable lines for a reproduction summary"""
    lines = [f"d={document['dim']} method={document['method']} N={document['photons_per_setting']} "
             f"runs={document['runs']} seed={document['rng_seed']} bases={document['bases_source']}"]
    for name, summary in document['states'].items():
        low, high = summary['fidelity_ci95']
        lines.append(f"{name:<6} F = {summary['fidelity']:.4f} +/- {summary['fidelity_std']:.4f} "
                     f"(95% CI {low:.4f} .. {high:.4f}), settings {summary['settings_used']}")
    for name, comparison in document.get('comparisons', {}).items():
        lines.append(f"[{name}]")
        lines.append(format_comparison(comparison))
    return "\n".join(lines)


def comparison_text(comparisons: Dict[str, dict]) -> str:
    blocks = []
    for name, comparison in comparisons.items():
        blocks.append(f"[{name}]\n{format_comparison(comparison)}")
    return "\n".join(blocks)
