#!/usr/bin/env python3
"""
Slit Tomography Experiments Tests

Unit tests for the noise models, the random-phase ensemble, the simulated
pipelines and the Monte Carlo manager.

Usage:
    python3 test_experiments.py
"""

import logging
import os
import sys
import unittest
from unittest.mock import MagicMock

import numpy as np
from numpy.testing import assert_allclose

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

# Add the repository root to the path so we can import the package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from slit_tomography.bases import load_paper_bases_d6
from slit_tomography.errors import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidProbabilityError,
    ValidationError,
)
from slit_tomography.experiments import (
    ExperimentConfig,
    ExperimentManager,
    ExperimentReport,
    RandomPhaseEnsemble,
    compare_report,
    confidence_interval,
    format_comparison,
    paper_state,
    random_phase_amplitudes,
    random_phase_state,
    rho3_analytic,
    rho3_discrepancy,
    rho3_printed,
    rho3_reference,
    run_multiplexed_experiment,
    run_traditional_experiment,
    sample_counts,
    sample_poisson_counts,
)
from slit_tomography.optics import OpticalConfig
from slit_tomography.qudit import QuditState, fidelity


class ShotNoiseTest(unittest.TestCase):
    """Photon-counting noise"""

    def test_certain_outcome(self):
        counts = sample_counts([1.0, 0.0], 500, np.random.default_rng(0))
        self.assertEqual(counts.tolist(), [500, 0])

    def test_counts_sum_to_photons(self):
        counts = sample_counts([0.2, 0.3, 0.5], 1000, np.random.default_rng(1))
        self.assertEqual(int(counts.sum()), 1000)

    def test_reproducible(self):
        first = sample_counts([0.25] * 4, 100, np.random.default_rng(42))
        second = sample_counts([0.25] * 4, 100, np.random.default_rng(42))
        self.assertEqual(first.tolist(), second.tolist())

    def test_law_of_large_numbers(self):
        probs = np.array([0.1, 0.2, 0.3, 0.4])
        photons = 10 ** 6
        counts = sample_counts(probs, photons, np.random.default_rng(3))
        sigma = np.sqrt(probs * (1 - probs) / photons)
        self.assertTrue(np.all(np.abs(counts / photons - probs) <= 3 * sigma))

    def test_invalid_vector(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(InvalidProbabilityError):
            sample_counts([0.6, 0.6], 10, rng)
        with self.assertRaises(InvalidProbabilityError):
            sample_counts([1.2, -0.2], 10, rng)
        with self.assertRaises(ValidationError):
            sample_counts([0.5, 0.5], 0, rng)

    def test_poisson_mean(self):
        counts = sample_poisson_counts([0.5, 0.5], 10 ** 6, np.random.default_rng(4))
        self.assertLess(abs(counts[0] - 5e5), 5 * np.sqrt(5e5))


class RandomPhaseEnsembleTest(unittest.TestCase):
    """Random-phase masks and the closed-form ensemble density"""

    def test_component_zero_fixed(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            state = random_phase_state(6, rng)
            self.assertEqual(state.amplitudes[0], 1 / np.sqrt(6))
            assert_allclose(np.abs(state.amplitudes), np.full(6, 1 / np.sqrt(6)), atol=1e-15)

    def test_phase_intervals(self):
        masks = random_phase_amplitudes(6, 10 ** 4, np.random.default_rng(6))
        ell = np.arange(6)
        start = 2 * np.pi * ell / 6
        offset = np.mod(np.angle(masks) - start, 2 * np.pi)
        # Component 0 can wrap to 2 pi from a rounding error of order 1e-16
        offset[:, 0] = np.where(offset[:, 0] > np.pi, offset[:, 0] - 2 * np.pi, offset[:, 0])
        self.assertTrue(np.all(offset >= -1e-12))
        self.assertTrue(np.all(offset <= start + 1e-12))

    def test_analytic_diagonal(self):
        rho = rho3_analytic(6)
        assert_allclose(np.real(np.diag(rho.elements)), np.full(6, 1 / 6), atol=1e-15)
        self.assertTrue(rho.is_physical())

    def test_analytic_off_diagonal(self):
        rho = rho3_analytic(6)
        self.assertAlmostEqual(rho.elements[1, 0], 1j / (2 * np.pi), places=12)
        self.assertAlmostEqual(abs(rho.elements[1, 0]), 0.159155, places=6)

    def test_monte_carlo_matches_analytic(self):
        reference = rho3_reference(6, 10 ** 5, np.random.default_rng(7))
        self.assertGreaterEqual(fidelity(reference, rho3_analytic(6)), 0.999)
        assert_allclose(np.real(np.diag(reference.elements)), np.full(6, 1 / 6), atol=1e-3)

    def test_monte_carlo_convergence_rate(self):
        oracle = rho3_analytic(6).elements
        sizes = np.array([100, 1000, 10000])
        errors = []
        rng = np.random.default_rng(8)
        for size in sizes:
            distances = [np.linalg.norm(rho3_reference(6, size, rng).elements - oracle) for _ in range(30)]
            errors.append(np.mean(distances))
        slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
        self.assertAlmostEqual(slope, -0.5, delta=0.15)

    def test_reference_needs_samples(self):
        with self.assertRaises(ValidationError):
            rho3_reference(6, 0, np.random.default_rng(0))

    def test_printed_formula_discrepancy(self):
        discrepancy = rho3_discrepancy(6)
        self.assertGreater(discrepancy['unnormalized_sinc']['frobenius_distance'], 1e-3)
        # Normalized sinc gets every magnitude right but misses the phase of l'
        self.assertLess(discrepancy['normalized_sinc']['magnitude_distance'], 1e-12)
        self.assertGreater(discrepancy['normalized_sinc']['max_abs_deviation'], 1e-3)
        self.assertFalse(discrepancy['normalized_sinc']['hermitian'])
        self.assertAlmostEqual(discrepancy['normalized_sinc']['trace'], 1.0)

    def test_printed_formula_shape(self):
        printed = rho3_printed(6)
        self.assertEqual(printed.shape, (6, 6))
        assert_allclose(np.diag(printed), np.full(6, 1 / 6))

    def test_reference_states(self):
        self.assertIsInstance(paper_state("psi1"), QuditState)
        psi2 = paper_state("psi2")
        assert_allclose(psi2.amplitudes, [0.5, 0, 0.5j, -0.5j, -0.5, 0])
        ensemble = paper_state("rho3", samples=50)
        self.assertIsInstance(ensemble, RandomPhaseEnsemble)
        self.assertEqual(ensemble.samples, 50)
        with self.assertRaises(ValidationError):
            paper_state("psi4")


class ExperimentConfigTest(unittest.TestCase):
    """Configuration validation"""

    def test_defaults(self):
        config = ExperimentConfig()
        self.assertEqual(config.dim, 6)
        self.assertEqual(config.photons_per_setting, 100000)

    def test_bundled_bases_need_d6(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig(dim=4, optical=OpticalConfig(dim=4))

    def test_dimension_consistency(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig(dim=4, optical=OpticalConfig(dim=6), bases_source="generated")

    def test_positive_counts(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig(photons_per_setting=0)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig(monte_carlo_runs=0)


class PipelineTest(unittest.TestCase):
    """Multiplexed and traditional simulated experiments"""

    @classmethod
    def setUpClass(cls):
        cls.tomography_set = load_paper_bases_d6()

    def test_noiseless_pipelines_agree(self):
        config = ExperimentConfig(photons_per_setting=None)
        for name in ("psi1", "psi2"):
            multiplexed = run_multiplexed_experiment(config, paper_state(name), self.tomography_set)
            traditional = run_traditional_experiment(config, paper_state(name), self.tomography_set)
            self.assertEqual(multiplexed.settings_used, 7)
            self.assertEqual(traditional.settings_used, 42)
            assert_allclose(multiplexed.reconstructed.elements, traditional.reconstructed.elements, atol=1e-9)
            self.assertGreaterEqual(multiplexed.fidelity, 1 - 1e-8)
            self.assertLess(abs(compare_report(multiplexed, traditional)['fidelity_delta']), 1e-9)

    def test_noiseless_ensemble(self):
        config = ExperimentConfig(photons_per_setting=None, ensemble_samples=20000)
        report = run_multiplexed_experiment(config, paper_state("rho3", samples=20000), self.tomography_set)
        self.assertGreaterEqual(report.fidelity, 0.995)

    def test_pure_state_fidelity_band(self):
        config = ExperimentConfig(photons_per_setting=100000)
        for name in ("psi1", "psi2"):
            fidelities = [run_multiplexed_experiment(config, paper_state(name), self.tomography_set, run).fidelity
                          for run in range(10)]
            self.assertGreaterEqual(np.mean(fidelities), 0.97)

    def test_ensemble_fidelity_band(self):
        config = ExperimentConfig(photons_per_setting=100000)
        report = run_multiplexed_experiment(config, paper_state("rho3"), self.tomography_set)
        self.assertGreaterEqual(report.fidelity, 0.97)
        self.assertEqual(int(report.counts.sum()), 7 * 100000)

    def test_large_photon_limit(self):
        target = paper_state("psi2")
        high = run_multiplexed_experiment(ExperimentConfig(photons_per_setting=10 ** 7), target, self.tomography_set)
        huge = run_multiplexed_experiment(ExperimentConfig(photons_per_setting=10 ** 9), target, self.tomography_set)
        self.assertGreaterEqual(high.fidelity, 0.999)
        self.assertGreaterEqual(huge.fidelity, 0.9999)

    def test_report_reproducible(self):
        config = ExperimentConfig(photons_per_setting=1000, rng_seed=5)
        first = run_multiplexed_experiment(config, paper_state("psi2"), self.tomography_set, run_index=3)
        second = run_multiplexed_experiment(config, paper_state("psi2"), self.tomography_set, run_index=3)
        self.assertEqual(first.to_dict(), second.to_dict())

    def test_report_dict_round_trip(self):
        config = ExperimentConfig(photons_per_setting=1000)
        report = run_traditional_experiment(config, paper_state("psi1"), self.tomography_set)
        restored = ExperimentReport.from_dict(report.to_dict())
        self.assertEqual(restored.to_dict(), report.to_dict())

    def test_ensemble_size_must_match_config(self):
        config = ExperimentConfig(photons_per_setting=None, ensemble_samples=5000)
        with self.assertRaises(ConfigurationError):
            run_multiplexed_experiment(config, paper_state("rho3"), self.tomography_set)
        with self.assertRaises(ConfigurationError):
            run_traditional_experiment(config, paper_state("rho3"), self.tomography_set)

    def test_target_dimension_checked(self):
        with self.assertRaises(DimensionMismatchError):
            run_multiplexed_experiment(ExperimentConfig(), QuditState.uniform(4), self.tomography_set)


class ComparisonTest(unittest.TestCase):
    """Side-by-side summaries"""

    @classmethod
    def setUpClass(cls):
        tomography_set = load_paper_bases_d6()
        config = ExperimentConfig(photons_per_setting=10000)
        cls.multiplexed = run_multiplexed_experiment(config, paper_state("psi2"), tomography_set)
        cls.traditional = run_traditional_experiment(config, paper_state("psi2"), tomography_set)

    def test_identical_reports(self):
        summary = compare_report(self.multiplexed, self.multiplexed)
        self.assertEqual(summary['fidelity_delta'], 0.0)
        self.assertEqual(summary['settings_delta'], 0)
        self.assertEqual(summary['condition_number_delta'], 0.0)

    def test_settings_column(self):
        summary = compare_report(self.multiplexed, self.traditional)
        self.assertEqual(summary['settings_used'], [7, 42])
        self.assertIn("42", format_comparison(summary))

    def test_dimension_mismatch(self):
        other = dict(self.multiplexed.to_dict(), dim=4)
        with self.assertRaises(DimensionMismatchError):
            compare_report(self.multiplexed, other)


class ExperimentManagerTest(unittest.IsolatedAsyncioTestCase):
    """Concurrent Monte Carlo series"""

    def setUp(self):
        self.integration = MagicMock()
        self.integration.workers = 3
        self.manager = ExperimentManager(self.integration)
        self.tomography_set = load_paper_bases_d6()

    async def test_parallel_equals_serial(self):
        config = ExperimentConfig(photons_per_setting=1000, monte_carlo_runs=6)
        summary = await self.manager.run_series(config, paper_state("psi2"), tomography_set=self.tomography_set)
        serial = [run_multiplexed_experiment(config, paper_state("psi2"), self.tomography_set, run).fidelity
                  for run in range(6)]
        self.assertEqual(list(summary.fidelities), serial)
        self.assertEqual(summary.runs, 6)
        self.assertLessEqual(summary.ci95[0], summary.mean)
        self.assertGreaterEqual(summary.ci95[1], summary.mean)

    async def test_unknown_method(self):
        with self.assertRaises(ValidationError):
            await self.manager.run_series(ExperimentConfig(), paper_state("psi1"), method="tomographic")

    async def test_fidelity_grows_with_photons(self):
        config = ExperimentConfig(monte_carlo_runs=100)
        summaries = await self.manager.fidelity_versus_photons(
            config, paper_state("psi2"), [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5], tomography_set=self.tomography_set)
        means = [s.mean for s in summaries]
        stds = [s.std for s in summaries]
        for lower, upper, spread in zip(means, means[1:], stds):
            self.assertGreaterEqual(upper, lower - spread)

    async def test_equal_budget_parity(self):
        config = ExperimentConfig(photons_per_setting=100000, monte_carlo_runs=100)
        multiplexed = await self.manager.run_series(config, paper_state("psi2"), "multiplexed", self.tomography_set)
        traditional = await self.manager.run_series(config, paper_state("psi2"), "traditional", self.tomography_set)
        logging.info(f"Equal-budget gap: {multiplexed.mean - traditional.mean:+.4f}")
        self.assertLessEqual(abs(multiplexed.mean - traditional.mean), 0.02)


class ConfidenceIntervalTest(unittest.TestCase):

    def test_constant_sample(self):
        self.assertEqual(confidence_interval([0.5, 0.5, 0.5]), (0.5, 0.5))

    def test_contains_mean(self):
        low, high = confidence_interval([0.97, 0.98, 0.99, 0.975])
        self.assertLess(low, 0.97875)
        self.assertGreater(high, 0.97875)


if __name__ == "__main__":
    unittest.main()
