#!/usr/bin/env python3
"""
Slit Tomography Reconstruction Tests

Unit tests for probability tables, the optical readouts and the linear
inversion.

Usage:
    python3 test_tomography.py
"""

import logging
import os
import sys
import unittest

import numpy as np
from numpy.testing import assert_allclose

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

# Add the repository root to the path so we can import the package
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from slit_tomography.bases import build_tomography_set, load_paper_bases_d6
from slit_tomography.errors import (
    DimensionMismatchError,
    InvalidProbabilityError,
    ValidationError,
)
from slit_tomography.optics import OpticalConfig
from slit_tomography.qudit import (
    DensityMatrix,
    QuditState,
    density_from_pure,
    fidelity,
    random_density_matrix,
    random_pure_state,
)
from slit_tomography.tomography import (
    ProbabilityTable,
    forward_probabilities,
    linear_inversion,
    multiplexed_probabilities,
    reconstruct,
    settings_count,
    traditional_scheme,
)


class ProbabilityTableTest(unittest.TestCase):
    """Table validation"""

    def test_shape_checked(self):
        with self.assertRaises(DimensionMismatchError):
            ProbabilityTable(rows=np.full((3, 3), 1 / 3))

    def test_row_sums_checked(self):
        rows = np.full((3, 2), 0.5)
        rows[1] = [0.5, 0.4]
        with self.assertRaises(InvalidProbabilityError):
            ProbabilityTable(rows=rows)

    def test_negative_entry_rejected(self):
        rows = np.full((3, 2), 0.5)
        rows[0] = [1.1, -0.1]
        with self.assertRaises(InvalidProbabilityError):
            ProbabilityTable(rows=rows)

    def test_from_counts(self):
        table = ProbabilityTable.from_counts([[3, 1], [2, 2], [0, 4]])
        assert_allclose(table.rows, [[0.75, 0.25], [0.5, 0.5], [0.0, 1.0]])
        self.assertEqual(table.settings, 3)
        self.assertEqual(table.counts.tolist(), [[3, 1], [2, 2], [0, 4]])

    def test_empty_setting_rejected(self):
        with self.assertRaises(InvalidProbabilityError):
            ProbabilityTable.from_counts([[3, 1], [0, 0], [0, 4]])


class ForwardModelTest(unittest.TestCase):
    """Born-rule and optical tables"""

    def setUp(self):
        self.rng = np.random.default_rng(17)
        self.tomography_set = load_paper_bases_d6()
        self.config = OpticalConfig()

    def test_rows_sum_to_one(self):
        table = forward_probabilities(random_density_matrix(6, self.rng), self.tomography_set)
        assert_allclose(table.rows.sum(axis=1), np.ones(7), atol=1e-12)
        self.assertEqual(table.method, "born")

    def test_maximally_mixed_is_flat(self):
        table = forward_probabilities(DensityMatrix.maximally_mixed(6), self.tomography_set)
        assert_allclose(table.rows, np.full((7, 6), 1 / 6), atol=1e-12)

    def test_forward_model_is_linear_in_rho(self):
        for alpha in (0.0, 0.3, 0.75, 1.0):
            first = random_density_matrix(6, self.rng)
            second = density_from_pure(random_pure_state(6, self.rng))
            mixture = DensityMatrix(alpha * first.elements + (1 - alpha) * second.elements)
            expected = (alpha * forward_probabilities(first, self.tomography_set).rows
                        + (1 - alpha) * forward_probabilities(second, self.tomography_set).rows)
            assert_allclose(forward_probabilities(mixture, self.tomography_set).rows, expected, atol=1e-12)

    def test_optical_readout_matches_born(self):
        for _ in range(10):
            state = random_pure_state(6, self.rng)
            born = forward_probabilities(state, self.tomography_set)
            optical = multiplexed_probabilities(state, self.tomography_set, self.config)
            assert_allclose(optical.rows, born.rows, atol=1e-9)
            self.assertEqual(optical.settings, 7)

    def test_optical_readout_of_mixed_state(self):
        rho = random_density_matrix(6, self.rng)
        born = forward_probabilities(rho, self.tomography_set)
        optical = multiplexed_probabilities(rho, self.tomography_set, self.config)
        assert_allclose(optical.rows, born.rows, atol=1e-9)

    def test_traditional_matches_multiplexed(self):
        state = random_pure_state(6, self.rng)
        traditional = traditional_scheme(state, self.tomography_set, self.config)
        multiplexed = multiplexed_probabilities(state, self.tomography_set, self.config)
        assert_allclose(traditional.rows, multiplexed.rows, atol=1e-9)
        self.assertEqual(traditional.settings, 42)
        self.assertEqual(multiplexed.settings, 7)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            forward_probabilities(QuditState.uniform(4), self.tomography_set)

    def test_settings_count(self):
        self.assertEqual(settings_count(6, "multiplexed"), 7)
        self.assertEqual(settings_count(6, "traditional"), 42)
        with self.assertRaises(ValidationError):
            settings_count(6, "tomographic")


class InversionTest(unittest.TestCase):
    """Linear inversion and physical reconstruction"""

    def setUp(self):
        self.rng = np.random.default_rng(23)

    def test_noiseless_round_trip(self):
        for dim in (2, 3, 5):
            tomography_set = build_tomography_set(dim, trials=10, rng_seed=dim)
            for _ in range(5):
                rho = random_density_matrix(dim, self.rng)
                estimate = reconstruct(forward_probabilities(rho, tomography_set), tomography_set)
                assert_allclose(estimate.elements, rho.elements, atol=1e-10)
                pure = density_from_pure(random_pure_state(dim, self.rng))
                estimate = reconstruct(forward_probabilities(pure, tomography_set), tomography_set)
                self.assertGreaterEqual(fidelity(estimate, pure), 1 - 1e-8)

    def test_residual_of_consistent_table(self):
        tomography_set = load_paper_bases_d6()
        table = forward_probabilities(random_density_matrix(6, self.rng), tomography_set)
        result = linear_inversion(table, tomography_set)
        self.assertLess(result.residual_norm, 1e-10)
        self.assertEqual(result.rank, 36)

    def test_raw_array_accepted(self):
        tomography_set = build_tomography_set(3, trials=5, rng_seed=0)
        table = forward_probabilities(random_density_matrix(3, self.rng), tomography_set)
        perturbed = table.rows + 1e-3 * self.rng.standard_normal(table.rows.shape)
        result = linear_inversion(perturbed, tomography_set)
        assert_allclose(result.matrix, result.matrix.conj().T)
        self.assertGreater(result.residual_norm, 0.0)

    def test_error_linear_in_perturbation(self):
        tomography_set = build_tomography_set(4, trials=10, rng_seed=2)
        rho = random_density_matrix(4, self.rng)
        rows = forward_probabilities(rho, tomography_set).rows
        direction = self.rng.standard_normal(rows.shape)
        kappa = tomography_set.condition_number
        slopes = []
        for epsilon in (1e-4, 1e-3, 1e-2):
            perturbation = epsilon * direction
            error = np.linalg.norm(linear_inversion(rows + perturbation, tomography_set).matrix - rho.elements)
            # Relative error bound of a full-column-rank least-squares solve
            bound = kappa * np.linalg.norm(perturbation) / np.linalg.norm(rows) * np.linalg.norm(rho.elements)
            self.assertLessEqual(error, bound * (1 + 1e-9))
            slopes.append(error / epsilon)
        assert_allclose(slopes, slopes[0], rtol=1e-6)

    def test_flat_table_gives_maximally_mixed(self):
        tomography_set = load_paper_bases_d6()
        estimate = reconstruct(ProbabilityTable(rows=np.full((7, 6), 1 / 6)), tomography_set)
        assert_allclose(estimate.elements, np.eye(6) / 6, atol=1e-12)

    def test_noisy_table_yields_physical_state(self):
        tomography_set = build_tomography_set(4, trials=10, rng_seed=2)
        pure = density_from_pure(random_pure_state(4, self.rng))
        table = forward_probabilities(pure, tomography_set)
        noisy = np.abs(table.rows + 0.01 * self.rng.standard_normal(table.rows.shape))
        noisy = noisy / noisy.sum(axis=1, keepdims=True)
        estimate = reconstruct(ProbabilityTable(rows=noisy), tomography_set)
        self.assertTrue(estimate.is_physical())
        self.assertAlmostEqual(float(np.real(np.trace(estimate.elements))), 1.0, places=12)

    def test_wrong_table_shape(self):
        tomography_set = build_tomography_set(3, trials=5, rng_seed=0)
        with self.assertRaises(DimensionMismatchError):
            linear_inversion(np.full((5, 4), 0.25), tomography_set)


if __name__ == "__main__":
    unittest.main()
