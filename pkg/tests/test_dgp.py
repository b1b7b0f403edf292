#!/usr/bin/env python3
"""
Tests for datasets and the synthetic data-generating processes
"""

import numpy as np
import pytest

from core.errors import ContractError, DataIOError, DomainError, ShapeError
from dgp.covariates import score_projection, synthetic_covariates, tcga_like_covariates
from dgp.dataset import Dataset, Split, StateEncoder, Standardizer, TargetDesign, TreatmentKind, stratified_split
from dgp.finite_state import finite_state_dgp, observational_design, point_mass_family
from dgp.ihdp import IhdpCoeffs, ihdp_draws, ihdp_params, make_ihdp_problem
from dgp.tcga import DOSE_GRID, TcgaCoeffs, arm_probabilities, make_tcga_problem, tcga_draws, tcga_params


@pytest.mark.unit
class TestDatasetPrimitives:
    """Encoders, splits, standardization and target designs."""

    def test_state_encoder_layouts(self):
        X = np.array([[0.5], [-1.0]])
        binary = StateEncoder(TreatmentKind.BINARY, 2)
        np.testing.assert_array_equal(binary.encode(X, np.array([1.0, 0.0])), [[0.5, 1.0], [-1.0, 0.0]])
        dosage = StateEncoder(TreatmentKind.ARM_DOSAGE, 3)
        encoded = dosage.encode(X, np.array([[2.0, 0.3], [3.0, 0.9]]))
        np.testing.assert_array_equal(encoded, [[0.5, 0, 1, 0, 0.3], [-1.0, 0, 0, 1, 0.9]])
        assert dosage.width(1) == 5
        states = StateEncoder(TreatmentKind.FINITE_STATE, 3)
        np.testing.assert_array_equal(states.encode(np.zeros((2, 0)), np.array([[0.0], [2.0]])),
                                      [[1, 0, 0], [0, 0, 1]])
        np.testing.assert_array_equal(states.arms(np.array([[0.0], [2.0]])), [0, 2])

    def test_stratified_split_keeps_strata_proportions(self, rng):
        strata = np.array([0] * 100 + [1] * 40)
        splits = stratified_split(strata, (0.5, 0.25), rng)
        assert np.sum((strata == 0) & (splits == 'train')) == 50
        assert np.sum((strata == 1) & (splits == 'train')) == 20
        assert np.sum((strata == 1) & (splits == 'valid')) == 10
        assert np.sum(splits == 'test') == 25 + 10

    def test_stratified_split_rejects_bad_fractions(self, rng):
        with pytest.raises(ContractError):
            stratified_split(np.zeros(10), (0.8, 0.4), rng)

    def test_standardizer_uses_training_rows(self):
        X = np.array([[1.0, 5.0], [3.0, 5.0], [100.0, 7.0]])
        train = np.array([True, True, False])
        std = Standardizer.fit(X, train, [0])
        out = std.transform(X)
        np.testing.assert_allclose(out[:2, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)])
        np.testing.assert_array_equal(out[:, 1], X[:, 1])

    def test_target_design_grid_is_covariate_major(self):
        design = TargetDesign(covariates=np.array([[10.0], [20.0]]),
                              interventions=np.array([0.0, 1.0, 2.0]),
                              covariate_weights=np.array([0.25, 0.75]))
        X, T, masses = design.grid()
        np.testing.assert_array_equal(X[:, 0], [10, 10, 10, 20, 20, 20])
        np.testing.assert_array_equal(T[:, 0], [0, 1, 2, 0, 1, 2])
        np.testing.assert_allclose(masses, np.array([0.25] * 3 + [0.75] * 3) / 3)
        assert design.n_states == 6

    def test_target_design_mass_checks(self):
        with pytest.raises(ContractError):
            TargetDesign(covariates=np.zeros((1, 0)), interventions=np.array([0.0, 1.0]),
                         masses=np.array([0.6, 0.6]))
        with pytest.raises(ContractError):
            TargetDesign(covariates=np.zeros((0, 2)), interventions=np.array([0.0]))

    def test_dataset_rejects_unknown_split(self):
        with pytest.raises(ContractError):
            Dataset('x', np.zeros((2, 1)), np.zeros(2), np.zeros(2), np.array(['train', 'holdout']),
                    StateEncoder(TreatmentKind.BINARY, 2))
        with pytest.raises(ShapeError):
            Dataset('x', np.zeros((2, 1)), np.zeros(2), np.zeros(2), np.array(['train']),
                    StateEncoder(TreatmentKind.BINARY, 2))

    def test_csv_export_restores_units(self, tmp_path):
        dataset = point_mass_family([-1.0, 0.0, 1.0], seed=1).dataset(30, seed=4)
        path = dataset.to_csv(tmp_path / 'units.csv')
        restored = Dataset.from_csv(path)
        assert restored.fingerprint() == dataset.fingerprint()
        assert restored.encoder == dataset.encoder
        np.testing.assert_array_equal(restored.splits, dataset.splits)

    def test_csv_import_needs_sidecar(self, tmp_path):
        path = tmp_path / 'units.csv'
        path.write_text('outcome,split\n1.0,train\n')
        with pytest.raises(DataIOError):
            Dataset.from_csv(path)


@pytest.mark.unit
class TestCovariates:
    """Surrogate covariate generators."""

    def test_score_projection_is_orthonormal(self):
        projection = score_projection(50)
        assert projection.shape == (50, 8)
        np.testing.assert_allclose(projection.T @ projection, np.eye(8), atol=1e-10)
        np.testing.assert_array_equal(projection, score_projection(50))

    def test_tcga_like_rows_have_unit_norm(self):
        cov = tcga_like_covariates(30, seed=2, n_genes=40)
        np.testing.assert_allclose(np.linalg.norm(cov.features, axis=1), 1.0)
        assert np.all(cov.features >= 0)
        np.testing.assert_allclose(cov.scores.mean(axis=0), 0.0, atol=1e-10)

    def test_ihdp_like_layout(self):
        X = synthetic_covariates(50, 0, 'ihdp-like', seed=3)
        assert X.shape == (50, 25)
        assert set(np.unique(X[:, 6:])) <= {0.0, 1.0}

    def test_gaussian_needs_two_units(self):
        with pytest.raises(ContractError):
            synthetic_covariates(1, 3)


@pytest.mark.unit
class TestIhdp:
    """Binary-treatment mixture generator."""

    def test_zero_coefficients_give_treatment_as_mean(self):
        coeffs = IhdpCoeffs.zeros()
        X = np.random.default_rng(0).normal(size=(4, 25))
        p = ihdp_params(coeffs, X, np.array([0, 1, 0, 1]))
        np.testing.assert_allclose(p.mean, [0, 1, 0, 1])
        np.testing.assert_allclose(p.pi, 0.5)
        np.testing.assert_allclose(p.sigma1, 0.35)
        np.testing.assert_allclose(p.sigma2, 0.55)

    def test_mixture_mean_matches_analytic_mean(self, rng):
        coeffs = IhdpCoeffs.draw(np.random.default_rng(1))
        X = rng.normal(size=(2, 25))
        T = np.array([[0.0], [1.0]])
        draws = ihdp_draws(coeffs, X, T, 200_000, rng)
        np.testing.assert_allclose(draws.mean(axis=1), ihdp_params(coeffs, X, T).mean, atol=0.03)

    def test_treatment_must_be_binary(self):
        with pytest.raises(DomainError):
            ihdp_params(IhdpCoeffs.zeros(), np.zeros((1, 25)), np.array([2.0]))
        with pytest.raises(ShapeError):
            ihdp_params(IhdpCoeffs.zeros(), np.zeros((1, 3)), np.array([1.0]))

    def test_problem_layout(self):
        problem = make_ihdp_problem(seed=3, n_units=120, n_treated=30)
        dataset = problem.dataset
        assert len(dataset) == 120
        assert dataset.treatments[:, 0].sum() == 30
        train = dataset.mask(Split.TRAIN)
        np.testing.assert_allclose(dataset.covariates[train, :6].mean(axis=0), 0.0, atol=1e-10)
        assert problem.target_design.covariates.shape[0] == dataset.mask(Split.TEST).sum()
        np.testing.assert_array_equal(problem.target_design.interventions[:, 0], [0.0, 1.0])
        again = make_ihdp_problem(seed=3, n_units=120, n_treated=30)
        assert again.dataset.fingerprint() == dataset.fingerprint()


@pytest.mark.unit
class TestTcga:
    """Arm-dosage mixture generator."""

    def test_zero_coefficients(self):
        coeffs = TcgaCoeffs.zeros()
        Z = np.zeros((3, 8))
        T = np.array([[1, 0.0], [2, 0.5], [3, 1.0]])
        np.testing.assert_allclose(tcga_params(coeffs, Z, T).mean, [-0.25, 0.0, -0.25])
        np.testing.assert_allclose(arm_probabilities(coeffs, Z), np.full((3, 3), 1 / 3))

    def test_dosage_outside_unit_interval(self, rng):
        with pytest.raises(DomainError):
            tcga_draws(TcgaCoeffs.zeros(), np.zeros((1, 8)), np.array([[1, 1.5]]), 3, rng)
        with pytest.raises(DomainError):
            tcga_draws(TcgaCoeffs.zeros(), np.zeros((1, 8)), np.array([[4, 0.5]]), 3, rng)

    def test_problem_layout(self):
        problem = make_tcga_problem(seed=2, n_units=200, n_genes=40)
        dataset = problem.dataset
        assert dataset.covariates.shape == (200, 8)
        assert set(np.unique(dataset.treatments[:, 0])) <= {1.0, 2.0, 3.0}
        assert np.all((dataset.treatments[:, 1] >= 0) & (dataset.treatments[:, 1] <= 1))
        assert problem.target_design.interventions.shape == (3 * DOSE_GRID.size, 2)

    def test_gene_features_keep_scores_for_the_oracle(self, rng):
        problem = make_tcga_problem(seed=2, n_units=100, n_genes=40, model_features='genes')
        X = problem.dataset.covariates
        assert X.shape == (100, 48)
        T = np.array([[1, 0.5]] * 2)
        np.testing.assert_allclose(
            problem.oracle.mean_states(X[:2], T),
            tcga_params(problem.oracle.coeffs, X[:2, 40:], T).mean,
        )

    def test_unknown_feature_mode(self):
        with pytest.raises(ContractError):
            make_tcga_problem(seed=1, n_units=50, n_genes=40, model_features='pixels')


@pytest.mark.unit
class TestFiniteState:
    """Finite-state families and their designs."""

    def test_full_overlap_design_equals_target(self, rng):
        q = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(observational_design(q, 1.0, rng), q)
        pi = observational_design(q, 0.4, rng)
        assert np.all(pi >= 0.4 * q - 1e-12)
        assert pi.sum() == pytest.approx(1.0)

    def test_kappa_out_of_range(self, rng):
        with pytest.raises(ContractError):
            observational_design(np.array([0.5, 0.5]), 0.0, rng)

    def test_dataset_splits(self, point_masses):
        dataset = point_masses.dataset(40, seed=1)
        assert dataset.mask(Split.TRAIN).sum() == 40
        assert dataset.mask(Split.VALID).sum() == 10
        assert dataset.covariates.shape == (50, 0)
        assert dataset.encoder.kind is TreatmentKind.FINITE_STATE
        np.testing.assert_array_equal(np.abs(dataset.outcomes), 1.0)

    def test_small_sample_validation_covers_states(self):
        family = point_mass_family([0.0, 1.0, 2.0, 3.0, 4.0])
        assert family.dataset(2, seed=0).mask(Split.VALID).sum() == 5

    def test_target_design(self, point_masses):
        design = point_masses.target_design()
        assert design.covariates.shape == (1, 0)
        np.testing.assert_array_equal(design.interventions[:, 0], [0.0, 1.0])
        np.testing.assert_allclose(design.masses, [0.5, 0.5])

    def test_point_mass_oracle(self, point_masses, rng):
        draws = point_masses.oracle.sample_states(np.zeros((2, 0)), np.array([[0.0], [1.0]]), 5, rng)
        np.testing.assert_array_equal(draws, [[-1.0] * 5, [1.0] * 5])
        np.testing.assert_array_equal(point_masses.oracle.mean_states(None, np.array([[1.0]])), [1.0])

    def test_bad_state_index(self, point_masses, rng):
        with pytest.raises(DomainError):
            point_masses.oracle.sample_states(None, np.array([[2.0]]), 3, rng)
        with pytest.raises(DomainError):
            point_masses.oracle.mean_states(None, np.array([[0.5]]))

    def test_smooth_family_is_bounded_and_lipschitz(self, smooth_family):
        oracle = smooth_family.oracle
        u = np.linspace(0.0, 1.0, 2001)
        for j in range(smooth_family.n_states):
            values = oracle.pushforward(np.full(u.size, j), u)
            assert np.all(np.abs(values) <= oracle.bound)
            slopes = np.abs(np.diff(values)) / np.diff(u)
            assert slopes.max() <= oracle.lipschitz_bound(j) + 1e-6

    def test_truth_ensemble(self):
        family, truth = finite_state_dgp(3, q=[0.2, 0.3, 0.5], seed=5, truth_draws=50)
        assert len(truth) == 3
        np.testing.assert_allclose([entry.mass for entry in truth], [0.2, 0.3, 0.5])
        with pytest.raises(ContractError):
            finite_state_dgp(2, q=[0.2, 0.3, 0.5])
