#!/usr/bin/env python3
"""
Tests for the residual plug-in and the objective ablations
"""

import numpy as np
import pytest

from baselines.ablations import train_no_cellnorm_ablation, train_pooled_ablation
from baselines.residual_plugin import fit_residual_plugin, sample_plugin, stratum_coordinates
from config.experiment_config import PluginConfig
from dgp.dataset import Dataset, StateEncoder, TreatmentKind
from dgp.finite_state import point_mass_family
from estimator.ganice import ObjectiveKind
from transport.laws import State

FAST_PLUGIN = PluginConfig(hidden_widths=[8], steps=60, batch_size=32, seed=4)


@pytest.mark.unit
class TestStratumCoordinates:
    """Treatment strata in the unit cube."""

    def test_binary_and_arm_dosage(self):
        np.testing.assert_array_equal(stratum_coordinates(TreatmentKind.BINARY, np.array([0.0, 1.0]), 2),
                                      [[0.0], [1.0]])
        coords = stratum_coordinates(TreatmentKind.ARM_DOSAGE, np.array([[3.0, 0.4]]), 3)
        np.testing.assert_allclose(coords, [[5 / 6, 0.4]])

    def test_finite_states_sit_at_interval_centers(self):
        coords = stratum_coordinates(TreatmentKind.FINITE_STATE, np.array([[0.0], [2.0]]), 3)
        np.testing.assert_allclose(coords[:, 0], [0.125, 0.625])


@pytest.mark.unit
class TestResidualPlugin:
    """Mean network plus pooled residuals."""

    def test_point_masses_are_reproduced(self, point_masses):
        dataset = point_masses.dataset(60, seed=1)
        plugin = fit_residual_plugin(dataset, FAST_PLUGIN)
        assert sorted(plugin.pools) == [0, 1]
        assert sum(idx.size for idx in plugin.pool_indices.values()) == 60
        draws = plugin.sample_states(np.zeros((2, 0)), np.array([[0.0], [1.0]]), 25, np.random.default_rng(0))
        np.testing.assert_allclose(draws[0], -1.0, atol=1e-9)
        np.testing.assert_allclose(draws[1], 1.0, atol=1e-9)

    def test_three_states_merge_the_unused_interval(self):
        family = point_mass_family([0.0, 1.0, 2.0], seed=2)
        plugin = fit_residual_plugin(family.dataset(45, seed=2), FAST_PLUGIN)
        assert plugin.partition.n_cells == 4
        assert plugin.merge_map.n_merged == 3
        np.testing.assert_array_equal(plugin.strata(np.array([[0.0], [1.0], [2.0]])), [0, 1, 2])

    def test_missing_arm_borrows_nearest_pool(self):
        n = 30
        rng = np.random.default_rng(5)
        dataset = Dataset('treated-only', rng.normal(size=(n, 2)), np.ones(n), rng.normal(size=n),
                          np.full(n, 'train'), StateEncoder(TreatmentKind.BINARY, 2))
        plugin = fit_residual_plugin(dataset, FAST_PLUGIN)
        assert plugin.merge_map.n_merged == 1
        draws = plugin.sample_states(rng.normal(size=(3, 2)), np.zeros(3), 10, rng)
        assert draws.shape == (3, 10)
        assert np.all(np.isfinite(draws))

    def test_sample_law(self, point_masses):
        plugin = fit_residual_plugin(point_masses.dataset(40, seed=3), FAST_PLUGIN)
        law = sample_plugin(plugin, State.of(t=[1]), 12, seed=0)
        assert law.size == 12


@pytest.mark.slow
class TestAblations:
    """The ablations share the trainer and change only the objective."""

    def test_pooled_ablation(self, point_masses, tiny_ganice_config):
        model = train_pooled_ablation(tiny_ganice_config, point_masses.dataset(80, seed=6),
                                      point_masses.target_design())
        assert model.objective is ObjectiveKind.POOLED

    def test_no_cellnorm_ablation(self, point_masses, tiny_ganice_config):
        model = train_no_cellnorm_ablation(tiny_ganice_config, point_masses.dataset(80, seed=6),
                                           point_masses.target_design())
        assert model.objective is ObjectiveKind.NO_CELL_NORMALIZATION
