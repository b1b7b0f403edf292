#!/usr/bin/env python3
"""
Tests for GANICE training runs and fitted models
"""

import numpy as np
import pytest

from config.experiment_config import GaniceConfig
from core.errors import ContractError, DataIOError
from dgp.dataset import Dataset, Split, StateEncoder, TargetDesign, TreatmentKind
from estimator.ganice import (
    RESTART_SEED_STRIDE,
    GaniceTrainer,
    ObjectiveKind,
    TrainedModel,
    train,
    validation_proxy,
)
from monitoring.training_metrics import TrainingMonitor
from transport.laws import State


@pytest.fixture
def point_mass_run(point_masses, tiny_ganice_config):
    dataset = point_masses.dataset(120, seed=2)
    model = GaniceTrainer(tiny_ganice_config, dataset, point_masses.target_design()).fit()
    return dataset, model


@pytest.mark.slow
class TestGaniceTrainer:
    """Short stratified runs on the two-state point-mass family."""

    def test_monitor_records_both_phases(self, point_mass_run):
        _, model = point_mass_run
        phases = [row['phase'] for row in model.monitor.rows()]
        assert phases == ['pretrain'] * 3 + ['adversarial'] * 3
        last = model.monitor.last('adversarial')
        assert last.step == 60
        assert np.isfinite([last.objective, last.critic_loss, last.gp_term, last.generator_loss]).all()
        assert model.monitor.total_seconds('adversarial') > 0

    def test_one_critic_per_state(self, point_mass_run):
        _, model = point_mass_run
        critics = model.critic_functions()
        assert sorted(critics) == [0, 1]
        assert critics[0](np.array([model.anchor]))[0] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(model.cell_map.masses, [0.5, 0.5])

    def test_sampling_is_deterministic(self, point_mass_run):
        _, model = point_mass_run
        X, T = np.zeros((2, 0)), np.array([[0.0], [1.0]])
        a = model.sample_states(X, T, 50, np.random.default_rng(3))
        b = model.sample_states(X, T, 50, np.random.default_rng(3))
        assert a.shape == (2, 50)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))
        law = model.sample(State.of(t=[1]), 20, seed=4)
        assert law.size == 20

    def test_push_uses_given_latents(self, point_mass_run):
        _, model = point_mass_run
        latent = np.full((3, model.latent_dim), 0.5)
        out = model.push(np.zeros((3, 0)), np.array([[0.0], [0.0], [1.0]]), latent)
        assert out[0] == out[1]

    def test_validation_proxy(self, point_mass_run):
        dataset, model = point_mass_run
        assert np.isfinite(model.validation_proxy)
        assert model.validation_proxy >= 0
        again = validation_proxy(model, dataset, np.random.default_rng(0))
        assert again == validation_proxy(model, dataset, np.random.default_rng(0))
        # finite-state datasets have no test split
        assert np.isnan(validation_proxy(model, dataset, np.random.default_rng(0), Split.TEST))

    def test_checkpoint_round_trip(self, point_mass_run, tmp_path):
        _, model = point_mass_run
        model.save(tmp_path / 'model')
        for name in ('generator.json', 'critic_0.json', 'critic_1.json', 'cell_map.json', 'model.json',
                     'training_log.csv'):
            assert (tmp_path / 'model' / name).exists()
        restored = TrainedModel.load(tmp_path / 'model')
        X, T = np.zeros((2, 0)), np.array([[0.0], [1.0]])
        assert np.array_equal(restored.sample_states(X, T, 30, np.random.default_rng(9)),
                              model.sample_states(X, T, 30, np.random.default_rng(9)))
        assert len(restored.monitor.rows()) == len(model.monitor.rows())
        assert restored.objective is ObjectiveKind.STRATIFIED

    def test_load_needs_metadata(self, tmp_path):
        with pytest.raises(DataIOError):
            TrainedModel.load(tmp_path)

    def test_external_monitor_is_used(self, point_masses, tiny_ganice_config):
        monitor = TrainingMonitor()
        config = tiny_ganice_config.with_overrides({'pretrain_steps': 0, 'adversarial_steps': 20})
        GaniceTrainer(config, point_masses.dataset(60, seed=1), point_masses.target_design(),
                      monitor=monitor).fit()
        assert [row['phase'] for row in monitor.rows()] == ['adversarial']


@pytest.mark.slow
class TestObjectiveVariants:
    """Ablation objectives and restarts through the same trainer."""

    def test_pooled_objective_has_no_cell_critics(self, point_masses, tiny_ganice_config):
        model = GaniceTrainer(tiny_ganice_config, point_masses.dataset(80, seed=3), point_masses.target_design(),
                              ObjectiveKind.POOLED).fit()
        assert list(model.critics) == [0]
        with pytest.raises(ContractError):
            model.critic_functions()

    def test_no_cell_normalization_runs(self, point_masses, tiny_ganice_config):
        model = GaniceTrainer(tiny_ganice_config, point_masses.dataset(80, seed=3), point_masses.target_design(),
                              ObjectiveKind.NO_CELL_NORMALIZATION).fit()
        assert sorted(model.critics) == [0, 1]
        assert np.isfinite(model.monitor.last('adversarial').objective)

    def test_restart_grid_keeps_one_model(self, point_masses, tiny_ganice_config):
        config = tiny_ganice_config.with_overrides({
            'adversarial_steps': 20, 'restart_grid': {'transport_weight': [0.0, 0.5]},
        })
        model = train(config, point_masses.dataset(80, seed=5), point_masses.target_design())
        assert model.config['seed'] in (11, 11 + RESTART_SEED_STRIDE)
        assert model.config['restart_grid'] == {}
        assert np.isfinite(model.validation_proxy)
        summary = model.monitor.summary()
        assert summary['counters']['restarts'] == 2
        assert summary['gauges']['validation_proxy'] == model.validation_proxy
        assert summary['gauges']['selected_restart'] == (model.config['seed'] - 11) // RESTART_SEED_STRIDE
        assert summary['histograms']['restart_validation_proxy']['count'] == 2

    def test_single_run_records_its_proxy(self, point_masses, tiny_ganice_config):
        model = train(tiny_ganice_config.with_overrides({'adversarial_steps': 20}),
                      point_masses.dataset(80, seed=5), point_masses.target_design())
        summary = model.monitor.summary()
        assert summary['counters'] == {'restarts': 1}
        assert summary['gauges']['selected_restart'] == 0
        assert summary['gauges']['validation_proxy'] == model.validation_proxy


@pytest.mark.unit
class TestTrainerContracts:
    """Checks before any training step."""

    def test_invalid_config(self, point_masses):
        with pytest.raises(ContractError):
            GaniceTrainer(GaniceConfig(batch_size=0), point_masses.dataset(10, seed=0),
                          point_masses.target_design())

    def test_empty_training_arm(self):
        n = 20
        dataset = Dataset('treated-only', np.random.default_rng(0).normal(size=(n, 2)), np.ones(n),
                          np.random.default_rng(1).normal(size=n), np.full(n, 'train'),
                          StateEncoder(TreatmentKind.BINARY, 2))
        design = TargetDesign(dataset.covariates, np.array([[0.0], [1.0]]))
        trainer = GaniceTrainer(GaniceConfig(pretrain_steps=0, adversarial_steps=0), dataset, design)
        with pytest.raises(ContractError, match='Empty training arm'):
            trainer.fit()


@pytest.mark.unit
class TestCriticAnchoring:
    """A constant added to a cell critic leaves the critic gap unchanged."""

    @staticmethod
    def _trainer(family, config, objective):
        trainer = GaniceTrainer(config, family.dataset(60, seed=4), family.target_design(), objective)
        trainer._setup()
        return trainer

    @pytest.mark.parametrize('objective, real_norm, fake_norm', [
        (ObjectiveKind.STRATIFIED, 3, 5),
        (ObjectiveKind.NO_CELL_NORMALIZATION, 8, 8),
    ])
    def test_bias_shift_does_not_move_the_gap(self, point_masses, tiny_ganice_config,
                                              objective, real_norm, fake_norm):
        trainer, shifted = (self._trainer(point_masses, tiny_ganice_config, objective) for _ in range(2))
        cell = trainer.active[0]
        shifted.critics[cell].weights[-1] += 5.0
        real, fake = np.full((3, 1), 0.2), np.full((5, 1), 0.2)
        gap, _, _ = trainer._critic_update(cell, real, fake, real_norm, fake_norm)
        gap_shifted, _, _ = shifted._critic_update(cell, real, fake, real_norm, fake_norm)
        assert gap_shifted == pytest.approx(gap, abs=1e-9)

    def test_unequal_counts_at_the_anchor_give_zero_gap(self, point_masses, tiny_ganice_config):
        trainer = self._trainer(point_masses, tiny_ganice_config, ObjectiveKind.NO_CELL_NORMALIZATION)
        cell = trainer.active[0]
        trainer.critics[cell].weights[-1] += 5.0
        at_anchor = np.full((1, 1), trainer.anchor)
        gap, _, _ = trainer._critic_update(cell, np.repeat(at_anchor, 3, axis=0),
                                           np.repeat(at_anchor, 5, axis=0), 8, 8)
        assert gap == pytest.approx(0.0, abs=1e-12)
