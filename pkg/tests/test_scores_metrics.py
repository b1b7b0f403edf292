#!/usr/bin/env python3
"""
Tests for sample scores, metric suites and metric reports
"""

import numpy as np
import pytest

from core.errors import ContractError, ShapeError
from dgp.jobs import transform_earnings
from evaluation.metrics import (
    calibration_metrics,
    dose_point_metrics,
    effect_point_metrics,
    ew_from_draws,
    quantile_metrics,
    rct_point_metrics,
    rct_w1_from_draws,
    tail_metrics,
)
from evaluation.report import EvaluationSettings, MetricReport
from evaluation.scores import (
    central_interval,
    crps,
    energy_distance,
    ks_distance,
    lower_cvar,
    pit,
    quantiles,
    upper_cvar,
)


@pytest.mark.unit
class TestScores:
    """Closed-form values of the sample scores."""

    def test_crps_of_uniform_sample(self):
        k = 2000
        grid = (np.arange(k) + 0.5) / k
        assert crps(grid, 0.5) == pytest.approx(1.0 / 12.0, abs=1e-3)

    def test_crps_rows(self):
        rows = np.array([[0.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(crps(rows, np.array([1.0, 1.0])), [1.0, 0.0])

    def test_energy_between_diracs(self):
        assert energy_distance(np.zeros(3), np.ones(3)) == pytest.approx(2.0)

    def test_ks(self):
        assert ks_distance(np.array([0.0, 1.0, 2.0]), np.array([5.0, 6.0])) == pytest.approx(1.0)
        rows = ks_distance(np.array([[0.0, 1.0], [0.0, 1.0]]), np.array([[0.0, 1.0], [5.0, 6.0]]))
        np.testing.assert_allclose(rows, [0.0, 1.0])

    def test_inverted_cdf_quantiles(self):
        np.testing.assert_allclose(quantiles(np.array([1.0, 2.0, 3.0, 4.0]), [0.25, 0.5]), [1.0, 2.0])

    def test_cvar(self):
        sample = np.arange(1.0, 11.0)
        assert lower_cvar(sample, 0.2) == pytest.approx(1.5)
        assert upper_cvar(sample, 0.9) == pytest.approx(9.5)

    def test_pit(self):
        np.testing.assert_allclose(pit(np.array([[1.0, 2.0, 3.0, 4.0]]), np.array([2.5, 4.0])), [[0.5, 1.0]])

    def test_interval_coverage_range(self):
        with pytest.raises(ContractError):
            central_interval(np.arange(5.0), 1.0)

    def test_bad_shape(self):
        with pytest.raises(ShapeError):
            crps(np.zeros((2, 2, 2)), 0.0)


@pytest.mark.unit
class TestMetricSuites:
    """Metric suites over draw matrices."""

    def test_ew_weights_states_by_mass(self):
        model = np.array([[0.0, 0.0], [0.0, 0.0]])
        truth = np.array([[1.0, 1.0], [3.0, 3.0]])
        assert ew_from_draws(model, truth) == pytest.approx(2.0)
        assert ew_from_draws(model, truth, np.array([3.0, 1.0])) == pytest.approx(1.5)

    def test_tail_error_of_a_shift(self):
        truth = np.random.default_rng(0).normal(size=(3, 200))
        assert tail_metrics(truth + 0.7, truth) == pytest.approx(1.4)

    def test_quantile_effect_error(self):
        truth = np.random.default_rng(1).normal(size=(4, 100))
        model = truth.copy()
        model[1] += 0.5
        model[3] += 0.5
        out = quantile_metrics(model, truth, contrast=(np.array([1, 3]), np.array([0, 2])))
        assert out['qte_err'] == pytest.approx(0.5)
        assert out['iqe'] == pytest.approx(np.sqrt(0.125))

    def test_calibration(self):
        model = np.arange(1.0, 101.0).reshape(1, -1)
        cal = calibration_metrics(model, np.array([[50.5]]))
        assert cal['coverage'] == {'0.5': 1.0, '0.8': 1.0, '0.9': 1.0, '0.95': 1.0}
        assert cal['cal_err'] == pytest.approx(0.2125)
        assert cal['interval_widths']['0.5'] == pytest.approx(50.0)
        assert cal['pit_histogram'][5] == 1.0

    def test_point_mass_predictive_never_covers(self, rng):
        cal = calibration_metrics(np.zeros((4, 50)), rng.normal(size=(4, 30)))
        assert all(c == 0.0 for c in cal['coverage'].values())
        assert cal['cal_err'] == pytest.approx(np.mean([0.5, 0.8, 0.9, 0.95]))

    def test_effect_point_metrics(self):
        out = effect_point_metrics(np.array([[0.0, 1.0], [0.0, 3.0]]), np.array([[0.0, 2.0], [0.0, 2.0]]))
        assert out == {'pehe': 1.0, 'ate_err': 0.0}

    def test_dose_point_metrics(self):
        out = dose_point_metrics(np.array([[[3.0, 1.0, 2.0]]]), np.array([[[1.0, 3.0, 2.0]]]))
        assert out['mise'] == pytest.approx(8.0 / 3.0)
        assert out['dpe'] == pytest.approx(4.0)
        assert out['pe'] == pytest.approx(2.0)
        with pytest.raises(ShapeError):
            dose_point_metrics(np.zeros((1, 2, 3)), np.zeros((1, 3, 2)))
        truth = np.random.default_rng(2).normal(size=(5, 3, 4))
        assert dose_point_metrics(truth + 1.0, truth)['pe'] == 0.0

    def test_rct_point_metrics(self):
        arms = np.array([1, 1, 0, 0])
        y = np.array([10.0, 20.0, 5.0, 7.0])
        out = rct_point_metrics(np.array([3.0, 3.0, 1.0, 1.0]), np.array([1.0, 1.0, 2.0, 2.0]), arms, y)
        assert out['att_err'] == pytest.approx(7.0)
        assert out['policy_value'] == pytest.approx(10.5)
        with pytest.raises(ContractError):
            rct_point_metrics(np.ones(2), np.zeros(2), np.ones(2), np.ones(2))

    def test_rct_w1_is_measured_in_dollars(self):
        rct = {a: transform_earnings(np.array([0.0, 1000.0, 2000.0])) for a in (0, 1)}
        draws = {a: transform_earnings(np.array([[500.0, 1500.0, 2500.0]])) for a in (0, 1)}
        assert rct_w1_from_draws(draws, rct) == pytest.approx(500.0)


@pytest.mark.unit
class TestMetricReport:
    """Report validation and CSV rows."""

    def test_validate_rejects_bad_values(self):
        with pytest.raises(ContractError):
            MetricReport('ganice', 0, 'ihdp', pehe=-0.1).validate()
        with pytest.raises(ContractError):
            MetricReport('ganice', 0, 'ihdp', ew=float('nan')).validate()
        with pytest.raises(ContractError):
            MetricReport('ganice', 0, 'ihdp', interval_widths={'0.5': -1.0}).validate()
        assert MetricReport('ganice', 0, 'jobs', policy_value=-3.0).validate().policy_value == -3.0

    def test_to_row(self):
        report = MetricReport('ganice', 2, 'ihdp', ew=0.3, interval_widths={'0.9': 1.2}, seconds=4.0)
        row = report.to_row()
        assert row['method'] == 'ganice' and row['repetition'] == 2
        assert row['ew'] == 0.3
        assert np.isnan(row['pehe'])
        assert row['width_0.9'] == 1.2
        selected = report.to_row(['ew'])
        assert 'pehe' not in selected and 'width_0.9' not in selected

    def test_update_ignores_unknown_keys(self):
        report = MetricReport('ganice', 0, 'ihdp').update({'crps': 0.2, 'qte_curve': [1.0]})
        assert report.crps == 0.2
        assert report.populated() == {'crps': 0.2}

    def test_settings_need_two_draws(self):
        with pytest.raises(ContractError):
            EvaluationSettings(eval_draws=1)
