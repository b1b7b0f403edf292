#!/usr/bin/env python3
"""
Tests for the experiment runner, replay, rate study and plot tables
"""

import json

import numpy as np
import pandas as pd
import pytest

from config.experiment_config import DatasetConfig, DatasetKind, ExperimentConfig, MethodName, RateStudyConfig
from core.errors import ContractError, DataIOError, SlopeUndefinedError
from dgp.dataset import Dataset, StateEncoder, TreatmentKind
from experiments.methods import ConstantLawSampler, EmpiricalStateResampler, MethodRegistry
from experiments.plot_data import PLOT_DIR, emit_plot_data
from experiments.rate_study import bootstrap_slope, loglog_slope, run_rate_study
from experiments.runner import (
    ExperimentRunner,
    aggregate_results,
    metrics_path,
    replay,
    repetition_seed,
    training_seed,
)


def _aggregate_value(frame: pd.DataFrame, method: str, metric: str) -> pd.Series:
    return frame[(frame['method'] == method) & (frame['metric'] == metric)].iloc[0]


@pytest.mark.unit
class TestBaselineSamplers:
    """Reference samplers used by the runner."""

    def test_state_resampler_reproduces_point_masses(self, point_masses, rng):
        sampler = EmpiricalStateResampler(point_masses.dataset(40, seed=0))
        draws = sampler.sample_states(np.zeros((2, 0)), np.array([[1.0], [0.0]]), 15, rng)
        np.testing.assert_array_equal(draws[0], 1.0)
        np.testing.assert_array_equal(draws[1], -1.0)

    def test_state_resampler_needs_finite_states(self, rng):
        n = 10
        dataset = Dataset('binary', rng.normal(size=(n, 2)), np.arange(n) % 2, rng.normal(size=n),
                          np.full(n, 'train'), StateEncoder(TreatmentKind.BINARY, 2))
        with pytest.raises(ContractError):
            EmpiricalStateResampler(dataset)

    def test_constant_sampler_ignores_the_state(self, point_masses, rng):
        sampler = ConstantLawSampler(point_masses.dataset(40, seed=0))
        draws = sampler.sample_states(np.zeros((3, 0)), np.zeros((3, 1)), 400, rng)
        assert draws.shape == (3, 400)
        assert set(np.unique(draws)) == {-1.0, 1.0}

    def test_unknown_method(self, point_masses):
        with pytest.raises(ValueError):
            MethodRegistry.fit('lasso', point_masses.problem(40, 0), ExperimentConfig(), 0)


@pytest.mark.unit
class TestSeedScheme:
    """Repetition and training seeds."""

    def test_offsets(self):
        assert repetition_seed(5, 2) == 7
        assert training_seed(7, 0) == 7
        assert training_seed(7, 1) != training_seed(7, 2)


@pytest.mark.integration
class TestExperimentRunner:
    """End-to-end runs of the point-mass smoke experiment."""

    def test_run_writes_every_artifact(self, smoke_config, output_dir):
        status = ExperimentRunner(smoke_config).run()
        assert status == 0
        for r in (0, 1):
            assert metrics_path(output_dir, r).exists()
            assert (output_dir / 'details' / f"oracle_rep{r:03d}.json").exists()
        for name in ('manifest.json', 'aggregate.csv', 'config.yaml', 'events.log'):
            assert (output_dir / name).exists()
        assert not (output_dir / 'failures.csv').exists()

        manifest = json.loads((output_dir / 'manifest.json').read_text())
        assert manifest['methods'] == ['oracle', 'constant']
        assert [rec['seed'] for rec in manifest['repetitions']] == [5, 6]
        assert all(rec['fingerprint'] for rec in manifest['repetitions'])

        events = [json.loads(line) for line in (output_dir / 'events.log').read_text().splitlines()]
        types = [e['extra']['event_type'] for e in events]
        assert types[0] == 'config_loaded'
        assert types.count('method_finished') == 4

    def test_aggregate_table(self, smoke_config, output_dir):
        ExperimentRunner(smoke_config).run()
        frame = pd.read_csv(output_dir / 'aggregate.csv')
        assert list(frame.columns) == ['method', 'metric', 'mean', 'se', 'n']
        oracle = _aggregate_value(frame, 'oracle', 'ew')
        assert oracle['mean'] == 0.0
        assert oracle['n'] == 2
        assert _aggregate_value(frame, 'constant', 'ew')['mean'] > 0.5

    def test_method_failures_are_isolated(self, smoke_config, output_dir, mocker):
        real_fit = MethodRegistry.fit

        def fit_or_explode(method, problem, config, seed):
            if MethodName(method) is MethodName.CONSTANT:
                raise ContractError('constant fitter exploded')
            return real_fit(method, problem, config, seed)

        fit = mocker.patch.object(MethodRegistry, 'fit', side_effect=fit_or_explode)
        status = ExperimentRunner(smoke_config).run()
        assert status == 1
        assert fit.call_count == 4
        failures = pd.read_csv(output_dir / 'failures.csv')
        assert list(failures['method']) == ['constant', 'constant']
        assert set(failures['error_type']) == {'ContractError'}
        rows = pd.read_csv(metrics_path(output_dir, 0))
        assert list(rows['method']) == ['oracle']

    def test_replay_is_exact(self, smoke_config, output_dir, tmp_path):
        ExperimentRunner(smoke_config).run()
        result = replay(output_dir / 'manifest.json', tmp_path / 'again')
        assert result.status == 0
        assert result.fingerprints_match
        assert result.identical == [0, 1]
        assert result.exact

    def test_replay_needs_a_manifest(self, tmp_path):
        with pytest.raises(DataIOError):
            replay(tmp_path / 'manifest.json', tmp_path / 'out')

    def test_empty_aggregate(self, output_dir):
        frame = aggregate_results(output_dir)
        assert frame.empty
        assert (output_dir / 'aggregate.csv').exists()


@pytest.mark.integration
class TestPlotData:
    """Plot-ready tables from a finished run."""

    def test_tables_from_a_run(self, smoke_config, output_dir):
        ExperimentRunner(smoke_config).run()
        result = emit_plot_data(output_dir)
        names = {p.name for p in result.written}
        assert {'quantile_errors.csv', 'pit_histogram.csv', 'ablation_bars.csv'} <= names
        assert 'arm_cdfs.csv' not in names
        assert result.skipped == []
        pit = pd.read_csv(output_dir / PLOT_DIR / 'pit_histogram.csv')
        assert {'method', 'x', 'y', 'lower', 'upper'} <= set(pit.columns)

    def test_missing_details_are_skipped(self, smoke_config, output_dir):
        ExperimentRunner(smoke_config).run()
        (output_dir / 'details' / 'constant_rep001.json').unlink()
        result = emit_plot_data(output_dir)
        assert result.skipped == ['constant_rep001.json']
        assert result.written

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataIOError):
            emit_plot_data(tmp_path / 'absent')


@pytest.mark.unit
class TestRateSlopes:
    """Log-log slope and its bootstrap interval."""

    def test_exact_power_law(self):
        n_grid = [100, 400, 1600]
        medians = [n ** -0.5 for n in n_grid]
        assert loglog_slope(n_grid, medians) == pytest.approx(-0.5)

    def test_degenerate_risks(self):
        with pytest.raises(SlopeUndefinedError):
            loglog_slope([10, 20, 40], [0.1, 0.0, 0.05])
        with pytest.raises(SlopeUndefinedError):
            loglog_slope([10], [0.1])

    def test_bootstrap_of_noiseless_risks(self, rng):
        n_grid = [100, 400, 1600]
        risks = {n: [n ** -0.5] * 5 for n in n_grid}
        lower, upper = bootstrap_slope(n_grid, risks, 50, rng)
        assert lower == pytest.approx(-0.5)
        assert upper == pytest.approx(-0.5)

    def test_bootstrap_needs_a_defined_slope(self, rng):
        with pytest.raises(SlopeUndefinedError):
            bootstrap_slope([10, 20], {10: [0.0, 0.0], 20: [0.0]}, 10, rng)


@pytest.mark.integration
class TestRateStudy:
    """A miniature sweep with the reference samplers."""

    def test_small_sweep(self, output_dir):
        config = ExperimentConfig(
            dataset=DatasetConfig(kind=DatasetKind.FINITE_STATE, n_states=2, point_masses=[-1.0, 1.0], kappa=1.0),
            base_seed=3,
            output_dir=str(output_dir),
            rate_study=RateStudyConfig(n_grid=[40, 80, 160], seeds_per_n=2,
                                       methods=[MethodName.ORACLE, MethodName.CONSTANT],
                                       eval_draws=50, bootstrap=20),
        )
        results = {r.method: r for r in run_rate_study(config)}
        risks = pd.read_csv(output_dir / 'rate_risks.csv')
        assert len(risks) == 3 * 2 * 2
        # resampling a Dirac is exact, so its risks are all zero
        assert np.isnan(results['oracle'].slope)
        assert results['oracle'].median_ew == [0.0, 0.0, 0.0]
        assert np.isfinite(results['constant'].slope)
        assert results['constant'].reference_exponent is None
        slopes = pd.read_csv(output_dir / 'rate_slopes.csv')
        assert set(slopes['method']) == {'oracle', 'constant'}
        assert 'median_ew_n160' in slopes.columns

    def test_needs_a_rate_block(self):
        with pytest.raises(ContractError):
            run_rate_study(ExperimentConfig())
