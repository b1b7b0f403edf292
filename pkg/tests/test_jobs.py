#!/usr/bin/env python3
"""
Tests for the NBER Jobs loader
"""

import numpy as np
import pytest

from core.errors import DataFormatError, DataIOError
from dgp.dataset import Split
from dgp.jobs import (
    CONTINUOUS,
    NSW_COLUMNS,
    earnings,
    load_jobs,
    make_jobs_problem,
    read_nber_table,
    transform_earnings,
)


@pytest.mark.unit
class TestNberFiles:
    """Whitespace file parsing."""

    def test_reads_named_columns(self, nber_dir):
        table = read_nber_table(nber_dir / 'nsw_treated.txt', NSW_COLUMNS)
        assert set(table) == set(NSW_COLUMNS)
        assert table['treat'].size == 40
        np.testing.assert_array_equal(table['treat'], 1.0)

    def test_missing_file_names_the_directory_variable(self, tmp_path):
        with pytest.raises(DataIOError, match='GANICE_DATA_DIR'):
            read_nber_table(tmp_path / 'nsw_treated.txt', NSW_COLUMNS)

    def test_wrong_column_count_reports_line(self, tmp_path):
        path = tmp_path / 'nsw_control.txt'
        path.write_text('0 25 12 1 0 0 0 100.00 200.00\n\n0 30 11 0 1 0 1 0.00\n')
        with pytest.raises(DataFormatError) as exc_info:
            read_nber_table(path, NSW_COLUMNS)
        assert exc_info.value.line_number == 3
        assert exc_info.value.path == str(path)

    def test_non_numeric_field(self, tmp_path):
        path = tmp_path / 'nsw_control.txt'
        path.write_text('0 25 twelve 1 0 0 0 100.00 200.00\n')
        with pytest.raises(DataFormatError) as exc_info:
            read_nber_table(path, NSW_COLUMNS)
        assert exc_info.value.line_number == 1

    def test_empty_file(self, tmp_path):
        path = tmp_path / 'nsw_control.txt'
        path.write_text('\n\n')
        with pytest.raises(DataFormatError):
            read_nber_table(path, NSW_COLUMNS)

    def test_earnings_transform_inverts(self):
        dollars = np.array([0.0, 500.0, 12_345.67])
        np.testing.assert_allclose(earnings(transform_earnings(dollars)), dollars)
        assert transform_earnings(np.array([0.0]))[0] == 0.0


@pytest.mark.unit
class TestJobsDataset:
    """Pooled dataset with the NSW-only randomized holdout."""

    def test_counts_and_sources(self, nber_dir):
        dataset = load_jobs(nber_dir, seed=0)
        assert len(dataset) == 170
        assert dataset.metadata['counts'] == {'nsw_treated': 40, 'nsw_control': 50, 'psid': 80}
        assert (dataset.sources == 'psid').sum() == 80

    def test_outcomes_are_transformed_earnings(self, nber_dir):
        dataset = load_jobs(nber_dir, seed=0)
        table = read_nber_table(nber_dir / 'nsw_treated.txt', NSW_COLUMNS)
        np.testing.assert_allclose(dataset.outcomes[:40], np.arcsinh(table['re78'] / 1000.0))

    def test_rct_holdout_is_nsw_only(self, nber_dir):
        dataset = load_jobs(nber_dir, seed=0)
        rct = dataset.mask(Split.RCT)
        assert rct.sum() == 8 + 10
        assert not np.any(dataset.sources[rct] == 'psid')
        test = dataset.mask(Split.TEST)
        assert test.sum() == 16
        assert np.all(dataset.sources[test] == 'psid')
        assert set(np.unique(dataset.treatments[rct, 0])) == {0.0, 1.0}

    def test_continuous_columns_standardized_on_train(self, nber_dir):
        dataset = load_jobs(nber_dir, seed=0)
        train = dataset.mask(Split.TRAIN)
        np.testing.assert_allclose(dataset.covariates[train][:, CONTINUOUS].mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(dataset.covariates[train][:, CONTINUOUS].std(axis=0, ddof=1), 1.0)
        assert set(np.unique(dataset.covariates[:, 2])) <= {0.0, 1.0}

    def test_zero_fraction_from_nsw_training_units(self, nber_dir):
        dataset = load_jobs(nber_dir, seed=0)
        nsw_train = dataset.mask(Split.TRAIN) & (dataset.sources != 'psid')
        for arm in (0, 1):
            rows = nsw_train & (dataset.treatments[:, 0] == arm)
            expected = float(np.mean(dataset.outcomes[rows] == 0.0))
            assert dataset.metadata['zero_fraction'][str(arm)] == pytest.approx(expected)
        assert 0.0 < dataset.metadata['zero_fraction']['1'] < 1.0

    def test_split_depends_on_seed(self, nber_dir):
        a = load_jobs(nber_dir, seed=0)
        b = load_jobs(nber_dir, seed=0)
        c = load_jobs(nber_dir, seed=1)
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != c.fingerprint()

    def test_problem_targets_rct_covariates(self, nber_dir):
        problem = make_jobs_problem(nber_dir, seed=0)
        assert problem.oracle is None
        assert problem.target_design.covariates.shape == (18, 7)
        np.testing.assert_array_equal(problem.target_design.interventions[:, 0], [0.0, 1.0])

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataIOError):
            load_jobs(tmp_path / 'absent')
