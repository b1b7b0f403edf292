#!/usr/bin/env python3
"""
Tests for the command line
"""

import logging

import pytest
import yaml

from cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, build_parser, main


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


def _config_file(tmp_path, **extra):
    data = {
        'name': 'cli-smoke',
        'dataset': {'kind': 'finite-state', 'n_states': 2, 'point_masses': [-1.0, 1.0], 'n_train': 200},
        'methods': ['oracle', 'constant'],
        'repetitions': 2,
        'eval_draws': 100,
        'calibration_draws': 100,
        'output_dir': str(tmp_path / 'results'),
    }
    data.update(extra)
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.mark.unit
class TestParser:
    """Argument parsing."""

    def test_verbs(self):
        parser = build_parser()
        args = parser.parse_args(['run', '--config', 'c.yaml', '--reps', '3', '--threads', '2'])
        assert args.command == 'run' and args.reps == 3 and args.threads == 2
        args = parser.parse_args(['--log-level', 'DEBUG', 'plot-data', 'results/ihdp'])
        assert args.results == 'results/ihdp' and args.log_level == 'DEBUG'

    def test_run_needs_a_source(self):
        with pytest.raises(SystemExit) as exc_info:
            main(['run'])
        assert exc_info.value.code == 2

    def test_rate_study_requires_config(self):
        with pytest.raises(SystemExit):
            main(['rate-study'])


@pytest.mark.unit
class TestValidateConfig:
    """validate-config exit codes and messages."""

    def test_valid_config(self, tmp_path, capsys):
        assert main(['validate-config', '--config', str(_config_file(tmp_path)), '--reps', '4']) == EXIT_OK
        out = capsys.readouterr().out
        assert "Config 'cli-smoke' is valid" in out
        assert '4 repetitions' in out

    def test_unknown_key(self, tmp_path, capsys):
        path = _config_file(tmp_path, colour='red')
        assert main(['validate-config', '--config', str(path)]) == EXIT_INVALID
        err = capsys.readouterr().err
        assert 'Invalid configuration:' in err
        assert 'colour' in err

    def test_missing_file(self, tmp_path, capsys):
        assert main(['validate-config', '--config', str(tmp_path / 'absent.yaml')]) == EXIT_INVALID
        assert 'Invalid configuration:' in capsys.readouterr().err


@pytest.mark.integration
class TestRunAndPlotData:
    """run followed by plot-data on its results."""

    def test_run_then_plot(self, tmp_path, capsys):
        path = _config_file(tmp_path)
        assert main(['run', '--config', str(path), '--seed', '4']) == EXIT_OK
        results = tmp_path / 'results'
        assert (results / 'metrics_rep000.csv').exists()
        assert (results / 'metrics_rep001.csv').exists()
        assert (results / 'aggregate.csv').exists()
        capsys.readouterr()

        assert main(['plot-data', str(results)]) == EXIT_OK
        printed = capsys.readouterr().out.split()
        assert any(p.endswith('pit_histogram.csv') for p in printed)

    def test_replay(self, tmp_path):
        path = _config_file(tmp_path)
        assert main(['run', '--config', str(path)]) == EXIT_OK
        manifest = tmp_path / 'results' / 'manifest.json'
        assert main(['run', '--replay', str(manifest), '--out', str(tmp_path / 'again')]) == EXIT_OK

    def test_plot_data_missing_directory(self, tmp_path, capsys):
        assert main(['plot-data', str(tmp_path / 'absent')]) == EXIT_FAILED
        assert 'Data error:' in capsys.readouterr().err
