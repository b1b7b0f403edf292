"""
pytest configuration and fixtures for GANICE laboratory tests
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

# Set test environment
os.environ.setdefault('ENVIRONMENT', 'test')
os.environ.pop('GANICE_DATA_DIR', None)
os.environ.pop('GANICE_THREADS', None)

from config.experiment_config import (
    DatasetConfig,
    DatasetKind,
    ExperimentConfig,
    GaniceConfig,
    MethodName,
)
from dgp.finite_state import finite_state_dgp, point_mass_family
from dgp.jobs import NSW_COLUMNS, PSID_COLUMNS


@pytest.fixture
def rng():
    """Seeded generator shared by a single test."""
    return np.random.default_rng(12345)


@pytest.fixture
def output_dir(tmp_path):
    """Temporary results directory."""
    path = tmp_path / 'results'
    path.mkdir()
    return path


def _nber_rows(n: int, treat: int, with_re74: bool, rng: np.random.Generator, zero_share: float = 0.3):
    rows = []
    for _ in range(n):
        age = rng.integers(17, 55)
        educ = rng.integers(3, 17)
        black = rng.integers(0, 2)
        hisp = 0 if black else rng.integers(0, 2)
        married = rng.integers(0, 2)
        nodegree = int(educ < 12)
        re74 = float(np.round(rng.gamma(2.0, 3000.0), 2))
        re75 = float(np.round(rng.gamma(2.0, 3000.0), 2))
        re78 = 0.0 if rng.random() < zero_share else float(np.round(rng.gamma(2.0, 3500.0 + 800.0 * treat), 2))
        fields = [treat, age, educ, black, hisp, married, nodegree]
        fields += [re74, re75, re78] if with_re74 else [re75, re78]
        rows.append(fields)
    return rows


def write_nber_files(directory, n_treated: int = 40, n_control: int = 50, n_psid: int = 80, seed: int = 7):
    """Synthetic whitespace files with the NBER column layout."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    layout = {
        'nsw_treated.txt': _nber_rows(n_treated, 1, False, rng),
        'nsw_control.txt': _nber_rows(n_control, 0, False, rng),
        'psid_controls.txt': _nber_rows(n_psid, 0, True, rng),
    }
    for name, rows in layout.items():
        with open(directory / name, 'w') as handle:
            for row in rows:
                handle.write('  '.join(f"{v:.2f}" if isinstance(v, float) else str(int(v)) for v in row) + '\n')
    assert len(layout['nsw_treated.txt'][0]) == len(NSW_COLUMNS)
    assert len(layout['psid_controls.txt'][0]) == len(PSID_COLUMNS)
    return directory


@pytest.fixture
def nber_dir(tmp_path):
    """Directory holding synthetic NSW and PSID files."""
    return write_nber_files(tmp_path / 'nber')


@pytest.fixture
def point_masses():
    """Two Dirac states at -1 and +1 with uniform target masses."""
    return point_mass_family([-1.0, 1.0], kappa=1.0, seed=0)


@pytest.fixture
def smooth_family():
    """Three-state smooth family with a nonuniform observational design."""
    family, _ = finite_state_dgp(3, kappa=0.5, beta=1.0, seed=3, truth_draws=200)
    return family


@pytest.fixture
def tiny_ganice_config():
    """Finite-state preset shrunk to a few hundred fast steps."""
    return GaniceConfig.preset(DatasetKind.FINITE_STATE).with_overrides({
        'generator_widths': [16, 16],
        'critic_widths': [16, 16],
        'pretrain_steps': 50,
        'adversarial_steps': 60,
        'batch_size': 32,
        'log_every': 20,
        'seed': 11,
    })


@pytest.fixture
def smoke_config(output_dir):
    """Point-mass experiment small enough to run end to end in tests."""
    return ExperimentConfig(
        name='test-smoke',
        dataset=DatasetConfig(kind=DatasetKind.FINITE_STATE, n_states=2, point_masses=[-1.0, 1.0],
                              kappa=1.0, n_train=200),
        methods=[MethodName.ORACLE, MethodName.CONSTANT],
        repetitions=2,
        base_seed=5,
        eval_draws=200,
        calibration_draws=200,
        output_dir=str(output_dir),
    )
