"""
Jobs (NSW randomized sample plus PSID controls) loader
Reads the NBER whitespace files, splits each source before pooling, and
keeps the randomized holdout NSW-only.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from core.errors import DataFormatError, DataIOError
from dgp.base import Problem
from dgp.dataset import Dataset, Split, StateEncoder, Standardizer, TargetDesign, TreatmentKind, stratified_split

logger = logging.getLogger(__name__)

JOBS_SPLIT = (0.56, 0.24)
FEATURES = ['age', 'educ', 'black', 'hisp', 'married', 'nodegree', 're75']
CONTINUOUS = [0, 1, 6]

NSW_COLUMNS = ['treat', 'age', 'educ', 'black', 'hisp', 'married', 'nodegree', 're75', 're78']
PSID_COLUMNS = ['treat', 'age', 'educ', 'black', 'hisp', 'married', 'nodegree', 're74', 're75', 're78']

SOURCE_FILES = {
    'nsw_treated': ('nsw_treated.txt', NSW_COLUMNS),
    'nsw_control': ('nsw_control.txt', NSW_COLUMNS),
    'psid': ('psid_controls.txt', PSID_COLUMNS),
}


def transform_earnings(re78: np.ndarray) -> np.ndarray:
    """Y = asinh(re78 / 1000)."""
    return np.arcsinh(np.asarray(re78, dtype=float) / 1000.0)


def earnings(y: np.ndarray) -> np.ndarray:
    """Inverse of transform_earnings, in dollars."""
    return 1000.0 * np.sinh(np.asarray(y, dtype=float))


def read_nber_table(path: Union[str, Path], columns) -> Dict[str, np.ndarray]:
    """Parse one whitespace-delimited NBER file into named columns."""
    path = Path(path)
    if not path.exists():
        raise DataIOError(
            f"Jobs data file not found: {path}. Place the NBER files nsw_treated.txt, "
            f"nsw_control.txt and psid_controls.txt in the Jobs data directory (GANICE_DATA_DIR)."
        )
    rows = []
    with path.open() as handle:
        for line_number, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != len(columns):
                raise DataFormatError(
                    f"Expected {len(columns)} columns, found {len(fields)}", path=str(path), line_number=line_number
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise DataFormatError(f"Non-numeric field in '{line.strip()}'", path=str(path),
                                      line_number=line_number) from None
    if not rows:
        raise DataFormatError("File contains no rows", path=str(path))
    table = np.asarray(rows)
    return {name: table[:, j] for j, name in enumerate(columns)}


@dataclass
class JobsPaths:
    nsw_treated: Path
    nsw_control: Path
    psid_controls: Path

    @classmethod
    def from_directory(cls, directory: Union[str, Path]) -> 'JobsPaths':
        directory = Path(directory)
        return cls(*(directory / SOURCE_FILES[key][0] for key in ('nsw_treated', 'nsw_control', 'psid')))


def load_jobs(paths: Union[JobsPaths, str, Path], seed: int = 0) -> Dataset:
    """
    Unified Jobs dataset.

    Each source is split 0.56/0.24/rest on its own; NSW test units form
    the RCT holdout and PSID test units keep the plain test label.
    """
    if not isinstance(paths, JobsPaths):
        paths = JobsPaths.from_directory(paths)
    rng = np.random.default_rng(seed)
    sources = {
        'nsw_treated': read_nber_table(paths.nsw_treated, NSW_COLUMNS),
        'nsw_control': read_nber_table(paths.nsw_control, NSW_COLUMNS),
        'psid': read_nber_table(paths.psid_controls, PSID_COLUMNS),
    }

    X_parts, t_parts, y_parts, split_parts, source_parts = [], [], [], [], []
    for name, table in sources.items():
        n = table['treat'].size
        splits = stratified_split(np.zeros(n), JOBS_SPLIT, rng)
        if name != 'psid':
            splits = np.where(splits == Split.TEST.value, Split.RCT.value, splits)
        X_parts.append(np.column_stack([table[c] for c in FEATURES]))
        t_parts.append(table['treat'])
        y_parts.append(transform_earnings(table['re78']))
        split_parts.append(splits)
        source_parts.append(np.full(n, name))
        logger.info(f"Loaded {n} units from {name}")

    raw = np.vstack(X_parts)
    splits = np.concatenate(split_parts)
    standardizer = Standardizer.fit(raw, splits == Split.TRAIN.value, CONTINUOUS)
    treatments = np.concatenate(t_parts)
    outcomes = np.concatenate(y_parts)
    source_labels = np.concatenate(source_parts)

    nsw_train = (splits == Split.TRAIN.value) & (source_labels != 'psid')
    zero_fraction = {
        str(arm): float(np.mean(outcomes[nsw_train & (treatments == arm)] == 0.0))
        if np.any(nsw_train & (treatments == arm)) else 0.0
        for arm in (0, 1)
    }
    return Dataset(
        name='jobs',
        covariates=standardizer.transform(raw),
        treatments=treatments.reshape(-1, 1),
        outcomes=outcomes,
        splits=splits,
        encoder=StateEncoder(TreatmentKind.BINARY, n_arms=2),
        feature_names=list(FEATURES),
        standardizer=standardizer,
        sources=source_labels,
        metadata={'seed': seed, 'zero_fraction': zero_fraction,
                  'counts': {k: int(v['treat'].size) for k, v in sources.items()}},
    )


def make_jobs_problem(data_dir: Union[str, Path], seed: int, paths: Optional[JobsPaths] = None) -> Problem:
    """Jobs dataset with the RCT covariates x Unif{0,1} target design."""
    dataset = load_jobs(paths or JobsPaths.from_directory(data_dir), seed=seed)
    rct = dataset.covariates[dataset.mask(Split.RCT)]
    target = TargetDesign(covariates=rct, interventions=np.array([[0.0], [1.0]]))
    return Problem(name='jobs', dataset=dataset, target_design=target)


__all__ = [
    'FEATURES',
    'transform_earnings',
    'earnings',
    'read_nber_table',
    'JobsPaths',
    'load_jobs',
    'make_jobs_problem',
]
