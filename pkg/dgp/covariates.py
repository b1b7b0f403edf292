"""
Synthetic covariate generators standing in for the real IHDP and TCGA files
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from core.errors import ContractError, DataFormatError, DataIOError

logger = logging.getLogger(__name__)

IHDP_CONTINUOUS = 6
IHDP_BINARY = 19
PROJECTION_SEED = 20_240_417
N_SCORES = 8

# prevalences of the 19 binary IHDP covariates (sex, twin, birth order, ...)
IHDP_PREVALENCE = np.array([
    0.51, 0.09, 0.36, 0.27, 0.50, 0.13, 0.14, 0.96, 0.59, 0.37,
    0.06, 0.08, 0.10, 0.10, 0.09, 0.12, 0.14, 0.21, 0.31,
])


class CovariateKind(Enum):
    GAUSSIAN_STD = "gaussian-std"
    IHDP_LIKE = "ihdp-like"
    TCGA_LIKE = "tcga-like"


@dataclass
class TcgaCovariates:
    """Expression-like features with their 8-dim score coordinates."""
    features: np.ndarray
    scores: np.ndarray
    projection: np.ndarray


def _standardize(matrix: np.ndarray) -> np.ndarray:
    std = matrix.std(axis=0, ddof=1)
    std[std == 0] = 1.0
    return (matrix - matrix.mean(axis=0)) / std


def score_projection(n_genes: int, n_scores: int = N_SCORES, seed: int = PROJECTION_SEED) -> np.ndarray:
    """Fixed (n_genes, n_scores) matrix with orthonormal columns."""
    if n_genes < n_scores:
        raise ContractError(f"Need at least {n_scores} genes for the score projection, got {n_genes}")
    gaussian = np.random.default_rng(seed).standard_normal((n_genes, n_scores))
    q, r = np.linalg.qr(gaussian)
    return q * np.sign(np.diag(r))


def tcga_like_covariates(n: int, seed: int, n_genes: int = 400, rank: int = 6) -> TcgaCovariates:
    """
    Nonnegative low-rank expression matrix, log1p and min-max scaled,
    row-normalized to unit norm, then projected to standardized scores.
    """
    if n < 2:
        raise ContractError(f"Need at least two units, got n={n}")
    rng = np.random.default_rng(seed)
    loadings = rng.gamma(shape=1.5, scale=1.0, size=(n, rank))
    programs = rng.gamma(shape=0.8, scale=2.0, size=(rank, n_genes))
    noise = rng.gamma(shape=2.0, scale=0.05, size=(n, n_genes))
    expression = np.log1p(loadings @ programs + noise)
    lo, hi = expression.min(axis=0), expression.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (expression - lo) / span
    norms = np.linalg.norm(scaled, axis=1, keepdims=True)
    features = scaled / np.where(norms > 0, norms, 1.0)
    projection = score_projection(n_genes)
    scores = _standardize(features @ projection)
    return TcgaCovariates(features=features, scores=scores, projection=projection)


def ihdp_like_covariates(n: int, seed: int) -> np.ndarray:
    """6 standard-normal columns followed by 19 Bernoulli columns."""
    if n < 2:
        raise ContractError(f"Need at least two units, got n={n}")
    rng = np.random.default_rng(seed)
    continuous = rng.standard_normal((n, IHDP_CONTINUOUS))
    binary = (rng.random((n, IHDP_BINARY)) < IHDP_PREVALENCE).astype(float)
    return np.hstack([continuous, binary])


def synthetic_covariates(
    n: int,
    d: int,
    kind: Union[CovariateKind, str] = CovariateKind.GAUSSIAN_STD,
    seed: int = 0,
) -> np.ndarray:
    """
    Covariate matrix of the requested kind.

    gaussian-std returns d standardized normal columns, ihdp-like the
    25-column surrogate, and tcga-like the standardized 8-dim scores.
    """
    kind = CovariateKind(kind) if isinstance(kind, str) else kind
    if n < 2:
        raise ContractError(f"Need at least two units, got n={n}")
    if kind is CovariateKind.GAUSSIAN_STD:
        if d < 1:
            raise ContractError(f"Need d >= 1, got {d}")
        return _standardize(np.random.default_rng(seed).standard_normal((n, d)))
    if kind is CovariateKind.IHDP_LIKE:
        return ihdp_like_covariates(n, seed)
    return tcga_like_covariates(n, seed).scores


def load_ihdp_covariates(path: Union[str, Path], n_columns: int = IHDP_CONTINUOUS + IHDP_BINARY) -> np.ndarray:
    """
    Read real IHDP covariates from a CSV file.

    The last n_columns numeric columns are taken as covariates; files
    following the common layout (treatment, outcomes, then x1..x25)
    therefore load directly.
    """
    path = Path(path)
    if not path.exists():
        raise DataIOError(f"IHDP covariate file not found: {path}. Pass a CSV with {n_columns} covariate columns.")
    frame = pd.read_csv(path, header=None)
    if not all(np.issubdtype(t, np.number) for t in frame.dtypes):
        frame = pd.read_csv(path)
    numeric = frame.select_dtypes(include=[np.number])
    if numeric.shape[1] < n_columns:
        raise DataFormatError(f"Expected at least {n_columns} numeric columns, found {numeric.shape[1]}", path=str(path))
    covariates = numeric.iloc[:, -n_columns:].to_numpy(dtype=float)
    logger.info(f"Loaded {covariates.shape[0]} IHDP covariate rows from {path}")
    return covariates


__all__ = [
    'CovariateKind',
    'IHDP_PREVALENCE',
    'TcgaCovariates',
    'score_projection',
    'tcga_like_covariates',
    'ihdp_like_covariates',
    'synthetic_covariates',
    'load_ihdp_covariates',
]
