"""
TCGA-style semi-synthetic dose-response generator
Three treatment arms with a continuous dosage and a two-normal mixture
outcome law centered on eta_a(z, d).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy.special import expit, softmax

from core.errors import ContractError, DomainError, ShapeError
from dgp.base import OutcomeOracle, Problem
from dgp.covariates import tcga_like_covariates
from dgp.dataset import Dataset, Split, StateEncoder, Standardizer, TargetDesign, TreatmentKind, stratified_split
from dgp.ihdp import MixtureParams
from transport.laws import EmpiricalLaw

logger = logging.getLogger(__name__)

N_ARMS = 3
SCORE_DIM = 8
TCGA_SPLIT = (0.64, 0.16)
DOSE_GRID = np.linspace(0.0, 1.0, 21)

# coefficient standard deviations before the 1/sqrt(d_z) scaling
_SCALES = {'v': 0.9, 'r': 1.0, 'theta': 0.55, 'q': 0.75, 's': 0.70, 'u1': 0.65, 'u2': 0.65}


@dataclass
class TcgaCoeffs:
    """Arm-indexed coefficients; vectors are stacked as (3, d_z)."""
    v: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    s: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    iota: np.ndarray
    gamma_a: float = 1.0
    alpha_d: float = 8.0

    @classmethod
    def draw(cls, rng: np.random.Generator, d_z: int = SCORE_DIM) -> 'TcgaCoeffs':
        vectors = {name: rng.normal(0.0, sd / np.sqrt(d_z), (N_ARMS, d_z)) for name, sd in _SCALES.items()}
        return cls(
            **vectors,
            lam=rng.uniform(0.8, 1.5, N_ARMS),
            rho=rng.uniform(-0.3, 0.3, N_ARMS),
            iota=rng.normal(0.0, 0.12, N_ARMS),
        )

    @classmethod
    def zeros(cls, d_z: int = SCORE_DIM, lam: float = 1.0) -> 'TcgaCoeffs':
        vectors = {name: np.zeros((N_ARMS, d_z)) for name in _SCALES}
        return cls(**vectors, lam=np.full(N_ARMS, lam), rho=np.zeros(N_ARMS), iota=np.zeros(N_ARMS))

    @property
    def dim(self) -> int:
        return self.v.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TcgaCoeffs':
        return cls(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in data.items()})


def _split_treatment(T: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    T = np.asarray(T, dtype=float).reshape(n, -1)
    if T.shape[1] != 2:
        raise ShapeError(f"TCGA treatments need columns (arm, dosage), got {T.shape[1]} columns")
    arm, dose = T[:, 0], T[:, 1]
    if not np.all(np.isin(arm, (1.0, 2.0, 3.0))):
        raise DomainError("TCGA arm must be 1, 2 or 3")
    if np.any(dose < 0.0) or np.any(dose > 1.0) or np.any(~np.isfinite(dose)):
        raise DomainError("TCGA dosage must lie in [0, 1]")
    return arm.astype(int) - 1, dose


def optimal_dose(coeffs: TcgaCoeffs, Z: np.ndarray, arm: np.ndarray) -> np.ndarray:
    """d*_a(z) for zero-based arm indices."""
    return expit(np.einsum('ij,ij->i', Z, coeffs.r[arm]))


def tcga_params(coeffs: TcgaCoeffs, Z: np.ndarray, T: np.ndarray) -> MixtureParams:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != coeffs.dim:
        raise ShapeError(f"TCGA scores need {coeffs.dim} columns, got {Z.shape[1]}")
    arm, d = _split_treatment(T, Z.shape[0])

    def linear(b: np.ndarray) -> np.ndarray:
        return np.einsum('ij,ij->i', Z, b[arm])

    d_star = optimal_dose(coeffs, Z, arm)
    eta = coeffs.iota[arm] + linear(coeffs.theta) - coeffs.lam[arm] * (d - d_star) ** 2 \
        + coeffs.rho[arm] * np.sin(2 * np.pi * d)
    return MixtureParams(
        mean=eta,
        pi=expit(linear(coeffs.q) + 2 * d - 1),
        delta=0.5 + 0.5 * np.tanh(linear(coeffs.s) + d),
        sigma1=0.1 + 0.3 * expit(linear(coeffs.u1) + d),
        sigma2=0.2 + 0.5 * expit(linear(coeffs.u2) - d),
    )


def tcga_draws(coeffs: TcgaCoeffs, Z: np.ndarray, T: np.ndarray, n_draws: int,
               rng: np.random.Generator) -> np.ndarray:
    if n_draws < 1:
        raise ContractError("n_draws must be positive")
    p = tcga_params(coeffs, Z, T)
    shape = (p.mean.size, n_draws)
    first = rng.random(shape) < p.pi[:, None]
    upper = (p.mean + (1 - p.pi) * p.delta)[:, None] + p.sigma1[:, None] * rng.standard_normal(shape)
    lower = (p.mean - p.pi * p.delta)[:, None] + p.sigma2[:, None] * rng.standard_normal(shape)
    return np.where(first, upper, lower)


def tcga_sample(coeffs: TcgaCoeffs, z: np.ndarray, a: int, d: float, n_draws: int, seed: int) -> EmpiricalLaw:
    """Draws of Y(a, d) | z."""
    draws = tcga_draws(coeffs, np.reshape(z, (1, -1)), np.array([[a, d]], dtype=float), n_draws,
                       np.random.default_rng(seed))
    return EmpiricalLaw(draws[0])


def arm_probabilities(coeffs: TcgaCoeffs, Z: np.ndarray) -> np.ndarray:
    """(n, 3) softmax assignment probabilities."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return softmax(coeffs.gamma_a * Z @ coeffs.v.T, axis=1)


def tcga_assign(coeffs: TcgaCoeffs, z: np.ndarray, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Arms in {1, 2, 3} and dosages from Beta(1 + alpha d*, 1 + alpha (1 - d*))."""
    return _assign(coeffs, np.atleast_2d(np.asarray(z, dtype=float)), np.random.default_rng(seed))


def _assign(coeffs: TcgaCoeffs, Z: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    probs = arm_probabilities(coeffs, Z)
    cumulative = probs.cumsum(axis=1)
    arm = np.minimum((rng.random((Z.shape[0], 1)) > cumulative).sum(axis=1), N_ARMS - 1)
    d_star = optimal_dose(coeffs, Z, arm)
    dose = rng.beta(1 + coeffs.alpha_d * d_star, 1 + coeffs.alpha_d * (1 - d_star))
    return arm + 1, dose


class TcgaOracle(OutcomeOracle):
    """Evaluates the law at model covariates through the stored score map."""

    def __init__(self, coeffs: TcgaCoeffs, score_columns: slice = slice(None)):
        self.coeffs = coeffs
        self.score_columns = score_columns

    def _scores(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float))[:, self.score_columns]

    def sample_states(self, X, T, n_draws, rng):
        return tcga_draws(self.coeffs, self._scores(X), T, n_draws, rng)

    def mean_states(self, X, T):
        return tcga_params(self.coeffs, self._scores(X), T).mean


def make_tcga_problem(seed: int, n_units: int = 2000, n_genes: int = 400,
                      model_features: str = 'scores') -> Problem:
    """
    One TCGA repetition on tcga-like covariates.

    Scores are standardized with training statistics. With
    model_features='scores' the model sees the 8 scores; with 'genes' it
    sees the standardized expression features followed by the scores.
    """
    if model_features not in ('scores', 'genes'):
        raise ContractError(f"model_features must be 'scores' or 'genes', got '{model_features}'")
    rng = np.random.default_rng(seed)
    cov = tcga_like_covariates(n_units, seed=int(rng.integers(2**31)), n_genes=n_genes)
    raw_scores = cov.features @ cov.projection

    # splits depend only on the unit index, so draw them before assignment
    splits = stratified_split(np.zeros(n_units), TCGA_SPLIT, rng)
    train = splits == Split.TRAIN.value
    score_std = Standardizer.fit(raw_scores, train, range(SCORE_DIM))
    Z = score_std.transform(raw_scores)

    coeffs = TcgaCoeffs.draw(rng)
    arm, dose = _assign(coeffs, Z, rng)
    T = np.column_stack([arm, dose])
    y = tcga_draws(coeffs, Z, T, 1, rng)[:, 0]

    if model_features == 'scores':
        X, names, score_slice = Z, [f"score{j + 1}" for j in range(SCORE_DIM)], slice(None)
    else:
        gene_std = Standardizer.fit(cov.features, train, range(n_genes))
        X = np.hstack([gene_std.transform(cov.features), Z])
        names = [f"gene{j + 1}" for j in range(n_genes)] + [f"score{j + 1}" for j in range(SCORE_DIM)]
        score_slice = slice(n_genes, n_genes + SCORE_DIM)

    dataset = Dataset(
        name='tcga',
        covariates=X,
        treatments=T,
        outcomes=y,
        splits=splits,
        encoder=StateEncoder(TreatmentKind.ARM_DOSAGE, n_arms=N_ARMS),
        feature_names=names,
        standardizer=score_std,
        metadata={'seed': seed, 'model_features': model_features, 'coefficients': coeffs.to_dict()},
    )
    interventions = np.array([[a, d] for a in range(1, N_ARMS + 1) for d in DOSE_GRID])
    target = TargetDesign(covariates=X[dataset.mask(Split.TEST)], interventions=interventions)
    logger.info(
        f"Built TCGA problem: {n_units} units, arm counts {np.bincount(arm, minlength=N_ARMS + 1)[1:].tolist()}",
        extra={'extra_data': {'seed': seed, 'model_features': model_features}},
    )
    return Problem(name='tcga', dataset=dataset, target_design=target,
                   oracle=TcgaOracle(coeffs, score_slice), coefficients={'tcga': coeffs.to_dict()})


__all__ = [
    'TcgaCoeffs',
    'DOSE_GRID',
    'optimal_dose',
    'tcga_params',
    'tcga_draws',
    'tcga_sample',
    'arm_probabilities',
    'tcga_assign',
    'TcgaOracle',
    'make_tcga_problem',
]
