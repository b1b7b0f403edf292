"""
IHDP-style semi-synthetic generator
Covariates with a binary treatment and a normal / Student-t mixture
potential-outcome law whose mean is m_t(x).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.special import expit

from core.errors import ContractError, DomainError, ShapeError
from dgp.base import OutcomeOracle, Problem
from dgp.covariates import IHDP_CONTINUOUS, ihdp_like_covariates, load_ihdp_covariates
from dgp.dataset import Dataset, Split, StateEncoder, Standardizer, TargetDesign, TreatmentKind, stratified_split
from transport.laws import EmpiricalLaw

logger = logging.getLogger(__name__)

IHDP_UNITS = 747
IHDP_TREATED = 139
IHDP_DIM = 25
IHDP_SPLIT = (0.63, 0.27)


@dataclass
class IhdpCoeffs:
    """Per-repetition coefficient draw; arm-indexed vectors are stacked as (2, d)."""
    b0: np.ndarray
    b_tau: np.ndarray
    b_pi: np.ndarray
    b_delta: np.ndarray
    b_sigma: np.ndarray
    b_sigma2: np.ndarray
    nu: float = 5.0

    @classmethod
    def draw(cls, rng: np.random.Generator, d: int = IHDP_DIM, nu: float = 5.0) -> 'IhdpCoeffs':
        mean_sd = np.sqrt(1.0 / d)
        shape_sd = 2.5 / np.sqrt(d)
        return cls(
            b0=rng.normal(0.0, mean_sd, d),
            b_tau=rng.normal(0.0, mean_sd, d),
            b_pi=rng.normal(0.0, shape_sd, (2, d)),
            b_delta=rng.normal(0.0, shape_sd, (2, d)),
            b_sigma=rng.normal(0.0, shape_sd, (2, d)),
            b_sigma2=rng.normal(0.0, shape_sd, (2, d)),
            nu=nu,
        )

    @classmethod
    def zeros(cls, d: int = IHDP_DIM, nu: float = 5.0) -> 'IhdpCoeffs':
        return cls(np.zeros(d), np.zeros(d), *(np.zeros((2, d)) for _ in range(4)), nu=nu)

    @property
    def dim(self) -> int:
        return self.b0.size

    def to_dict(self) -> Dict[str, Any]:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'IhdpCoeffs':
        return cls(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in data.items()})


@dataclass
class MixtureParams:
    mean: np.ndarray
    pi: np.ndarray
    delta: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray


def _arm_index(t: np.ndarray, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(n, -1)[:, 0]
    if not np.all(np.isin(t, (0.0, 1.0))):
        raise DomainError("IHDP treatment must be 0 or 1")
    return t.astype(int)


def ihdp_params(coeffs: IhdpCoeffs, X: np.ndarray, T: np.ndarray) -> MixtureParams:
    """Mixture parameters at each (x, t) row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != coeffs.dim:
        raise ShapeError(f"IHDP covariates need {coeffs.dim} columns, got {X.shape[1]}")
    arm = _arm_index(T, X.shape[0])
    m0 = np.exp(0.2 * X @ coeffs.b0) - 1.0
    tau = 1.0 + 0.5 * np.tanh(X @ coeffs.b_tau)

    def linear(b: np.ndarray) -> np.ndarray:
        return np.einsum('ij,ij->i', X, b[arm])

    return MixtureParams(
        mean=m0 + arm * tau,
        pi=expit(linear(coeffs.b_pi)),
        delta=0.5 + 0.5 * np.tanh(linear(coeffs.b_delta)),
        sigma1=0.2 + 0.3 * expit(linear(coeffs.b_sigma)),
        sigma2=0.3 + 0.5 * expit(linear(coeffs.b_sigma2)),
    )


def _student_t(rng: np.random.Generator, nu: float, shape) -> np.ndarray:
    z = rng.standard_normal(shape)
    chi2 = rng.chisquare(nu, shape)
    return z / np.sqrt(chi2 / nu)


def ihdp_draws(coeffs: IhdpCoeffs, X: np.ndarray, T: np.ndarray, n_draws: int,
               rng: np.random.Generator) -> np.ndarray:
    """(S, n_draws) exact mixture draws."""
    if n_draws < 1:
        raise ContractError("n_draws must be positive")
    p = ihdp_params(coeffs, X, T)
    shape = (p.mean.size, n_draws)
    first = rng.random(shape) < p.pi[:, None]
    normal = (p.mean + (1 - p.pi) * p.delta)[:, None] + p.sigma1[:, None] * rng.standard_normal(shape)
    heavy = (p.mean - p.pi * p.delta)[:, None] + p.sigma2[:, None] * _student_t(rng, coeffs.nu, shape)
    return np.where(first, normal, heavy)


def ihdp_sample(coeffs: IhdpCoeffs, x: np.ndarray, t: int, n_draws: int, seed: int) -> EmpiricalLaw:
    """Draws of Y(t) | X = x."""
    draws = ihdp_draws(coeffs, np.reshape(x, (1, -1)), np.array([[t]]), n_draws, np.random.default_rng(seed))
    return EmpiricalLaw(draws[0])


class IhdpOracle(OutcomeOracle):
    def __init__(self, coeffs: IhdpCoeffs):
        self.coeffs = coeffs

    def sample_states(self, X, T, n_draws, rng):
        return ihdp_draws(self.coeffs, X, T, n_draws, rng)

    def mean_states(self, X, T):
        return ihdp_params(self.coeffs, X, T).mean


def _assign_treated(X: np.ndarray, n_treated: int, rng: np.random.Generator) -> np.ndarray:
    """Covariate-dependent selection of exactly n_treated units."""
    score = X[:, :IHDP_CONTINUOUS].sum(axis=1) / np.sqrt(IHDP_CONTINUOUS)
    weights = np.exp(0.5 * score)
    chosen = rng.choice(X.shape[0], size=n_treated, replace=False, p=weights / weights.sum())
    t = np.zeros(X.shape[0])
    t[chosen] = 1.0
    return t


def make_ihdp_problem(
    seed: int,
    covariate_path: Optional[Union[str, Path]] = None,
    treatment: Optional[np.ndarray] = None,
    n_units: int = IHDP_UNITS,
    n_treated: int = IHDP_TREATED,
    nu: float = 5.0,
) -> Problem:
    """
    One IHDP repetition: covariates, assignment, splits, standardization,
    coefficients, factual outcomes, and the test x Unif{0,1} target design.
    """
    rng = np.random.default_rng(seed)
    if covariate_path is not None:
        raw = load_ihdp_covariates(covariate_path)
    else:
        raw = ihdp_like_covariates(n_units, seed=int(rng.integers(2**31)))
    if treatment is not None:
        t = np.asarray(treatment, dtype=float).ravel()
        if t.size != raw.shape[0]:
            raise ShapeError(f"{t.size} treatments for {raw.shape[0]} covariate rows")
    else:
        if not 0 < n_treated < raw.shape[0]:
            raise ContractError(f"n_treated must be in (0, {raw.shape[0]}), got {n_treated}")
        t = _assign_treated(raw, n_treated, rng)

    splits = stratified_split(t, IHDP_SPLIT, rng)
    standardizer = Standardizer.fit(raw, splits == Split.TRAIN.value, range(IHDP_CONTINUOUS))
    X = standardizer.transform(raw)

    coeffs = IhdpCoeffs.draw(rng, d=X.shape[1], nu=nu)
    oracle = IhdpOracle(coeffs)
    y = oracle.sample_states(X, t.reshape(-1, 1), 1, rng)[:, 0]

    dataset = Dataset(
        name='ihdp',
        covariates=X,
        treatments=t.reshape(-1, 1),
        outcomes=y,
        splits=splits,
        encoder=StateEncoder(TreatmentKind.BINARY, n_arms=2),
        feature_names=[f"x{j + 1}" for j in range(X.shape[1])],
        standardizer=standardizer,
        metadata={'seed': seed, 'coefficients': coeffs.to_dict()},
    )
    target = TargetDesign(covariates=X[dataset.mask(Split.TEST)], interventions=np.array([[0.0], [1.0]]))
    logger.info(
        f"Built IHDP problem: {len(dataset)} units, {int(t.sum())} treated",
        extra={'extra_data': {'seed': seed, 'n_test': int(dataset.mask(Split.TEST).sum())}},
    )
    return Problem(name='ihdp', dataset=dataset, target_design=target, oracle=oracle,
                   coefficients={'ihdp': coeffs.to_dict()})


__all__ = [
    'IhdpCoeffs',
    'MixtureParams',
    'ihdp_params',
    'ihdp_draws',
    'ihdp_sample',
    'IhdpOracle',
    'make_ihdp_problem',
]
