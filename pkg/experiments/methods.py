"""
Method registry
Maps each configured method name to a fitter that turns a problem into a
conditional sampler.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from baselines.ablations import train_no_cellnorm_ablation, train_pooled_ablation
from baselines.residual_plugin import fit_residual_plugin
from config.experiment_config import ExperimentConfig, MethodName
from core.errors import ContractError
from dgp.base import ConditionalSampler, Problem
from dgp.dataset import Dataset, Split, TreatmentKind
from estimator.ganice import ObjectiveKind, train
from monitoring.training_metrics import TrainingMonitor

logger = logging.getLogger(__name__)


@dataclass
class FittedMethod:
    """A fitted sampler and whatever the fitter produced along the way."""
    name: str
    sampler: ConditionalSampler
    monitor: Optional[TrainingMonitor] = None
    model: Any = None


class EmpiricalStateResampler:
    """Resamples each finite state's training outcomes."""

    def __init__(self, dataset: Dataset):
        if dataset.encoder.kind is not TreatmentKind.FINITE_STATE:
            raise ContractError("The empirical state resampler needs a finite-state dataset")
        _, T, y = dataset.arrays(Split.TRAIN)
        states = T[:, 0].astype(int)
        self.pools = {j: y[states == j] for j in range(dataset.encoder.n_arms)}
        empty = [j for j, pool in self.pools.items() if pool.size == 0]
        if empty:
            raise ContractError(f"States {empty} have no training outcomes to resample")

    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        states = np.asarray(T, dtype=float).reshape(np.shape(T)[0], -1)[:, 0].astype(int)
        draws = np.empty((states.size, n_draws))
        for j in np.unique(states):
            rows = np.nonzero(states == j)[0]
            pool = self.pools[int(j)]
            draws[rows] = pool[rng.integers(0, pool.size, (rows.size, n_draws))]
        return draws


class ConstantLawSampler:
    """Ignores the state: every state gets the pooled training outcome law."""

    def __init__(self, dataset: Dataset):
        _, _, y = dataset.arrays(Split.TRAIN)
        if y.size == 0:
            raise ContractError("The constant estimator needs training outcomes")
        self.pool = y

    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        return self.pool[rng.integers(0, self.pool.size, (np.shape(T)[0], n_draws))]


Fitter = Callable[[Problem, ExperimentConfig, int], FittedMethod]


def _adversarial(method: MethodName, trainer: Callable) -> Fitter:
    def fit(problem: Problem, config: ExperimentConfig, seed: int) -> FittedMethod:
        ganice_config = config.ganice_config(method).with_overrides({'seed': seed})
        model = trainer(ganice_config, problem.dataset, problem.target_design)
        return FittedMethod(method.value, model, model.monitor, model)
    return fit


def _train_stratified(config, dataset, design):
    return train(config, dataset, design, ObjectiveKind.STRATIFIED)


def _fit_plugin(problem: Problem, config: ExperimentConfig, seed: int) -> FittedMethod:
    model = fit_residual_plugin(problem.dataset, dataclasses.replace(config.plugin, seed=seed))
    return FittedMethod(MethodName.RESIDUAL_PLUGIN.value, model, model=model)


def _fit_oracle(problem: Problem, config: ExperimentConfig, seed: int) -> FittedMethod:
    return FittedMethod(MethodName.ORACLE.value, EmpiricalStateResampler(problem.dataset))


def _fit_constant(problem: Problem, config: ExperimentConfig, seed: int) -> FittedMethod:
    return FittedMethod(MethodName.CONSTANT.value, ConstantLawSampler(problem.dataset))


class MethodRegistry:
    """Registry of method fitters keyed by MethodName."""

    _fitters: Dict[MethodName, Fitter] = {}

    @classmethod
    def register(cls, method: MethodName, fitter: Fitter) -> None:
        cls._fitters[method] = fitter
        logger.debug(f"Registered method: {method.value}")

    @classmethod
    def fit(cls, method: Union[MethodName, str], problem: Problem, config: ExperimentConfig,
            seed: int) -> FittedMethod:
        method = MethodName(method) if isinstance(method, str) else method
        if method not in cls._fitters:
            raise ContractError(f"Unknown method: {method.value}")
        logger.info(f"Fitting {method.value} on {problem.name} (seed {seed})")
        return cls._fitters[method](problem, config, seed)

    @classmethod
    def registered(cls) -> List[str]:
        return [m.value for m in cls._fitters]


def register_all_methods() -> None:
    MethodRegistry.register(MethodName.GANICE, _adversarial(MethodName.GANICE, _train_stratified))
    MethodRegistry.register(MethodName.POOLED_ABLATION,
                            _adversarial(MethodName.POOLED_ABLATION, train_pooled_ablation))
    MethodRegistry.register(MethodName.NO_CELLNORM_ABLATION,
                            _adversarial(MethodName.NO_CELLNORM_ABLATION, train_no_cellnorm_ablation))
    MethodRegistry.register(MethodName.RESIDUAL_PLUGIN, _fit_plugin)
    MethodRegistry.register(MethodName.ORACLE, _fit_oracle)
    MethodRegistry.register(MethodName.CONSTANT, _fit_constant)


register_all_methods()


__all__ = [
    'FittedMethod',
    'EmpiricalStateResampler',
    'ConstantLawSampler',
    'MethodRegistry',
    'register_all_methods',
]
