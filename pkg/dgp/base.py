"""
Sampler and oracle interfaces shared by data generators, estimators, and metrics
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Protocol, runtime_checkable

import numpy as np

from transport.laws import EmpiricalLaw, State


@runtime_checkable
class ConditionalSampler(Protocol):
    """Anything that draws outcomes at a batch of (covariate, treatment) states."""

    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        """Return an (S, n_draws) matrix of outcome draws."""
        ...


class OutcomeOracle(ABC):
    """Exact interventional outcome law of a synthetic data-generating process."""

    @abstractmethod
    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        """(S, n_draws) draws from the true laws."""

    @abstractmethod
    def mean_states(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        """(S,) analytic conditional means."""

    def sample(self, state: State, n_draws: int, seed: int) -> EmpiricalLaw:
        X, T = state.arrays()
        draws = self.sample_states(X, T, n_draws, np.random.default_rng(seed))
        return EmpiricalLaw(draws[0])


@dataclass
class Problem:
    """A dataset with its target design and, for synthetic data, the true laws."""
    name: str
    dataset: Any
    target_design: Any
    oracle: Optional[OutcomeOracle] = None
    coefficients: Dict[str, Any] = field(default_factory=dict)


__all__ = ['ConditionalSampler', 'OutcomeOracle', 'Problem']
