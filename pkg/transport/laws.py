"""
Empirical laws and conditional ensembles
Carriers for statewise outcome distributions and their target masses
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractError, ShapeError

WEIGHT_TOLERANCE = 1e-12
MASS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class State:
    """A treatment-covariate point w = (x, t)."""
    x: Tuple[float, ...] = ()
    t: Tuple[float, ...] = ()

    @classmethod
    def of(cls, x: Sequence[float] = (), t: Sequence[float] = ()) -> 'State':
        return cls(tuple(float(v) for v in np.ravel(x)), tuple(float(v) for v in np.ravel(t)))

    @property
    def coords(self) -> np.ndarray:
        return np.asarray(self.x + self.t, dtype=float)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Covariates and treatment as single-row matrices."""
        return (
            np.asarray(self.x, dtype=float).reshape(1, -1),
            np.asarray(self.t, dtype=float).reshape(1, -1),
        )


@dataclass
class EmpiricalLaw:
    """
    Finite (optionally weighted) outcome distribution.

    samples are stored as an (n, p) matrix; weights, when given, are
    nonnegative and sum to one.
    """
    samples: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2:
            raise ShapeError(f"Samples must be a vector or (n, p) matrix, got shape {samples.shape}")
        if samples.shape[0] == 0:
            raise ContractError("EmpiricalLaw must be nonempty")
        self.samples = samples
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).ravel()
            if weights.size != samples.shape[0]:
                raise ShapeError(f"{weights.size} weights for {samples.shape[0]} samples")
            if np.any(weights < 0):
                raise ContractError("Weights must be nonnegative")
            if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE * max(1, weights.size):
                raise ContractError(f"Weights must sum to 1, got {weights.sum():.15g}")
            self.weights = weights

    @classmethod
    def weighted(cls, samples: np.ndarray, raw_weights: np.ndarray) -> 'EmpiricalLaw':
        """Normalize nonnegative raw weights and build the law."""
        raw = np.asarray(raw_weights, dtype=float).ravel()
        total = raw.sum()
        if total <= 0:
            raise ContractError("Raw weights must have positive total")
        return cls(samples, raw / total)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def is_weighted(self) -> bool:
        return self.weights is not None

    @property
    def probabilities(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.size, 1.0 / self.size)
        return self.weights

    def values(self) -> np.ndarray:
        """Scalar samples as a vector; requires p = 1."""
        if self.dim != 1:
            raise ShapeError(f"Scalar view needs p=1, law has p={self.dim}")
        return self.samples[:, 0]

    def mean(self) -> np.ndarray:
        return self.probabilities @ self.samples

    def shifted(self, offset: float) -> 'EmpiricalLaw':
        return EmpiricalLaw(self.samples + offset, None if self.weights is None else self.weights.copy())


@dataclass
class EnsembleEntry:
    state: State
    law: EmpiricalLaw
    mass: float


@dataclass
class ConditionalEnsemble:
    """
    Statewise laws with target masses (a disintegration Q(dw) mu_w(dy)).

    Masses are nonnegative and sum to one.
    """
    entries: List[EnsembleEntry] = field(default_factory=list)

    def __post_init__(self):
        normalized = []
        for entry in self.entries:
            if not isinstance(entry, EnsembleEntry):
                state, law, mass = entry
                entry = EnsembleEntry(state, law, float(mass))
            if entry.mass < 0:
                raise ContractError("Ensemble masses must be nonnegative")
            normalized.append(entry)
        self.entries = normalized
        if not self.entries:
            raise ContractError("ConditionalEnsemble must have at least one entry")
        total = float(sum(e.mass for e in self.entries))
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ContractError(f"Ensemble masses must sum to 1, got {total:.12g}")

    def __iter__(self) -> Iterator[EnsembleEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def states(self) -> List[State]:
        return [e.state for e in self.entries]

    @property
    def masses(self) -> np.ndarray:
        return np.array([e.mass for e in self.entries])

    def shares_design_with(self, other: 'ConditionalEnsemble', tol: float = MASS_TOLERANCE) -> bool:
        if len(self) != len(other):
            return False
        if self.states != other.states:
            return False
        return bool(np.all(np.abs(self.masses - other.masses) <= tol))

    def pooled(self) -> EmpiricalLaw:
        """Mass-weighted mixture of every statewise law."""
        samples = np.vstack([e.law.samples for e in self.entries])
        weights = np.concatenate([e.mass * e.law.probabilities for e in self.entries])
        return EmpiricalLaw.weighted(samples, weights)


@dataclass
class SampleSet:
    """Weighted outcome samples attached to states."""
    states: np.ndarray
    outcomes: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        outcomes = np.asarray(self.outcomes, dtype=float)
        self.outcomes = outcomes.reshape(-1, 1) if outcomes.ndim == 1 else outcomes
        if self.states.shape[0] != self.outcomes.shape[0]:
            raise ShapeError("states and outcomes must have the same number of rows")
        if self.weights is None:
            self.weights = np.ones(self.outcomes.shape[0])
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != self.outcomes.shape[0] or np.any(self.weights < 0):
            raise ContractError("weights must be nonnegative, one per sample")

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    def law(self) -> EmpiricalLaw:
        return EmpiricalLaw.weighted(self.outcomes, self.weights)

    def to_ensemble(self) -> ConditionalEnsemble:
        """Group identical states; masses proportional to summed weights."""
        groups: Dict[Tuple[float, ...], List[int]] = {}
        for i, row in enumerate(self.states):
            groups.setdefault(tuple(row.tolist()), []).append(i)
        total = self.weights.sum()
        entries = []
        for key, idx in groups.items():
            idx = np.asarray(idx)
            w = self.weights[idx]
            entries.append(EnsembleEntry(
                State.of(x=(), t=key),
                EmpiricalLaw.weighted(self.outcomes[idx], w),
                float(w.sum() / total),
            ))
        return ConditionalEnsemble(entries)


__all__ = ['State', 'EmpiricalLaw', 'EnsembleEntry', 'ConditionalEnsemble', 'SampleSet']
