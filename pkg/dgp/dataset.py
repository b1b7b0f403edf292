"""
Datasets, splits, standardization, and target designs
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.errors import ContractError, DataFormatError, DataIOError, ShapeError

logger = logging.getLogger(__name__)


class Split(Enum):
    """Split labels stored per unit."""
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"
    RCT = "rct-holdout"


class TreatmentKind(Enum):
    """How the treatment columns are laid out."""
    BINARY = "binary"              # one column t in {0, 1}
    ARM_DOSAGE = "arm-dosage"      # columns (a in {1,2,3}, d in [0,1])
    FINITE_STATE = "finite-state"  # one column j in {0, ..., M-1}


@dataclass
class StateEncoder:
    """Maps raw (covariates, treatment) rows to generator state features."""
    kind: TreatmentKind
    n_arms: int

    def encode(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(np.shape(T)[0], -1)
        T = np.asarray(T, dtype=float)
        if T.ndim == 1:
            T = T.reshape(-1, 1)
        if self.kind is TreatmentKind.BINARY:
            return np.hstack([X, T[:, :1]])
        if self.kind is TreatmentKind.ARM_DOSAGE:
            arms = T[:, 0].astype(int) - 1
            onehot = np.eye(self.n_arms)[arms]
            return np.hstack([X, onehot, T[:, 1:2]])
        onehot = np.eye(self.n_arms)[T[:, 0].astype(int)]
        return np.hstack([X, onehot])

    def width(self, n_covariates: int) -> int:
        if self.kind is TreatmentKind.BINARY:
            return n_covariates + 1
        if self.kind is TreatmentKind.ARM_DOSAGE:
            return n_covariates + self.n_arms + 1
        return n_covariates + self.n_arms

    def arms(self, T: np.ndarray) -> np.ndarray:
        """Integer arm label of each row (binary t, arm a, or state j)."""
        T = np.asarray(T, dtype=float)
        if T.ndim == 1:
            T = T.reshape(-1, 1)
        return T[:, 0].astype(int)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'n_arms': self.n_arms}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'StateEncoder':
        return cls(TreatmentKind(data['kind']), int(data['n_arms']))


@dataclass
class Standardizer:
    """Column standardization with statistics from the training split only."""
    columns: List[int]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, train_mask: np.ndarray, columns: Sequence[int]) -> 'Standardizer':
        columns = list(columns)
        train = np.asarray(X, dtype=float)[np.asarray(train_mask, dtype=bool)][:, columns]
        if train.shape[0] < 2:
            raise ContractError("Standardization needs at least two training rows")
        std = train.std(axis=0, ddof=1)
        std[std == 0] = 1.0
        return cls(columns, train.mean(axis=0), std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.array(X, dtype=float, copy=True)
        if self.columns:
            out[:, self.columns] = (out[:, self.columns] - self.mean) / self.std
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {'columns': self.columns, 'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Standardizer':
        return cls(list(data['columns']), np.asarray(data['mean'], dtype=float), np.asarray(data['std'], dtype=float))


def stratified_split(
    strata: np.ndarray,
    fractions: Sequence[float],
    rng: np.random.Generator,
    labels: Sequence[Split] = (Split.TRAIN, Split.VALID, Split.TEST),
) -> np.ndarray:
    """
    Assign split labels within each stratum.

    fractions give the leading shares; the last label takes the rest.
    """
    strata = np.asarray(strata)
    if len(fractions) != len(labels) - 1 or any(f < 0 for f in fractions) or sum(fractions) > 1.0 + 1e-12:
        raise ContractError(f"Invalid split fractions {list(fractions)} for labels {[l.value for l in labels]}")
    out = np.empty(strata.shape[0], dtype=object)
    for stratum in np.unique(strata):
        idx = np.nonzero(strata == stratum)[0]
        idx = idx[rng.permutation(idx.size)]
        bounds = np.floor(np.cumsum(fractions) * idx.size).astype(int)
        pieces = np.split(idx, bounds)
        for label, piece in zip(labels, pieces):
            out[piece] = label.value
    return out.astype(str)


@dataclass
class Dataset:
    """Observed units O_i = (X_i, T_i, Y_i) with split labels."""
    name: str
    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray
    splits: np.ndarray
    encoder: StateEncoder
    feature_names: List[str] = field(default_factory=list)
    standardizer: Optional[Standardizer] = None
    sources: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=float).ravel()
        n = self.outcomes.size
        self.covariates = np.asarray(self.covariates, dtype=float).reshape(n, -1)
        treatments = np.asarray(self.treatments, dtype=float)
        self.treatments = treatments.reshape(n, -1)
        self.splits = np.asarray(self.splits).astype(str)
        if self.splits.shape != (n,):
            raise ShapeError(f"Need one split label per unit, got {self.splits.shape} for {n} units")
        valid = {s.value for s in Split}
        unknown = set(np.unique(self.splits)) - valid
        if unknown:
            raise ContractError(f"Unknown split labels {sorted(unknown)}")
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.covariates.shape[1])]
        if self.sources is not None:
            self.sources = np.asarray(self.sources).astype(str)

    def __len__(self) -> int:
        return self.outcomes.size

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def mask(self, split: Union[Split, str]) -> np.ndarray:
        label = split.value if isinstance(split, Split) else Split(split).value
        return self.splits == label

    def indices(self, split: Union[Split, str]) -> np.ndarray:
        return np.nonzero(self.mask(split))[0]

    def arrays(self, split: Union[Split, str]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.mask(split)
        return self.covariates[m], self.treatments[m], self.outcomes[m]

    def states(self, split: Union[Split, str]) -> np.ndarray:
        X, T, _ = self.arrays(split)
        return self.encoder.encode(X, T)

    def arms(self, split: Optional[Union[Split, str]] = None) -> np.ndarray:
        T = self.treatments if split is None else self.treatments[self.mask(split)]
        return self.encoder.arms(T)

    def fingerprint(self) -> str:
        """SHA-256 over arrays and split labels."""
        digest = hashlib.sha256()
        for array in (self.covariates, self.treatments, self.outcomes):
            digest.update(np.ascontiguousarray(array, dtype=float).tobytes())
        digest.update('|'.join(self.splits.tolist()).encode())
        return digest.hexdigest()

    def _frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.covariates, columns=self.feature_names)
        for j in range(self.treatments.shape[1]):
            frame[f"treatment_{j}"] = self.treatments[:, j]
        frame['outcome'] = self.outcomes
        frame['split'] = self.splits
        if self.sources is not None:
            frame['source'] = self.sources
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write units to CSV and metadata to a JSON sidecar next to it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self._frame().to_csv(path, index=False, float_format='%.17g')
        sidecar = {
            'name': self.name,
            'encoder': self.encoder.to_dict(),
            'feature_names': self.feature_names,
            'n_treatment_columns': int(self.treatments.shape[1]),
            'standardizer': self.standardizer.to_dict() if self.standardizer else None,
            'metadata': _jsonable(self.metadata),
            'fingerprint': self.fingerprint(),
        }
        path.with_suffix('.json').write_text(json.dumps(sidecar, indent=2))
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'Dataset':
        path = Path(path)
        sidecar_path = path.with_suffix('.json')
        if not path.exists() or not sidecar_path.exists():
            raise DataIOError(f"Dataset export incomplete: need both {path} and {sidecar_path}")
        sidecar = json.loads(sidecar_path.read_text())
        frame = pd.read_csv(path)
        names = sidecar['feature_names']
        missing = [c for c in names + ['outcome', 'split'] if c not in frame.columns]
        if missing:
            raise DataFormatError(f"Dataset CSV lacks columns {missing}", path=str(path))
        treat_cols = [f"treatment_{j}" for j in range(sidecar['n_treatment_columns'])]
        std = sidecar.get('standardizer')
        return cls(
            name=sidecar['name'],
            covariates=frame[names].to_numpy(dtype=float),
            treatments=frame[treat_cols].to_numpy(dtype=float),
            outcomes=frame['outcome'].to_numpy(dtype=float),
            splits=frame['split'].to_numpy(dtype=str),
            encoder=StateEncoder.from_dict(sidecar['encoder']),
            feature_names=names,
            standardizer=Standardizer.from_dict(std) if std else None,
            sources=frame['source'].to_numpy(dtype=str) if 'source' in frame.columns else None,
            metadata=sidecar.get('metadata', {}),
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class TargetDesign:
    """
    Product design over covariate rows and interventions.

    State (x_i, t_k) carries mass covariate_weights[i] * masses[k].
    """
    covariates: np.ndarray
    interventions: np.ndarray
    masses: Optional[np.ndarray] = None
    covariate_weights: Optional[np.ndarray] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        self.interventions = np.asarray(self.interventions, dtype=float)
        if self.interventions.ndim == 1:
            self.interventions = self.interventions.reshape(-1, 1)
        self.covariates = np.asarray(self.covariates, dtype=float)
        if self.covariates.ndim == 1:
            self.covariates = self.covariates.reshape(1, -1)
        n_int = self.interventions.shape[0]
        n_x = self.covariates.shape[0]
        if n_int == 0 or n_x == 0:
            raise ContractError("TargetDesign needs at least one covariate row and one intervention")
        self.masses = np.full(n_int, 1.0 / n_int) if self.masses is None else np.asarray(self.masses, dtype=float)
        self.covariate_weights = (
            np.full(n_x, 1.0 / n_x) if self.covariate_weights is None
            else np.asarray(self.covariate_weights, dtype=float)
        )
        for name, weights in (('masses', self.masses), ('covariate_weights', self.covariate_weights)):
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
                raise ContractError(f"TargetDesign {name} must be nonnegative and sum to 1")

    @property
    def n_states(self) -> int:
        return self.covariates.shape[0] * self.interventions.shape[0]

    def grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All states, covariate-major: (X, T, masses)."""
        n_x, n_int = self.covariates.shape[0], self.interventions.shape[0]
        X = np.repeat(self.covariates, n_int, axis=0)
        T = np.tile(self.interventions, (n_x, 1))
        masses = np.outer(self.covariate_weights, self.masses).ravel()
        return X, T, masses

    def sample(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        rows = rng.choice(self.covariates.shape[0], size=n, p=self.covariate_weights)
        arms = rng.choice(self.interventions.shape[0], size=n, p=self.masses)
        return self.covariates[rows], self.interventions[arms]


__all__ = [
    'Split',
    'TreatmentKind',
    'StateEncoder',
    'Standardizer',
    'stratified_split',
    'Dataset',
    'TargetDesign',
]
