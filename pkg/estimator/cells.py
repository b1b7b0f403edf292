"""
Cell maps: from (covariate, treatment) states to merged dyadic cells
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from sklearn.decomposition import PCA

from config.experiment_config import CellMapConfig, CellMapKind
from core.errors import ContractError
from dgp.dataset import Dataset, Split, TargetDesign, TreatmentKind
from partition.dyadic import CellAccount, CellMergeMap, DyadicPartition, cell_masses, merge_small_cells

logger = logging.getLogger(__name__)

ARM_OFFSET = 1.0 / 6.0


def _mid_rank(sorted_values: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Training ECDF at mid-rank: (#{< v} + #{= v}/2) / n."""
    n = sorted_values.size
    below = np.searchsorted(sorted_values, values, side='left')
    upto = np.searchsorted(sorted_values, values, side='right')
    return np.clip((below + upto) / (2.0 * n), 0.0, 1.0)


@dataclass
class CellMap:
    """
    Fitted map from states to merged cells with their target masses.

    Covariate coordinates are PCA scores or named columns pushed through
    the training ECDF; treatment coordinates are t in {0, 1}, arms at
    (a - 1)/3 + 1/6 with the dosage as is, or singleton finite states.
    """
    kind: CellMapKind
    treatment_kind: TreatmentKind
    n_states: int
    columns: List[int] = field(default_factory=list)
    pca_mean: Optional[np.ndarray] = None
    pca_components: Optional[np.ndarray] = None
    ecdf: List[np.ndarray] = field(default_factory=list)
    partition: Optional[DyadicPartition] = None
    merge_map: Optional[CellMergeMap] = None
    account: Optional[CellAccount] = None

    @classmethod
    def fit(cls, config: CellMapConfig, dataset: Dataset) -> 'CellMap':
        """Fit covariate coordinates on the training split and build the partition."""
        X_train, T_train, _ = dataset.arrays(Split.TRAIN)
        if X_train.shape[0] == 0:
            raise ContractError("Cell map needs a nonempty training split")
        kind = config.kind
        treatment_kind = dataset.encoder.kind
        if kind is CellMapKind.DISCRETE or treatment_kind is TreatmentKind.FINITE_STATE:
            if kind is not CellMapKind.DISCRETE or treatment_kind is not TreatmentKind.FINITE_STATE:
                raise ContractError("Discrete cell maps pair only with finite-state treatments")
            return cls(kind, treatment_kind, dataset.encoder.n_arms)

        cell_map = cls(kind, treatment_kind, dataset.encoder.n_arms)
        scores = np.zeros((X_train.shape[0], 0))
        if kind is CellMapKind.PCA:
            pca = PCA(n_components=config.n_components).fit(X_train)
            cell_map.pca_mean = pca.mean_.copy()
            cell_map.pca_components = pca.components_.copy()
            scores = cell_map._covariate_scores(X_train)
        elif kind is CellMapKind.COLUMNS:
            missing = [c for c in config.columns if c not in dataset.feature_names]
            if missing:
                raise ContractError(f"Cell map columns {missing} are not dataset features {dataset.feature_names}")
            cell_map.columns = [dataset.feature_names.index(c) for c in config.columns]
            scores = cell_map._covariate_scores(X_train)
        cell_map.ecdf = [np.sort(scores[:, j]) for j in range(scores.shape[1])]

        expected = 1 if treatment_kind is TreatmentKind.BINARY else 2
        if len(config.treatment_resolution) != expected:
            raise ContractError(
                f"{treatment_kind.value} treatments need {expected} treatment resolution entries, "
                f"got {len(config.treatment_resolution)}"
            )
        n_cov = scores.shape[1]
        cov_res = list(config.covariate_resolution) if n_cov else []
        cell_map.partition = DyadicPartition(cov_res + list(config.treatment_resolution))
        return cell_map

    @property
    def discrete(self) -> bool:
        return self.kind is CellMapKind.DISCRETE

    def _covariate_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind is CellMapKind.PCA:
            return (X - self.pca_mean) @ self.pca_components.T
        if self.kind is CellMapKind.COLUMNS:
            return X[:, self.columns]
        return np.zeros((X.shape[0], 0))

    def coordinates(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        """Points of [0, 1]^d for the dyadic partition."""
        T = np.asarray(T, dtype=float).reshape(np.shape(T)[0], -1)
        scores = self._covariate_scores(np.asarray(X, dtype=float).reshape(T.shape[0], -1))
        cov = [_mid_rank(self.ecdf[j], scores[:, j]) for j in range(scores.shape[1])]
        if self.treatment_kind is TreatmentKind.BINARY:
            treat = [T[:, 0]]
        else:
            treat = [(T[:, 0] - 1.0) / 3.0 + ARM_OFFSET, T[:, 1]]
        return np.column_stack(cov + treat)

    def raw_cells(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        if self.discrete:
            return np.asarray(T, dtype=float).reshape(np.shape(T)[0], -1)[:, 0].astype(np.int64)
        return self.partition.locate_many(self.coordinates(X, T))

    @property
    def n_raw_cells(self) -> int:
        return self.n_states if self.discrete else self.partition.n_cells

    def cells(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        """Merged cell index of each state."""
        raw = self.raw_cells(X, T)
        if self.merge_map is None:
            return raw
        return self.merge_map.assignment[raw]

    @property
    def n_cells(self) -> int:
        return self.n_raw_cells if self.merge_map is None else self.merge_map.n_merged

    @property
    def masses(self) -> np.ndarray:
        if self.merge_map is None:
            raise ContractError("Cell map has no target masses; call build_masses first")
        return self.merge_map.masses

    def build_masses(
        self,
        design: TargetDesign,
        X_obs: np.ndarray,
        T_obs: np.ndarray,
        min_size: int,
        mc_size: int,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Target masses q_C and the merge map.

        Finite states use the exact design masses; otherwise q_C is a
        Monte Carlo estimate from mc_size design draws. Returns the design
        pool (X, T) whose cells the generated batches are drawn from.
        """
        obs_raw = self.raw_cells(X_obs, T_obs)
        if self.discrete:
            X_pool, T_pool, masses = design.grid()
            raw_masses = np.bincount(self.raw_cells(X_pool, T_pool), weights=masses, minlength=self.n_states)
            obs_counts = np.bincount(obs_raw, minlength=self.n_states)
            empty = np.nonzero((obs_counts == 0) & (raw_masses > 0))[0]
            if empty.size:
                raise ContractError(f"No training observations for target states {empty.tolist()}")
            assignment = np.arange(self.n_states, dtype=np.int64)
            gen_counts = np.bincount(self.raw_cells(X_pool, T_pool), minlength=self.n_states)
            self.merge_map = CellMergeMap(assignment, raw_masses, obs_counts, gen_counts)
            return X_pool, T_pool

        X_pool, T_pool = design.sample(mc_size, rng)
        self.account = cell_masses(
            self.partition,
            design=self.coordinates(X_pool, T_pool),
            observed_states=self.coordinates(X_obs, T_obs),
            generated_states=self.coordinates(X_pool, T_pool),
        )
        self.merge_map = merge_small_cells(self.account, min_size)
        logger.info(
            f"Cell map: {self.partition.n_cells} cells merged into {self.merge_map.n_merged}",
            extra={'extra_data': {'masses': np.round(self.merge_map.masses, 4).tolist(),
                                  'obs_counts': self.merge_map.obs_counts.tolist()}},
        )
        return X_pool, T_pool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'treatment_kind': self.treatment_kind.value,
            'n_states': self.n_states,
            'columns': self.columns,
            'pca_mean': None if self.pca_mean is None else self.pca_mean.tolist(),
            'pca_components': None if self.pca_components is None else self.pca_components.tolist(),
            'ecdf': [e.tolist() for e in self.ecdf],
            'resolution': None if self.partition is None else list(self.partition.resolution.m),
            'merge_map': None if self.merge_map is None else self.merge_map.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CellMap':
        return cls(
            kind=CellMapKind(data['kind']),
            treatment_kind=TreatmentKind(data['treatment_kind']),
            n_states=int(data['n_states']),
            columns=list(data.get('columns', [])),
            pca_mean=None if data.get('pca_mean') is None else np.asarray(data['pca_mean'], dtype=float),
            pca_components=(None if data.get('pca_components') is None
                            else np.asarray(data['pca_components'], dtype=float)),
            ecdf=[np.asarray(e, dtype=float) for e in data.get('ecdf', [])],
            partition=None if data.get('resolution') is None else DyadicPartition(data['resolution']),
            merge_map=None if data.get('merge_map') is None else CellMergeMap.from_dict(data['merge_map']),
        )


__all__ = ['CellMap']
