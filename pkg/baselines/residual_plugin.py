"""
Residual plug-in baseline
A mean regressor plus a bootstrap of training residuals pooled within
treatment strata (arms, or arm-dosage cells).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from config.experiment_config import PluginConfig
from core import autodiff as ad
from core.autodiff import Tape
from core.errors import ContractError, TrainingDivergedError
from core.nn import Activation, AdamState, MlpNet, adam_step
from dgp.dataset import Dataset, Split, StateEncoder, TreatmentKind
from estimator.cells import ARM_OFFSET
from partition.dyadic import CellMergeMap, DyadicPartition, cell_masses, merge_small_cells
from transport.laws import EmpiricalLaw, State

logger = logging.getLogger(__name__)

DEFAULT_STRATA = {
    TreatmentKind.BINARY: [1],
    TreatmentKind.ARM_DOSAGE: [2, 3],
}


def _finite_state_depth(n_states: int) -> int:
    return int(np.ceil(np.log2(n_states))) if n_states > 1 else 0


def stratum_coordinates(kind: TreatmentKind, T: np.ndarray, n_states: int) -> np.ndarray:
    """Treatment part of the state mapped into [0, 1]^k."""
    T = np.asarray(T, dtype=float).reshape(np.shape(T)[0], -1)
    if kind is TreatmentKind.BINARY:
        return T[:, :1]
    if kind is TreatmentKind.ARM_DOSAGE:
        return np.column_stack([(T[:, 0] - 1.0) / 3.0 + ARM_OFFSET, T[:, 1]])
    # state j sits at the center of dyadic interval j
    return ((T[:, 0] + 0.5) / 2 ** _finite_state_depth(n_states)).reshape(-1, 1)


@dataclass
class ResidualPlugin:
    """Mean network with residual pools keyed by merged treatment stratum."""
    mean_net: MlpNet
    encoder: StateEncoder
    partition: DyadicPartition
    merge_map: CellMergeMap
    pools: Dict[int, np.ndarray] = field(default_factory=dict)
    pool_indices: Dict[int, np.ndarray] = field(default_factory=dict)

    def strata(self, T: np.ndarray) -> np.ndarray:
        coords = stratum_coordinates(self.encoder.kind, T, self.encoder.n_arms)
        return self.merge_map.assignment[self.partition.locate_many(coords)]

    def mean_states(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        return self.mean_net(self.encoder.encode(X, T))[:, 0]

    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        """mean(w) plus residuals resampled with replacement from w's pool."""
        means = self.mean_states(X, T)
        strata = self.strata(T)
        draws = np.empty((means.size, n_draws))
        for stratum in np.unique(strata):
            rows = np.nonzero(strata == stratum)[0]
            pool = self.pools[int(stratum)]
            draws[rows] = means[rows, None] + pool[rng.integers(0, pool.size, (rows.size, n_draws))]
        return draws

    def sample(self, state: State, n_draws: int, seed: int) -> EmpiricalLaw:
        X, T = state.arrays()
        return EmpiricalLaw(self.sample_states(X, T, n_draws, np.random.default_rng(seed))[0])


def _fit_mean_net(features: np.ndarray, y: np.ndarray, config: PluginConfig, rng: np.random.Generator) -> MlpNet:
    spread = float(np.std(y))
    net = MlpNet.initialize(
        [features.shape[1], *config.hidden_widths, 1], rng, Activation.RELU,
        output_shift=float(np.mean(y)), output_scale=spread if spread > 0 else 1.0,
    )
    adam = AdamState.create(net.n_params, config.learning_rate, beta1=0.9, beta2=0.999)
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, y.size, config.batch_size)
        tape = Tape()
        params = net.bind(tape)
        loss = ad.mean(ad.square(net.apply(features[idx], params) - y[idx].reshape(-1, 1)))
        if not np.isfinite(loss.value):
            raise TrainingDivergedError("Non-finite plug-in regression loss", step=step)
        net.weights = adam_step(adam, net.weights, MlpNet.flatten(tape.gradient(loss, params)))
        if step % 500 == 0:
            logger.debug(f"Plug-in regression step {step}: mse={float(loss.value):.5f}")
    return net


def fit_residual_plugin(dataset: Dataset, config: PluginConfig) -> ResidualPlugin:
    """
    Fit the mean network on the training split and pool its residuals.

    Strata default to the arms (binary), 4 x 8 arm-dosage cells, or the
    finite states. A stratum without training units takes the pool of its
    nearest nonempty stratum.
    """
    X, T, y = dataset.arrays(Split.TRAIN)
    if y.size == 0:
        raise ContractError("Residual plug-in needs a nonempty training split")
    encoder = dataset.encoder
    rng = np.random.default_rng(config.seed)
    features = encoder.encode(X, T)
    net = _fit_mean_net(features, y, config, rng)
    residuals = y - net(features)[:, 0]

    if encoder.kind is TreatmentKind.FINITE_STATE:
        resolution: List[int] = [_finite_state_depth(encoder.n_arms)]
    else:
        resolution = list(config.strata_resolution or DEFAULT_STRATA[encoder.kind])
    partition = DyadicPartition(resolution)
    coords = stratum_coordinates(encoder.kind, T, encoder.n_arms)
    account = cell_masses(partition, 'uniform', observed_states=coords)
    merge_map = merge_small_cells(account, 1)

    strata = merge_map.assignment[partition.locate_many(coords)]
    pool_indices = {int(s): np.nonzero(strata == s)[0] for s in range(merge_map.n_merged)}
    pools = {s: residuals[idx] for s, idx in pool_indices.items()}
    logger.info(
        f"Residual plug-in: {merge_map.n_merged} residual pools over {partition.n_cells} strata",
        extra={'extra_data': {'pool_sizes': {s: int(v.size) for s, v in pools.items()},
                              'train_mse': float(np.mean(residuals ** 2))}},
    )
    return ResidualPlugin(net, encoder, partition, merge_map, pools, pool_indices)


def sample_plugin(model: ResidualPlugin, state: State, n_draws: int, seed: int) -> EmpiricalLaw:
    return model.sample(state, n_draws, seed)


__all__ = [
    'ResidualPlugin',
    'stratum_coordinates',
    'fit_residual_plugin',
    'sample_plugin',
]
