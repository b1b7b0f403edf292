"""
Soft gates over dyadic cells
Gate families, the integrated gate discrepancy eta_rho, and the
soft-to-hard cell transfer check.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Sequence, Union

import numpy as np

from core.errors import ContractError
from partition.dyadic import DyadicPartition
from transport.laws import EmpiricalLaw
from transport.wasserstein import w1_sorted

logger = logging.getLogger(__name__)

GATE_TOLERANCE = 1e-6

# maps an (n, d) batch of states to an (n, K) matrix of gate weights
Gates = Callable[[np.ndarray], np.ndarray]


def indicator_gates(partition: DyadicPartition) -> Gates:
    """Hard cell indicators r_k(w)."""
    def gates(points: np.ndarray) -> np.ndarray:
        cells = partition.locate_many(points)
        out = np.zeros((cells.size, partition.n_cells))
        out[np.arange(cells.size), cells] = 1.0
        return out
    return gates


def uniform_gates(partition: DyadicPartition) -> Gates:
    """Constant 1/K gates."""
    def gates(points: np.ndarray) -> np.ndarray:
        n = np.atleast_2d(points).shape[0]
        return np.full((n, partition.n_cells), 1.0 / partition.n_cells)
    return gates


def softmax_gates(partition: DyadicPartition, temperature: float) -> Gates:
    """
    Softmax over negative side-scaled squared distances to cell centers.

    As temperature goes to 0 the gates converge to the cell indicators.
    """
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    centers = partition.cell_centers()
    sides = np.asarray(partition.sides, dtype=float)

    def gates(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scaled = (pts[:, None, :] - centers[None, :, :]) * sides[None, None, :]
        logits = -np.sum(scaled * scaled, axis=2) / temperature
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        return weights / weights.sum(axis=1, keepdims=True)
    return gates


class GateDiscrepancy(NamedTuple):
    eta: float
    stderr: float


def _design_sample(partition: DyadicPartition, design: Union[str, np.ndarray], n_mc: int,
                   rng: np.random.Generator) -> np.ndarray:
    if isinstance(design, str):
        if design != 'uniform':
            raise ContractError(f"Unknown design '{design}'")
        return rng.random((n_mc, partition.dims))
    states = np.atleast_2d(np.asarray(design, dtype=float))
    if states.size == 0:
        raise ContractError("Empirical design has no states")
    return states[rng.integers(0, states.shape[0], size=n_mc)]


def _checked_gates(gates: Gates, points: np.ndarray, n_cells: int) -> np.ndarray:
    gamma = np.asarray(gates(points), dtype=float)
    if gamma.shape != (points.shape[0], n_cells):
        raise ContractError(f"Gates returned shape {gamma.shape}, expected {(points.shape[0], n_cells)}")
    if np.any(gamma < -GATE_TOLERANCE) or np.any(np.abs(gamma.sum(axis=1) - 1.0) > GATE_TOLERANCE):
        raise ContractError("Gates must be nonnegative and sum to 1 at every point")
    return gamma


def soft_gate_discrepancy(
    partition: DyadicPartition,
    gates: Gates,
    design: Union[str, np.ndarray] = 'uniform',
    n_mc: int = 100_000,
    seed: int = 0,
) -> GateDiscrepancy:
    """Monte Carlo estimate of E_Q sum_k |gamma_k(W) - r_k(W)| with its standard error."""
    if n_mc < 2:
        raise ContractError("n_mc must be at least 2")
    rng = np.random.default_rng(seed)
    points = _design_sample(partition, design, n_mc, rng)
    gamma = _checked_gates(gates, points, partition.n_cells)
    hard = indicator_gates(partition)(points)
    per_point = np.abs(gamma - hard).sum(axis=1)
    return GateDiscrepancy(float(per_point.mean()), float(per_point.std(ddof=1) / np.sqrt(n_mc)))


@dataclass
class GateTransferCheck:
    """Soft-mixture transfer error against diam(Y) * eta."""
    lhs: float
    eta: float
    stderr: float
    diameter: float

    @property
    def bound(self) -> float:
        return self.diameter * self.eta

    def holds(self, slack_stderr: float = 3.0) -> bool:
        return self.lhs <= self.bound + slack_stderr * self.diameter * self.stderr


def soft_gate_transfer_check(
    partition: DyadicPartition,
    gates: Gates,
    experts: Sequence[EmpiricalLaw],
    design: Union[str, np.ndarray] = 'uniform',
    n_mc: int = 50_000,
    seed: int = 0,
) -> GateTransferCheck:
    """
    Compare the soft-gated model with the hard cell model.

    The soft model's mixture over cell C_k is sum_j a_kj nu_j with
    a_kj = E[gamma_j(W) 1{W in C_k}] / q_k; the hard model's is nu_k.
    Returns sum_k q_k W1(soft mixture_k, nu_k) with the eta estimate
    drawn from the same Monte Carlo sample.
    """
    if len(experts) != partition.n_cells:
        raise ContractError(f"Need one expert law per cell ({partition.n_cells}), got {len(experts)}")
    rng = np.random.default_rng(seed)
    points = _design_sample(partition, design, n_mc, rng)
    gamma = _checked_gates(gates, points, partition.n_cells)
    cells = partition.locate_many(points)
    hard = np.zeros_like(gamma)
    hard[np.arange(cells.size), cells] = 1.0
    per_point = np.abs(gamma - hard).sum(axis=1)

    all_values = np.concatenate([e.values() for e in experts])
    diameter = float(all_values.max() - all_values.min())

    lhs_terms: List[float] = []
    for k in range(partition.n_cells):
        in_cell = cells == k
        q_k = in_cell.mean()
        if q_k == 0:
            continue
        a_k = gamma[in_cell].mean(axis=0)
        samples = np.concatenate([e.values() for e in experts])
        weights = np.concatenate([a_k[j] * e.probabilities for j, e in enumerate(experts)])
        mixture = EmpiricalLaw.weighted(samples, weights)
        lhs_terms.append(q_k * w1_sorted(mixture, experts[k]))
    return GateTransferCheck(
        lhs=float(np.sum(lhs_terms)),
        eta=float(per_point.mean()),
        stderr=float(per_point.std(ddof=1) / np.sqrt(n_mc)),
        diameter=diameter,
    )


__all__ = [
    'Gates',
    'indicator_gates',
    'uniform_gates',
    'softmax_gates',
    'GateDiscrepancy',
    'soft_gate_discrepancy',
    'GateTransferCheck',
    'soft_gate_transfer_check',
]
