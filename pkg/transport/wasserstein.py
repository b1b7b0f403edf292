"""
Wasserstein machinery for scalar and conditional laws
1-D W1, the extended (statewise) Wasserstein distance, the joint
product-cost comparison, and finite-resolution conditional IPMs.
"""

import logging
import math
from enum import Enum
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.stats import wasserstein_distance

from core.errors import CapacityError, ContractError, ShapeError
from transport.discrepancies import energy_law, ks_law
from transport.exact import MAX_SUPPORT, ProductCost, ot_exact_small
from transport.laws import ConditionalEnsemble, EmpiricalLaw

logger = logging.getLogger(__name__)

JOINT_ATOM_CAP = 16
DESIGN_TOLERANCE = 1e-12


class BaseMetric(Enum):
    """Outcome-space discrepancy used inside each cell."""
    W1 = "w1"
    ENERGY = "energy"
    KS = "ks"


def w1_sorted(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    """
    W1 between two laws.

    Scalar laws use the sorted-difference mean when both are unweighted
    with equal sizes and CDF integration otherwise. Vector outcomes go to
    the exact solver when small enough.
    """
    if a.dim != b.dim:
        raise ShapeError(f"Outcome dimensions differ: {a.dim} vs {b.dim}")
    if a.dim != 1:
        if a.size <= MAX_SUPPORT and b.size <= MAX_SUPPORT:
            return ot_exact_small(a, b).value
        raise CapacityError(
            f"p={a.dim} outcomes with supports {a.size}x{b.size} exceed the exact-solver cap of {MAX_SUPPORT}"
        )
    av, bv = a.values(), b.values()
    if not a.is_weighted and not b.is_weighted and a.size == b.size:
        return float(np.mean(np.abs(np.sort(av) - np.sort(bv))))
    return float(wasserstein_distance(av, bv, a.probabilities, b.probabilities))


def w1_arrays(x: np.ndarray, y: np.ndarray) -> float:
    """W1 between two unweighted scalar sample vectors."""
    return w1_sorted(EmpiricalLaw(np.ravel(x)), EmpiricalLaw(np.ravel(y)))


def w1_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise W1 between (S, B) sample matrices of equal width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2:
        raise ShapeError(f"Row-wise W1 needs equal (S, B) matrices, got {x.shape} and {y.shape}")
    return np.mean(np.abs(np.sort(x, axis=1) - np.sort(y, axis=1)), axis=1)


def ew1(p_ens: ConditionalEnsemble, r_ens: ConditionalEnsemble) -> float:
    """Extended Wasserstein distance: sum over states of mass * W1."""
    if not p_ens.shares_design_with(r_ens, tol=DESIGN_TOLERANCE):
        raise ContractError("ew1 needs identical state lists and masses; no diagonal coupling exists otherwise")
    terms = [e.mass * w1_sorted(e.law, f.law) for e, f in zip(p_ens, r_ens) if e.mass > 0]
    return math.fsum(terms)


def _joint_atoms(ens: ConditionalEnsemble) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    states, outcomes, weights = [], [], []
    for entry in ens:
        probs = entry.law.probabilities
        for k in range(entry.law.size):
            states.append(entry.state.coords)
            outcomes.append(entry.law.samples[k])
            weights.append(entry.mass * probs[k])
    return np.vstack(states), np.vstack(outcomes), np.asarray(weights)


def joint_product_w1(p_ens: ConditionalEnsemble, r_ens: ConditionalEnsemble) -> float:
    """W1 on W x Y with cost ||w - w'||_1 + ||y - y'||."""
    sa, ya, wa = _joint_atoms(p_ens)
    sb, yb, wb = _joint_atoms(r_ens)
    if wa.size > JOINT_ATOM_CAP or wb.size > JOINT_ATOM_CAP:
        raise CapacityError(f"Joint supports {wa.size}x{wb.size} exceed the cap of {JOINT_ATOM_CAP} atoms")
    a = EmpiricalLaw.weighted(ya, wa)
    b = EmpiricalLaw.weighted(yb, wb)
    return ot_exact_small(a, b, ProductCost(sa, sb)).value


def ew_dominates_joint_check(p_ens: ConditionalEnsemble, r_ens: ConditionalEnsemble) -> Tuple[float, float]:
    """(eW1, joint product-cost W1); the joint value never exceeds eW1."""
    ew = ew1(p_ens, r_ens)
    joint = joint_product_w1(p_ens, r_ens)
    return ew, joint


_METRICS: Dict[BaseMetric, Callable[[EmpiricalLaw, EmpiricalLaw], float]] = {
    BaseMetric.W1: w1_sorted,
    BaseMetric.ENERGY: energy_law,
    BaseMetric.KS: ks_law,
}


def _cell_mixture(ens: ConditionalEnsemble, cells: np.ndarray, cell: int, anchor: np.ndarray) -> EmpiricalLaw:
    members = [e for e, c in zip(ens, cells) if c == cell and e.mass > 0]
    if not members:
        return EmpiricalLaw(anchor.reshape(1, -1))
    samples = np.vstack([e.law.samples for e in members])
    weights = np.concatenate([e.mass * e.law.probabilities for e in members])
    return EmpiricalLaw.weighted(samples, weights)


def finite_resolution_ipm(
    p_ens: ConditionalEnsemble,
    r_ens: ConditionalEnsemble,
    partition,
    base_metric: Union[BaseMetric, str] = BaseMetric.W1,
    anchor: Optional[np.ndarray] = None,
) -> float:
    """
    Sum over cells C of q_C * d(mu_C, nu_C).

    q_C is the mass p_ens places on C. Cell mixtures pool every entry in
    the cell weighted by mass; a side with no mass in a charged cell is
    represented by the anchor Dirac.
    """
    metric = BaseMetric(base_metric) if isinstance(base_metric, str) else base_metric
    p_cells = partition.locate_many(np.vstack([s.coords for s in p_ens.states]))
    r_cells = partition.locate_many(np.vstack([s.coords for s in r_ens.states]))
    dim = p_ens.entries[0].law.dim
    anchor_point = np.zeros(dim) if anchor is None else np.asarray(anchor, dtype=float).ravel()

    q = np.bincount(p_cells, weights=p_ens.masses, minlength=partition.n_cells)
    distance = _METRICS[metric]
    terms = []
    for cell in np.nonzero(q > 0)[0]:
        mu = _cell_mixture(p_ens, p_cells, cell, anchor_point)
        nu = _cell_mixture(r_ens, r_cells, cell, anchor_point)
        terms.append(q[cell] * distance(mu, nu))
    return math.fsum(terms)


__all__ = [
    'BaseMetric',
    'JOINT_ATOM_CAP',
    'w1_sorted',
    'w1_arrays',
    'w1_rows',
    'ew1',
    'joint_product_w1',
    'ew_dominates_joint_check',
    'finite_resolution_ipm',
]
