"""
Optimal transport components: empirical laws, exact solvers, Wasserstein distances
"""

from transport.laws import State, EmpiricalLaw, EnsembleEntry, ConditionalEnsemble, SampleSet
from transport.exact import TransportPlan, EuclideanCost, ProductCost, ot_exact_small, transport_simplex
from transport.discrepancies import energy_law, ks_law
from transport.wasserstein import (
    BaseMetric,
    w1_sorted,
    w1_arrays,
    w1_rows,
    ew1,
    joint_product_w1,
    ew_dominates_joint_check,
    finite_resolution_ipm,
)

__all__ = [
    'State', 'EmpiricalLaw', 'EnsembleEntry', 'ConditionalEnsemble', 'SampleSet',
    'TransportPlan', 'EuclideanCost', 'ProductCost', 'ot_exact_small', 'transport_simplex',
    'energy_law', 'ks_law', 'BaseMetric', 'w1_sorted', 'w1_arrays', 'w1_rows', 'ew1',
    'joint_product_w1', 'ew_dominates_joint_check', 'finite_resolution_ipm',
]
