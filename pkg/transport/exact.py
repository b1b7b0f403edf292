"""
Exact discrete optimal transport for small supports
Transportation simplex: north-west-corner basis, u-v duals on the basis
tree, Bland's rule for entering and leaving cells.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from core.errors import CapacityError, ContractError, ShapeError, SolverError
from transport.laws import EmpiricalLaw

logger = logging.getLogger(__name__)

MAX_SUPPORT = 64
MAX_PIVOTS = 100_000


class TransportPlan(NamedTuple):
    value: float
    plan: np.ndarray


@dataclass(frozen=True)
class EuclideanCost:
    """Cost ||y - y'|| between outcome atoms."""

    def matrix(self, a: EmpiricalLaw, b: EmpiricalLaw) -> np.ndarray:
        diff = a.samples[:, None, :] - b.samples[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))


@dataclass(frozen=True)
class ProductCost:
    """
    Cost ||w - w'||_1 + ||y - y'|| between (state, outcome) atoms.

    a_states / b_states hold one state row per atom of the matching law.
    """
    a_states: np.ndarray
    b_states: np.ndarray

    def matrix(self, a: EmpiricalLaw, b: EmpiricalLaw) -> np.ndarray:
        sa = np.atleast_2d(np.asarray(self.a_states, dtype=float))
        sb = np.atleast_2d(np.asarray(self.b_states, dtype=float))
        if sa.shape[0] != a.size or sb.shape[0] != b.size:
            raise ShapeError("ProductCost needs one state row per atom")
        state_part = np.sum(np.abs(sa[:, None, :] - sb[None, :, :]), axis=2)
        return state_part + EuclideanCost().matrix(a, b)


Cost = Union[EuclideanCost, ProductCost, str]


def _northwest_corner(supply: np.ndarray, demand: np.ndarray) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    n, m = supply.size, demand.size
    s = supply.copy()
    d = demand.copy()
    flow = np.zeros((n, m))
    basis = []
    i = j = 0
    while True:
        x = min(s[i], d[j])
        flow[i, j] = x
        basis.append((i, j))
        row_first = s[i] <= d[j]
        s[i] -= x
        d[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif row_first:
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_adjacency(basis: List[Tuple[int, int]], n: int, m: int) -> Dict[int, List[int]]:
    adjacency: Dict[int, List[int]] = {k: [] for k in range(n + m)}
    for i, j in basis:
        adjacency[i].append(n + j)
        adjacency[n + j].append(i)
    return adjacency


def _duals(basis: List[Tuple[int, int]], cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n, m = cost.shape
    adjacency = _tree_adjacency(basis, n, m)
    potential = np.full(n + m, np.nan)
    potential[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if np.isnan(potential[nxt]):
                # u_i + v_j = c_ij on basic cells
                if node < n:
                    potential[nxt] = cost[node, nxt - n] - potential[node]
                else:
                    potential[nxt] = cost[nxt, node - n] - potential[node]
                queue.append(nxt)
    if np.any(np.isnan(potential)):
        raise SolverError("Basis is not a spanning tree")
    return potential[:n], potential[n:]


def _tree_path(basis: List[Tuple[int, int]], n: int, m: int, row: int, col: int) -> List[Tuple[int, int]]:
    """Basic cells on the tree path from row node to column node, in order."""
    adjacency = _tree_adjacency(basis, n, m)
    start, goal = row, n + col
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt in adjacency[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    if goal not in parent:
        raise SolverError("No basis path closes the pivot cycle")
    path = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        r, c = (prev, node - n) if prev < n else (node, prev - n)
        path.append((r, c))
        node = prev
    path.reverse()
    return path


def transport_simplex(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray) -> TransportPlan:
    """
    Solve min <C, P> s.t. P 1 = supply, P^T 1 = demand, P >= 0.

    supply and demand must have equal totals.
    """
    supply = np.asarray(supply, dtype=float).ravel()
    demand = np.asarray(demand, dtype=float).ravel()
    cost = np.asarray(cost, dtype=float)
    n, m = supply.size, demand.size
    if cost.shape != (n, m):
        raise ShapeError(f"Cost matrix shape {cost.shape} does not match ({n}, {m})")
    if abs(supply.sum() - demand.sum()) > 1e-9:
        raise ContractError("Supply and demand totals differ")

    flow, basis = _northwest_corner(supply, demand)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)

    for pivot in range(MAX_PIVOTS):
        u, v = _duals(basis, cost)
        reduced = cost - u[:, None] - v[None, :]
        basic = set(basis)
        entering: Optional[Tuple[int, int]] = None
        for i, j in zip(*np.nonzero(reduced < -tol)):
            if (int(i), int(j)) not in basic:
                entering = (int(i), int(j))
                break
        if entering is None:
            value = math.fsum((flow * cost).ravel())
            logger.debug(f"Transport simplex optimal after {pivot} pivots: value={value:.12g}")
            return TransportPlan(value, flow)

        ei, ej = entering
        path = _tree_path(basis, n, m, ei, ej)
        # path alternates: first cell shares the entering row, so it loses flow
        losing = path[0::2]
        gaining = path[1::2]
        theta = min(flow[c] for c in losing)
        leaving = min(c for c in losing if flow[c] <= theta + tol)

        for c in losing:
            flow[c] -= theta
        for c in gaining:
            flow[c] += theta
        flow[ei, ej] += theta
        flow[leaving] = 0.0
        flow[flow < 0] = 0.0

        basis.remove(leaving)
        basis.append(entering)

    raise SolverError(f"Transport simplex did not converge in {MAX_PIVOTS} pivots")


def _resolve_cost(cost: Cost):
    if isinstance(cost, str):
        if cost != 'euclidean':
            raise ContractError(f"Unknown cost '{cost}'; pass 'euclidean' or a ProductCost")
        return EuclideanCost()
    return cost


def ot_exact_small(a: EmpiricalLaw, b: EmpiricalLaw, cost: Cost = 'euclidean') -> TransportPlan:
    """Exact W1 between two small discrete laws with its optimal coupling."""
    if a.size > MAX_SUPPORT or b.size > MAX_SUPPORT:
        raise CapacityError(f"Supports {a.size}x{b.size} exceed the exact-solver cap of {MAX_SUPPORT}")
    if a.dim != b.dim:
        raise ShapeError(f"Outcome dimensions differ: {a.dim} vs {b.dim}")
    matrix = _resolve_cost(cost).matrix(a, b)
    return transport_simplex(a.probabilities, b.probabilities, matrix)


__all__ = [
    'MAX_SUPPORT',
    'TransportPlan',
    'EuclideanCost',
    'ProductCost',
    'transport_simplex',
    'ot_exact_small',
]
