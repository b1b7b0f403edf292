"""
Anisotropic dyadic partitions of the unit cube
Cell location, mass and count accounting, small-cell merging, and the
boundary-layer mass of internal cell faces.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ContractError, DomainError

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Resolution:
    """Per-coordinate dyadic depth m; coordinate j is cut into 2^m_j intervals."""
    m: Tuple[int, ...]

    def __post_init__(self):
        depths = tuple(int(v) for v in self.m)
        if any(v < 0 for v in depths):
            raise ContractError(f"Resolution depths must be nonnegative, got {depths}")
        object.__setattr__(self, 'm', depths)

    @property
    def dims(self) -> int:
        return len(self.m)

    @property
    def total(self) -> int:
        return int(sum(self.m))

    @property
    def cell_count(self) -> int:
        return 2 ** self.total

    @property
    def sides(self) -> Tuple[int, ...]:
        return tuple(2 ** v for v in self.m)


class DyadicPartition:
    """
    Product of dyadic interval grids on [0,1]^d.

    Intervals are left-closed, right-open except the last one per
    coordinate, which also contains 1.
    """

    def __init__(self, resolution: Union[Resolution, Sequence[int]]):
        self.resolution = resolution if isinstance(resolution, Resolution) else Resolution(tuple(resolution))

    def __repr__(self) -> str:
        return f"DyadicPartition(m={self.resolution.m})"

    @property
    def dims(self) -> int:
        return self.resolution.dims

    @property
    def n_cells(self) -> int:
        return self.resolution.cell_count

    @property
    def sides(self) -> Tuple[int, ...]:
        return self.resolution.sides

    def _check_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if self.dims == 1 else pts.reshape(1, -1)
        if pts.shape[1] != self.dims:
            raise DomainError(f"Points have {pts.shape[1]} coordinates, partition has {self.dims}")
        if np.any(~np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
            raise DomainError("Points must lie in the unit cube [0, 1]^d")
        return pts

    def locate_index(self, points: np.ndarray) -> np.ndarray:
        """Multi-indices k_j = min(floor(w_j 2^m_j), 2^m_j - 1), shape (n, d)."""
        pts = self._check_points(points)
        sides = np.asarray(self.sides, dtype=float)
        if self.dims == 0:
            return np.zeros((pts.shape[0], 0), dtype=np.int64)
        idx = np.floor(pts * sides).astype(np.int64)
        return np.minimum(idx, np.asarray(self.sides, dtype=np.int64) - 1)

    def locate(self, w: Sequence[float]) -> Tuple[int, ...]:
        """Multi-index of the cell containing one point."""
        return tuple(int(k) for k in self.locate_index(np.asarray(w, dtype=float).reshape(1, -1))[0])

    def flat_index(self, multi_index: np.ndarray) -> np.ndarray:
        multi = np.atleast_2d(np.asarray(multi_index, dtype=np.int64))
        if self.dims == 0:
            return np.zeros(multi.shape[0], dtype=np.int64)
        return np.ravel_multi_index(tuple(multi.T), self.sides)

    def unravel(self, flat: Union[int, np.ndarray]) -> np.ndarray:
        flat_arr = np.atleast_1d(np.asarray(flat, dtype=np.int64))
        if self.dims == 0:
            return np.zeros((flat_arr.size, 0), dtype=np.int64)
        return np.stack(np.unravel_index(flat_arr, self.sides), axis=1)

    def locate_many(self, points: np.ndarray) -> np.ndarray:
        """Flat (row-major) cell ids of many points."""
        return self.flat_index(self.locate_index(points))

    def cell_bounds(self, flat: int) -> Tuple[np.ndarray, np.ndarray]:
        k = self.unravel(flat)[0].astype(float)
        sides = np.asarray(self.sides, dtype=float)
        return k / sides, (k + 1) / sides

    def cell_centers(self) -> np.ndarray:
        """Centers of all cells in flat order, shape (n_cells, d)."""
        multi = self.unravel(np.arange(self.n_cells)).astype(float)
        return (multi + 0.5) / np.asarray(self.sides, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {'resolution': list(self.resolution.m), 'n_cells': self.n_cells}


@dataclass
class CellAccount:
    """Per-cell target masses with observational and generated counts."""
    partition: DyadicPartition
    masses: np.ndarray
    obs_counts: np.ndarray
    gen_counts: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        self.obs_counts = np.asarray(self.obs_counts, dtype=np.int64)
        self.gen_counts = np.asarray(self.gen_counts, dtype=np.int64)
        n = self.partition.n_cells
        if self.masses.shape != (n,) or self.obs_counts.shape != (n,) or self.gen_counts.shape != (n,):
            raise ContractError(f"CellAccount arrays must have length {n}")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > MASS_TOLERANCE:
            raise ContractError(f"Cell masses must be nonnegative and sum to 1, got {self.masses.sum():.12g}")
        if np.any(self.obs_counts < 0) or np.any(self.gen_counts < 0):
            raise ContractError("Cell counts must be nonnegative")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'partition': self.partition.to_dict(),
            'masses': self.masses.tolist(),
            'obs_counts': self.obs_counts.tolist(),
            'gen_counts': self.gen_counts.tolist(),
        }


def _counts(partition: DyadicPartition, states: Optional[np.ndarray]) -> np.ndarray:
    if states is None or len(states) == 0:
        return np.zeros(partition.n_cells, dtype=np.int64)
    return np.bincount(partition.locate_many(states), minlength=partition.n_cells).astype(np.int64)


def cell_masses(
    partition: DyadicPartition,
    design: Union[str, np.ndarray] = 'uniform',
    observed_states: Optional[np.ndarray] = None,
    generated_states: Optional[np.ndarray] = None,
) -> CellAccount:
    """
    Target masses q_C for a uniform or empirical design.

    The empirical design is an (n, d) array of states; its masses are the
    normalized cell counts. Optional observed/generated states fill the
    count columns.
    """
    if isinstance(design, str):
        if design != 'uniform':
            raise ContractError(f"Unknown design '{design}'")
        masses = np.full(partition.n_cells, 2.0 ** (-partition.resolution.total))
    else:
        states = np.asarray(design, dtype=float)
        if states.size == 0:
            raise ContractError("Empirical design has no states")
        counts = _counts(partition, states)
        masses = counts / counts.sum()
    return CellAccount(
        partition,
        masses,
        _counts(partition, observed_states),
        _counts(partition, generated_states),
    )


@dataclass
class CellMergeMap:
    """Function from original cells to merged super-cells."""
    assignment: np.ndarray
    masses: np.ndarray
    obs_counts: np.ndarray
    gen_counts: np.ndarray
    fallback: bool = False

    @property
    def n_merged(self) -> int:
        return int(self.masses.size)

    def members(self, merged: int) -> np.ndarray:
        return np.nonzero(self.assignment == merged)[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'assignment': self.assignment.tolist(),
            'masses': self.masses.tolist(),
            'obs_counts': self.obs_counts.tolist(),
            'gen_counts': self.gen_counts.tolist(),
            'fallback': self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CellMergeMap':
        return cls(
            np.asarray(data['assignment'], dtype=np.int64),
            np.asarray(data['masses'], dtype=float),
            np.asarray(data['obs_counts'], dtype=np.int64),
            np.asarray(data['gen_counts'], dtype=np.int64),
            bool(data.get('fallback', False)),
        )


def _accumulate(assignment: np.ndarray, account: CellAccount, n_merged: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    masses = np.bincount(assignment, weights=account.masses, minlength=n_merged)
    obs = np.bincount(assignment, weights=account.obs_counts, minlength=n_merged).astype(np.int64)
    gen = np.bincount(assignment, weights=account.gen_counts, minlength=n_merged).astype(np.int64)
    return masses, obs, gen


def merge_small_cells(account: CellAccount, min_size: int) -> CellMergeMap:
    """
    Attach every cell with fewer than min_size observations to its nearest
    adequate cell (l1 distance between multi-indices, ties to the lower
    flat index). Super-cells are numbered by their adequate cell's index.
    """
    if min_size < 1:
        raise ContractError("min_size must be at least 1")
    n = account.partition.n_cells
    adequate = np.nonzero(account.obs_counts >= min_size)[0]
    if adequate.size == 0 or account.obs_counts.sum() < min_size:
        logger.warning(
            f"Only {int(account.obs_counts.sum())} observations for min cell size {min_size}; "
            f"collapsing {n} cells into one"
        )
        assignment = np.zeros(n, dtype=np.int64)
        masses, obs, gen = _accumulate(assignment, account, 1)
        return CellMergeMap(assignment, masses, obs, gen, fallback=True)

    multi = account.partition.unravel(np.arange(n))
    adequate_multi = multi[adequate]
    merged_id = {int(cell): k for k, cell in enumerate(adequate)}
    assignment = np.empty(n, dtype=np.int64)
    for cell in range(n):
        if cell in merged_id:
            assignment[cell] = merged_id[cell]
            continue
        distances = np.abs(adequate_multi - multi[cell]).sum(axis=1)
        # argmin returns the first minimum; adequate is sorted by flat index
        assignment[cell] = int(np.argmin(distances))
    masses, obs, gen = _accumulate(assignment, account, adequate.size)
    n_deficient = n - adequate.size
    if n_deficient:
        logger.debug(f"Merged {n_deficient} deficient cells into {adequate.size} super-cells")
    return CellMergeMap(assignment, masses, obs, gen)


def _interval_union_length(centers: np.ndarray, delta: float) -> float:
    """Length of the union of [c - delta, c + delta] clipped to [0, 1]."""
    if centers.size == 0:
        return 0.0
    lo = np.clip(np.sort(centers) - delta, 0.0, 1.0)
    hi = np.clip(np.sort(centers) + delta, 0.0, 1.0)
    total, cur_lo, cur_hi = 0.0, lo[0], hi[0]
    for a, b in zip(lo[1:], hi[1:]):
        if a <= cur_hi:
            cur_hi = max(cur_hi, b)
        else:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
    return total + (cur_hi - cur_lo)


def internal_planes(partition: DyadicPartition) -> List[np.ndarray]:
    """Internal cut positions per coordinate."""
    return [np.arange(1, side) / side for side in partition.sides]


def boundary_layer_mass(
    partition: DyadicPartition,
    delta: float,
    design: Union[str, np.ndarray] = 'uniform',
) -> float:
    """
    Design mass of points within delta of an internal cell face.

    Exact for the uniform design (independent coordinates); the empirical
    design returns the fraction of its states inside the layer.
    """
    if not 0.0 < delta <= 1.0:
        raise ContractError("delta must lie in (0, 1]")
    planes = internal_planes(partition)
    if isinstance(design, str):
        if design != 'uniform':
            raise ContractError(f"Unknown design '{design}'")
        outside = 1.0
        for cuts in planes:
            outside *= 1.0 - _interval_union_length(cuts, delta)
        return float(1.0 - outside)
    states = np.atleast_2d(np.asarray(design, dtype=float))
    if states.size == 0:
        raise ContractError("Empirical design has no states")
    inside = np.zeros(states.shape[0], dtype=bool)
    for j, cuts in enumerate(planes):
        if cuts.size:
            gaps = np.abs(states[:, j][:, None] - cuts[None, :]).min(axis=1)
            inside |= gaps < delta
    return float(inside.mean())


def boundary_layer_bound(partition: DyadicPartition, delta: float) -> float:
    """Axis-aligned plane bound 2*delta*sum_j 2^m_j."""
    return float(2.0 * delta * sum(partition.sides))


def export_cell_map(
    partition: DyadicPartition,
    merge_map: Optional[CellMergeMap] = None,
    account: Optional[CellAccount] = None,
) -> str:
    """JSON document with resolution, merge map, masses, and counts."""
    payload: Dict[str, Any] = {'partition': partition.to_dict()}
    if account is not None:
        payload['account'] = account.to_dict()
    if merge_map is not None:
        payload['merge_map'] = merge_map.to_dict()
    return json.dumps(payload)


__all__ = [
    'Resolution',
    'DyadicPartition',
    'CellAccount',
    'CellMergeMap',
    'cell_masses',
    'merge_small_cells',
    'internal_planes',
    'boundary_layer_mass',
    'boundary_layer_bound',
    'export_cell_map',
]
