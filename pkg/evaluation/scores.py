"""
Sample-level scores
Every function accepts one sample vector or an (S, B) matrix whose rows
are independent samples, and reduces along the last axis.
"""

from typing import Sequence, Tuple, Union

import numpy as np
from scipy.stats import ks_2samp

from core.errors import ContractError, ShapeError

ArrayOrFloat = Union[np.ndarray, float]


def _rows(samples: np.ndarray) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        return arr.reshape(1, -1), True
    if arr.ndim != 2:
        raise ShapeError(f"Expected a sample vector or (S, B) matrix, got shape {arr.shape}")
    return arr, False


def _out(values: np.ndarray, single: bool) -> ArrayOrFloat:
    return float(values[0]) if single else values


def quantiles(samples: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    """Type-1 (inverted-CDF) empirical quantiles, shape (..., len(levels))."""
    arr = np.asarray(samples, dtype=float)
    q = np.quantile(arr, np.asarray(levels, dtype=float), axis=-1, method='inverted_cdf')
    return np.moveaxis(q, 0, -1)


def _pair_sums(sorted_rows: np.ndarray) -> np.ndarray:
    """sum_{i<j} |x_i - x_j| per row of a row-sorted matrix."""
    k = sorted_rows.shape[1]
    coeff = 2.0 * np.arange(k) - k + 1.0
    return sorted_rows @ coeff


def pair_mean_abs(samples: np.ndarray) -> ArrayOrFloat:
    """Distinct-pair mean of |Y - Y'|."""
    rows, single = _rows(samples)
    k = rows.shape[1]
    if k < 2:
        raise ContractError("Pairwise terms need at least 2 samples")
    return _out(_pair_sums(np.sort(rows, axis=1)) / (k * (k - 1) / 2.0), single)


def cross_mean_abs(a: np.ndarray, b: np.ndarray) -> ArrayOrFloat:
    """Mean of |A - B| over all pairs across a and b, row by row."""
    ra, single = _rows(a)
    rb, _ = _rows(b)
    if ra.shape[0] != rb.shape[0]:
        raise ShapeError(f"Row counts differ: {ra.shape[0]} vs {rb.shape[0]}")
    joint = np.sort(np.hstack([ra, rb]), axis=1)
    cross = _pair_sums(joint) - _pair_sums(np.sort(ra, axis=1)) - _pair_sums(np.sort(rb, axis=1))
    return _out(cross / (ra.shape[1] * rb.shape[1]), single)


def crps(samples: np.ndarray, y: ArrayOrFloat) -> ArrayOrFloat:
    """CRPS(F, y) = E|Y - y| - E|Y - Y'|/2 with the distinct-pair second term."""
    rows, single = _rows(samples)
    y = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1), (rows.shape[0],))
    first = np.mean(np.abs(rows - y[:, None]), axis=1)
    second = np.atleast_1d(pair_mean_abs(rows))
    return _out(first - 0.5 * second, single)


def expected_crps(samples: np.ndarray, targets: np.ndarray) -> ArrayOrFloat:
    """Mean CRPS of each predictive row against every target draw in the matching row."""
    rows, single = _rows(samples)
    return _out(np.atleast_1d(cross_mean_abs(rows, targets)) - 0.5 * np.atleast_1d(pair_mean_abs(rows)), single)


def energy_distance(a: np.ndarray, b: np.ndarray) -> ArrayOrFloat:
    """
    2E|A - B| - E|A - A'| - E|B - B'| with distinct pairs inside each
    sample; can be slightly negative for near-identical samples.
    """
    ra, single = _rows(a)
    rb, _ = _rows(b)
    value = (2.0 * np.atleast_1d(cross_mean_abs(ra, rb))
             - np.atleast_1d(pair_mean_abs(ra)) - np.atleast_1d(pair_mean_abs(rb)))
    return _out(value, single)


def ks_distance(a: np.ndarray, b: np.ndarray) -> ArrayOrFloat:
    """sup_z |F_a(z) - F_b(z)|; vectors go through scipy, matrices row by row."""
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a_arr.ndim == 1 and b_arr.ndim == 1:
        return float(ks_2samp(a_arr, b_arr).statistic)
    ra, _ = _rows(a_arr)
    rb, _ = _rows(b_arr)
    ka, kb = ra.shape[1], rb.shape[1]
    joint = np.hstack([ra, rb])
    steps = np.hstack([np.full(ra.shape, 1.0 / ka), np.full(rb.shape, -1.0 / kb)])
    order = np.argsort(joint, axis=1, kind='stable')
    values = np.take_along_axis(joint, order, axis=1)
    diff = np.cumsum(np.take_along_axis(steps, order, axis=1), axis=1)
    # CDFs are compared only after the last copy of a tied value
    group_end = np.ones_like(values, dtype=bool)
    group_end[:, :-1] = values[:, 1:] != values[:, :-1]
    return np.max(np.where(group_end, np.abs(diff), 0.0), axis=1)


def lower_cvar(samples: np.ndarray, alpha: float) -> ArrayOrFloat:
    """E[Y | Y <= Q(alpha)]."""
    rows, single = _rows(samples)
    q = quantiles(rows, [alpha])[:, 0]
    mask = rows <= q[:, None]
    return _out(np.sum(rows * mask, axis=1) / np.sum(mask, axis=1), single)


def upper_cvar(samples: np.ndarray, alpha: float) -> ArrayOrFloat:
    """E[Y | Y >= Q(alpha)]."""
    rows, single = _rows(samples)
    q = quantiles(rows, [alpha])[:, 0]
    mask = rows >= q[:, None]
    return _out(np.sum(rows * mask, axis=1) / np.sum(mask, axis=1), single)


def pit(samples: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """F_hat(target) for each target against its row's predictive sample."""
    rows, _ = _rows(samples)
    t = np.asarray(targets, dtype=float).reshape(rows.shape[0], -1)
    sorted_rows = np.sort(rows, axis=1)
    out = np.empty_like(t)
    for s in range(rows.shape[0]):
        out[s] = np.searchsorted(sorted_rows[s], t[s], side='right')
    return out / rows.shape[1]


def central_interval(samples: np.ndarray, coverage: float) -> Tuple[np.ndarray, np.ndarray]:
    """[Q((1 - c)/2), Q((1 + c)/2)] per row."""
    if not 0.0 < coverage < 1.0:
        raise ContractError(f"Coverage must lie in (0, 1), got {coverage}")
    rows, _ = _rows(samples)
    bounds = quantiles(rows, [(1.0 - coverage) / 2.0, (1.0 + coverage) / 2.0])
    return bounds[:, 0], bounds[:, 1]


__all__ = [
    'quantiles',
    'pair_mean_abs',
    'cross_mean_abs',
    'crps',
    'expected_crps',
    'energy_distance',
    'ks_distance',
    'lower_cvar',
    'upper_cvar',
    'pit',
    'central_interval',
]
