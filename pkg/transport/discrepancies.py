"""
CDF-based discrepancies between weighted scalar laws
"""

from typing import Tuple

import numpy as np

from transport.laws import EmpiricalLaw


def merged_cdfs(a: EmpiricalLaw, b: EmpiricalLaw) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Right-continuous CDFs of a and b on their merged sorted support.

    Returns (support, gaps, F_a, F_b) where F_* are evaluated at every
    support point and gaps[k] = support[k+1] - support[k].
    """
    av, bv = a.values(), b.values()
    ap, bp = a.probabilities, b.probabilities
    a_order, b_order = np.argsort(av, kind='mergesort'), np.argsort(bv, kind='mergesort')
    a_sorted, b_sorted = av[a_order], bv[b_order]
    a_cum = np.concatenate(([0.0], np.cumsum(ap[a_order])))
    b_cum = np.concatenate(([0.0], np.cumsum(bp[b_order])))
    support = np.unique(np.concatenate((a_sorted, b_sorted)))
    f_a = a_cum[np.searchsorted(a_sorted, support, side='right')]
    f_b = b_cum[np.searchsorted(b_sorted, support, side='right')]
    return support, np.diff(support), f_a, f_b


def energy_law(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    """Energy distance 2*int (F_a - F_b)^2 between weighted scalar laws."""
    _, gaps, f_a, f_b = merged_cdfs(a, b)
    diff = f_a[:-1] - f_b[:-1]
    return float(2.0 * np.sum(diff * diff * gaps))


def ks_law(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    """Kolmogorov-Smirnov distance sup |F_a - F_b|."""
    _, _, f_a, f_b = merged_cdfs(a, b)
    return float(np.max(np.abs(f_a - f_b)))


__all__ = ['merged_cdfs', 'energy_law', 'ks_law']
