"""
Rate exponents and the resolution schedule used to plan rate studies
"""

from typing import List, NamedTuple, Sequence

import numpy as np

from core.errors import ContractError


class RateExponents(NamedTuple):
    a: float
    r_aniso: float
    level: float
    resolution: List[int]


def one_state_exponent(beta: float, d_u: int) -> float:
    """a = min((beta + 1)/(2 beta + d_U), 1/2)."""
    if beta <= 0:
        raise ContractError(f"beta must be positive, got {beta}")
    if d_u < 1:
        raise ContractError(f"d_U must be at least 1, got {d_u}")
    return min((beta + 1.0) / (2.0 * beta + d_u), 0.5)


def anisotropic_exponent(a: float, alphas: Sequence[float]) -> float:
    """r = (1/a + sum_j 1/alpha_j)^-1."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0) or np.any(alphas > 1):
        raise ContractError("Smoothness exponents alpha_j must lie in (0, 1]")
    return 1.0 / (1.0 / a + float(np.sum(1.0 / alphas)))


def resolution_schedule(a: float, alphas: Sequence[float], n: int, kappa: float = 1.0) -> List[int]:
    """m_j = floor(l_n / alpha_j) with l_n = a log2(kappa n) / (1 + a sum_j 1/alpha_j), clipped at 0."""
    alphas = np.asarray(alphas, dtype=float)
    level = _level(a, alphas, n, kappa)
    return [int(np.floor(level / alpha)) for alpha in alphas]


def _level(a: float, alphas: np.ndarray, n: int, kappa: float) -> float:
    if n < 1 or not 0.0 < kappa <= 1.0:
        raise ContractError("n must be positive and kappa in (0, 1]")
    inv_sum = float(np.sum(1.0 / alphas)) if alphas.size else 0.0
    return max(a * np.log2(kappa * n) / (1.0 + a * inv_sum), 0.0)


def rate_exponents(beta: float, d_u: int, alphas: Sequence[float], n: int = 1, kappa: float = 1.0) -> RateExponents:
    """Exponent a, the anisotropic exponent and the resolution at sample size n."""
    a = one_state_exponent(beta, d_u)
    alpha_arr = np.asarray(alphas, dtype=float)
    r = anisotropic_exponent(a, alpha_arr) if alpha_arr.size else a
    level = _level(a, alpha_arr, n, kappa)
    return RateExponents(a, r, level, resolution_schedule(a, alpha_arr, n, kappa))


__all__ = [
    'RateExponents',
    'one_state_exponent',
    'anisotropic_exponent',
    'resolution_schedule',
    'rate_exponents',
]
