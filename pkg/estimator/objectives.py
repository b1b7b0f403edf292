"""
Stratified adversarial objectives on fixed critics and generators
Cell-normalized averages, the finite-state and continuous objectives, and
exact 1-D Kantorovich potentials for checking them against W1.
"""

import math
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from core.errors import ContractError, ShapeError

MASS_TOLERANCE = 1e-9

Critic = Callable[[np.ndarray], np.ndarray]


def _critic_values(critic: Critic, y: np.ndarray) -> np.ndarray:
    return np.asarray(critic(np.asarray(y, dtype=float).reshape(-1, 1)), dtype=float).ravel()


def anchored(critic: Critic, anchor: float) -> Critic:
    """D(y) - D(y0)."""
    offset = float(_critic_values(critic, np.array([anchor]))[0])
    return lambda y: _critic_values(critic, y) - offset


def cell_obs_average(samples: np.ndarray, critic: Critic, anchor: float = 0.0) -> float:
    """
    Mean of the anchored critic over a cell's observed outcomes; 0 for an
    empty cell. The sum is exactly rounded, so the order of the samples
    within the cell does not change the result.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        return 0.0
    return math.fsum(anchored(critic, anchor)(samples)) / samples.size


def cell_gen_average(generated: np.ndarray, critic: Critic, anchor: float = 0.0) -> float:
    """Mean of the anchored critic over a cell's generated draws; 0 for an empty cell."""
    return cell_obs_average(generated, critic, anchor)


def _check_masses(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if np.any(q < 0) or abs(q.sum() - 1.0) > MASS_TOLERANCE:
        raise ContractError(f"Masses must be nonnegative and sum to 1, got sum {q.sum():.12g}")
    return q


def objective_discrete(
    generator: Callable[[int, np.ndarray], np.ndarray],
    critics: Sequence[Critic],
    observed: Sequence[np.ndarray],
    q: np.ndarray,
    noise: Sequence[np.ndarray],
    anchor: float = 0.0,
) -> float:
    """
    sum_j q_j [mean_obs_j D_j - mean_l D_j(g_j(U_lj))].

    generator(j, U) maps a latent batch to outcomes at state j.
    """
    q = _check_masses(q)
    M = q.size
    if len(critics) != M or len(observed) != M or len(noise) != M:
        raise ContractError(f"Need {M} critics, observed samples and noise batches")
    terms = []
    for j in range(M):
        if q[j] == 0:
            continue
        generated = np.asarray(generator(j, noise[j]), dtype=float).ravel()
        gap = cell_obs_average(observed[j], critics[j], anchor) - cell_gen_average(generated, critics[j], anchor)
        terms.append(q[j] * gap)
    return math.fsum(terms)


def objective_continuous(
    generator: Callable[[np.ndarray, np.ndarray], np.ndarray],
    critics: Union[Sequence[Critic], Mapping[int, Critic]],
    obs_states: np.ndarray,
    obs_outcomes: np.ndarray,
    cell_of: Callable[[np.ndarray], np.ndarray],
    target_states: np.ndarray,
    noise: np.ndarray,
    masses: np.ndarray,
    anchor: float = 0.0,
) -> float:
    """
    sum_C q_C [mean_obs_C D_C - mean_gen_C D_C].

    Generated draws are generator(target_states, noise) at the target
    design states; both averages are normalized within each cell, and
    empty sides fall back to the anchor.
    """
    q = _check_masses(masses)
    obs_outcomes = np.asarray(obs_outcomes, dtype=float).ravel()
    obs_cells = np.asarray(cell_of(obs_states))
    target_cells = np.asarray(cell_of(target_states))
    if obs_cells.size != obs_outcomes.size:
        raise ShapeError("obs_states and obs_outcomes must have the same number of rows")
    generated = np.asarray(generator(target_states, noise), dtype=float).ravel()
    if generated.size != target_cells.size:
        raise ShapeError("Generator must return one outcome per target state")
    terms = []
    for cell in np.nonzero(q > 0)[0]:
        critic = critics[int(cell)]
        gap = (cell_obs_average(obs_outcomes[obs_cells == cell], critic, anchor)
               - cell_gen_average(generated[target_cells == cell], critic, anchor))
        terms.append(q[cell] * gap)
    return math.fsum(terms)


def kantorovich_potential_1d(a: np.ndarray, b: np.ndarray, anchor: float = 0.0) -> Critic:
    """
    Optimal 1-Lipschitz potential for W1(a, b) between scalar samples.

    f' = sign(F_b - F_a) between merged support points and f(anchor) = 0,
    so mean f(a) - mean f(b) equals W1(a, b).
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        return lambda y: np.zeros(np.asarray(y).size)
    knots = np.unique(np.concatenate([a, b, [anchor]]))
    left = knots[:-1]
    F_a = np.searchsorted(a, left, side='right') / a.size
    F_b = np.searchsorted(b, left, side='right') / b.size
    slopes = np.sign(F_b - F_a)
    values = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    values -= np.interp(anchor, knots, values)
    return lambda y: np.interp(np.asarray(y, dtype=float).ravel(), knots, values)


__all__ = [
    'anchored',
    'cell_obs_average',
    'cell_gen_average',
    'objective_discrete',
    'objective_continuous',
    'kantorovich_potential_1d',
]
