"""
Finite-state synthetic family for rate experiments

Each state j has outcome law (g_j)_# U with U uniform on [0, 1] and a
smooth bounded pushforward g_j built from a truncated random Fourier
series. The observational design pi satisfies pi_j >= kappa * q_j.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractError, DomainError
from dgp.base import OutcomeOracle, Problem
from dgp.dataset import Dataset, Split, StateEncoder, TargetDesign, TreatmentKind
from transport.laws import ConditionalEnsemble, EmpiricalLaw, EnsembleEntry, State

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9
MEAN_GRID = 8192


def _check_masses(q: np.ndarray, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.size == 0 or np.any(q < 0) or abs(q.sum() - 1.0) > MASS_TOLERANCE:
        raise ContractError(f"{name} must be a nonempty nonnegative vector summing to 1")
    return q


def observational_design(q: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """pi = kappa * q + (1 - kappa) * Dirichlet(1, ..., 1), so pi_j >= kappa * q_j."""
    q = _check_masses(q, 'q')
    if not 0.0 < kappa <= 1.0:
        raise ContractError(f"kappa must lie in (0, 1], got {kappa}")
    return kappa * q + (1.0 - kappa) * rng.dirichlet(np.ones(q.size))


@dataclass
class FiniteStateOracle(OutcomeOracle):
    """
    True laws mu_j = (g_j)_# U.

    g_j(u) = K0 * tanh(c_j + sum_k a_jk k^-(beta + 1.5) cos(2 pi k u + phi_jk)),
    or the constant c_j when point_masses is set.
    """
    offsets: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    beta: float
    bound: float = 3.0
    point_masses: bool = False

    @property
    def n_states(self) -> int:
        return self.offsets.size

    def _decay(self) -> np.ndarray:
        k = np.arange(1, self.amplitudes.shape[1] + 1)
        return k ** -(self.beta + 1.5)

    def pushforward(self, state: np.ndarray, u: np.ndarray) -> np.ndarray:
        """g_j(u) with state indices broadcast against u."""
        state = np.asarray(state, dtype=int)
        u = np.asarray(u, dtype=float)
        if self.point_masses:
            return np.broadcast_to(self.offsets[state], np.broadcast(state, u).shape).astype(float)
        k = np.arange(1, self.amplitudes.shape[1] + 1)
        coef = self.amplitudes[state] * self._decay()
        series = np.sum(coef * np.cos(2 * np.pi * k * u[..., None] + self.phases[state]), axis=-1)
        return self.bound * np.tanh(self.offsets[state] + series)

    def lipschitz_bound(self, state: int) -> float:
        """K0 * sum_k |a_jk| * 2 pi k^-(beta + 0.5)."""
        if self.point_masses:
            return 0.0
        k = np.arange(1, self.amplitudes.shape[1] + 1)
        return float(self.bound * np.sum(np.abs(self.amplitudes[state]) * 2 * np.pi * k ** -(self.beta + 0.5)))

    def _states(self, T: np.ndarray, n: int) -> np.ndarray:
        j = np.asarray(T, dtype=float).reshape(n, -1)[:, 0]
        if np.any(j != np.round(j)) or np.any(j < 0) or np.any(j >= self.n_states):
            raise DomainError(f"State index must be an integer in [0, {self.n_states})")
        return j.astype(int)

    def sample_states(self, X, T, n_draws, rng):
        states = self._states(T, np.shape(T)[0])
        u = rng.random((states.size, n_draws))
        return self.pushforward(states[:, None], u)

    def mean_states(self, X, T):
        states = self._states(T, np.shape(T)[0])
        grid = (np.arange(MEAN_GRID) + 0.5) / MEAN_GRID
        return self.pushforward(states[:, None], grid[None, :]).mean(axis=1)


@dataclass
class FiniteStateFamily:
    """A finite-state model with target masses q and observational design pi."""
    oracle: FiniteStateOracle
    q: np.ndarray
    pi: np.ndarray
    kappa: float
    valid_fraction: float = 0.25

    @property
    def n_states(self) -> int:
        return self.q.size

    def dataset(self, n: int, seed: int) -> Dataset:
        """n training units drawn from pi plus a validation split."""
        if n < 1:
            raise ContractError(f"n must be positive, got {n}")
        rng = np.random.default_rng(seed)
        n_valid = max(int(np.ceil(self.valid_fraction * n)), self.n_states)
        total = n + n_valid
        states = rng.choice(self.n_states, size=total, p=self.pi)
        u = rng.random(total)
        outcomes = self.oracle.pushforward(states, u)
        splits = np.array([Split.TRAIN.value] * n + [Split.VALID.value] * n_valid)
        return Dataset(
            name='finite-state',
            covariates=np.zeros((total, 0)),
            treatments=states.reshape(-1, 1).astype(float),
            outcomes=outcomes,
            splits=splits,
            encoder=StateEncoder(TreatmentKind.FINITE_STATE, n_arms=self.n_states),
            metadata={'seed': seed, 'q': self.q, 'pi': self.pi, 'kappa': self.kappa},
        )

    def target_design(self) -> TargetDesign:
        return TargetDesign(
            covariates=np.zeros((1, 0)),
            interventions=np.arange(self.n_states, dtype=float).reshape(-1, 1),
            masses=self.q,
            kappa=self.kappa,
        )

    def truth(self, n_draws: int, seed: int) -> ConditionalEnsemble:
        """Ensemble of n_draws oracle samples per state weighted by q."""
        rng = np.random.default_rng(seed)
        entries = []
        for j in range(self.n_states):
            draws = self.oracle.sample_states(np.zeros((1, 0)), np.array([[j]]), n_draws, rng)[0]
            entries.append(EnsembleEntry(State.of(t=[j]), EmpiricalLaw(draws), float(self.q[j])))
        return ConditionalEnsemble(entries)

    def problem(self, n: int, seed: int) -> Problem:
        return Problem(
            name='finite-state',
            dataset=self.dataset(n, seed),
            target_design=self.target_design(),
            oracle=self.oracle,
            coefficients={'offsets': self.oracle.offsets.tolist(),
                          'amplitudes': self.oracle.amplitudes.tolist(),
                          'phases': self.oracle.phases.tolist(),
                          'pi': self.pi.tolist()},
        )


def finite_state_dgp(
    M: int,
    q: Optional[Sequence[float]] = None,
    kappa: float = 0.5,
    beta: float = 1.0,
    seed: int = 0,
    n_terms: int = 8,
    bound: float = 3.0,
    truth_draws: int = 1000,
) -> Tuple[FiniteStateFamily, ConditionalEnsemble]:
    """Draw a smooth finite-state model and its true conditional ensemble."""
    if M < 1:
        raise ContractError(f"M must be positive, got {M}")
    if beta <= 0:
        raise ContractError(f"beta must be positive, got {beta}")
    q_arr = np.full(M, 1.0 / M) if q is None else _check_masses(q, 'q')
    if q_arr.size != M:
        raise ContractError(f"q has {q_arr.size} entries for M={M} states")
    rng = np.random.default_rng(seed)
    pi = observational_design(q_arr, kappa, rng)
    oracle = FiniteStateOracle(
        offsets=rng.uniform(-1.0, 1.0, M),
        amplitudes=rng.normal(0.0, 1.0, (M, n_terms)),
        phases=rng.uniform(0.0, 2 * np.pi, (M, n_terms)),
        beta=beta,
        bound=bound,
    )
    family = FiniteStateFamily(oracle, q_arr, pi, kappa)
    logger.debug(f"Finite-state family M={M} kappa={kappa} beta={beta} seed={seed}")
    return family, family.truth(truth_draws, seed + 1)


def point_mass_family(constants: Sequence[float], q: Optional[Sequence[float]] = None,
                      kappa: float = 1.0, seed: int = 0) -> FiniteStateFamily:
    """States whose outcomes are the Dirac masses at the given constants."""
    constants = np.asarray(constants, dtype=float)
    M = constants.size
    q_arr = np.full(M, 1.0 / M) if q is None else _check_masses(q, 'q')
    pi = observational_design(q_arr, kappa, np.random.default_rng(seed))
    oracle = FiniteStateOracle(
        offsets=constants,
        amplitudes=np.zeros((M, 1)),
        phases=np.zeros((M, 1)),
        beta=1.0,
        bound=float(np.max(np.abs(constants))) if M else 1.0,
        point_masses=True,
    )
    return FiniteStateFamily(oracle, q_arr, pi, kappa)


__all__ = [
    'observational_design',
    'FiniteStateOracle',
    'FiniteStateFamily',
    'finite_state_dgp',
    'point_mass_family',
]
