"""
State-level metric suites
Distributional, quantile, tail, calibration and point metrics over a set
of evaluation states, computed from (S, B) draw matrices, plus the
randomized-arm metrics used when only a randomized holdout is available.
"""

import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractError, ShapeError
from dgp.base import ConditionalSampler
from dgp.dataset import Dataset, Split
from dgp.jobs import earnings
from evaluation.scores import (
    central_interval,
    energy_distance,
    expected_crps,
    ks_distance,
    lower_cvar,
    pit,
    quantiles,
    upper_cvar,
)
from transport.wasserstein import w1_arrays, w1_rows

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)
TAIL_LEVELS = (0.05, 0.10, 0.90, 0.95)
COVERAGE_LEVELS = (0.50, 0.80, 0.90, 0.95)
CURVE_LEVELS = tuple(round(0.05 * k, 2) for k in range(1, 20))
PIT_BINS = 10


def _average(values: np.ndarray, masses: Optional[np.ndarray] = None) -> float:
    values = np.asarray(values, dtype=float)
    if masses is None:
        return float(np.mean(values))
    masses = np.asarray(masses, dtype=float)
    if masses.shape[0] != values.shape[0]:
        raise ShapeError(f"{masses.shape[0]} masses for {values.shape[0]} states")
    weights = masses / masses.sum()
    return float(np.tensordot(weights, values, axes=(0, 0)).mean())


def draw_matrix(sampler: ConditionalSampler, X: np.ndarray, T: np.ndarray, n_draws: int,
                rng: np.random.Generator) -> np.ndarray:
    draws = np.asarray(sampler.sample_states(X, T, n_draws, rng), dtype=float)
    if draws.shape != (np.shape(T)[0], n_draws):
        raise ShapeError(f"Sampler returned {draws.shape}, expected {(np.shape(T)[0], n_draws)}")
    return draws


def ew_from_draws(model_draws: np.ndarray, truth_draws: np.ndarray, masses: Optional[np.ndarray] = None) -> float:
    """Mass-weighted mean of sorted-sample W1 across states (plain mean without masses)."""
    return _average(w1_rows(model_draws, truth_draws), masses)


def empirical_ew(
    model: ConditionalSampler,
    oracle: ConditionalSampler,
    X: np.ndarray,
    T: np.ndarray,
    n_draws: int,
    model_rng: np.random.Generator,
    oracle_rng: np.random.Generator,
    masses: Optional[np.ndarray] = None,
) -> float:
    """Empirical extended Wasserstein error with n_draws from each law per state."""
    if n_draws < 2:
        raise ContractError(f"Need at least 2 draws per state, got {n_draws}")
    return ew_from_draws(draw_matrix(model, X, T, n_draws, model_rng),
                         draw_matrix(oracle, X, T, n_draws, oracle_rng), masses)


def distribution_metrics(model_draws: np.ndarray, truth_draws: np.ndarray,
                         masses: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Expected CRPS under the true law, energy distance and KS, averaged over states."""
    return {
        'crps': _average(expected_crps(model_draws, truth_draws), masses),
        'energy': _average(energy_distance(model_draws, truth_draws), masses),
        'ks': _average(ks_distance(model_draws, truth_draws), masses),
    }


def quantile_metrics(
    model_draws: np.ndarray,
    truth_draws: np.ndarray,
    levels: Sequence[float] = QUANTILE_LEVELS,
    contrast: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    masses: Optional[np.ndarray] = None,
) -> Dict[str, Any]:
    """
    Root-mean-square quantile error over states and levels.

    With contrast = (treated_rows, control_rows) the quantile-effect error
    compares arm differences of quantiles at matched covariates.
    """
    q_model = quantiles(model_draws, levels)
    q_true = quantiles(truth_draws, levels)
    sq = (q_model - q_true) ** 2
    out: Dict[str, Any] = {
        'iqe': float(np.sqrt(_average(sq, masses))),
        'quantile_errors': dict(zip(map(str, levels), np.sqrt(np.mean(sq, axis=0)).tolist())),
    }
    if contrast is not None:
        treated, control = contrast
        effect = (q_model[treated] - q_model[control]) - (q_true[treated] - q_true[control])
        out['qte_err'] = float(np.sqrt(np.mean(effect ** 2)))
    return out


def qte_curve(model_draws: np.ndarray, truth_draws: np.ndarray, treated: np.ndarray, control: np.ndarray,
              levels: Sequence[float] = CURVE_LEVELS) -> np.ndarray:
    """|mean_i QTE_hat(x_i, alpha) - mean_i QTE(x_i, alpha)| at each level."""
    q_model = quantiles(model_draws, levels)
    q_true = quantiles(truth_draws, levels)
    effect_model = np.mean(q_model[treated] - q_model[control], axis=0)
    effect_true = np.mean(q_true[treated] - q_true[control], axis=0)
    return np.abs(effect_model - effect_true)


def tail_metrics(model_draws: np.ndarray, truth_draws: np.ndarray, levels: Sequence[float] = TAIL_LEVELS,
                 masses: Optional[np.ndarray] = None) -> float:
    """Mean over states and levels of |dLCVaR| + |dUCVaR|; both tails at every level."""
    per_level = [
        np.abs(lower_cvar(model_draws, a) - lower_cvar(truth_draws, a))
        + np.abs(upper_cvar(model_draws, a) - upper_cvar(truth_draws, a))
        for a in levels
    ]
    return _average(np.column_stack(per_level), masses)


def calibration_metrics(model_draws: np.ndarray, targets: np.ndarray,
                        coverage_levels: Sequence[float] = COVERAGE_LEVELS,
                        bins: int = PIT_BINS) -> Dict[str, Any]:
    """
    Central-interval coverage of the targets, mean interval widths and the
    PIT histogram. Targets are true-law draws or factual outcomes, one row
    per predictive row.
    """
    model_draws = np.atleast_2d(np.asarray(model_draws, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(model_draws.shape[0], -1)
    coverage: Dict[str, float] = {}
    widths: Dict[str, float] = {}
    for c in coverage_levels:
        lo, hi = central_interval(model_draws, c)
        inside = (targets >= lo[:, None]) & (targets <= hi[:, None])
        coverage[str(c)] = float(np.mean(inside))
        widths[str(c)] = float(np.mean(hi - lo))
    counts, _ = np.histogram(pit(model_draws, targets), bins=bins, range=(0.0, 1.0))
    return {
        'cal_err': float(np.mean([abs(coverage[str(c)] - c) for c in coverage_levels])),
        'coverage': coverage,
        'interval_widths': widths,
        'pit_histogram': (counts / counts.sum()).tolist(),
    }


def effect_point_metrics(model_means: np.ndarray, true_means: np.ndarray) -> Dict[str, float]:
    """PEHE and absolute ATE error from (n, 2) arm means ordered (control, treated)."""
    tau_hat = model_means[:, 1] - model_means[:, 0]
    tau = true_means[:, 1] - true_means[:, 0]
    return {
        'pehe': float(np.mean((tau_hat - tau) ** 2)),
        'ate_err': float(abs(np.mean(tau_hat) - np.mean(tau))),
    }


def dose_point_metrics(model_means: np.ndarray, true_means: np.ndarray) -> Dict[str, float]:
    """MISE, dosage policy error and policy error from (n, arms, doses) mean tables."""
    if model_means.shape != true_means.shape or model_means.ndim != 3:
        raise ShapeError(f"Need matching (n, arms, doses) tables, got {model_means.shape} and {true_means.shape}")
    n, n_arms, n_doses = true_means.shape
    best_dose = np.argmax(true_means, axis=2)
    chosen_dose = np.argmax(model_means, axis=2)
    best_value = np.take_along_axis(true_means, best_dose[..., None], axis=2)[..., 0]
    chosen_value = np.take_along_axis(true_means, chosen_dose[..., None], axis=2)[..., 0]
    flat_true = true_means.reshape(n, -1)
    chosen_pair = np.argmax(model_means.reshape(n, -1), axis=1)
    return {
        'mise': float(np.mean((model_means - true_means) ** 2)),
        'dpe': float(np.mean((best_value - chosen_value) ** 2)),
        'pe': float(np.mean(flat_true.max(axis=1) - flat_true[np.arange(n), chosen_pair])),
    }


def _arm_mean(y: np.ndarray, arms: np.ndarray, arm: int) -> float:
    values = y[arms == arm]
    if values.size == 0:
        raise ContractError(f"Randomized holdout has no units in arm {arm}")
    return float(values.mean())


def rct_point_metrics(pred_treated: np.ndarray, pred_control: np.ndarray, arms: np.ndarray,
                      y: np.ndarray) -> Dict[str, float]:
    """
    ATT error against the randomized difference in means, and the value of
    the rule 'treat when the predicted treated mean is larger'. Matched arms
    that end up empty fall back to the randomized arm mean.
    """
    arms = np.asarray(arms).astype(int).ravel()
    y = np.asarray(y, dtype=float).ravel()
    mean1, mean0 = _arm_mean(y, arms, 1), _arm_mean(y, arms, 0)
    att_hat = float(np.mean((pred_treated - pred_control)[arms == 1]))
    policy = pred_treated > pred_control
    share = float(np.mean(policy))
    matched1 = policy & (arms == 1)
    matched0 = ~policy & (arms == 0)
    value1 = float(y[matched1].mean()) if matched1.any() else mean1
    value0 = float(y[matched0].mean()) if matched0.any() else mean0
    return {
        'att_err': abs(att_hat - (mean1 - mean0)),
        'policy_value': share * value1 + (1.0 - share) * value0,
    }


def arm_level_draws(model: ConditionalSampler, dataset: Dataset, n_draws: int,
                    rng: np.random.Generator) -> Dict[int, np.ndarray]:
    """(n_rct, n_draws) transformed-scale draws at every randomized covariate row, per arm."""
    X, _, _ = dataset.arrays(Split.RCT)
    if X.shape[0] == 0:
        raise ContractError("Dataset has no randomized holdout")
    return {arm: draw_matrix(model, X, np.full((X.shape[0], 1), float(arm)), n_draws, rng) for arm in (0, 1)}


def rct_arms(dataset: Dataset) -> Dict[int, np.ndarray]:
    """Randomized holdout outcomes per arm on the transformed scale."""
    _, T, y = dataset.arrays(Split.RCT)
    arms = T[:, 0].astype(int)
    out = {}
    for arm in (0, 1):
        if not np.any(arms == arm):
            raise ContractError(f"Randomized holdout has no units in arm {arm}")
        out[arm] = y[arms == arm]
    return out


def rct_w1_from_draws(arm_draws: Dict[int, np.ndarray], rct: Dict[int, np.ndarray]) -> float:
    """Half the sum over arms of W1(pooled model draws, randomized arm) in dollars."""
    return 0.5 * sum(w1_arrays(earnings(arm_draws[a].ravel()), earnings(rct[a])) for a in (0, 1))


def rct_w1(model: ConditionalSampler, dataset: Dataset, n_draws: int, rng: np.random.Generator) -> float:
    """
    Randomized-holdout W1 on the earnings scale. Pooling n_draws per
    covariate row is the covariate-averaged model CDF.
    """
    rct = rct_arms(dataset)
    return rct_w1_from_draws(arm_level_draws(model, dataset, n_draws, rng), rct)


def arm_level_metrics(model_arms: Dict[int, np.ndarray], rct: Dict[int, np.ndarray],
                      levels: Sequence[float] = QUANTILE_LEVELS,
                      tail_levels: Sequence[float] = TAIL_LEVELS) -> Dict[str, Any]:
    """Energy, KS, IQE, QTE error and tail error between model and randomized arms (same scale)."""
    pooled = {a: np.ravel(model_arms[a]) for a in (0, 1)}
    q_model = {a: quantiles(pooled[a], levels) for a in (0, 1)}
    q_rct = {a: quantiles(rct[a], levels) for a in (0, 1)}
    sq = np.concatenate([(q_model[a] - q_rct[a]) ** 2 for a in (0, 1)])
    effect = (q_model[1] - q_model[0]) - (q_rct[1] - q_rct[0])
    tails = [
        np.mean([abs(lower_cvar(pooled[a], t) - lower_cvar(rct[a], t))
                 + abs(upper_cvar(pooled[a], t) - upper_cvar(rct[a], t)) for t in tail_levels])
        for a in (0, 1)
    ]
    return {
        'energy': 0.5 * sum(float(energy_distance(pooled[a], rct[a])) for a in (0, 1)),
        'ks': 0.5 * sum(float(ks_distance(pooled[a], rct[a])) for a in (0, 1)),
        'iqe': float(np.sqrt(np.mean(sq))),
        'qte_err': float(np.sqrt(np.mean(effect ** 2))),
        'tail_err': float(np.mean(tails)),
    }


__all__ = [
    'QUANTILE_LEVELS',
    'TAIL_LEVELS',
    'COVERAGE_LEVELS',
    'CURVE_LEVELS',
    'PIT_BINS',
    'draw_matrix',
    'ew_from_draws',
    'empirical_ew',
    'distribution_metrics',
    'quantile_metrics',
    'qte_curve',
    'tail_metrics',
    'calibration_metrics',
    'effect_point_metrics',
    'dose_point_metrics',
    'rct_point_metrics',
    'arm_level_draws',
    'rct_arms',
    'rct_w1_from_draws',
    'rct_w1',
    'arm_level_metrics',
]
