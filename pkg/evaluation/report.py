"""
Metric reports
One MetricReport per (method, repetition), with the evaluators that fill
it for synthetic problems (true laws available) and for Jobs (randomized
holdout only).
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.errors import ContractError
from dgp.base import ConditionalSampler, Problem
from dgp.dataset import Split, TargetDesign, TreatmentKind
from dgp.jobs import earnings
from evaluation.metrics import (
    QUANTILE_LEVELS,
    arm_level_draws,
    arm_level_metrics,
    calibration_metrics,
    distribution_metrics,
    dose_point_metrics,
    draw_matrix,
    effect_point_metrics,
    ew_from_draws,
    qte_curve,
    quantile_metrics,
    rct_arms,
    rct_point_metrics,
    rct_w1_from_draws,
    tail_metrics,
)
from evaluation.scores import crps, quantiles

logger = logging.getLogger(__name__)

EVAL_STREAM = 7919
CDF_GRID_POINTS = 200

SCALAR_METRICS = (
    'ew', 'rct_w1', 'crps', 'crps_earnings', 'energy', 'ks', 'iqe', 'qte_err', 'dq_err', 'tail_err',
    'cal_err', 'pehe', 'ate_err', 'mise', 'dpe', 'pe', 'att_err', 'policy_value',
)
SIGNED_METRICS = ('policy_value',)


@dataclass
class MetricReport:
    """Evaluation record for one fitted method in one repetition."""
    method: str
    repetition: int
    dataset: str
    ew: Optional[float] = None
    rct_w1: Optional[float] = None
    crps: Optional[float] = None
    crps_earnings: Optional[float] = None
    energy: Optional[float] = None
    ks: Optional[float] = None
    iqe: Optional[float] = None
    qte_err: Optional[float] = None
    dq_err: Optional[float] = None
    tail_err: Optional[float] = None
    cal_err: Optional[float] = None
    interval_widths: Dict[str, float] = field(default_factory=dict)
    pit_histogram: List[float] = field(default_factory=list)
    pehe: Optional[float] = None
    ate_err: Optional[float] = None
    mise: Optional[float] = None
    dpe: Optional[float] = None
    pe: Optional[float] = None
    att_err: Optional[float] = None
    policy_value: Optional[float] = None
    seconds: Optional[float] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def populated(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in SCALAR_METRICS if getattr(self, name) is not None}

    def validate(self) -> 'MetricReport':
        """Every populated metric is finite, and nonnegative unless signed."""
        for name, value in self.populated().items():
            if not np.isfinite(value):
                raise ContractError(f"Metric {name} is not finite ({value}) for {self.method}")
            if value < 0 and name not in SIGNED_METRICS:
                raise ContractError(f"Metric {name} is negative ({value}) for {self.method}")
        for level, width in self.interval_widths.items():
            if not np.isfinite(width) or width < 0:
                raise ContractError(f"Interval width at {level} is invalid ({width}) for {self.method}")
        return self

    def to_row(self, selected: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Flat CSV row; interval widths become width_<level> columns."""
        names = [n for n in SCALAR_METRICS if not selected or n in selected]
        row: Dict[str, Any] = {'method': self.method, 'repetition': self.repetition, 'dataset': self.dataset}
        for name in names:
            value = getattr(self, name)
            row[name] = np.nan if value is None else float(value)
        if not selected or 'interval_widths' in selected:
            for level, width in self.interval_widths.items():
                row[f"width_{level}"] = width
        row['seconds'] = np.nan if self.seconds is None else self.seconds
        return row

    def details(self) -> Dict[str, Any]:
        """JSON detail payload for plotting."""
        return {
            'method': self.method,
            'repetition': self.repetition,
            'dataset': self.dataset,
            'interval_widths': self.interval_widths,
            'pit_histogram': self.pit_histogram,
            **self.extras,
        }

    def update(self, values: Dict[str, Any]) -> 'MetricReport':
        known = {f.name for f in dataclasses.fields(self)}
        for key, value in values.items():
            if key in known:
                setattr(self, key, value)
        return self


@dataclass
class EvaluationSettings:
    eval_draws: int = 1000
    calibration_draws: int = 2000
    max_covariates: Optional[int] = 64

    def __post_init__(self):
        if self.eval_draws < 2 or self.calibration_draws < 2:
            raise ContractError("Evaluation needs at least 2 draws per state")


def evaluation_streams(seed: int, n: int = 3) -> List[np.random.Generator]:
    """Independent evaluation generators seeded by (seed, EVAL_STREAM)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence([seed, EVAL_STREAM]).spawn(n)]


def _evaluation_design(design: TargetDesign, max_covariates: Optional[int],
                       rng: np.random.Generator) -> TargetDesign:
    n_x = design.covariates.shape[0]
    if max_covariates is None or n_x <= max_covariates:
        return design
    rows = np.sort(rng.choice(n_x, size=max_covariates, replace=False))
    weights = design.covariate_weights[rows]
    logger.info(f"Evaluating on {max_covariates} of {n_x} target covariate rows")
    return TargetDesign(design.covariates[rows], design.interventions, design.masses, weights / weights.sum())


def evaluate_synthetic(model: ConditionalSampler, problem: Problem, settings: EvaluationSettings,
                       seed: int, method: str = '', repetition: int = 0) -> MetricReport:
    """Full metric suite against the problem's true laws."""
    if problem.oracle is None:
        raise ContractError(f"Problem '{problem.name}' has no oracle; use the randomized-holdout evaluator")
    subset_rng, model_rng, oracle_rng = evaluation_streams(seed)
    design = _evaluation_design(problem.target_design, settings.max_covariates, subset_rng)
    X, T, masses = design.grid()
    B = settings.eval_draws
    model_all = draw_matrix(model, X, T, max(B, settings.calibration_draws), model_rng)
    model_draws = model_all[:, :B]
    truth = draw_matrix(problem.oracle, X, T, B, oracle_rng)

    report = MetricReport(method, repetition, problem.name, ew=ew_from_draws(model_draws, truth, masses))
    dist = distribution_metrics(model_draws, truth, masses)
    # distinct-pair energy estimates dip below zero for near-identical laws
    dist['energy'] = max(dist['energy'], 0.0)
    report.update(dist)
    report.tail_err = tail_metrics(model_draws, truth, masses=masses)
    cal = calibration_metrics(model_all, truth)
    report.update({'cal_err': cal['cal_err'], 'interval_widths': cal['interval_widths'],
                   'pit_histogram': cal['pit_histogram']})
    report.extras['coverage'] = cal['coverage']

    kind = problem.dataset.encoder.kind
    n_x, n_int = design.covariates.shape[0], design.interventions.shape[0]
    model_means = model_draws.mean(axis=1)
    true_means = problem.oracle.mean_states(X, T)
    if kind is TreatmentKind.BINARY:
        control, treated = np.arange(0, n_x * n_int, 2), np.arange(1, n_x * n_int, 2)
        q = quantile_metrics(model_draws, truth, contrast=(treated, control), masses=masses)
        report.update({'iqe': q['iqe'], 'qte_err': q['qte_err']})
        report.update(effect_point_metrics(model_means.reshape(n_x, 2), true_means.reshape(n_x, 2)))
        curve = qte_curve(model_draws, truth, treated, control)
        report.extras['qte_curve'] = curve.tolist()
    elif kind is TreatmentKind.ARM_DOSAGE:
        q = quantile_metrics(model_draws, truth, masses=masses)
        report.dq_err = q['iqe']
        n_arms = int(np.unique(design.interventions[:, 0]).size)
        shape = (n_x, n_arms, n_int // n_arms)
        report.update(dose_point_metrics(model_means.reshape(shape), true_means.reshape(shape)))
        report.extras['dose_bands'] = _dose_bands(model_draws, truth, design)
    else:
        q = quantile_metrics(model_draws, truth, masses=masses)
        report.iqe = q['iqe']
    report.extras['quantile_errors'] = q['quantile_errors']
    return report.validate()


def _dose_bands(model_draws: np.ndarray, truth: np.ndarray, design: TargetDesign) -> List[Dict[str, float]]:
    """Covariate-averaged 10%/50%/90% model quantiles and the true median per (arm, dose)."""
    n_x, n_int = design.covariates.shape[0], design.interventions.shape[0]
    q_model = quantiles(model_draws, [0.1, 0.5, 0.9]).reshape(n_x, n_int, 3).mean(axis=0)
    true_median = quantiles(truth, [0.5]).reshape(n_x, n_int).mean(axis=0)
    return [
        {'arm': int(design.interventions[k, 0]), 'dose': float(design.interventions[k, 1]),
         'lower': float(q_model[k, 0]), 'median': float(q_model[k, 1]), 'upper': float(q_model[k, 2]),
         'true_median': float(true_median[k])}
        for k in range(n_int)
    ]


def _arm_cdfs(model_arms: Dict[int, np.ndarray], rct: Dict[int, np.ndarray]) -> Dict[str, List[float]]:
    pooled = np.concatenate([np.ravel(v) for v in model_arms.values()] + list(rct.values()))
    grid = np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, CDF_GRID_POINTS)))

    def cdf(sample: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.sort(np.ravel(sample)), grid, side='right') / np.size(sample)

    model_cdf = {a: cdf(model_arms[a]) for a in (0, 1)}
    rct_cdf = {a: cdf(rct[a]) for a in (0, 1)}
    return {
        'earnings': grid.tolist(),
        'model_control': model_cdf[0].tolist(),
        'model_treated': model_cdf[1].tolist(),
        'rct_control': rct_cdf[0].tolist(),
        'rct_treated': rct_cdf[1].tolist(),
        'model_difference': (model_cdf[1] - model_cdf[0]).tolist(),
        'rct_difference': (rct_cdf[1] - rct_cdf[0]).tolist(),
    }


def evaluate_jobs(model: ConditionalSampler, problem: Problem, settings: EvaluationSettings,
                  seed: int, method: str = '', repetition: int = 0) -> MetricReport:
    """Randomized-holdout metrics on the earnings scale plus factual scores."""
    dataset = problem.dataset
    _, arm_rng, factual_rng = evaluation_streams(seed)
    rct = rct_arms(dataset)
    rct_dollars = {a: earnings(v) for a, v in rct.items()}
    model_arms = arm_level_draws(model, dataset, settings.eval_draws, arm_rng)
    model_dollars = {a: earnings(v) for a, v in model_arms.items()}

    report = MetricReport(method, repetition, problem.name, rct_w1=rct_w1_from_draws(model_arms, rct))
    report.update(arm_level_metrics(model_dollars, rct_dollars))
    report.energy = max(report.energy, 0.0)

    X, T, y = dataset.arrays(Split.RCT)
    factual = draw_matrix(model, X, T, settings.calibration_draws, factual_rng)
    report.crps = float(np.mean(crps(factual, y)))
    report.crps_earnings = float(np.mean(crps(earnings(factual), earnings(y))))
    cal = calibration_metrics(factual, y)
    report.update({'cal_err': cal['cal_err'], 'interval_widths': cal['interval_widths'],
                   'pit_histogram': cal['pit_histogram']})
    report.extras['coverage'] = cal['coverage']

    pred = {a: model_dollars[a].mean(axis=1) for a in (0, 1)}
    report.update(rct_point_metrics(pred[1], pred[0], T[:, 0], earnings(y)))
    report.extras['arm_cdfs'] = _arm_cdfs(model_dollars, rct_dollars)
    report.extras['quantile_levels'] = list(QUANTILE_LEVELS)
    return report.validate()


def evaluate(model: ConditionalSampler, problem: Problem, settings: EvaluationSettings, seed: int,
             method: str = '', repetition: int = 0) -> MetricReport:
    """Dispatch on whether the problem carries true laws."""
    if problem.oracle is None:
        return evaluate_jobs(model, problem, settings, seed, method, repetition)
    return evaluate_synthetic(model, problem, settings, seed, method, repetition)


__all__ = [
    'SCALAR_METRICS',
    'MetricReport',
    'EvaluationSettings',
    'evaluation_streams',
    'evaluate_synthetic',
    'evaluate_jobs',
    'evaluate',
]
