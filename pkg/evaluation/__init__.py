"""
Evaluation: sample scores, state-level metric suites and metric reports
"""

from evaluation.scores import crps, energy_distance, ks_distance, quantiles, lower_cvar, upper_cvar
from evaluation.metrics import (
    empirical_ew,
    rct_w1,
    distribution_metrics,
    quantile_metrics,
    tail_metrics,
    calibration_metrics,
    effect_point_metrics,
    dose_point_metrics,
    rct_point_metrics,
)
from evaluation.report import MetricReport, EvaluationSettings, evaluate, evaluate_synthetic, evaluate_jobs

__all__ = [
    'crps',
    'energy_distance',
    'ks_distance',
    'quantiles',
    'lower_cvar',
    'upper_cvar',
    'empirical_ew',
    'rct_w1',
    'distribution_metrics',
    'quantile_metrics',
    'tail_metrics',
    'calibration_metrics',
    'effect_point_metrics',
    'dose_point_metrics',
    'rct_point_metrics',
    'MetricReport',
    'EvaluationSettings',
    'evaluate',
    'evaluate_synthetic',
    'evaluate_jobs',
]
