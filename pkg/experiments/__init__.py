"""
Experiments: method registry, problem construction, runner, rate study and plot data
"""

from experiments.methods import FittedMethod, MethodRegistry, EmpiricalStateResampler, ConstantLawSampler
from experiments.problems import build_problem, finite_state_family
from experiments.runner import ExperimentRunner, ReplayResult, aggregate_results, replay, run_experiment, run_repetition
from experiments.rate_study import RateStudyResult, run_rate_study, loglog_slope, bootstrap_slope
from experiments.plot_data import PlotDataResult, emit_plot_data

__all__ = [
    'FittedMethod',
    'MethodRegistry',
    'EmpiricalStateResampler',
    'ConstantLawSampler',
    'build_problem',
    'finite_state_family',
    'ExperimentRunner',
    'ReplayResult',
    'aggregate_results',
    'replay',
    'run_experiment',
    'run_repetition',
    'RateStudyResult',
    'run_rate_study',
    'loglog_slope',
    'bootstrap_slope',
    'PlotDataResult',
    'emit_plot_data',
]
