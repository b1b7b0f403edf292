"""
Rate study
Median empirical eW against training sample size on the finite-state
family, with the log-log least-squares slope and a bootstrap interval.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config.experiment_config import ExperimentConfig, RateStudyConfig
from core.errors import ContractError, SlopeUndefinedError
from core.logging_config import method_var, repetition_var
from estimator.rates import rate_exponents
from evaluation.metrics import empirical_ew
from experiments.methods import MethodRegistry
from experiments.problems import finite_state_family
from experiments.runner import training_seed

logger = logging.getLogger(__name__)

RATE_STREAM = 7919


@dataclass
class RateStudyResult:
    method: str
    n_grid: List[int]
    median_ew: List[float]
    slope: float
    interval: Tuple[float, float]
    risks: Dict[int, List[float]] = field(default_factory=dict)
    reference_exponent: Optional[float] = None


def loglog_slope(n_grid: Sequence[int], medians: Sequence[float]) -> float:
    """Least-squares slope of log(median eW) on log(n)."""
    medians = np.asarray(medians, dtype=float)
    if medians.size < 2 or np.any(~np.isfinite(medians)) or np.any(medians <= 0):
        raise SlopeUndefinedError(f"Log-log slope undefined for risks {medians.tolist()}")
    return float(np.polyfit(np.log(np.asarray(n_grid, dtype=float)), np.log(medians), 1)[0])


def bootstrap_slope(n_grid: Sequence[int], risks: Dict[int, Sequence[float]], n_boot: int,
                    rng: np.random.Generator, level: float = 0.95) -> Tuple[float, float]:
    """Percentile interval of the slope, resampling seeds within each n."""
    slopes = []
    for _ in range(n_boot):
        medians = [np.median(rng.choice(np.asarray(risks[n]), size=len(risks[n]), replace=True)) for n in n_grid]
        try:
            slopes.append(loglog_slope(n_grid, medians))
        except SlopeUndefinedError:
            continue
    if not slopes:
        raise SlopeUndefinedError("Every bootstrap resample had a degenerate risk")
    tail = (1.0 - level) / 2.0
    return float(np.quantile(slopes, tail)), float(np.quantile(slopes, 1.0 - tail))


def run_rate_study(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> List[RateStudyResult]:
    """
    Fit every study method at each n for seeds base_seed + s and report the
    slope of median eW. The family is fixed by base_seed.
    """
    study: Optional[RateStudyConfig] = config.rate_study
    if study is None:
        raise ContractError("Config has no rate_study block")
    output_dir = Path(output_dir or config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    family = finite_state_family(config.dataset, config.base_seed)
    X, T, masses = family.target_design().grid()

    records = []
    for n in study.n_grid:
        for s in range(study.seeds_per_n):
            seed = config.base_seed + s
            repetition_var.set(s)
            problem = family.problem(n, seed)
            for index, method in enumerate(study.methods):
                method_var.set(method.value)
                fitted = MethodRegistry.fit(method, problem, config, training_seed(seed, index))
                model_rng, oracle_rng = (np.random.default_rng(ss) for ss in
                                         np.random.SeedSequence([seed, n, RATE_STREAM]).spawn(2))
                ew = empirical_ew(fitted.sampler, family.oracle, X, T, study.eval_draws, model_rng, oracle_rng, masses)
                records.append({'method': method.value, 'n': n, 'seed': seed, 'ew': ew})
                logger.info(f"Rate study n={n} seed={seed} {method.value}: eW={ew:.4f}")
    method_var.set('')
    risks = pd.DataFrame(records)
    risks.to_csv(output_dir / 'rate_risks.csv', index=False, float_format='%.17g')

    latent_dim = config.ganice_config().latent_dim
    reference = None
    if config.dataset.point_masses is None:
        reference = -rate_exponents(config.dataset.beta, latent_dim, study.rate_alphas).a

    rng = np.random.default_rng([config.base_seed, RATE_STREAM])
    results = []
    for method in study.methods:
        sub = risks[risks['method'] == method.value]
        per_n = {n: sub.loc[sub['n'] == n, 'ew'].tolist() for n in study.n_grid}
        medians = [float(np.median(per_n[n])) for n in study.n_grid]
        try:
            slope = loglog_slope(study.n_grid, medians)
            interval = bootstrap_slope(study.n_grid, per_n, study.bootstrap, rng)
        except SlopeUndefinedError as exc:
            logger.warning(f"{method.value}: {exc}")
            slope, interval = float('nan'), (float('nan'), float('nan'))
        results.append(RateStudyResult(method.value, list(study.n_grid), medians, slope, interval, per_n, reference))

    pd.DataFrame([
        {'method': r.method, 'slope': r.slope, 'lower': r.interval[0], 'upper': r.interval[1],
         'reference_slope': r.reference_exponent,
         **{f"median_ew_n{n}": m for n, m in zip(r.n_grid, r.median_ew)}}
        for r in results
    ]).to_csv(output_dir / 'rate_slopes.csv', index=False, float_format='%.17g')
    return results


__all__ = ['RateStudyResult', 'loglog_slope', 'bootstrap_slope', 'run_rate_study']
