#!/usr/bin/env python3
"""
Acceptance benchmarks

Deselected by default; run with ``pytest -m acceptance``. The training
benchmarks take minutes to tens of minutes of CPU.
"""

import itertools
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import linprog

from config.experiment_config import load_experiment_config
from dgp.finite_state import finite_state_dgp, point_mass_family
from estimator.ganice import train
from evaluation.report import EvaluationSettings, evaluate_synthetic
from evaluation.scores import expected_crps
from experiments.rate_study import run_rate_study
from experiments.runner import ExperimentRunner, metrics_path
from transport.exact import EuclideanCost, ot_exact_small
from transport.laws import ConditionalEnsemble, EmpiricalLaw, EnsembleEntry, State
from transport.wasserstein import ew_dominates_joint_check, w1_sorted

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


def _assignment_w1(x: np.ndarray, y: np.ndarray) -> float:
    perms = np.array(list(itertools.permutations(range(y.size))))
    return float(np.min(np.mean(np.abs(x[None, :] - y[perms]), axis=1)))


def _linprog_value(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    cost = EuclideanCost().matrix(a, b)
    n, m = cost.shape
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([a.probabilities, b.probabilities])
    result = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method='highs')
    return float(result.fun)


@pytest.mark.acceptance
class TestTransportOracles:
    """Sorted W1 and the transportation simplex against brute force."""

    def test_sorted_w1_matches_assignment(self):
        rng = np.random.default_rng(2024)
        for _ in range(500):
            n = int(rng.integers(1, 9))
            x, y = rng.normal(size=n), rng.normal(0.3, 1.5, size=n)
            assert w1_sorted(EmpiricalLaw(x), EmpiricalLaw(y)) == pytest.approx(_assignment_w1(x, y), abs=1e-9)

    def test_simplex_matches_linear_program(self):
        rng = np.random.default_rng(2025)
        for _ in range(200):
            n, m = rng.integers(1, 7, size=2)
            a = EmpiricalLaw.weighted(rng.normal(size=(n, 2)), rng.uniform(0.1, 1.0, n))
            b = EmpiricalLaw.weighted(rng.normal(size=(m, 2)), rng.uniform(0.1, 1.0, m))
            assert ot_exact_small(a, b).value == pytest.approx(_linprog_value(a, b), abs=1e-8)

    def test_extended_distance_dominates_joint(self):
        rng = np.random.default_rng(2026)
        for _ in range(200):
            masses = rng.dirichlet(np.ones(2))
            states = [State.of(t=[0.0]), State.of(t=[1.0])]

            def ensemble(shift):
                return ConditionalEnsemble([
                    EnsembleEntry(s, EmpiricalLaw(rng.normal(shift, 1.0, size=int(rng.integers(1, 4)))), q)
                    for s, q in zip(states, masses)
                ])

            ew, joint = ew_dominates_joint_check(ensemble(0.0), ensemble(0.5))
            assert joint <= ew + 1e-9


@pytest.mark.acceptance
class TestMetricSelfConsistency:
    """The true-law sampler scores near zero."""

    def test_perfect_model(self):
        family, _ = finite_state_dgp(3, kappa=0.5, beta=1.0, seed=8, truth_draws=2)
        problem = family.problem(500, 8)
        report = evaluate_synthetic(problem.oracle, problem, EvaluationSettings(2000, 2000), seed=8)
        assert report.ew < 0.1
        assert report.energy < 0.02
        assert report.ks < 0.08
        assert report.cal_err < 0.05

    def test_crps_prefers_the_true_law(self):
        rng = np.random.default_rng(9)
        truth = rng.normal(size=(20, 2000))
        honest = rng.normal(size=(20, 2000))
        shifted = rng.normal(0.3, 1.0, size=(20, 2000))
        assert np.mean(expected_crps(honest, truth)) < np.mean(expected_crps(shifted, truth))


@pytest.mark.acceptance
class TestTwoDiracRecovery:
    """Statewise point masses at -1 and +1."""

    def test_draws_land_on_the_constants(self):
        config = load_experiment_config(CONFIG_DIR / 'smoke.yaml')
        family = point_mass_family([-1.0, 1.0], kappa=1.0, seed=0)
        model = train(config.ganice_config(), family.dataset(500, seed=0), family.target_design())
        draws = model.sample_states(np.zeros((2, 0)), np.array([[0.0], [1.0]]), 2000, np.random.default_rng(1))
        assert np.mean(np.abs(draws[0] + 1.0) <= 0.05) >= 0.95
        assert np.mean(np.abs(draws[1] - 1.0) <= 0.05) >= 0.95


@pytest.mark.acceptance
class TestRateSanity:
    """eW decay over n in {250, 1000, 4000}."""

    def test_slopes(self, tmp_path):
        config = load_experiment_config(CONFIG_DIR / 'rate_study.yaml', {'output_dir': str(tmp_path)})
        results = {r.method: r for r in run_rate_study(config)}
        assert results['oracle'].slope == pytest.approx(-0.5, abs=0.15)
        assert abs(results['constant'].slope) < 0.15
        assert -0.8 <= results['ganice'].slope <= -0.1


@pytest.mark.acceptance
class TestAblationDirection:
    """Stratified training against the pooled objective and the plug-in on IHDP."""

    def test_stratified_wins(self, tmp_path):
        config = load_experiment_config(CONFIG_DIR / 'ihdp.yaml', {
            'methods': ['ganice', 'pooled-ablation', 'residual-plugin'],
            'ganice': {'adversarial_steps': 200},
            'output_dir': str(tmp_path),
        })
        assert ExperimentRunner(config).run() == 0
        rows = pd.concat([pd.read_csv(metrics_path(tmp_path, r)) for r in range(config.repetitions)])
        ew = rows.pivot(index='repetition', columns='method', values='ew')
        assert (ew['ganice'] < ew['pooled-ablation']).sum() >= 8
        assert (ew['ganice'] < ew['residual-plugin']).sum() >= 7
        assert ew['ganice'].mean() <= 0.45
