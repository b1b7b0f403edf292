"""
Data-generating processes, datasets, and target designs
"""

from dgp.base import ConditionalSampler, OutcomeOracle, Problem
from dgp.dataset import Dataset, Split, StateEncoder, Standardizer, TargetDesign, TreatmentKind, stratified_split
from dgp.covariates import CovariateKind, synthetic_covariates, tcga_like_covariates, load_ihdp_covariates
from dgp.ihdp import IhdpCoeffs, IhdpOracle, ihdp_sample, make_ihdp_problem
from dgp.tcga import TcgaCoeffs, TcgaOracle, tcga_sample, tcga_assign, make_tcga_problem
from dgp.jobs import JobsPaths, load_jobs, make_jobs_problem, transform_earnings, earnings
from dgp.finite_state import FiniteStateFamily, FiniteStateOracle, finite_state_dgp, point_mass_family

__all__ = [
    'ConditionalSampler', 'OutcomeOracle', 'Problem',
    'Dataset', 'Split', 'StateEncoder', 'Standardizer', 'TargetDesign', 'TreatmentKind', 'stratified_split',
    'CovariateKind', 'synthetic_covariates', 'tcga_like_covariates', 'load_ihdp_covariates',
    'IhdpCoeffs', 'IhdpOracle', 'ihdp_sample', 'make_ihdp_problem',
    'TcgaCoeffs', 'TcgaOracle', 'tcga_sample', 'tcga_assign', 'make_tcga_problem',
    'JobsPaths', 'load_jobs', 'make_jobs_problem', 'transform_earnings', 'earnings',
    'FiniteStateFamily', 'FiniteStateOracle', 'finite_state_dgp', 'point_mass_family',
]
