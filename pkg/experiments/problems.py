"""
Problem construction per dataset kind
"""

import logging
from typing import Optional

from config.experiment_config import DatasetConfig, DatasetKind
from core.errors import ContractError
from dgp.base import Problem
from dgp.finite_state import FiniteStateFamily, finite_state_dgp, point_mass_family
from dgp.ihdp import IHDP_TREATED, IHDP_UNITS, make_ihdp_problem
from dgp.jobs import make_jobs_problem
from dgp.tcga import make_tcga_problem

logger = logging.getLogger(__name__)


def finite_state_family(config: DatasetConfig, seed: int) -> FiniteStateFamily:
    """The finite-state model a config describes, with coefficients drawn from seed."""
    if config.point_masses is not None:
        return point_mass_family(config.point_masses, config.q, config.kappa, seed=seed)
    family, _ = finite_state_dgp(config.n_states, config.q, config.kappa, config.beta, seed,
                                 n_terms=config.n_terms, truth_draws=2)
    return family


def build_problem(config: DatasetConfig, seed: int, n_train: Optional[int] = None) -> Problem:
    """
    One repetition's problem. seed fixes the generator coefficients, the
    assignment and the splits; n_train overrides the finite-state sample size.
    """
    kind = config.kind
    if kind is DatasetKind.IHDP:
        n_units = config.n_units or IHDP_UNITS
        n_treated = IHDP_TREATED if config.n_units is None else max(1, round(IHDP_TREATED * n_units / IHDP_UNITS))
        return make_ihdp_problem(seed, covariate_path=config.covariate_path, n_units=n_units, n_treated=n_treated)
    if kind is DatasetKind.TCGA:
        return make_tcga_problem(seed, n_units=config.n_units or 2000, n_genes=config.n_genes,
                                 model_features=config.model_features)
    if kind is DatasetKind.JOBS:
        if not config.data_dir:
            raise ContractError("Jobs needs dataset.data_dir (or GANICE_DATA_DIR)")
        return make_jobs_problem(config.data_dir, seed)
    if kind is DatasetKind.FINITE_STATE:
        return finite_state_family(config, seed).problem(n_train or config.n_train, seed)
    raise ContractError(f"Unsupported dataset kind: {kind}")


__all__ = ['finite_state_family', 'build_problem']
