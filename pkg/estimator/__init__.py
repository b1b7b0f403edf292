"""
The GANICE estimator: cell maps, stratified objectives, training, calibration
"""

from estimator.cells import CellMap
from estimator.objectives import (
    anchored,
    cell_obs_average,
    cell_gen_average,
    objective_discrete,
    objective_continuous,
    kantorovich_potential_1d,
)
from estimator.calibration import CalibrationTables, calibrate_quantiles, randomized_pit
from estimator.rates import RateExponents, rate_exponents, resolution_schedule
from estimator.ganice import ObjectiveKind, TrainedModel, GaniceTrainer, snap_zero_mass, train, validation_proxy

__all__ = [
    'CellMap',
    'anchored',
    'cell_obs_average',
    'cell_gen_average',
    'objective_discrete',
    'objective_continuous',
    'kantorovich_potential_1d',
    'CalibrationTables',
    'calibrate_quantiles',
    'randomized_pit',
    'RateExponents',
    'rate_exponents',
    'resolution_schedule',
    'ObjectiveKind',
    'TrainedModel',
    'GaniceTrainer',
    'snap_zero_mass',
    'train',
    'validation_proxy',
]
