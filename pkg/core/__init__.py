"""
Core components of the GANICE laboratory
Errors, logging, automatic differentiation, and networks
"""

from core.errors import (
    GaniceError,
    ContractError,
    ShapeError,
    DomainError,
    CapacityError,
    UnsupportedActivationError,
    SlopeUndefinedError,
    SolverError,
    TrainingDivergedError,
    DataFormatError,
    DataIOError,
    ConfigValidationError,
)
from core.autodiff import Tape, Var
from core.nn import Activation, MlpNet, AdamState, adam_step, forward, grad, grad_penalty

__all__ = [
    'GaniceError', 'ContractError', 'ShapeError', 'DomainError', 'CapacityError',
    'UnsupportedActivationError', 'SlopeUndefinedError', 'SolverError',
    'TrainingDivergedError', 'DataFormatError', 'DataIOError', 'ConfigValidationError',
    'Tape', 'Var', 'Activation', 'MlpNet', 'AdamState', 'adam_step', 'forward', 'grad',
    'grad_penalty',
]
