"""
Experiment configuration
"""

from config.experiment_config import (
    DatasetKind,
    MethodName,
    CellMapKind,
    CellMapConfig,
    CalibrationConfig,
    GaniceConfig,
    PluginConfig,
    DatasetConfig,
    RateStudyConfig,
    ExperimentConfig,
    apply_env_overrides,
    validate_config,
    load_experiment_config,
    save_experiment_config,
)

__all__ = [
    'DatasetKind', 'MethodName', 'CellMapKind', 'CellMapConfig', 'CalibrationConfig', 'GaniceConfig',
    'PluginConfig', 'DatasetConfig', 'RateStudyConfig', 'ExperimentConfig',
    'apply_env_overrides', 'validate_config', 'load_experiment_config', 'save_experiment_config',
]
