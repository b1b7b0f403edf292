"""
Experiment Configuration
Dataclass configuration for datasets, estimators, baselines and studies,
loaded from YAML or JSON with environment overrides.
"""

import copy
import dataclasses
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union, get_args, get_origin, get_type_hints

import yaml

from core.errors import ConfigValidationError

logger = logging.getLogger(__name__)


class DatasetKind(Enum):
    """Supported data sources."""
    IHDP = "ihdp"
    TCGA = "tcga"
    JOBS = "jobs"
    FINITE_STATE = "finite-state"


class MethodName(Enum):
    """Estimators the runner can fit."""
    GANICE = "ganice"
    POOLED_ABLATION = "pooled-ablation"
    NO_CELLNORM_ABLATION = "no-cellnorm-ablation"
    RESIDUAL_PLUGIN = "residual-plugin"
    ORACLE = "oracle"
    CONSTANT = "constant"


class CellMapKind(Enum):
    """How covariates enter the cell coordinates."""
    NONE = "none"          # treatment coordinates only
    PCA = "pca"            # leading training PCA coordinates
    COLUMNS = "columns"    # named covariate columns
    DISCRETE = "discrete"  # one singleton cell per finite state


@dataclass
class CellMapConfig:
    """Cell map and finite-resolution settings."""
    kind: CellMapKind = CellMapKind.NONE
    n_components: int = 0
    columns: List[str] = field(default_factory=list)
    covariate_resolution: List[int] = field(default_factory=list)
    treatment_resolution: List[int] = field(default_factory=lambda: [1])
    min_cell_size: int = 4
    mc_target_size: int = 50_000

    def validate(self) -> List[str]:
        errors = []
        n_cov = self.n_components if self.kind is CellMapKind.PCA else len(self.columns)
        if self.kind in (CellMapKind.PCA, CellMapKind.COLUMNS) and len(self.covariate_resolution) != n_cov:
            errors.append(f"cell_map.covariate_resolution needs {n_cov} entries, got {len(self.covariate_resolution)}")
        if self.kind is CellMapKind.PCA and self.n_components < 1:
            errors.append("cell_map.n_components must be positive for a PCA cell map")
        if self.kind is CellMapKind.COLUMNS and not self.columns:
            errors.append("cell_map.columns must name at least one covariate")
        if any(m < 0 for m in self.covariate_resolution + self.treatment_resolution):
            errors.append("cell_map resolutions must be nonnegative")
        if self.min_cell_size < 1:
            errors.append("cell_map.min_cell_size must be positive")
        if self.mc_target_size < 1:
            errors.append("cell_map.mc_target_size must be positive")
        return errors


@dataclass
class CalibrationConfig:
    """Post-hoc quantile calibration."""
    enabled: bool = False
    samples_per_obs: int = 12
    grid_size: int = 256
    blend: float = 0.75
    rct_only: bool = False

    def validate(self) -> List[str]:
        errors = []
        if self.samples_per_obs < 1:
            errors.append("calibration.samples_per_obs must be positive")
        if self.grid_size < 2:
            errors.append("calibration.grid_size must be at least 2")
        if not 0.0 <= self.blend <= 1.0:
            errors.append("calibration.blend must lie in [0, 1]")
        return errors


@dataclass
class GaniceConfig:
    """Hyperparameters of one stratified adversarial training run."""
    latent_dim: int = 4
    generator_widths: List[int] = field(default_factory=lambda: [128, 128])
    critic_widths: List[int] = field(default_factory=lambda: [128, 128])
    adversarial_steps: int = 520
    critic_steps: int = 1
    pretrain_steps: int = 800
    batch_size: int = 128
    lr_generator: float = 2e-4
    lr_critic: float = 1e-4
    betas: Tuple[float, float] = (0.0, 0.9)
    gp_weight: float = 10.0
    transport_weight: float = 0.0
    crps_weight: float = 0.0
    crps_samples: int = 6
    mse_weight: float = 0.0
    mse_samples: int = 6
    cell_map: CellMapConfig = field(default_factory=CellMapConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    restart_grid: Dict[str, List[float]] = field(default_factory=dict)
    max_restarts: Optional[int] = None
    zero_mass_matching: bool = False
    log_every: int = 50
    seed: int = 0

    @classmethod
    def preset(cls, kind: Union[DatasetKind, str]) -> 'GaniceConfig':
        """Published per-dataset hyperparameters."""
        kind = DatasetKind(kind) if isinstance(kind, str) else kind
        if kind is DatasetKind.IHDP:
            return cls(
                generator_widths=[128, 128], critic_widths=[128, 128],
                adversarial_steps=520, critic_steps=1, pretrain_steps=800,
                transport_weight=0.75, crps_weight=8.0, mse_weight=1.0,
                cell_map=CellMapConfig(CellMapKind.PCA, n_components=2, covariate_resolution=[1, 1],
                                       treatment_resolution=[1], min_cell_size=6, mc_target_size=50_000),
                calibration=CalibrationConfig(enabled=True),
                restart_grid={'transport_weight': [0.75, 1.25], 'crps_weight': [8.0, 12.0], 'mse_weight': [1.0, 2.0]},
                max_restarts=4,
            )
        if kind is DatasetKind.TCGA:
            return cls(
                generator_widths=[96, 96], critic_widths=[96, 96],
                adversarial_steps=620, critic_steps=2, pretrain_steps=1600,
                transport_weight=0.6, crps_weight=10.0, crps_samples=6, mse_weight=8.0, mse_samples=6,
                cell_map=CellMapConfig(CellMapKind.NONE, treatment_resolution=[2, 3],
                                       min_cell_size=4, mc_target_size=45_000),
            )
        if kind is DatasetKind.JOBS:
            return cls(
                generator_widths=[96, 96], critic_widths=[96, 96],
                adversarial_steps=220, critic_steps=3, pretrain_steps=420,
                transport_weight=4.0, crps_weight=4.0,
                cell_map=CellMapConfig(CellMapKind.COLUMNS, columns=['re75', 'black'], covariate_resolution=[1, 1],
                                       treatment_resolution=[1], min_cell_size=4, mc_target_size=40_000),
                calibration=CalibrationConfig(enabled=True, rct_only=True),
                restart_grid={'adversarial_steps': [180, 220, 260], 'transport_weight': [4.0, 6.0],
                              'crps_weight': [4.0, 5.0]},
                zero_mass_matching=True,
            )
        return cls(
            generator_widths=[64, 64], critic_widths=[64, 64],
            adversarial_steps=300, critic_steps=1, pretrain_steps=200,
            cell_map=CellMapConfig(CellMapKind.DISCRETE, treatment_resolution=[], min_cell_size=1, mc_target_size=1),
        )

    def restarts(self) -> List['GaniceConfig']:
        """Configurations of the restart grid in grid order (just self when the grid is empty)."""
        if not self.restart_grid:
            return [self]
        keys = list(self.restart_grid)
        combos = list(itertools.product(*(self.restart_grid[k] for k in keys)))
        if self.max_restarts is not None:
            combos = combos[:self.max_restarts]
        out = []
        for combo in combos:
            variant = copy.deepcopy(self)
            variant.restart_grid = {}
            for key, value in zip(keys, combo):
                current = getattr(variant, key)
                setattr(variant, key, type(current)(value) if current is not None else value)
            out.append(variant)
        return out

    def with_overrides(self, overrides: Dict[str, Any]) -> 'GaniceConfig':
        merged = _deep_merge(self.to_dict(), overrides)
        return GaniceConfig.from_dict(merged)

    def validate(self) -> List[str]:
        errors = []
        counts = {
            'latent_dim': self.latent_dim, 'critic_steps': self.critic_steps, 'batch_size': self.batch_size,
            'crps_samples': self.crps_samples, 'mse_samples': self.mse_samples, 'log_every': self.log_every,
        }
        for name, value in counts.items():
            if value < 1:
                errors.append(f"ganice.{name} must be positive")
        for name in ('adversarial_steps', 'pretrain_steps'):
            if getattr(self, name) < 0:
                errors.append(f"ganice.{name} must be nonnegative")
        if any(w < 1 for w in self.generator_widths + self.critic_widths):
            errors.append("ganice layer widths must be positive")
        if self.crps_weight > 0 and self.crps_samples < 2:
            errors.append("ganice.crps_samples must be at least 2 when crps_weight > 0")
        if self.lr_generator <= 0 or self.lr_critic <= 0:
            errors.append("ganice learning rates must be positive")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            errors.append("ganice.betas must be two values in [0, 1)")
        for name in ('gp_weight', 'transport_weight', 'crps_weight', 'mse_weight'):
            if getattr(self, name) < 0:
                errors.append(f"ganice.{name} must be nonnegative")
        for key in self.restart_grid:
            if key not in {f.name for f in dataclasses.fields(self)}:
                errors.append(f"ganice.restart_grid names unknown field '{key}'")
        if self.max_restarts is not None and self.max_restarts < 1:
            errors.append("ganice.max_restarts must be positive")
        errors.extend(self.cell_map.validate())
        errors.extend(self.calibration.validate())
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GaniceConfig':
        return _strict(cls, data)


@dataclass
class PluginConfig:
    """Residual plug-in mean regressor."""
    hidden_widths: List[int] = field(default_factory=lambda: [64, 64])
    steps: int = 1500
    batch_size: int = 128
    learning_rate: float = 1e-3
    strata_resolution: Optional[List[int]] = None
    seed: int = 0

    def validate(self) -> List[str]:
        errors = []
        if self.steps < 1 or self.batch_size < 1:
            errors.append("plugin.steps and plugin.batch_size must be positive")
        if self.learning_rate <= 0:
            errors.append("plugin.learning_rate must be positive")
        if any(w < 1 for w in self.hidden_widths):
            errors.append("plugin.hidden_widths must be positive")
        return errors


@dataclass
class DatasetConfig:
    """Data source and its generator settings."""
    kind: DatasetKind = DatasetKind.FINITE_STATE
    n_units: Optional[int] = None
    n_genes: int = 400
    model_features: str = 'scores'
    data_dir: Optional[str] = None
    covariate_path: Optional[str] = None
    n_states: int = 2
    q: Optional[List[float]] = None
    kappa: float = 0.5
    beta: float = 1.0
    n_train: int = 500
    n_terms: int = 8
    point_masses: Optional[List[float]] = None

    def validate(self) -> List[str]:
        errors = []
        if self.kind is DatasetKind.JOBS and not self.data_dir:
            errors.append("dataset.data_dir is required for Jobs (or set GANICE_DATA_DIR)")
        if self.kind is DatasetKind.TCGA and self.model_features not in ('scores', 'genes'):
            errors.append("dataset.model_features must be 'scores' or 'genes'")
        if self.n_units is not None and self.n_units < 2:
            errors.append("dataset.n_units must be at least 2")
        if self.kind is DatasetKind.FINITE_STATE:
            if self.n_states < 1 or self.n_train < 1:
                errors.append("dataset.n_states and dataset.n_train must be positive")
            if not 0.0 < self.kappa <= 1.0:
                errors.append("dataset.kappa must lie in (0, 1]")
            if self.beta <= 0:
                errors.append("dataset.beta must be positive")
            if self.q is not None and (len(self.q) != self.n_states or abs(sum(self.q) - 1.0) > 1e-9):
                errors.append("dataset.q must have n_states entries summing to 1")
            if self.point_masses is not None and len(self.point_masses) != self.n_states:
                errors.append("dataset.point_masses must have n_states entries")
        return errors


@dataclass
class RateStudyConfig:
    """Sample-size sweep on the finite-state family."""
    n_grid: List[int] = field(default_factory=lambda: [250, 1000, 4000])
    seeds_per_n: int = 5
    methods: List[MethodName] = field(default_factory=lambda: [MethodName.GANICE, MethodName.ORACLE,
                                                                MethodName.CONSTANT])
    eval_draws: int = 1000
    bootstrap: int = 1000
    rate_alphas: List[float] = field(default_factory=list)

    def validate(self) -> List[str]:
        errors = []
        if len(self.n_grid) < 3:
            errors.append("rate_study.n_grid needs at least 3 sample sizes")
        if any(n < 1 for n in self.n_grid):
            errors.append("rate_study.n_grid entries must be positive")
        if self.seeds_per_n < 5:
            errors.append("rate_study.seeds_per_n must be at least 5")
        if self.eval_draws < 2 or self.bootstrap < 1:
            errors.append("rate_study.eval_draws must be >= 2 and bootstrap >= 1")
        if any(not 0.0 < a <= 1.0 for a in self.rate_alphas):
            errors.append("rate_study.rate_alphas must lie in (0, 1]")
        return errors


@dataclass
class ExperimentConfig:
    """Top-level experiment description."""
    name: str = 'experiment'
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    methods: List[MethodName] = field(default_factory=lambda: [MethodName.GANICE])
    repetitions: int = 10
    base_seed: int = 0
    ganice: Dict[str, Any] = field(default_factory=dict)
    method_overrides: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    plugin: PluginConfig = field(default_factory=PluginConfig)
    metrics: List[str] = field(default_factory=list)
    eval_draws: int = 1000
    calibration_draws: int = 2000
    eval_covariates: Optional[int] = 64
    output_dir: str = 'results'
    workers: int = 1
    threads: Optional[int] = None
    log_level: str = 'INFO'
    rate_study: Optional[RateStudyConfig] = None

    def ganice_config(self, method: Union[MethodName, str] = MethodName.GANICE) -> GaniceConfig:
        """Dataset preset, then the shared ganice block, then per-method overrides."""
        method = MethodName(method) if isinstance(method, str) else method
        config = GaniceConfig.preset(self.dataset.kind)
        if self.ganice:
            config = config.with_overrides(self.ganice)
        overrides = self.method_overrides.get(method.value)
        if overrides:
            config = config.with_overrides(overrides)
        return config

    def validate(self) -> List[str]:
        errors = []
        if self.repetitions < 1:
            errors.append("repetitions must be at least 1")
        if not self.methods:
            errors.append("methods must list at least one method")
        if self.eval_draws < 2 or self.calibration_draws < 2:
            errors.append("eval_draws and calibration_draws must be at least 2")
        if self.eval_covariates is not None and self.eval_covariates < 1:
            errors.append("eval_covariates must be positive")
        if self.workers < 1:
            errors.append("workers must be positive")
        if self.threads is not None and self.threads < 1:
            errors.append("threads must be positive")
        if MethodName.ORACLE in self.methods and self.dataset.kind is not DatasetKind.FINITE_STATE:
            errors.append("method 'oracle' resamples finite-state training outcomes and needs the finite-state dataset")
        unknown_methods = set(self.method_overrides) - {m.value for m in MethodName}
        if unknown_methods:
            errors.append(f"method_overrides names unknown methods {sorted(unknown_methods)}")
        errors.extend(self.dataset.validate())
        errors.extend(self.plugin.validate())
        try:
            for method in self.methods:
                errors.extend(self.ganice_config(method).validate())
        except ConfigValidationError as exc:
            errors.extend(exc.errors)
        if self.rate_study is not None:
            errors.extend(self.rate_study.validate())
            if self.dataset.kind is not DatasetKind.FINITE_STATE:
                errors.append("rate_study requires the finite-state dataset")
        return sorted(set(errors), key=errors.index)

    def to_dict(self) -> Dict[str, Any]:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        return _strict(cls, data)


def _to_plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _to_plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    return value


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _convert(tp: Any, value: Any, path: str, errors: List[str], unknown: List[str]) -> Any:
    origin = get_origin(tp)
    if origin is Union:
        if value is None:
            return None
        inner = [a for a in get_args(tp) if a is not type(None)]
        return _convert(inner[0], value, path, errors, unknown)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            errors.append(f"{path} must be a mapping")
            return tp()
        return _build(tp, value, path + '.', errors, unknown)
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            errors.append(f"{path}: '{value}' is not one of {[m.value for m in tp]}")
            unknown.append(path)
            return list(tp)[0]
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            errors.append(f"{path} must be a list")
            return []
        (item_type,) = get_args(tp) or (Any,)
        return [_convert(item_type, v, f"{path}[{i}]", errors, unknown) for i, v in enumerate(value)]
    if origin in (tuple, Tuple):
        return tuple(value)
    if tp is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if tp is int and isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def _build(cls, data: Dict[str, Any], prefix: str, errors: List[str], unknown: List[str]):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            unknown.append(prefix + key)
            errors.append(f"Unknown key '{prefix}{key}'")
            continue
        kwargs[key] = _convert(hints[key], value, prefix + key, errors, unknown)
    return cls(**kwargs)


def _strict(cls, data: Dict[str, Any]):
    errors: List[str] = []
    unknown: List[str] = []
    if not isinstance(data, dict):
        raise ConfigValidationError([f"{cls.__name__} data must be a mapping"])
    instance = _build(cls, data, '', errors, unknown)
    if errors:
        raise ConfigValidationError(errors, unknown)
    return instance


def apply_env_overrides(config: ExperimentConfig) -> ExperimentConfig:
    """GANICE_DATA_DIR, GANICE_THREADS and LOG_LEVEL take precedence over file values."""
    data_dir = os.getenv('GANICE_DATA_DIR')
    if data_dir and config.dataset.kind is DatasetKind.JOBS:
        config.dataset.data_dir = data_dir
    threads = os.getenv('GANICE_THREADS')
    if threads:
        try:
            config.threads = int(threads)
        except ValueError:
            raise ConfigValidationError([f"GANICE_THREADS must be an integer, got '{threads}'"], ['GANICE_THREADS'])
    if os.getenv('LOG_LEVEL'):
        config.log_level = os.getenv('LOG_LEVEL')
    return config


def validate_config(config: ExperimentConfig) -> bool:
    """Raise ConfigValidationError listing every problem."""
    errors = config.validate()
    if errors:
        raise ConfigValidationError(errors)
    return True


def load_experiment_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read a YAML (or JSON) config, apply overrides and environment, validate."""
    path = Path(path)
    if not path.exists():
        raise ConfigValidationError([f"Config file not found: {path}"])
    with open(path, 'r') as f:
        try:
            data = json.load(f) if path.suffix == '.json' else yaml.safe_load(f)
        except (yaml.YAMLError, json.JSONDecodeError) as exc:
            raise ConfigValidationError([f"Cannot parse {path}: {exc}"])
    data = _deep_merge(data or {}, overrides or {})
    config = apply_env_overrides(ExperimentConfig.from_dict(data))
    validate_config(config)
    logger.info(f"Loaded experiment config '{config.name}' from {path}")
    return config


def save_experiment_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, default_flow_style=False, sort_keys=False)
    return path


__all__ = [
    'DatasetKind', 'MethodName', 'CellMapKind', 'CellMapConfig', 'CalibrationConfig', 'GaniceConfig',
    'PluginConfig', 'DatasetConfig', 'RateStudyConfig', 'ExperimentConfig',
    'apply_env_overrides', 'validate_config', 'load_experiment_config', 'save_experiment_config',
]
