"""
Experiment runner
Repetitions of the method x dataset matrix: per-repetition metric CSVs,
an aggregate table, failure isolation, and a manifest that replays a run.
"""

import json
import logging
import time
import traceback
import uuid
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from config.experiment_config import ExperimentConfig, save_experiment_config
from core.errors import DataIOError, TrainingDivergedError
from core.logging_config import RunEventLogger, method_var, repetition_var, run_id_var
from evaluation.report import EVAL_STREAM, EvaluationSettings, evaluate
from experiments.methods import MethodRegistry
from experiments.problems import build_problem

logger = logging.getLogger(__name__)

TRAINING_SEED_STRIDE = 10007
MANIFEST_FILE = 'manifest.json'
AGGREGATE_FILE = 'aggregate.csv'
FAILURES_FILE = 'failures.csv'
ID_COLUMNS = ('method', 'repetition', 'dataset')
TIMING_COLUMNS = ('seconds',)


def repetition_seed(base_seed: int, repetition: int) -> int:
    return base_seed + repetition


def training_seed(seed: int, method_index: int) -> int:
    return seed + method_index * TRAINING_SEED_STRIDE


def metrics_path(output_dir: Path, repetition: int) -> Path:
    return Path(output_dir) / f"metrics_rep{repetition:03d}.csv"


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    return str(value)


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=_json_default))


def _append_row(path: Path, row: Dict[str, Any]) -> None:
    """Append one row and flush, so earlier rows survive later failures."""
    pd.DataFrame([row]).to_csv(path, mode='a', header=not path.exists(), index=False, float_format='%.17g')


def _failure(repetition: int, method: Optional[str], error: BaseException) -> Dict[str, Any]:
    return {
        'repetition': repetition,
        'method': method or '',
        'error_type': type(error).__name__,
        'message': str(error),
    }


def evaluation_settings(config: ExperimentConfig) -> EvaluationSettings:
    return EvaluationSettings(config.eval_draws, config.calibration_draws, config.eval_covariates)


def run_repetition(config: ExperimentConfig, repetition: int, output_dir: Union[str, Path],
                   run_id: str = '') -> Dict[str, Any]:
    """
    Fit and evaluate every configured method on one repetition's problem.

    All methods share the repetition seed for data and evaluation; training
    seeds are offset per method. Method failures are recorded and the
    remaining methods still run.
    """
    output_dir = Path(output_dir)
    seed = repetition_seed(config.base_seed, repetition)
    run_id_var.set(run_id)
    repetition_var.set(repetition)
    events = RunEventLogger(str(output_dir))
    record: Dict[str, Any] = {
        'repetition': repetition,
        'seed': seed,
        'eval_seed': [seed, EVAL_STREAM],
        'training_seeds': {},
        'fingerprint': None,
        'coefficients': {},
        'failures': [],
    }
    path = metrics_path(output_dir, repetition)
    if path.exists():
        path.unlink()
    try:
        events.log_repetition_started(repetition, seed)
        with threadpool_limits(limits=config.threads):
            problem = build_problem(config.dataset, seed)
            record['fingerprint'] = problem.dataset.fingerprint()
            record['coefficients'] = problem.coefficients
            settings = evaluation_settings(config)
            for index, method in enumerate(config.methods):
                method_var.set(method.value)
                train_seed = training_seed(seed, index)
                record['training_seeds'][method.value] = train_seed
                start = time.perf_counter()
                try:
                    fitted = MethodRegistry.fit(method, problem, config, train_seed)
                    report = evaluate(fitted.sampler, problem, settings, seed, method.value, repetition)
                except TrainingDivergedError as exc:
                    logger.error(f"{method.value} diverged at step {exc.step}")
                    events.log_training_diverged(repetition, method.value, exc.step)
                    record['failures'].append(_failure(repetition, method.value, exc))
                    continue
                except Exception as exc:
                    logger.error(f"{method.value} failed: {exc}\n{traceback.format_exc()}")
                    record['failures'].append(_failure(repetition, method.value, exc))
                    continue
                report.seconds = time.perf_counter() - start
                _append_row(path, report.to_row(config.metrics or None))
                _write_json(output_dir / 'details' / f"{method.value}_rep{repetition:03d}.json", report.details())
                if fitted.monitor is not None:
                    log_path = output_dir / 'training_logs' / f"{method.value}_rep{repetition:03d}.csv"
                    log_path.parent.mkdir(parents=True, exist_ok=True)
                    fitted.monitor.to_csv(log_path)
                score = report.ew if report.ew is not None else report.rct_w1
                events.log_method_finished(repetition, method.value, report.seconds, score)
    except Exception as exc:
        logger.error(f"Repetition {repetition} failed: {exc}\n{traceback.format_exc()}")
        events.log_repetition_failed(repetition, exc)
        record['failures'].append(_failure(repetition, None, exc))
    finally:
        method_var.set('')
        events.close()
    return record


def _run_repetition_worker(config_data: Dict[str, Any], repetition: int, output_dir: str,
                           run_id: str) -> Dict[str, Any]:
    return run_repetition(ExperimentConfig.from_dict(config_data), repetition, output_dir, run_id)


def aggregate_results(output_dir: Union[str, Path]) -> pd.DataFrame:
    """Mean and sd/sqrt(R) per method and metric over the per-repetition CSVs."""
    output_dir = Path(output_dir)
    files = sorted(output_dir.glob('metrics_rep*.csv'))
    columns = ['method', 'metric', 'mean', 'se', 'n']
    if not files:
        frame = pd.DataFrame(columns=columns)
    else:
        rows = pd.concat([pd.read_csv(f) for f in files], ignore_index=True)
        metric_cols = [c for c in rows.columns if c not in ID_COLUMNS]
        long = rows.melt(id_vars=['method'], value_vars=metric_cols, var_name='metric').dropna(subset=['value'])
        grouped = long.groupby(['method', 'metric'], sort=False)['value']
        frame = grouped.agg(mean='mean', sd='std', n='count').reset_index()
        frame['se'] = frame['sd'] / np.sqrt(frame['n'])
        frame = frame[columns]
    frame.to_csv(output_dir / AGGREGATE_FILE, index=False, float_format='%.17g')
    return frame


class ExperimentRunner:
    """Runs all repetitions of an experiment and writes its artifacts."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None,
                 source: str = '<memory>'):
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir)
        self.source = source
        self.run_id = uuid.uuid4().hex[:8]
        self.records: List[Dict[str, Any]] = []

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [f for record in self.records for f in record['failures']]

    def _collect(self) -> List[Dict[str, Any]]:
        repetitions = range(self.config.repetitions)
        if self.config.workers <= 1:
            return [run_repetition(self.config, r, self.output_dir, self.run_id) for r in repetitions]
        records = []
        config_data = self.config.to_dict()
        with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
            futures = {
                pool.submit(_run_repetition_worker, config_data, r, str(self.output_dir), self.run_id): r
                for r in repetitions
            }
            for future in as_completed(futures):
                r = futures[future]
                try:
                    records.append(future.result())
                except Exception as exc:
                    logger.error(f"Worker for repetition {r} crashed: {exc}")
                    records.append({'repetition': r, 'seed': repetition_seed(self.config.base_seed, r),
                                    'failures': [_failure(r, None, exc)]})
        return sorted(records, key=lambda rec: rec['repetition'])

    def manifest(self) -> Dict[str, Any]:
        return {
            'name': self.config.name,
            'run_id': self.run_id,
            'created_at': datetime.now(timezone.utc).isoformat(),
            'config': self.config.to_dict(),
            'seed_scheme': {
                'repetition': 'base_seed + repetition',
                'training': f"repetition seed + method index * {TRAINING_SEED_STRIDE}",
                'evaluation': f"(repetition seed, {EVAL_STREAM})",
            },
            'methods': [m.value for m in self.config.methods],
            'repetitions': self.records,
        }

    def run(self) -> int:
        """Run every repetition; exit status 1 when anything failed."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        run_id_var.set(self.run_id)
        save_experiment_config(self.config, self.output_dir / 'config.yaml')
        events = RunEventLogger(str(self.output_dir))
        events.log_config_loaded(self.source, self.config.dataset.kind.value,
                                 [m.value for m in self.config.methods], self.config.repetitions)
        events.close()
        logger.info(f"Run {self.run_id}: {self.config.repetitions} repetitions of "
                    f"{[m.value for m in self.config.methods]} on {self.config.dataset.kind.value}")

        self.records = self._collect()
        _write_json(self.output_dir / MANIFEST_FILE, self.manifest())
        failures = self.failures
        if failures:
            pd.DataFrame(failures).to_csv(self.output_dir / FAILURES_FILE, index=False)
            logger.error(f"{len(failures)} failures; see {self.output_dir / FAILURES_FILE}")
        aggregate_results(self.output_dir)
        return 1 if failures else 0


def run_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None,
                   source: str = '<memory>') -> int:
    return ExperimentRunner(config, output_dir, source).run()


@dataclass
class ReplayResult:
    status: int
    fingerprints_match: bool
    identical: List[int] = field(default_factory=list)
    differing: List[int] = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.fingerprints_match and not self.differing


def _metric_frame(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    return frame.drop(columns=[c for c in TIMING_COLUMNS if c in frame.columns])


def replay(manifest_path: Union[str, Path], output_dir: Union[str, Path]) -> ReplayResult:
    """
    Re-run an experiment from its manifest into output_dir and compare
    dataset fingerprints and every per-repetition metric row exactly.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataIOError(f"Manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    config = ExperimentConfig.from_dict(manifest['config'])
    runner = ExperimentRunner(config, output_dir, source=str(manifest_path))
    status = runner.run()

    recorded = {rec['repetition']: rec.get('fingerprint') for rec in manifest['repetitions']}
    replayed = {rec['repetition']: rec.get('fingerprint') for rec in runner.records}
    fingerprints_match = recorded == replayed
    if not fingerprints_match:
        logger.error("Replayed dataset fingerprints differ from the manifest")

    result = ReplayResult(status, fingerprints_match)
    for r in sorted(recorded):
        original, again = metrics_path(manifest_path.parent, r), metrics_path(Path(output_dir), r)
        if not original.exists() or not again.exists():
            result.differing.append(r)
            continue
        same = _metric_frame(original).equals(_metric_frame(again))
        (result.identical if same else result.differing).append(r)
    return result


__all__ = [
    'TRAINING_SEED_STRIDE',
    'repetition_seed',
    'training_seed',
    'metrics_path',
    'run_repetition',
    'aggregate_results',
    'ExperimentRunner',
    'run_experiment',
    'ReplayResult',
    'replay',
]
