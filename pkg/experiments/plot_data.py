"""
Plot-ready tables from a results directory
Tidy long-format CSVs (method, x, y and band columns) built from the
per-method detail files and the aggregate table.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from core.errors import DataIOError
from evaluation.metrics import CURVE_LEVELS
from experiments.runner import AGGREGATE_FILE, MANIFEST_FILE

logger = logging.getLogger(__name__)

PLOT_DIR = 'plot_data'


@dataclass
class PlotDataResult:
    written: List[Path] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)


def _expected_details(results_dir: Path) -> List[str]:
    manifest_path = results_dir / MANIFEST_FILE
    if not manifest_path.exists():
        return []
    manifest = json.loads(manifest_path.read_text())
    return [f"{method}_rep{rec['repetition']:03d}.json"
            for rec in manifest.get('repetitions', []) for method in manifest.get('methods', [])]


def _load_details(results_dir: Path, result: PlotDataResult) -> List[Dict[str, Any]]:
    details_dir = results_dir / 'details'
    names = _expected_details(results_dir)
    if not names and details_dir.exists():
        names = sorted(p.name for p in details_dir.glob('*.json'))
    loaded = []
    for name in names:
        path = details_dir / name
        try:
            loaded.append(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            result.skipped.append(name)
            logger.warning(f"Skipping detail file {path}: {exc}")
    return loaded


def _band(frame: pd.DataFrame, keys: List[str], value: str = 'y') -> pd.DataFrame:
    """Mean over repetitions with a one-standard-error band."""
    grouped = frame.groupby(keys, sort=False)[value]
    out = grouped.agg(y='mean', sd='std', n='count').reset_index()
    se = (out['sd'] / np.sqrt(out['n'])).fillna(0.0)
    out['lower'] = out['y'] - se
    out['upper'] = out['y'] + se
    return out.drop(columns=['sd'])


def _write(frame: pd.DataFrame, path: Path, result: PlotDataResult) -> None:
    frame.to_csv(path, index=False, float_format='%.10g')
    result.written.append(path)


def quantile_error_frame(details: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = [{'method': d['method'], 'x': float(level), 'y': err}
            for d in details for level, err in d.get('quantile_errors', {}).items()]
    return _band(pd.DataFrame(rows), ['method', 'x']) if rows else pd.DataFrame()


def qte_curve_frame(details: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = [{'method': d['method'], 'x': level, 'y': err}
            for d in details if 'qte_curve' in d for level, err in zip(CURVE_LEVELS, d['qte_curve'])]
    return _band(pd.DataFrame(rows), ['method', 'x']) if rows else pd.DataFrame()


def dose_band_frame(details: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = [{'method': d['method'], 'arm': b['arm'], 'x': b['dose'], 'y': b['median'],
             'lower': b['lower'], 'upper': b['upper'], 'true_median': b['true_median']}
            for d in details for b in d.get('dose_bands', [])]
    if not rows:
        return pd.DataFrame()
    frame = pd.DataFrame(rows)
    return frame.groupby(['method', 'arm', 'x'], sort=False).mean().reset_index()


def arm_cdf_frame(details: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = []
    for d in details:
        cdfs = d.get('arm_cdfs')
        if not cdfs:
            continue
        for curve in ('control', 'treated', 'difference'):
            for x, model, rct in zip(cdfs['earnings'], cdfs[f"model_{curve}"], cdfs[f"rct_{curve}"]):
                rows.append({'method': d['method'], 'repetition': d['repetition'], 'curve': curve,
                             'x': x, 'y': model, 'rct': rct})
    return pd.DataFrame(rows)


def pit_frame(details: List[Dict[str, Any]]) -> pd.DataFrame:
    rows = []
    for d in details:
        hist = d.get('pit_histogram', [])
        for k, share in enumerate(hist):
            rows.append({'method': d['method'], 'x': (k + 0.5) / len(hist), 'y': share})
    return _band(pd.DataFrame(rows), ['method', 'x']) if rows else pd.DataFrame()


def ablation_frame(results_dir: Path) -> pd.DataFrame:
    path = results_dir / AGGREGATE_FILE
    if not path.exists():
        return pd.DataFrame()
    agg = pd.read_csv(path)
    headline = agg[agg['metric'].isin(['ew', 'rct_w1'])]
    return pd.DataFrame({
        'method': headline['method'], 'metric': headline['metric'], 'y': headline['mean'],
        'lower': headline['mean'] - headline['se'].fillna(0.0), 'upper': headline['mean'] + headline['se'].fillna(0.0),
    })


def emit_plot_data(results_dir: Union[str, Path]) -> PlotDataResult:
    """Write every plot table the results support; absent detail files are listed and skipped."""
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise DataIOError(f"Results directory not found: {results_dir}")
    result = PlotDataResult()
    details = _load_details(results_dir, result)
    out_dir = results_dir / PLOT_DIR
    out_dir.mkdir(exist_ok=True)
    tables = {
        'quantile_errors.csv': quantile_error_frame(details),
        'qte_curve.csv': qte_curve_frame(details),
        'dose_bands.csv': dose_band_frame(details),
        'arm_cdfs.csv': arm_cdf_frame(details),
        'pit_histogram.csv': pit_frame(details),
        'ablation_bars.csv': ablation_frame(results_dir),
    }
    for name, frame in tables.items():
        if not frame.empty:
            _write(frame, out_dir / name, result)
    if result.skipped:
        logger.warning(f"Missing detail files: {result.skipped}")
    logger.info(f"Wrote {len(result.written)} plot tables to {out_dir}")
    return result


__all__ = ['PlotDataResult', 'emit_plot_data']
