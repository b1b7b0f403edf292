"""
Training Metrics Collection for GANICE runs
Step-level training curves, counters, gauges, and wall-clock timers
"""

import time
import threading
from collections import defaultdict
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, Any, List, Optional, Union

import pandas as pd


@dataclass
class StepRecord:
    """One logged training step."""
    step: int
    phase: str
    objective: float
    critic_loss: float
    gp_term: float
    generator_loss: float
    timestamp: float = field(default_factory=time.time)


class TrainingMonitor:
    """Lightweight metrics collection for one training run."""

    CSV_COLUMNS = ['step', 'phase', 'objective', 'critic_loss', 'gp_term', 'generator_loss']

    def __init__(self, max_histogram: int = 1000):
        self.max_histogram = max_histogram
        self.records: List[StepRecord] = []
        self.counters: Dict[str, float] = defaultdict(float)
        self.gauges: Dict[str, float] = {}
        self.histograms: Dict[str, List[float]] = defaultdict(list)
        self.lock = threading.Lock()

    def record_step(
        self,
        step: int,
        phase: str,
        objective: float = float('nan'),
        critic_loss: float = float('nan'),
        gp_term: float = float('nan'),
        generator_loss: float = float('nan'),
    ):
        """Append a training-curve row."""
        with self.lock:
            self.records.append(StepRecord(
                step=int(step),
                phase=phase,
                objective=float(objective),
                critic_loss=float(critic_loss),
                gp_term=float(gp_term),
                generator_loss=float(generator_loss),
            ))

    def counter(self, name: str, value: float = 1.0):
        """Increment a counter."""
        with self.lock:
            self.counters[name] += value

    def gauge(self, name: str, value: float):
        """Set a gauge."""
        with self.lock:
            self.gauges[name] = float(value)

    def histogram(self, name: str, value: float):
        """Record a histogram value."""
        with self.lock:
            values = self.histograms[name]
            values.append(float(value))
            if len(values) > self.max_histogram:
                self.histograms[name] = values[-self.max_histogram:]

    def timer(self, name: str) -> 'TimerContext':
        """Context manager for timing a phase."""
        return TimerContext(self, name)

    def total_seconds(self, name: str) -> float:
        with self.lock:
            return float(sum(self.histograms.get(f"{name}_duration", [])))

    def rows(self) -> List[Dict[str, Any]]:
        with self.lock:
            return [
                {k: v for k, v in asdict(r).items() if k in self.CSV_COLUMNS}
                for r in self.records
            ]

    def last(self, phase: Optional[str] = None) -> Optional[StepRecord]:
        with self.lock:
            for record in reversed(self.records):
                if phase is None or record.phase == phase:
                    return record
        return None

    def summary(self) -> Dict[str, Any]:
        """Counters, gauges, and histogram means."""
        with self.lock:
            return {
                'counters': dict(self.counters),
                'gauges': dict(self.gauges),
                'histograms': {
                    name: {'count': len(v), 'mean': (sum(v) / len(v)) if v else None}
                    for name, v in self.histograms.items()
                },
                'steps_logged': len(self.records),
            }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows(), columns=self.CSV_COLUMNS)

    def to_csv(self, path: Union[str, Path]):
        """Write the training curve as CSV."""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)

    def extend(self, rows: List[Dict[str, Any]]):
        """Re-populate from exported rows (used when loading checkpoints)."""
        for row in rows:
            self.record_step(
                row['step'], row['phase'], row.get('objective', float('nan')),
                row.get('critic_loss', float('nan')), row.get('gp_term', float('nan')),
                row.get('generator_loss', float('nan')),
            )


class TimerContext:
    """Timer context manager."""

    def __init__(self, monitor: TrainingMonitor, name: str):
        self.monitor = monitor
        self.name = name
        self.start_time = None
        self.elapsed = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            self.elapsed = time.perf_counter() - self.start_time
            self.monitor.histogram(f"{self.name}_duration", self.elapsed)


__all__ = ['StepRecord', 'TrainingMonitor', 'TimerContext']
