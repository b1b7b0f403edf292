"""
Structured Logging Configuration for the GANICE laboratory
Provides JSON logging, run/repetition correlation fields, and a run event trail
"""

import logging
import json
import sys
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional
from contextvars import ContextVar

# Run context variables for correlation
run_id_var: ContextVar[str] = ContextVar('run_id', default='')
repetition_var: ContextVar[Optional[int]] = ContextVar('repetition', default=None)
method_var: ContextVar[str] = ContextVar('method', default='')


class StructuredFormatter(logging.Formatter):
    """JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data = {
            'timestamp': datetime.utcnow().isoformat() + 'Z',
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
            'process': record.process,
        }

        run_id = run_id_var.get()
        if run_id:
            log_data['run_id'] = run_id

        repetition = repetition_var.get()
        if repetition is not None:
            log_data['repetition'] = repetition

        method = method_var.get()
        if method:
            log_data['method'] = method

        if record.exc_info:
            log_data['exception'] = {
                'type': record.exc_info[0].__name__ if record.exc_info[0] else None,
                'message': str(record.exc_info[1]) if record.exc_info[1] else None,
                'traceback': self.formatException(record.exc_info)
            }

        if hasattr(record, 'extra_data'):
            log_data['extra'] = record.extra_data

        return json.dumps(log_data, default=str)


class HumanReadableFormatter(logging.Formatter):
    """Human-readable formatter for interactive runs."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record in human-readable format."""
        parts = []
        run_id = run_id_var.get()
        if run_id:
            parts.append(f"run:{run_id[:8]}")
        repetition = repetition_var.get()
        if repetition is not None:
            parts.append(f"rep:{repetition}")
        method = method_var.get()
        if method:
            parts.append(method)
        context_str = f" [{' '.join(parts)}]" if parts else ""

        timestamp = datetime.fromtimestamp(record.created).strftime('%Y-%m-%d %H:%M:%S')
        message = f"{timestamp} - {record.levelname:8s} - {record.name}{context_str} - {record.getMessage()}"

        if record.exc_info:
            message += "\n" + self.formatException(record.exc_info)

        return message


def setup_logging(
    log_level: Optional[str] = None,
    json_logs: Optional[bool] = None,
    log_file: Optional[str] = None
):
    """
    Setup laboratory logging.

    Args:
        log_level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        json_logs: Use JSON formatted logs (default: True in production)
        log_file: Optional log file path
    """
    if log_level is None:
        log_level = os.getenv('LOG_LEVEL', 'INFO')

    if json_logs is None:
        environment = os.getenv('ENVIRONMENT', 'development')
        json_logs = environment == 'production'

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    formatter = StructuredFormatter() if json_logs else HumanReadableFormatter()
    console_handler.setFormatter(formatter)

    root_logger.setLevel(getattr(logging, log_level.upper()))
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    # Reduce noise from third-party libraries
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('numexpr').setLevel(logging.WARNING)
    logging.getLogger('sklearn').setLevel(logging.WARNING)

    logging.info(f"Logging configured: level={log_level}, json={json_logs}")


class RunEventLogger:
    """Append-only structured event trail for experiment runs."""

    def __init__(self, output_dir: str, name: str = 'ganice.events'):
        self.logger = logging.getLogger(f"{name}.{abs(hash(str(output_dir))) % 10**8}")
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        os.makedirs(output_dir, exist_ok=True)
        self.path = Path(output_dir) / 'events.log'
        self._handler = logging.FileHandler(self.path)
        self._handler.setFormatter(StructuredFormatter())
        self.logger.addHandler(self._handler)

    def _emit(self, level: int, message: str, event_type: str, payload: Dict[str, Any]):
        data = {'event_type': event_type}
        data.update(payload)
        self.logger.log(level, message, extra={'extra_data': data})
        self._handler.flush()

    def log_config_loaded(self, source: str, dataset: str, methods: Any, repetitions: int):
        """Log the configuration a run starts from."""
        self._emit(
            logging.INFO,
            f"Config loaded: source={source}, dataset={dataset}",
            'config_loaded',
            {'source': source, 'dataset': dataset, 'methods': list(methods), 'repetitions': repetitions}
        )

    def log_repetition_started(self, repetition: int, seed: int):
        """Log the start of a repetition."""
        self._emit(
            logging.INFO,
            f"Repetition started: rep={repetition}, seed={seed}",
            'repetition_started',
            {'repetition': repetition, 'seed': seed}
        )

    def log_method_finished(self, repetition: int, method: str, seconds: float, ew: Optional[float]):
        """Log completion of one method within a repetition."""
        self._emit(
            logging.INFO,
            f"Method finished: rep={repetition}, method={method}, seconds={seconds:.2f}",
            'method_finished',
            {'repetition': repetition, 'method': method, 'seconds': seconds, 'ew': ew}
        )

    def log_repetition_failed(self, repetition: int, error: BaseException):
        """Log a failed repetition."""
        self._emit(
            logging.ERROR,
            f"Repetition failed: rep={repetition} - {error}",
            'repetition_failed',
            {'repetition': repetition, 'error_type': type(error).__name__, 'error': str(error)}
        )

    def log_training_diverged(self, repetition: int, method: str, step: int):
        """Log a divergence detected by the trainer."""
        self._emit(
            logging.WARNING,
            f"Training diverged: rep={repetition}, method={method}, step={step}",
            'training_diverged',
            {'repetition': repetition, 'method': method, 'step': step}
        )

    def close(self):
        """Detach the file handler."""
        self.logger.removeHandler(self._handler)
        self._handler.close()


__all__ = [
    'run_id_var',
    'repetition_var',
    'method_var',
    'StructuredFormatter',
    'HumanReadableFormatter',
    'setup_logging',
    'RunEventLogger',
]
