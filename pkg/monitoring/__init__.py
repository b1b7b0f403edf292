"""
Monitoring components for GANICE training runs
"""

from monitoring.training_metrics import StepRecord, TrainingMonitor, TimerContext

__all__ = ['StepRecord', 'TrainingMonitor', 'TimerContext']
