"""
Ablations of the stratified objective

Both reuse the GANICE trainer with identical networks, optimizer, batch
sizes and restart grid; only the adversarial objective changes.
"""

from config.experiment_config import GaniceConfig
from dgp.dataset import Dataset, TargetDesign
from estimator.ganice import ObjectiveKind, TrainedModel, train


def train_pooled_ablation(config: GaniceConfig, dataset: Dataset, target_design: TargetDesign) -> TrainedModel:
    """One WGAN-GP critic on joint (state, outcome) pairs, no stratification."""
    return train(config, dataset, target_design, ObjectiveKind.POOLED)


def train_no_cellnorm_ablation(config: GaniceConfig, dataset: Dataset, target_design: TargetDesign) -> TrainedModel:
    """Per-cell critics on global batches, summed without per-cell normalization or q weighting."""
    return train(config, dataset, target_design, ObjectiveKind.NO_CELL_NORMALIZATION)


__all__ = ['train_pooled_ablation', 'train_no_cellnorm_ablation']
