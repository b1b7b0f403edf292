"""
Comparison methods: the residual plug-in and the objective ablations
"""

from baselines.residual_plugin import ResidualPlugin, fit_residual_plugin, sample_plugin
from baselines.ablations import train_pooled_ablation, train_no_cellnorm_ablation

__all__ = [
    'ResidualPlugin',
    'fit_residual_plugin',
    'sample_plugin',
    'train_pooled_ablation',
    'train_no_cellnorm_ablation',
]
