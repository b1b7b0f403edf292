"""
Dyadic partitions of the conditioning space and soft gates
"""

from partition.dyadic import (
    Resolution,
    DyadicPartition,
    CellAccount,
    CellMergeMap,
    cell_masses,
    merge_small_cells,
    boundary_layer_mass,
    boundary_layer_bound,
    export_cell_map,
)
from partition.gates import (
    indicator_gates,
    uniform_gates,
    softmax_gates,
    GateDiscrepancy,
    soft_gate_discrepancy,
    GateTransferCheck,
    soft_gate_transfer_check,
)

__all__ = [
    'Resolution', 'DyadicPartition', 'CellAccount', 'CellMergeMap', 'cell_masses',
    'merge_small_cells', 'boundary_layer_mass', 'boundary_layer_bound', 'export_cell_map',
    'indicator_gates', 'uniform_gates', 'softmax_gates', 'GateDiscrepancy',
    'soft_gate_discrepancy', 'GateTransferCheck', 'soft_gate_transfer_check',
]
