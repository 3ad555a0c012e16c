"""
Layers Package
Baseline GCNs, criss-cross graph attention and the dual-path hop-wise GCN.
"""

from layers.gcn_baselines import (
    GcnLayerParams, vanilla_gcn, unshared_gcn, modulated_gcn, regular_modulated_gcn,
)
from layers.stg_attention import (
    AttentionGroupParams, STGAParams, STGAttention,
    scaled_dot_attention, temporal_graph_attention, spatial_graph_attention, stg_attention_block,
)
from layers.mhr_gcn import (
    PathParams, MhrLayerParams, MhrGCN, hop_branch, path_forward, mhr_gcn_forward,
)

__all__ = [
    'GcnLayerParams', 'vanilla_gcn', 'unshared_gcn', 'modulated_gcn', 'regular_modulated_gcn',
    'AttentionGroupParams', 'STGAParams', 'STGAttention',
    'scaled_dot_attention', 'temporal_graph_attention', 'spatial_graph_attention', 'stg_attention_block',
    'PathParams', 'MhrLayerParams', 'MhrGCN', 'hop_branch', 'path_forward', 'mhr_gcn_forward',
]
