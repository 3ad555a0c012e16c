"""
STGFormer Pose Lifter - Model
Joint-based embedding, L STGFormer blocks (criss-cross graph attention plus
dual-path hop-wise GCN, each in a pre-norm residual), and a per-token linear
regression head to 3D. Also the MSE training loss.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

import constants as C
from config import ModelConfig
from errors import InvalidInputError, ShapeError
from layers import MhrGCN, STGAttention
from layers.mhr_gcn import Activation
from skeleton import (
    AdjacencySet, BiasIndexTables, SkeletonGraph,
    adjacency_set, bias_index_tables, load_topology, temporal_adjacency_set,
)

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def identity(x: torch.Tensor) -> torch.Tensor:
    return x


ACTIVATION_FNS = {"gelu": F.gelu, "identity": identity}


@dataclass(frozen=True)
class GraphContext:
    """Graph structures shared by every block, built once per config."""
    graph: SkeletonGraph
    spatial_adjs: AdjacencySet
    temporal_adjs: AdjacencySet
    bias_idx: BiasIndexTables
    activation: Activation


def build_graph_context(config: ModelConfig) -> GraphContext:
    """Load the skeleton and derive adjacency sets and bias index tables."""
    graph = load_topology(config.skeleton, config.num_joints)
    return GraphContext(
        graph=graph,
        spatial_adjs=adjacency_set(graph, config.spatial_hops),
        temporal_adjs=temporal_adjacency_set(config.num_frames, config.temporal_hops),
        bias_idx=bias_index_tables(graph, config.num_frames, config.spatial_clip, config.temporal_clip),
        activation=ACTIVATION_FNS[config.activation],
    )


class STGFormerBlock(nn.Module):
    """
    h + STGA(norm(h)), then y + MHR-GCN(norm(y)).

    A sub-layer switched off by the ablation flags is the identity.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.use_stga = config.use_stga
        self.use_mhr = config.use_smhr or config.use_tmhr
        self.norm1 = nn.LayerNorm(config.embed_dim, eps=C.LAYER_NORM_EPS)
        self.attn = STGAttention(
            config.embed_dim, config.num_heads, config.spatial_clip, config.temporal_clip,
            use_tga=config.use_tga, use_sga=config.use_sga,
        )
        self.norm2 = nn.LayerNorm(config.embed_dim, eps=C.LAYER_NORM_EPS)
        self.gcn = MhrGCN(
            config.embed_dim, config.num_joints, config.num_frames, config.gcn_layers,
            config.spatial_hop_widths, config.temporal_hop_widths,
            use_smhr=config.use_smhr, use_tmhr=config.use_tmhr,
        )

    def forward(self, h: torch.Tensor, ctx: GraphContext,
                return_weights: bool = False) -> Union[torch.Tensor, Tuple[torch.Tensor, Dict]]:
        weights = {}
        if self.use_stga:
            attn_out, weights = self.attn(self.norm1(h), ctx.bias_idx, return_weights=True)
            h = h + attn_out
        if self.use_mhr:
            y = self.norm2(h)
            h = h + self.gcn(y, y, ctx.spatial_adjs, ctx.temporal_adjs, ctx.activation)
        return (h, weights) if return_weights else h


class STGFormer(nn.Module):
    """
    2D→3D pose lifter over windows of T frames and N joints.

    Attributes:
        config (ModelConfig): Architecture settings
        ctx (GraphContext): Skeleton adjacency and bias index tables
        embed_w, embed_b: Joint embedding [2×F], [F]
        blocks: L STGFormer blocks
        head_w, head_b: Regression head [F×3], [3]
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config.validate()
        self.ctx = build_graph_context(config)

        self.embed_w = nn.Parameter(torch.empty(2, config.embed_dim))
        self.embed_b = nn.Parameter(torch.zeros(config.embed_dim))
        self.blocks = nn.ModuleList([STGFormerBlock(config) for _ in range(config.num_blocks)])
        self.head_w = nn.Parameter(torch.empty(config.embed_dim, 3))
        self.head_b = nn.Parameter(torch.zeros(3))
        self.to(DTYPES[config.dtype])
        logger.debug("built STGFormer: %d blocks over %r, T=%d", config.num_blocks, self.ctx.graph, config.num_frames)

    @property
    def dtype(self) -> torch.dtype:
        return self.head_w.dtype

    def forward(self, p2d: torch.Tensor, attention_layer: Optional[int] = None):
        """
        Lift a 2D window (or a batch of windows) to 3D.

        Args:
            p2d: [T×N×2] or [B×T×N×2]
            attention_layer: When set, also return that block's attention weights

        Returns:
            [T×N×3] / [B×T×N×3], plus a weights dict when ``attention_layer`` is set
        """
        cfg = self.config
        if p2d.shape[-3:] != (cfg.num_frames, cfg.num_joints, 2):
            raise ShapeError(
                f"expected input [..., {cfg.num_frames}, {cfg.num_joints}, 2], got {tuple(p2d.shape)}"
            )
        if attention_layer is not None and not 0 <= attention_layer < len(self.blocks):
            raise ShapeError(f"attention layer {attention_layer} outside [0, {len(self.blocks)})")

        h = joint_embedding(p2d, self.embed_w, self.embed_b, self.ctx.activation)
        captured = {}
        for index, block in enumerate(self.blocks):
            if index == attention_layer:
                h, captured = block(h, self.ctx, return_weights=True)
            else:
                h = block(h, self.ctx)
        out = h @ self.head_w + self.head_b
        return (out, captured) if attention_layer is not None else out


# ============================================================================
# FUNCTIONAL SURFACE
# ============================================================================

def joint_embedding(p2d: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor,
                    activation: Activation = F.gelu) -> torch.Tensor:
    """
    σ(P W_e + b_e), the same map at every (t, n).

    Raises:
        InvalidInputError: If any input coordinate is NaN or infinite
    """
    if not torch.isfinite(p2d).all():
        raise InvalidInputError("2D input contains non-finite coordinates")
    if p2d.shape[-1] != weight.shape[0]:
        raise ShapeError(f"embedding expects {weight.shape[0]} coordinates, got {p2d.shape[-1]}")
    return activation(p2d.to(weight.dtype) @ weight + bias)


def stgformer_block(h: torch.Tensor, block: STGFormerBlock, ctx: GraphContext) -> torch.Tensor:
    """One pre-norm residual block; shape [..., T, N, F] is preserved."""
    if h.shape[-1] != block.norm1.normalized_shape[0]:
        raise ShapeError(f"block expects {block.norm1.normalized_shape[0]} channels, got {h.shape[-1]}")
    return block(h, ctx)


def model_forward(p2d: torch.Tensor, model: STGFormer) -> torch.Tensor:
    """Embedding → L blocks → per-token linear head to 3D."""
    return model(p2d.to(model.dtype))


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """
    Mean over every entry of the squared difference.

    Raises:
        ShapeError: If shapes differ
    """
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {tuple(pred.shape)} != target {tuple(target.shape)}")
    return torch.mean((pred - target) ** 2)


def count_parameters(model_or_config: Union[nn.Module, ModelConfig]) -> Dict[str, int]:
    """
    Parameter totals by component, plus 'total'.

    A ModelConfig is instantiated first; counts depend only on the config.
    Components: embedding, attention, norms, gcn, head.
    """
    model = STGFormer(model_or_config) if isinstance(model_or_config, ModelConfig) else model_or_config
    counts = OrderedDict((key, 0) for key in ("embedding", "attention", "norms", "gcn", "head"))
    for name, param in model.named_parameters():
        if name.startswith("embed_"):
            key = "embedding"
        elif name.startswith("head_"):
            key = "head"
        elif ".attn." in name:
            key = "attention"
        elif ".norm" in name:
            key = "norms"
        else:
            key = "gcn"
        counts[key] += param.numel()
    counts["total"] = sum(counts.values())
    return dict(counts)


# Structural ablation rows: attention only, attention plus one GCN path, full model
ABLATION_ROWS = {
    "stga": dict(use_stga=True, use_smhr=False, use_tmhr=False),
    "stga+smhr": dict(use_stga=True, use_smhr=True, use_tmhr=False),
    "stga+tmhr": dict(use_stga=True, use_smhr=False, use_tmhr=True),
    "full": dict(use_stga=True, use_smhr=True, use_tmhr=True),
}
