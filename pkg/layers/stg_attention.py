"""
Spatio-temporal criss-cross graph attention (STGA)

The embedding channels are split into a time group and a space group. The
time group attends over the frames of each joint, the space group over the
joints of each frame, and each adds a learnable per-head scalar to its logits
indexed by frame offset (temporal) or clipped hop distance (spatial). The two
outputs are concatenated and mixed by an output projection.

Every reduction is a dense matmul or softmax over the last axis in a fixed
order, so outputs are bitwise reproducible on the same device.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
from einops import rearrange

from errors import ShapeError
from skeleton import BiasIndexTables

AttentionOutput = Union[torch.Tensor, Tuple[torch.Tensor, Dict[str, torch.Tensor]]]


@dataclass
class AttentionGroupParams:
    """
    Projections and bias table of one channel group.

    Attributes:
        w_q, w_k, w_v: [F_g×F_g] projections
        bias: [heads × buckets] learnable logit offsets
        num_heads: Heads in this group; must divide F_g
    """
    w_q: torch.Tensor
    w_k: torch.Tensor
    w_v: torch.Tensor
    bias: torch.Tensor
    num_heads: int


@dataclass
class STGAParams:
    """Both groups plus the output projection W_O [F×F]."""
    time: AttentionGroupParams
    space: AttentionGroupParams
    w_o: torch.Tensor
    use_tga: bool = True
    use_sga: bool = True


def scaled_dot_attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    softmax(Q Kᵀ / √d + bias) V over the last two axes.

    Args:
        q, k, v: [..., M, d]
        bias: Optional additive logits broadcastable to [..., M, M]
        return_weights: Also return the post-softmax weights

    Returns:
        Output [..., M, d], optionally with weights [..., M, M]

    Raises:
        ShapeError: If d = 0 or the row counts / widths disagree
    """
    d = q.shape[-1]
    if d == 0:
        raise ShapeError("scaled_dot_attention: head dimension is zero")
    if k.shape != q.shape or v.shape[-2] != k.shape[-2]:
        raise ShapeError(
            f"scaled_dot_attention: q {tuple(q.shape)}, k {tuple(k.shape)}, v {tuple(v.shape)} disagree"
        )

    logits = q @ k.transpose(-1, -2) / math.sqrt(d)
    if bias is not None:
        logits = logits + bias
    weights = torch.softmax(logits, dim=-1)
    out = weights @ v
    if return_weights:
        return out, weights
    return out


def _project(h: torch.Tensor, params: AttentionGroupParams, name: str):
    f_g = params.w_q.shape[0]
    if h.shape[-1] != f_g:
        raise ShapeError(f"{name}: input width {h.shape[-1]} != group width {f_g}")
    if f_g % params.num_heads:
        raise ShapeError(f"{name}: {params.num_heads} heads do not divide width {f_g}")
    return h @ params.w_q, h @ params.w_k, h @ params.w_v


def _gather_bias(bias: torch.Tensor, index: np.ndarray, name: str) -> torch.Tensor:
    index = torch.tensor(np.asarray(index), dtype=torch.long, device=bias.device)
    if int(index.max()) >= bias.shape[-1]:
        raise ShapeError(f"{name}: index table needs {int(index.max()) + 1} buckets, bias has {bias.shape[-1]}")
    return bias[:, index]


def temporal_graph_attention(
    h_t: torch.Tensor,
    params: AttentionGroupParams,
    bias_idx: BiasIndexTables,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    Attention over the frames of each joint, biased by b^t[ψ(t1, t2)].

    Args:
        h_t: Time-group features [..., T, N, F_g]
        params: Time-group projections and bias [heads × (2·D_t+1)]
        bias_idx: Index tables; temporal_index must be [T×T]
        return_weights: Also return weights [..., N, heads, T, T]

    Returns:
        Features [..., T, N, F_g]
    """
    t_frames = h_t.shape[-3]
    if bias_idx.temporal_index.shape != (t_frames, t_frames):
        raise ShapeError(
            f"temporal_graph_attention: index table {bias_idx.temporal_index.shape} does not cover {t_frames} frames"
        )
    q, k, v = _project(h_t, params, "temporal_graph_attention")
    q, k, v = (rearrange(x, '... t n (h d) -> ... n h t d', h=params.num_heads) for x in (q, k, v))
    bias = _gather_bias(params.bias, bias_idx.temporal_index, "temporal_graph_attention")

    out, weights = scaled_dot_attention(q, k, v, bias, return_weights=True)
    out = rearrange(out, '... n h t d -> ... t n (h d)')
    return (out, weights) if return_weights else out


def spatial_graph_attention(
    h_s: torch.Tensor,
    params: AttentionGroupParams,
    bias_idx: BiasIndexTables,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    Attention over the joints of each frame, biased by b^s[φ(i, j)].

    Args:
        h_s: Space-group features [..., T, N, F_g]
        params: Space-group projections and bias [heads × (D_s+2)]
        bias_idx: Index tables; spatial_index must be [N×N]
        return_weights: Also return weights [..., T, heads, N, N]

    Returns:
        Features [..., T, N, F_g]
    """
    n_joints = h_s.shape[-2]
    if bias_idx.spatial_index.shape != (n_joints, n_joints):
        raise ShapeError(
            f"spatial_graph_attention: index table {bias_idx.spatial_index.shape} does not cover {n_joints} joints"
        )
    q, k, v = _project(h_s, params, "spatial_graph_attention")
    q, k, v = (rearrange(x, '... t n (h d) -> ... t h n d', h=params.num_heads) for x in (q, k, v))
    bias = _gather_bias(params.bias, bias_idx.spatial_index, "spatial_graph_attention")

    out, weights = scaled_dot_attention(q, k, v, bias, return_weights=True)
    out = rearrange(out, '... t h n d -> ... t n (h d)')
    return (out, weights) if return_weights else out


def stg_attention_block(
    h: torch.Tensor,
    params: STGAParams,
    bias_idx: BiasIndexTables,
    return_weights: bool = False,
) -> AttentionOutput:
    """
    Split channels, attend along time and space in parallel, concat, project.

    The first F/2 channels form the time group and the last F/2 the space
    group. A group switched off by its ablation flag passes its channels
    through unmixed.

    Args:
        h: Features [..., T, N, F]
        params: Both groups and W_O
        bias_idx: Index tables for T frames and N joints
        return_weights: Also return {'temporal': ..., 'spatial': ...}

    Returns:
        Features [..., T, N, F]

    Raises:
        ShapeError: If F is odd or any shape disagrees
    """
    width = h.shape[-1]
    if width % 2:
        raise ShapeError(f"stg_attention_block: channel count {width} is odd")
    half = width // 2
    h_t, h_s = h[..., :half], h[..., half:]
    weights = {}

    if params.use_tga:
        out_t, weights['temporal'] = temporal_graph_attention(h_t, params.time, bias_idx, return_weights=True)
    else:
        out_t = h_t
    if params.use_sga:
        out_s, weights['spatial'] = spatial_graph_attention(h_s, params.space, bias_idx, return_weights=True)
    else:
        out_s = h_s

    out = torch.cat([out_t, out_s], dim=-1) @ params.w_o
    return (out, weights) if return_weights else out


class STGAttention(nn.Module):
    """
    Parameter container for one STGA layer.

    Attributes:
        w_q_t, w_k_t, w_v_t: Time-group projections [F/2 × F/2]
        w_q_s, w_k_s, w_v_s: Space-group projections [F/2 × F/2]
        bias_t: Temporal bias [H/2 × (2·D_t+1)], zero at init
        bias_s: Spatial bias [H/2 × (D_s+2)], zero at init
        w_o: Output projection [F × F]
    """

    def __init__(self, embed_dim: int, num_heads: int, spatial_clip: int, temporal_clip: int,
                 use_tga: bool = True, use_sga: bool = True):
        super().__init__()
        group = embed_dim // 2
        self.heads_per_group = num_heads // 2
        self.use_tga = use_tga
        self.use_sga = use_sga

        for name in ("w_q_t", "w_k_t", "w_v_t", "w_q_s", "w_k_s", "w_v_s"):
            setattr(self, name, nn.Parameter(torch.empty(group, group)))
        self.bias_t = nn.Parameter(torch.zeros(self.heads_per_group, 2 * temporal_clip + 1))
        self.bias_s = nn.Parameter(torch.zeros(self.heads_per_group, spatial_clip + 2))
        self.w_o = nn.Parameter(torch.empty(embed_dim, embed_dim))

    def params(self) -> STGAParams:
        return STGAParams(
            time=AttentionGroupParams(self.w_q_t, self.w_k_t, self.w_v_t, self.bias_t, self.heads_per_group),
            space=AttentionGroupParams(self.w_q_s, self.w_k_s, self.w_v_s, self.bias_s, self.heads_per_group),
            w_o=self.w_o,
            use_tga=self.use_tga,
            use_sga=self.use_sga,
        )

    def forward(self, h: torch.Tensor, bias_idx: BiasIndexTables, return_weights: bool = False) -> AttentionOutput:
        return stg_attention_block(h, self.params(), bias_idx, return_weights=return_weights)
