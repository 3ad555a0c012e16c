"""
Dual-path modulated hop-wise regular GCN (MHR-GCN)

The channels are split into a spatial half and a temporal half. The spatial
path convolves over the joints of each frame, the temporal path over the
frames of each joint. Each path runs one modulated graph convolution per
exact-hop ring, adds a regular connection X W̃_r from the block input, and
concatenates the per-hop results back to the path width before GELU. The two
path outputs are concatenated and fused by a learned projection. The whole
propagation is repeated for each stacked layer.

Per-hop widths are the even partition of the path width (see
``config.hop_widths``), so the concatenation always restores F/2.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from errors import ShapeError
from layers.gcn_baselines import as_adjacency
from skeleton import AdjacencySet

Activation = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class PathParams:
    """
    One path of one propagation layer.

    Attributes:
        weights: W_r [F_p × F_h,r] per hop
        modulations: M_r [nodes × F_h,r] per hop
        residual_weights: W̃_r [F_p × F_h,r] per hop
    """
    weights: Sequence[torch.Tensor]
    modulations: Sequence[torch.Tensor]
    residual_weights: Sequence[torch.Tensor]


@dataclass
class MhrLayerParams:
    """Spatial path, temporal path and fusion projection W_fuse [F×F]."""
    spatial: PathParams
    temporal: PathParams
    w_fuse: torch.Tensor


def hop_branch(h_path: torch.Tensor, adj_h, w: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
    """
    H̃_r = Ã_r((H W_r) ⊙ M_r), no activation.

    Args:
        h_path: Path features [..., nodes, F_p]
        adj_h: Normalized exact-hop adjacency [nodes × nodes]
        w: W_r [F_p × F_h]
        m: M_r [nodes × F_h]

    Returns:
        Branch output [..., nodes, F_h]
    """
    adj = as_adjacency(adj_h, h_path)
    nodes = h_path.shape[-2]
    if adj.shape != (nodes, nodes):
        raise ShapeError(f"hop_branch: adjacency {tuple(adj.shape)} does not match {nodes} nodes")
    if w.shape[0] != h_path.shape[-1] or m.shape != (nodes, w.shape[1]):
        raise ShapeError(
            f"hop_branch: W {tuple(w.shape)} / M {tuple(m.shape)} incompatible with input {tuple(h_path.shape)}"
        )
    return adj @ ((h_path @ w) * m)


def path_forward(
    h_path: torch.Tensor,
    x_path: torch.Tensor,
    params: PathParams,
    adjs: AdjacencySet,
    activation: Activation = F.gelu,
) -> torch.Tensor:
    """
    σ(⊞_r (H̃_r + X W̃_r)) over the hop rings r = 1..R.

    Args:
        h_path: Path input [..., nodes, F_p]
        x_path: Regular-connection source [..., nodes, F_p]
        params: Per-hop tensors; R = number of hops
        adjs: Adjacency set with at least R rings
        activation: Elementwise nonlinearity

    Returns:
        Path output [..., nodes, F_p]

    Raises:
        ShapeError: Too few rings, or per-hop widths that do not restore F_p
    """
    hops = len(params.weights)
    if not (len(params.modulations) == len(params.residual_weights) == hops):
        raise ShapeError("path_forward: per-hop parameter lists differ in length")
    if hops > len(adjs.per_hop):
        raise ShapeError(f"path_forward: {hops} hops requested, adjacency set has {len(adjs.per_hop)}")
    if sum(w.shape[1] for w in params.weights) != h_path.shape[-1]:
        raise ShapeError(
            f"path_forward: hop widths {[w.shape[1] for w in params.weights]} do not sum to {h_path.shape[-1]}"
        )
    if x_path.shape != h_path.shape:
        raise ShapeError(f"path_forward: skip source {tuple(x_path.shape)} != input {tuple(h_path.shape)}")

    branches = [
        hop_branch(h_path, adjs.per_hop[r], params.weights[r], params.modulations[r])
        + x_path @ params.residual_weights[r]
        for r in range(hops)
    ]
    return activation(torch.cat(branches, dim=-1))


def mhr_gcn_forward(
    h: torch.Tensor,
    x_skip: torch.Tensor,
    layers: Sequence[MhrLayerParams],
    spatial_adjs: AdjacencySet,
    temporal_adjs: AdjacencySet,
    use_smhr: bool = True,
    use_tmhr: bool = True,
    activation: Activation = F.gelu,
) -> torch.Tensor:
    """
    Stacked dual-path propagation with channel-concat fusion.

    The first F/2 channels feed the spatial path (per frame, over joints),
    the last F/2 the temporal path (per joint, over frames). A disabled path
    passes its half through; the fusion projection is applied either way.

    Args:
        h: Features [..., T, N, F]
        x_skip: Regular-connection source [..., T, N, F], reused by every layer
        layers: One MhrLayerParams per stacked layer
        spatial_adjs: Joint adjacency set (≥ J rings)
        temporal_adjs: Frame-chain adjacency set (≥ K rings)
        use_smhr / use_tmhr: Path ablation switches
        activation: Elementwise nonlinearity

    Returns:
        Features [..., T, N, F]

    Raises:
        ShapeError: Odd F, or hop widths inconsistent with F/2
    """
    width = h.shape[-1]
    if width % 2:
        raise ShapeError(f"mhr_gcn_forward: channel count {width} is odd")
    if x_skip.shape != h.shape:
        raise ShapeError(f"mhr_gcn_forward: skip source {tuple(x_skip.shape)} != input {tuple(h.shape)}")
    half = width // 2
    x_s, x_t = x_skip[..., :half], x_skip[..., half:]

    for layer in layers:
        h_s, h_t = h[..., :half], h[..., half:]

        if use_smhr:
            out_s = path_forward(h_s, x_s, layer.spatial, spatial_adjs, activation)
        else:
            out_s = h_s

        if use_tmhr:
            frames_last = '... t n c -> ... n t c'
            out_t = path_forward(
                rearrange(h_t, frames_last), rearrange(x_t, frames_last),
                layer.temporal, temporal_adjs, activation,
            )
            out_t = rearrange(out_t, '... n t c -> ... t n c')
        else:
            out_t = h_t

        h = torch.cat([out_s, out_t], dim=-1) @ layer.w_fuse
    return h


class _PathModule(nn.Module):
    """Per-hop parameter lists of one path."""

    def __init__(self, path_dim: int, nodes: int, widths: Tuple[int, ...]):
        super().__init__()
        self.weights = nn.ParameterList([nn.Parameter(torch.empty(path_dim, w)) for w in widths])
        self.modulations = nn.ParameterList([nn.Parameter(torch.ones(nodes, w)) for w in widths])
        self.residual_weights = nn.ParameterList([nn.Parameter(torch.empty(path_dim, w)) for w in widths])

    def params(self) -> PathParams:
        return PathParams(list(self.weights), list(self.modulations), list(self.residual_weights))


class _LayerModule(nn.Module):
    def __init__(self, embed_dim: int, num_joints: int, num_frames: int,
                 spatial_widths: Tuple[int, ...], temporal_widths: Tuple[int, ...]):
        super().__init__()
        self.spatial = _PathModule(embed_dim // 2, num_joints, spatial_widths)
        self.temporal = _PathModule(embed_dim // 2, num_frames, temporal_widths)
        self.w_fuse = nn.Parameter(torch.empty(embed_dim, embed_dim))

    def params(self) -> MhrLayerParams:
        return MhrLayerParams(self.spatial.params(), self.temporal.params(), self.w_fuse)


class MhrGCN(nn.Module):
    """
    Parameter container for one MHR-GCN sub-layer.

    Modulations start at ones; weights are filled by ``training.init_parameters``.
    """

    def __init__(self, embed_dim: int, num_joints: int, num_frames: int, num_layers: int,
                 spatial_widths: Tuple[int, ...], temporal_widths: Tuple[int, ...],
                 use_smhr: bool = True, use_tmhr: bool = True):
        super().__init__()
        self.use_smhr = use_smhr
        self.use_tmhr = use_tmhr
        self.layers = nn.ModuleList([
            _LayerModule(embed_dim, num_joints, num_frames, spatial_widths, temporal_widths)
            for _ in range(num_layers)
        ])

    def forward(self, h: torch.Tensor, x_skip: torch.Tensor, spatial_adjs: AdjacencySet,
                temporal_adjs: AdjacencySet, activation: Activation = F.gelu) -> torch.Tensor:
        return mhr_gcn_forward(
            h, x_skip, [layer.params() for layer in self.layers], spatial_adjs, temporal_adjs,
            use_smhr=self.use_smhr, use_tmhr=self.use_tmhr, activation=activation,
        )
