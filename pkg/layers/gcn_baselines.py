"""
Baseline graph convolutions

The four GCN formulations that the MHR-GCN generalizes: vanilla (shared
weight), unshared (per-node weights), weight-modulated, and modulated with a
regular residual connection. All use the row-vector convention H' = σ(Ã H W)
with features along columns, and σ = GELU.

They serve as ablation references and as exact oracles for the degenerate
cases of the hop-wise GCN.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import torch
import torch.nn.functional as F

from errors import ShapeError


@dataclass
class GcnLayerParams:
    """
    Learnable tensors of one baseline GCN layer; unused fields stay None.

    Attributes:
        weight: Shared W [F×F']
        per_node_weights: W_j stacked as [N×F'×F] (unshared variant)
        modulation: M [N×F'], row j modulates node j
        residual_weight: W̃ [F×F'] applied to the skip source
    """
    weight: Optional[torch.Tensor] = None
    per_node_weights: Optional[torch.Tensor] = None
    modulation: Optional[torch.Tensor] = None
    residual_weight: Optional[torch.Tensor] = None


def as_adjacency(adj: Union[np.ndarray, torch.Tensor], like: torch.Tensor) -> torch.Tensor:
    """Move an adjacency matrix to the dtype and device of ``like``."""
    if isinstance(adj, np.ndarray) and not adj.flags.writeable:
        adj = adj.copy()
    return torch.as_tensor(adj, dtype=like.dtype, device=like.device)


def _check(h: torch.Tensor, adj: torch.Tensor, weight: Optional[torch.Tensor], name: str) -> None:
    n = h.shape[-2]
    if adj.shape != (n, n):
        raise ShapeError(f"{name}: adjacency {tuple(adj.shape)} does not match {n} nodes")
    if weight is None:
        raise ShapeError(f"{name}: missing weight")
    if weight.shape[0] != h.shape[-1]:
        raise ShapeError(f"{name}: weight {tuple(weight.shape)} does not accept {h.shape[-1]} features")


def vanilla_gcn(h: torch.Tensor, p: GcnLayerParams, adj) -> torch.Tensor:
    """σ(Ã H W): one shared transform for every node."""
    adj = as_adjacency(adj, h)
    _check(h, adj, p.weight, "vanilla_gcn")
    return F.gelu(adj @ (h @ p.weight))


def unshared_gcn(h: torch.Tensor, p: GcnLayerParams, adj) -> torch.Tensor:
    """h'_i = σ(Σ_j ã_ij W_j h_j) with a separate W_j per node."""
    adj = as_adjacency(adj, h)
    w = p.per_node_weights
    if w is None or w.dim() != 3 or w.shape[0] != h.shape[-2] or w.shape[2] != h.shape[-1]:
        raise ShapeError("unshared_gcn: per_node_weights must be [N×F'×F]")
    _check(h, adj, w[0].T, "unshared_gcn")
    transformed = torch.einsum('...nf,ngf->...ng', h, w)
    return F.gelu(adj @ transformed)


def modulated_gcn(h: torch.Tensor, p: GcnLayerParams, adj) -> torch.Tensor:
    """σ(Ã((H W) ⊙ M)): shared transform, per-node modulation."""
    adj = as_adjacency(adj, h)
    _check(h, adj, p.weight, "modulated_gcn")
    if p.modulation is None or p.modulation.shape != (h.shape[-2], p.weight.shape[1]):
        raise ShapeError("modulated_gcn: modulation must be [N×F']")
    return F.gelu(adj @ ((h @ p.weight) * p.modulation))


def regular_modulated_gcn(h: torch.Tensor, x_input: torch.Tensor, p: GcnLayerParams, adj) -> torch.Tensor:
    """
    σ(Ã((H W) ⊙ M) + X W̃): modulated GCN with a regular residual connection.

    Args:
        h: Layer input [N×F]
        x_input: Skip source [N×F]
        p: Weight, modulation and residual weight
        adj: Normalized adjacency [N×N]

    Returns:
        Output features [N×F']

    Raises:
        ShapeError: On any shape disagreement
    """
    adj = as_adjacency(adj, h)
    _check(h, adj, p.weight, "regular_modulated_gcn")
    if x_input.shape != h.shape:
        raise ShapeError(f"regular_modulated_gcn: skip source {tuple(x_input.shape)} != input {tuple(h.shape)}")
    if p.modulation is None or p.modulation.shape != (h.shape[-2], p.weight.shape[1]):
        raise ShapeError("regular_modulated_gcn: modulation must be [N×F']")
    if p.residual_weight is None or p.residual_weight.shape != p.weight.shape:
        raise ShapeError("regular_modulated_gcn: residual weight must match W")
    return F.gelu(adj @ ((h @ p.weight) * p.modulation) + x_input @ p.residual_weight)
