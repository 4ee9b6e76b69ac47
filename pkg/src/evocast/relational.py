"""Structural encoder for one timestamp: neighbor aggregation over the event
graph with randomized-slope rectification, plus the pooled relation update.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ShapeError

RRELU_LOWER = 1.0 / 8.0
RRELU_UPPER = 1.0 / 3.0


def init_entity_representations(in_degrees, d: int, seed: int, dtype=torch.float32):
    """One random vector per distinct in-degree class.

    Entities sharing an in-degree share the identical initial row. Returns
    (entity_matrix, class_table, class_index); the table row for class k is
    the vector of the k-th smallest distinct in-degree.
    """
    degrees = np.asarray(in_degrees, dtype=np.int64)
    distinct = np.unique(degrees)
    gen = torch.Generator().manual_seed(seed)
    table = torch.randn(len(distinct), d, generator=gen, dtype=dtype)
    lookup = {int(v): i for i, v in enumerate(distinct)}
    class_index = torch.tensor([lookup[int(v)] for v in degrees], dtype=torch.long)
    return table[class_index], table, class_index


def init_relation_representations(n_relations: int, d: int, seed: int, dtype=torch.float32):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(n_relations, d, generator=gen, dtype=dtype)


class SnapshotTensors:
    """Edge lists of one snapshot as index tensors, cached by the caller."""

    def __init__(self, snapshot, device=None):
        edges = snapshot.edges
        self.subjects = torch.tensor([e[0] for e in edges], dtype=torch.long, device=device)
        self.relations = torch.tensor([e[1] for e in edges], dtype=torch.long, device=device)
        self.objects = torch.tensor([e[2] for e in edges], dtype=torch.long, device=device)
        self.in_degrees = torch.tensor(snapshot.in_degrees, dtype=torch.long, device=device)
        self.n_edges = len(edges)


class StructuralLayer(nn.Module):
    """h_o <- rrelu(mean over incoming (s, r) of W1 (h_s + h_r) + W2 h_o).

    Entities without incoming edges keep only the self-loop term. The
    rectifier slope is random in [1/8, 1/3] during training and fixed at the
    mean 11/48 in eval mode.
    """

    def __init__(self, d: int):
        super().__init__()
        self.w1 = nn.Linear(d, d, bias=False)
        self.w2 = nn.Linear(d, d, bias=False)

    def forward(self, snap: SnapshotTensors, h_ent: torch.Tensor, h_rel: torch.Tensor):
        if h_ent.shape[1] != self.w1.in_features:
            raise ShapeError(
                f"entity width {h_ent.shape[1]} does not match layer width {self.w1.in_features}"
            )
        pre = self.w2(h_ent)
        if snap.n_edges:
            msg = self.w1(h_ent[snap.subjects] + h_rel[snap.relations])
            agg = torch.zeros_like(h_ent)
            agg.index_add_(0, snap.objects, msg)
            deg = snap.in_degrees.to(h_ent.dtype).clamp_min(1.0).unsqueeze(1)
            pre = pre + agg / deg
        return F.rrelu(pre, RRELU_LOWER, RRELU_UPPER, training=self.training)


class StructuralEncoder(nn.Module):
    """Stack of structural layers; relations are held fixed across layers."""

    def __init__(self, d: int, n_layers: int):
        super().__init__()
        if n_layers < 1:
            raise ShapeError("encoder needs at least one layer")
        self.layers = nn.ModuleList(StructuralLayer(d) for _ in range(n_layers))

    def forward(self, snap: SnapshotTensors, h_ent: torch.Tensor, h_rel: torch.Tensor):
        out = h_ent
        for layer in self.layers:
            out = layer(snap, out, h_rel)
        return out


def update_relation_representations(
    snap: SnapshotTensors, h_ent: torch.Tensor, h_rel_prev: torch.Tensor
) -> torch.Tensor:
    """Mean-pool each active relation's related entities with its carried
    vector; inactive relations pass through unchanged."""
    if h_ent.shape[1] != h_rel_prev.shape[1]:
        raise ShapeError("entity and relation widths differ")
    if snap.n_edges == 0:
        return h_rel_prev
    pairs = torch.cat(
        [
            torch.stack([snap.relations, snap.subjects], dim=1),
            torch.stack([snap.relations, snap.objects], dim=1),
        ]
    )
    pairs = torch.unique(pairs, dim=0)
    rel_idx, ent_idx = pairs[:, 0], pairs[:, 1]
    n_rel = h_rel_prev.shape[0]
    sums = torch.zeros_like(h_rel_prev)
    sums.index_add_(0, rel_idx, h_ent[ent_idx])
    counts = torch.zeros(n_rel, dtype=h_ent.dtype, device=h_ent.device)
    counts.index_add_(0, rel_idx, torch.ones(len(rel_idx), dtype=h_ent.dtype, device=h_ent.device))
    active = counts > 0
    pooled = (sums + h_rel_prev) / (counts + 1.0).unsqueeze(1)
    return torch.where(active.unsqueeze(1), pooled, h_rel_prev)
