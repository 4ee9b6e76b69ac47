"""Relation scorer over entity pairs: a 1-D convolution on the stacked pair
signal, a fully connected projection back to width d, and per-relation
sigmoid scores against the relation matrix. Multi-label by construction; the
scores of one query do not sum to 1.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ShapeError

PROB_EPS = 1e-7


class ConvPairScorer(nn.Module):
    def __init__(self, d: int, channels: int = 50, kernel_size: int = 3, dropout: float = 0.2):
        super().__init__()
        self.d = d
        self.conv = nn.Conv1d(2, channels, kernel_size, padding=(kernel_size - 1) // 2)
        self.fc = nn.Linear(channels * d, d)
        self.drop = nn.Dropout(dropout)

    def forward(
        self, e_subject: torch.Tensor, e_object: torch.Tensor, h_rel: torch.Tensor
    ) -> torch.Tensor:
        """Probabilities (B, N_r) for each query pair against every relation."""
        if e_subject.shape != e_object.shape:
            raise ShapeError("subject and object batches differ in shape")
        if e_subject.shape[-1] != self.d or h_rel.shape[1] != self.d:
            raise ShapeError("entity or relation width does not match the decoder width")
        squeeze = e_subject.dim() == 1
        if squeeze:
            e_subject = e_subject.unsqueeze(0)
            e_object = e_object.unsqueeze(0)
        signal = torch.stack([e_subject, e_object], dim=1)
        feat = self.drop(torch.relu(self.conv(signal)))
        hidden = self.drop(self.fc(feat.reshape(feat.shape[0], -1)))
        probs = torch.sigmoid(hidden @ h_rel.T)
        return probs.squeeze(0) if squeeze else probs


def prediction_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Multi-label cross entropy, summed over relations, averaged over samples.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    if probs.shape != labels.shape:
        raise ShapeError("probability and label shapes differ")
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    y = labels.to(p.dtype)
    per_entry = y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)
    n_samples = p.shape[0] if p.dim() > 1 else 1
    return -per_entry.sum() / n_samples
