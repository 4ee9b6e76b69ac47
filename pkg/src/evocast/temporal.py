"""Temporal blending and integration: a sigmoid residual gate between the
freshly computed and the carried representations, a learnable cosine time
position code, and single-head attention over the window sequence.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import RangeError, ShapeError


class TimeResidualGate(nn.Module):
    """H_t = X * H_new + (1 - X) * H_prev with X = sigmoid(W3 H_prev + b)."""

    def __init__(self, d: int):
        super().__init__()
        self.w3 = nn.Linear(d, d, bias=True)

    def forward(self, h_new: torch.Tensor, h_prev: torch.Tensor) -> torch.Tensor:
        if h_new.shape != h_prev.shape:
            raise ShapeError(
                f"gate inputs differ in shape: {tuple(h_new.shape)} vs {tuple(h_prev.shape)}"
            )
        x = torch.sigmoid(self.w3(h_prev))
        return x * h_new + (1.0 - x) * h_prev


class WindowAttention(nn.Module):
    """Position-enhanced single-head attention over a window of states.

    Inputs per position are [H_t; Phi(tau_t)] of width 2d; scores are scaled
    by 1/sqrt(d) (the base width). Attended outputs stay 2d; ``project``
    reduces them back to d for downstream consumers.
    """

    def __init__(self, d: int):
        super().__init__()
        self.d = d
        self.omega = nn.Parameter(self._geometric_frequencies(d))
        self.w_q = nn.Linear(2 * d, 2 * d, bias=False)
        self.w_k = nn.Linear(2 * d, 2 * d, bias=False)
        self.out = nn.Linear(2 * d, d, bias=False)

    @staticmethod
    def _geometric_frequencies(d: int) -> torch.Tensor:
        return torch.tensor(
            [1.0 / (10000.0 ** (2.0 * k / d)) for k in range(d)], dtype=torch.float32
        )

    def position_encoding(self, tau) -> torch.Tensor:
        """Phi(tau)_k = sqrt(1/d) cos(omega_k tau)."""
        tau_t = torch.as_tensor(float(tau), dtype=self.omega.dtype, device=self.omega.device)
        return math.sqrt(1.0 / self.d) * torch.cos(self.omega * tau_t)

    def encode(self, z_seq: torch.Tensor) -> torch.Tensor:
        """Attend each position over the window.

        z_seq: (T, N, 2d) of position-enhanced states for N independent
        sequences. Returns (T, N, 2d) of attention mixtures.
        """
        if z_seq.dim() != 3 or z_seq.shape[0] < 1:
            raise RangeError("attention needs a non-empty (T, N, 2d) sequence")
        q = self.w_q(z_seq)
        k = self.w_k(z_seq)
        logits = torch.einsum("tnd,snd->nts", q, k) / math.sqrt(self.d)
        weights = torch.softmax(logits, dim=2)
        return torch.einsum("nts,snd->tnd", weights, z_seq)

    def forward(self, z_seq: torch.Tensor) -> torch.Tensor:
        """Integrated d-width vectors at the final window position."""
        return self.out(self.encode(z_seq)[-1])
