"""Fully connected cluster graph: latent pairwise correlation vectors, their
scalar intensities, modulation by a static co-occurrence partition, message
passing between clusters, and propagation back to entities.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .clustering import AlignmentResult, cosine_matrix, hungarian_match
from .errors import ConfigError, ShapeError


class ClusterGraphEncoder(nn.Module):
    """Learnable pieces: pair encoder phi, intensity convolution, update map.

    phi and the update map are separate two-layer perceptrons (hidden width
    d, ReLU hidden, linear output) over concatenated 2d inputs; the intensity
    head is a single-channel width-3 same-padded 1-D convolution reduced by
    mean and squashed by a sigmoid.
    """

    def __init__(self, d: int, kernel_size: int = 3):
        super().__init__()
        self.d = d
        self.phi = nn.Sequential(nn.Linear(2 * d, d), nn.ReLU(), nn.Linear(d, d))
        self.conv = nn.Conv1d(1, 1, kernel_size, padding=(kernel_size - 1) // 2)
        self.update = nn.Sequential(nn.Linear(2 * d, d), nn.ReLU(), nn.Linear(d, d))

    def latent_correlation(self, clusters: torch.Tensor) -> torch.Tensor:
        """All ordered pairs: S[i, j] = relu(phi([c_i; c_j])), (k, k, d)."""
        k = clusters.shape[0]
        left = clusters.unsqueeze(1).expand(k, k, self.d)
        right = clusters.unsqueeze(0).expand(k, k, self.d)
        stacked = torch.cat([left, right], dim=2).reshape(k * k, 2 * self.d)
        return torch.relu(self.phi(stacked)).reshape(k, k, self.d)

    def correlation_intensity(self, s_tensor: torch.Tensor) -> torch.Tensor:
        """Per-pair scalar in (0, 1) from the convolution reduction."""
        k = s_tensor.shape[0]
        flat = s_tensor.reshape(k * k, 1, self.d)
        conv = self.conv(flat).mean(dim=2).squeeze(1)
        return torch.sigmoid(conv).reshape(k, k)

    def message_passing(
        self, s_tensor: torch.Tensor, q_hat: torch.Tensor, clusters: torch.Tensor
    ) -> torch.Tensor:
        """v_i = sum_{j != i} q_hat[i, j] s[i, j]; c_i <- update([v_i; c_i])."""
        k = clusters.shape[0]
        mask = 1.0 - torch.eye(k, dtype=s_tensor.dtype, device=s_tensor.device)
        weighted = (q_hat * mask).unsqueeze(2) * s_tensor
        v = weighted.sum(dim=1)
        return self.update(torch.cat([v, clusters], dim=1))


def spectral_partition(adjacency: np.ndarray, n_parts: int, seed: int) -> np.ndarray:
    """Partition the static graph: normalized-Laplacian embedding + k-means.

    Rows of the bottom-eigenvector embedding are length-normalized before the
    seeded k-means. Deterministic for a fixed seed.
    """
    from sklearn.cluster import KMeans

    a = np.asarray(adjacency, dtype=np.float64)
    n = a.shape[0]
    if n_parts > n:
        raise ConfigError(f"partition count {n_parts} exceeds node count {n}")
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(n) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    vals, vecs = np.linalg.eigh(lap)
    embedding = vecs[:, np.argsort(vals)[:n_parts]]
    norms = np.linalg.norm(embedding, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    embedding = embedding / norms
    km = KMeans(n_clusters=n_parts, random_state=seed, n_init=10)
    return km.fit_predict(embedding)


def spectral_global_clusters(
    global_graph, n_parts: int, seed: int, entity_matrix: torch.Tensor
):
    """Global cluster centroids in embedding space.

    The partition comes from the static graph; each centroid is the mean of
    its part's current entity rows. Returns (centroids, parts).
    """
    parts = spectral_partition(global_graph.adjacency, n_parts, seed)
    return global_centroids_from_parts(parts, entity_matrix), parts


def global_centroids_from_parts(parts: np.ndarray, entity_matrix: torch.Tensor) -> torch.Tensor:
    n_parts = int(parts.max()) + 1 if len(parts) else 0
    idx = torch.tensor(parts, dtype=torch.long, device=entity_matrix.device)
    sums = torch.zeros(n_parts, entity_matrix.shape[1], dtype=entity_matrix.dtype)
    sums.index_add_(0, idx, entity_matrix)
    counts = torch.bincount(idx, minlength=n_parts).to(entity_matrix.dtype).clamp_min(1.0)
    return sums / counts.unsqueeze(1)


def match_to_global(clusters: torch.Tensor, global_centroids: torch.Tensor) -> AlignmentResult:
    """Assign each cluster its global counterpart by max-sum cosine matching."""
    if clusters.shape != global_centroids.shape:
        raise ShapeError(
            f"cluster shapes differ: {tuple(clusters.shape)} vs {tuple(global_centroids.shape)}"
        )
    return hungarian_match(cosine_matrix(clusters, global_centroids))


def enhance_intensity(q: torch.Tensor, permutation, global_centroids: torch.Tensor):
    """Scale intensities by cosine of the matched global centroids.

    Returns (q_hat, m) with m[i, j] = cos(g_{perm(i)}, g_{perm(j)}).
    """
    perm = list(permutation)
    matched = global_centroids[perm]
    m = cosine_matrix(matched, matched)
    return q * m, m


def propagate_to_entities(membership: torch.Tensor, clusters: torch.Tensor) -> torch.Tensor:
    """Membership-weighted mix of cluster vectors per entity: U @ C."""
    if membership.shape[1] != clusters.shape[0]:
        raise ShapeError(
            f"membership columns {membership.shape[1]} != cluster rows {clusters.shape[0]}"
        )
    return membership @ clusters
