"""Soft overlapping clusters per timestamp and their evolution across time:
similarity-based fuzzy assignment, one-to-one matching of consecutive cluster
sets, fusion of matched clusters, and a smoothness penalty.

The alternating assignment/centroid iteration here is not a guaranteed
descent method for the cosine objective, so each step is accepted only when
the objective does not increase; the first non-improving candidate is
rejected and iteration stops. The recorded objective history is therefore
non-increasing by construction while every membership matrix in it is the
exact similarity-proportional assignment of its centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, DegenerateInputError, ShapeError

NORM_FLOOR = 1e-12


@dataclass
class ClusteringConfig:
    n_clusters: int
    fuzzifier: float = 2.0
    max_iter: int = 100
    tol: float = 1e-6
    fusion_weight: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        if self.fuzzifier <= 1.0:
            raise ConfigError("fuzzifier must be > 1")
        if self.tol <= 0.0:
            raise ConfigError("clustering tolerance must be > 0")
        if not 0.0 <= self.fusion_weight <= 1.0:
            raise ConfigError("fusion weight must lie in [0, 1]")


@dataclass
class ClusterState:
    """Clusters of one timestamp: centroids, memberships, representations."""

    centroids: torch.Tensor
    membership: torch.Tensor
    cluster_reps: torch.Tensor
    timestamp: int | None
    objective: float
    objective_history: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    affinity: np.ndarray
    permutation: tuple[int, ...]
    total: float


def cosine_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise cosine of rows; rows with norm below 1e-12 yield cosine 0."""
    na = a.norm(dim=1, keepdim=True)
    nb = b.norm(dim=1, keepdim=True)
    denom = na * nb.T
    cos = (a @ b.T) / denom.clamp_min(NORM_FLOOR)
    mask = (na < NORM_FLOOR) | (nb.T < NORM_FLOOR)
    return torch.where(mask, torch.zeros_like(cos), cos)


def soft_assign(entities: torch.Tensor, centroids: torch.Tensor, fuzzifier: float):
    """Similarity-proportional memberships and the cluster representations.

    u_{i,j} = cos(e_i, mu_j)^{1/(m-1)} / sum_k, cosines floored at 1e-12; the
    representation of cluster j is sum_i u_{i,j} e_i. Differentiable in
    ``entities`` (centroids are treated as constants by callers).
    """
    cos = cosine_matrix(entities, centroids).clamp_min(NORM_FLOOR)
    powered = cos ** (1.0 / (fuzzifier - 1.0))
    membership = powered / powered.sum(dim=1, keepdim=True)
    cluster_reps = membership.T @ entities
    return membership, cluster_reps


def clustering_objective(membership, cos, fuzzifier: float) -> float:
    return float(((membership**fuzzifier) * (1.0 - cos)).sum().item())


def _spherical_centroids(entities_unit, membership, fuzzifier: float):
    weighted = (membership**fuzzifier).T @ entities_unit
    return weighted / weighted.norm(dim=1, keepdim=True).clamp_min(NORM_FLOOR)


def _kmeanspp_init(entities_unit: torch.Tensor, k: int, seed: int) -> torch.Tensor:
    """Spread-out seeding on the unit sphere, deterministic per seed."""
    n = entities_unit.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    for _ in range(k - 1):
        sims = entities_unit @ entities_unit[chosen].T
        dist = (1.0 - sims.max(dim=1).values).clamp_min(0.0)
        weights = (dist**2).cpu().numpy().astype(np.float64)
        total = weights.sum()
        if total <= 0.0:
            probs = np.full(n, 1.0 / n)
        else:
            probs = weights / total
        chosen.append(int(rng.choice(n, p=probs)))
    return entities_unit[chosen].clone()


def fuzzy_cmeans(
    entities: torch.Tensor, cfg: ClusteringConfig, timestamp: int | None = None
) -> ClusterState:
    """Cluster entity rows into ``cfg.n_clusters`` soft overlapping groups.

    The iteration (centroid step, then assignment step) runs detached from
    autograd with a monotonicity guard; afterwards memberships and cluster
    representations are recomputed once from the final centroids in a
    differentiation-friendly pass so gradients reach the entity matrix.
    """
    cfg.validate()
    if entities.dim() != 2:
        raise ShapeError(f"entity matrix must be 2-D, got {tuple(entities.shape)}")
    n = entities.shape[0]
    if cfg.n_clusters > n:
        raise ConfigError(f"n_clusters {cfg.n_clusters} exceeds entity count {n}")
    norms = entities.detach().norm(dim=1)
    if bool((norms < NORM_FLOOR).any()):
        raise DegenerateInputError("entity matrix contains a zero-norm row")

    with torch.no_grad():
        e = entities.detach()
        e_unit = e / e.norm(dim=1, keepdim=True)
        centroids = _kmeanspp_init(e_unit, cfg.n_clusters, cfg.seed)
        membership, _ = soft_assign(e, centroids, cfg.fuzzifier)
        objective = clustering_objective(membership, cosine_matrix(e, centroids), cfg.fuzzifier)
        history = [objective]
        for _ in range(cfg.max_iter):
            cand_centroids = _spherical_centroids(e_unit, membership, cfg.fuzzifier)
            cand_membership, _ = soft_assign(e, cand_centroids, cfg.fuzzifier)
            cand_objective = clustering_objective(
                cand_membership, cosine_matrix(e, cand_centroids), cfg.fuzzifier
            )
            if cand_objective > objective:
                break
            delta = objective - cand_objective
            centroids, membership, objective = cand_centroids, cand_membership, cand_objective
            history.append(objective)
            if delta < cfg.tol:
                break

    final_membership, cluster_reps = soft_assign(entities, centroids, cfg.fuzzifier)
    return ClusterState(
        centroids=centroids,
        membership=final_membership,
        cluster_reps=cluster_reps,
        timestamp=timestamp,
        objective=history[-1],
        objective_history=history,
    )


def affinity_matrix(c_prev: torch.Tensor, c_curr: torch.Tensor) -> torch.Tensor:
    """Cosine similarities between consecutive cluster representations."""
    if c_prev.shape != c_curr.shape:
        raise ShapeError(
            f"cluster shapes differ: {tuple(c_prev.shape)} vs {tuple(c_curr.shape)}"
        )
    for name, mat in (("previous", c_prev), ("current", c_curr)):
        if bool((mat.detach().norm(dim=1) < NORM_FLOOR).any()):
            raise DegenerateInputError(f"{name} cluster matrix contains a zero-norm row")
    return cosine_matrix(c_prev, c_curr)


def hungarian_match(affinity) -> AlignmentResult:
    """Max-sum one-to-one assignment, ties broken lexicographically.

    The base optimum comes from scipy's solver; the lexicographically
    smallest optimal permutation is then fixed row by row, testing each
    candidate column via a solve of the reduced problem. Totals are compared
    as row-ordered float sums so that exact ties are recognized exactly.
    """
    if isinstance(affinity, torch.Tensor):
        a = affinity.detach().cpu().numpy().astype(np.float64)
    else:
        a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"affinity matrix must be square, got {a.shape}")
    n = a.shape[0]
    if n == 0:
        return AlignmentResult(affinity=a, permutation=(), total=0.0)

    def ordered_total(perm):
        total = 0.0
        for row in range(n):
            total += a[row, perm[row]]
        return total

    fixed: list[int] = []
    used: set[int] = set()
    for row in range(n):
        best_cand = -1
        best_cand_total = -np.inf
        for cand in range(n):
            if cand in used:
                continue
            rest_rows = list(range(row + 1, n))
            rest_cols = [c for c in range(n) if c not in used and c != cand]
            perm = fixed + [cand]
            if rest_rows:
                sub = a[np.ix_(rest_rows, rest_cols)]
                sr, sc = linear_sum_assignment(-sub)
                tail = [0] * len(rest_rows)
                for i, j in zip(sr, sc):
                    tail[i] = rest_cols[j]
                perm = perm + tail
            total = ordered_total(perm)
            if total > best_cand_total:
                best_cand_total = total
                best_cand = cand
        fixed.append(best_cand)
        used.add(best_cand)
    return AlignmentResult(affinity=a, permutation=tuple(fixed), total=ordered_total(fixed))


def fuse_clusters(
    c_prev: torch.Tensor, c_curr: torch.Tensor, permutation, beta: float
) -> torch.Tensor:
    """Blend matched clusters: row j -> beta*prev_j + (1-beta)*curr_{perm(j)}."""
    perm = list(permutation)
    if sorted(perm) != list(range(c_prev.shape[0])):
        raise ShapeError("permutation is not a bijection over cluster indices")
    return beta * c_prev + (1.0 - beta) * c_curr[perm]


def temporal_smoothness_loss(sequence) -> torch.Tensor:
    """Sum of (1 - cosine) between same-index clusters at consecutive times."""
    if len(sequence) < 2:
        ref = sequence[0] if sequence else None
        if ref is None:
            return torch.zeros(())
        return torch.zeros((), dtype=ref.dtype, device=ref.device)
    total = torch.zeros((), dtype=sequence[0].dtype, device=sequence[0].device)
    for prev, curr in zip(sequence[:-1], sequence[1:]):
        na = prev.norm(dim=1)
        nb = curr.norm(dim=1)
        denom = (na * nb).clamp_min(NORM_FLOOR)
        cos = (prev * curr).sum(dim=1) / denom
        cos = torch.where((na < NORM_FLOOR) | (nb < NORM_FLOOR), torch.zeros_like(cos), cos)
        total = total + (1.0 - cos).sum()
    return total
