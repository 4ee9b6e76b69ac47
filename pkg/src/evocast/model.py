"""The per-window pipeline: structural encoding, evolving soft clusters with
cross-time matching and fusion, cluster-graph message passing, residual time
gating, and attentive integration over the window.

Combinatorial and iterative quantities (cluster centroids, matching
permutations, the static-partition centroids) run outside differentiation.
A forward pass records them into a PipelineState; replaying a recorded state
makes the pass a deterministic differentiable function of the parameters,
which is what the finite-difference gradient check exercises.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .cluster_graph import ClusterGraphEncoder, enhance_intensity, match_to_global, propagate_to_entities
from .clustering import (
    ClusteringConfig,
    ClusterState,
    affinity_matrix,
    fuse_clusters,
    fuzzy_cmeans,
    hungarian_match,
    soft_assign,
    temporal_smoothness_loss,
)
from .config import RunConfig
from .decoder import ConvPairScorer
from .errors import ConfigError, RangeError
from .relational import (
    SnapshotTensors,
    StructuralEncoder,
    init_entity_representations,
    init_relation_representations,
    update_relation_representations,
)
from .temporal import TimeResidualGate, WindowAttention


@dataclass
class PipelineState:
    """Frozen non-differentiable decisions of one window pass."""

    centroids: list[torch.Tensor] = field(default_factory=list)
    align_perms: list[tuple[int, ...]] = field(default_factory=list)
    global_perms: list[tuple[int, ...] | None] = field(default_factory=list)
    global_centroids: torch.Tensor | None = None


@dataclass
class WindowOutput:
    entity_repr: torch.Tensor
    relation_repr: torch.Tensor
    smoothness: torch.Tensor
    cluster_states: list[ClusterState]
    pipeline_state: PipelineState
    entity_sequence: torch.Tensor | None = None
    relation_sequence: torch.Tensor | None = None


class ForecastModel(nn.Module):
    """All learnable parameters plus the window forward pass."""

    def __init__(self, cfg: RunConfig, n_entities: int, n_relations: int, in_degrees):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.n_entities = n_entities
        self.n_relations = n_relations
        dtype = torch.float64 if cfg.dtype == "float64" else torch.float32
        self.dtype_ = dtype
        d = cfg.dim

        _matrix, table, class_index = init_entity_representations(
            in_degrees, d, seed=cfg.seed, dtype=dtype
        )
        self.entity_table = nn.Parameter(table)
        self.register_buffer("entity_class_index", class_index)
        self.relation_table = nn.Parameter(
            init_relation_representations(n_relations, d, seed=cfg.seed + 1, dtype=dtype)
        )

        self.encoder = StructuralEncoder(d, cfg.n_layers)
        self.cluster_graph = ClusterGraphEncoder(d)
        self.gate_entity = TimeResidualGate(d)
        self.gate_relation = TimeResidualGate(d)
        self.attention_entity = WindowAttention(d)
        self.attention_relation = WindowAttention(d)
        self.decoder = ConvPairScorer(d, cfg.decoder_channels, cfg.decoder_kernel, cfg.dropout)
        if dtype == torch.float64:
            self.to(torch.float64)

    # ------------------------------------------------------------------
    def initial_entity_matrix(self) -> torch.Tensor:
        return self.entity_table[self.entity_class_index]

    def clustering_config(self, seed: int) -> ClusteringConfig:
        return ClusteringConfig(
            n_clusters=self.cfg.n_clusters,
            fuzzifier=self.cfg.fuzzifier,
            max_iter=self.cfg.cluster_max_iter,
            tol=self.cfg.cluster_tol,
            fusion_weight=self.cfg.beta,
            seed=seed,
        )

    def forward_window(
        self,
        snapshots: list[SnapshotTensors],
        taus: list[int],
        timestamps: list[int] | None = None,
        global_centroids: torch.Tensor | None = None,
        replay: PipelineState | None = None,
    ) -> WindowOutput:
        """Run the pipeline over one window of snapshots.

        ``taus`` are the original interval indices used by the position
        encoding. ``global_centroids`` (detached) enable the static-graph
        modulation; when absent the modulation multiplier defaults to 1.
        ``replay`` substitutes recorded centroids/permutations instead of
        recomputing them, keeping the pass a pure function of parameters.
        """
        if not snapshots:
            raise RangeError("window must contain at least one snapshot")
        if len(snapshots) != len(taus):
            raise RangeError("window snapshots and taus differ in length")
        ablation = set(self.cfg.ablation)
        timestamps = timestamps if timestamps is not None else list(range(len(snapshots)))
        record = PipelineState(global_centroids=global_centroids)

        h_ent = self.initial_entity_matrix()
        h_rel = self.relation_table
        fused_prev: torch.Tensor | None = None
        cluster_seq: list[torch.Tensor] = []
        cluster_states: list[ClusterState] = []
        z_ent: list[torch.Tensor] = []
        z_rel: list[torch.Tensor] = []
        ent_seq: list[torch.Tensor] = []
        rel_seq: list[torch.Tensor] = []

        for pos, snap in enumerate(snapshots):
            e_enc = self.encoder(snap, h_ent, h_rel)
            r_new = update_relation_representations(snap, e_enc, h_rel)

            if replay is not None:
                centroids = replay.centroids[pos]
                membership, c_reps = soft_assign(e_enc, centroids, self.cfg.fuzzifier)
                objective = float("nan")
                history: list[float] = []
            else:
                state = fuzzy_cmeans(
                    e_enc,
                    self.clustering_config(seed=self.cfg.seed * 100003 + timestamps[pos]),
                    timestamp=timestamps[pos],
                )
                centroids = state.centroids
                membership, c_reps = state.membership, state.cluster_reps
                objective, history = state.objective, state.objective_history
            record.centroids.append(centroids)

            if pos == 0:
                perm: tuple[int, ...] = tuple(range(self.cfg.n_clusters))
                fused = c_reps
                membership_al = membership
            else:
                if "no_alignment" in ablation:
                    perm = tuple(range(self.cfg.n_clusters))
                elif replay is not None:
                    perm = replay.align_perms[pos]
                else:
                    perm = hungarian_match(
                        affinity_matrix(fused_prev.detach(), c_reps.detach())
                    ).permutation
                membership_al = membership[:, list(perm)]
                beta_eff = 0.0 if "no_fusion" in ablation else self.cfg.beta
                fused = fuse_clusters(fused_prev, c_reps, perm, beta_eff)
            record.align_perms.append(perm)
            fused_prev = fused
            cluster_seq.append(fused)
            cluster_states.append(
                ClusterState(
                    centroids=centroids,
                    membership=membership_al,
                    cluster_reps=fused,
                    timestamp=timestamps[pos],
                    objective=objective,
                    objective_history=history,
                )
            )

            s_tensor = self.cluster_graph.latent_correlation(fused)
            if "no_ice" in ablation:
                q_hat = torch.ones(
                    self.cfg.n_clusters,
                    self.cfg.n_clusters,
                    dtype=s_tensor.dtype,
                    device=s_tensor.device,
                )
                record.global_perms.append(None)
            else:
                q = self.cluster_graph.correlation_intensity(s_tensor)
                if "no_global_graph" in ablation or global_centroids is None:
                    q_hat = q
                    record.global_perms.append(None)
                else:
                    if replay is not None:
                        gperm = replay.global_perms[pos]
                    else:
                        gperm = match_to_global(fused.detach(), global_centroids).permutation
                    record.global_perms.append(gperm)
                    q_hat, _m = enhance_intensity(q, gperm, global_centroids)
            c_hat = self.cluster_graph.message_passing(s_tensor, q_hat, fused)
            e_prop = propagate_to_entities(membership_al, c_hat)

            if pos == 0:
                h_ent = e_prop
                h_rel = r_new
            else:
                h_ent = self.gate_entity(e_prop, h_ent)
                h_rel = self.gate_relation(r_new, h_rel)

            ent_seq.append(h_ent)
            rel_seq.append(h_rel)
            phi_e = self.attention_entity.position_encoding(taus[pos])
            phi_r = self.attention_relation.position_encoding(taus[pos])
            z_ent.append(torch.cat([h_ent, phi_e.expand(self.n_entities, -1)], dim=1))
            z_rel.append(torch.cat([h_rel, phi_r.expand(self.n_relations, -1)], dim=1))

        entity_repr = self.attention_entity(torch.stack(z_ent))
        relation_repr = self.attention_relation(torch.stack(z_rel))
        smoothness = temporal_smoothness_loss(cluster_seq)
        return WindowOutput(
            entity_repr=entity_repr,
            relation_repr=relation_repr,
            smoothness=smoothness,
            cluster_states=cluster_states,
            pipeline_state=record,
            entity_sequence=torch.stack(ent_seq),
            relation_sequence=torch.stack(rel_seq),
        )

    def score_queries(self, output: WindowOutput, subjects, objects) -> torch.Tensor:
        subj = torch.as_tensor(subjects, dtype=torch.long)
        obj = torch.as_tensor(objects, dtype=torch.long)
        return self.decoder(
            output.entity_repr[subj], output.entity_repr[obj], output.relation_repr
        )


def total_loss(l_pred: torch.Tensor, l_temporal: torch.Tensor, lambda_weight: float):
    """Convex trade-off between prediction and smoothness terms."""
    if not 0.0 <= lambda_weight <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lambda_weight}")
    return (1.0 - lambda_weight) * l_pred + lambda_weight * l_temporal
