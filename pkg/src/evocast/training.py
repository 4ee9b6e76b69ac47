"""Training orchestration, evaluation over merged timelines, single-query
prediction, embedding export, and synthetic dataset materialization.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch.nn.functional import one_hot

from .checkpoint import load_checkpoint, save_checkpoint
from .cluster_graph import global_centroids_from_parts, spectral_partition
from .clustering import hungarian_match
from .config import RunConfig, config_from_pairs, parse_kv_file
from .data import (
    SyntheticSpec,
    Timeline,
    TkgDataset,
    build_global_graph,
    generate_synthetic_tkg,
    load_quadruples,
    merge_timeline,
    save_id_map,
    save_quadruples,
    training_in_degrees,
)
from .decoder import prediction_loss
from .errors import ConfigError, DivergenceError, RangeError, VocabularyError
from .metrics import EvaluationReport, rank_metrics, save_report
from .model import ForecastModel, total_loss
from .relational import SnapshotTensors


@dataclass
class LoadedRun:
    """A checkpoint materialized back into a usable model."""

    model: ForecastModel
    config: RunConfig
    metadata: dict
    extras: dict[str, torch.Tensor]


def load_splits(cfg: RunConfig) -> dict[str, TkgDataset]:
    if not cfg.train_path:
        raise ConfigError("train_path is required")
    train = load_quadruples(cfg.train_path, split="train")
    splits = {"train": train}
    vocabs = (train.entity_vocab, train.relation_vocab)
    if cfg.valid_path:
        splits["valid"] = load_quadruples(cfg.valid_path, vocabs=vocabs, split="valid")
    if cfg.test_path:
        splits["test"] = load_quadruples(cfg.test_path, vocabs=vocabs, split="test")
    return splits


class _SnapshotCache:
    def __init__(self, timeline: Timeline):
        self.timeline = timeline
        self._cache: dict[int, SnapshotTensors] = {}

    def get(self, t: int) -> SnapshotTensors:
        if t not in self._cache:
            self._cache[t] = SnapshotTensors(self.timeline.snapshot(t))
        return self._cache[t]


def _window_indices(target: int, window: int) -> list[int]:
    return list(range(max(0, target - window), target))


def _grouped_queries(queries):
    """Unique (subject, object) pairs with the set of true relations each."""
    groups: dict[tuple[int, int], set[int]] = {}
    for q in queries:
        groups.setdefault((q.subject, q.object), set()).add(q.relation)
    pairs = sorted(groups)
    return pairs, [sorted(groups[p]) for p in pairs]


def _forward_for_target(model, cache: _SnapshotCache, target: int, global_centroids):
    idxs = _window_indices(target, model.cfg.window)
    if not idxs:
        raise RangeError(f"target timestamp {target} has no preceding history")
    snaps = [cache.get(j) for j in idxs]
    taus = [cache.timeline.taus[j] for j in idxs]
    return model.forward_window(snaps, taus, timestamps=idxs, global_centroids=global_centroids)


def _uses_global(cfg: RunConfig) -> bool:
    return "no_global_graph" not in cfg.ablation and "no_ice" not in cfg.ablation


def evaluate_timeline(
    model: ForecastModel,
    timeline: Timeline,
    split: str,
    filter_mode: str = "raw",
    global_centroids: torch.Tensor | None = None,
) -> tuple[EvaluationReport, list]:
    """Score every query of ``split`` with the window preceding its time."""
    was_training = model.training
    model.eval()
    cache = _SnapshotCache(timeline)
    score_rows: list[np.ndarray] = []
    truths: list[int] = []
    true_sets: list[set[int]] = []
    ordered_queries = []
    with torch.no_grad():
        for target in timeline.times_with_queries(split):
            if target == 0:
                continue
            queries = timeline.queries(split, target)
            output = _forward_for_target(model, cache, target, global_centroids)
            truth_map: dict[tuple[int, int], set[int]] = {}
            for q, _s in timeline.events[target]:
                truth_map.setdefault((q.subject, q.object), set()).add(q.relation)
            uniq = sorted({(q.subject, q.object) for q in queries})
            probs = model.score_queries(
                output, [p[0] for p in uniq], [p[1] for p in uniq]
            ).cpu().numpy()
            by_pair = {pair: probs[i] for i, pair in enumerate(uniq)}
            for q in queries:
                score_rows.append(by_pair[(q.subject, q.object)])
                truths.append(q.relation)
                true_sets.append(truth_map[(q.subject, q.object)])
                ordered_queries.append(q)
    if was_training:
        model.train()
    report = rank_metrics(score_rows, truths, filter_mode=filter_mode, true_sets=true_sets)
    return report, ordered_queries


def train(cfg: RunConfig, log=print):
    """Optimize the model on the training split; returns (path, history).

    Deterministic for a fixed config and seed. Saves the best-validation
    checkpoint (falling back to final parameters when no validation split is
    configured) under ``cfg.out_dir``.
    """
    cfg.validate()
    torch.manual_seed(cfg.seed)
    splits = load_splits(cfg)
    train_ds = splits["train"]
    if train_ds.num_timestamps < 2:
        raise ConfigError("training needs at least two timestamps")
    if cfg.n_clusters > train_ds.num_entities:
        raise ConfigError("n_clusters exceeds the entity count")

    train_timeline = merge_timeline({"train": train_ds})
    full_timeline = merge_timeline({name: ds for name, ds in splits.items()})
    cache = _SnapshotCache(train_timeline)
    eval_cache_timeline = full_timeline

    in_deg = training_in_degrees(train_ds)
    model = ForecastModel(cfg, train_ds.num_entities, train_ds.num_relations, in_deg)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    parts = None
    if _uses_global(cfg):
        graph = build_global_graph(train_ds)
        parts = spectral_partition(graph.adjacency, cfg.n_clusters, cfg.seed)

    lam = cfg.lambda_weight
    drop_temporal = "no_temporal_loss" in cfg.ablation
    history: list[dict] = []
    best_val = -math.inf
    best_state = None
    best_epoch = 0
    epochs_since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        if parts is not None:
            global_centroids = global_centroids_from_parts(
                parts, model.initial_entity_matrix().detach()
            )
        else:
            global_centroids = None

        model.train()
        epoch_loss = 0.0
        n_targets = 0
        for target in range(1, train_timeline.num_timestamps):
            optimizer.zero_grad()
            output = _forward_for_target(model, cache, target, global_centroids)
            pairs, rel_lists = _grouped_queries(train_timeline.queries("train", target))
            n_pairs = len(pairs)
            if n_pairs == 0:
                continue
            labels = torch.zeros(n_pairs, model.n_relations, dtype=output.entity_repr.dtype)
            for i, rels in enumerate(rel_lists):
                labels[i, rels] = 1.0
            bce_sum = torch.zeros((), dtype=output.entity_repr.dtype)
            for start in range(0, n_pairs, cfg.batch_size):
                chunk = slice(start, min(start + cfg.batch_size, n_pairs))
                probs = model.score_queries(
                    output, [p[0] for p in pairs[chunk]], [p[1] for p in pairs[chunk]]
                )
                chunk_len = probs.shape[0]
                bce_sum = bce_sum + prediction_loss(probs, labels[chunk]) * chunk_len
            l_pred = bce_sum / n_pairs
            if drop_temporal:
                loss = (1.0 - lam) * l_pred
            else:
                loss = total_loss(l_pred, output.smoothness, lam)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, timestamp {target}")
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.item())
            n_targets += 1
        mean_loss = epoch_loss / max(n_targets, 1)

        val_mrr = None
        if "valid" in splits:
            report, _q = evaluate_timeline(
                model, eval_cache_timeline, "valid", "raw", global_centroids
            )
            val_mrr = report.mrr
        history.append({"epoch": epoch, "loss": mean_loss, "val_mrr": val_mrr})
        log(
            f"epoch={epoch} loss={mean_loss:.6f}"
            + (f" val_mrr={val_mrr:.4f}" if val_mrr is not None else "")
        )

        selector = val_mrr if val_mrr is not None else -mean_loss
        if selector > best_val:
            best_val = selector
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                log(f"early stop at epoch {epoch} (best epoch {best_epoch})")
                break

    if best_state is not None:
        model.load_state_dict(best_state)

    path = _save_trained(model, cfg, splits, train_timeline, parts, history, best_epoch)
    return path, history


def _save_trained(model, cfg, splits, train_timeline, parts, history, best_epoch) -> str:
    """Record per-timestamp states (eval mode) and write the checkpoint.

    Each timestamp's state is taken from the last position of the sliding
    window ending there, the same regime the model trains and predicts in.
    Cluster labels are chained across consecutive windows with the alignment
    matcher so the stored memberships share one labeling over the timeline.
    """
    model.eval()
    cache = _SnapshotCache(train_timeline)
    n_t = train_timeline.num_timestamps
    if parts is not None:
        global_centroids = global_centroids_from_parts(
            parts, model.initial_entity_matrix().detach()
        )
    else:
        global_centroids = None
    ent_states, rel_states, cent_rows, mem_rows, rep_rows = [], [], [], [], []
    prev_membership: torch.Tensor | None = None
    with torch.no_grad():
        for t in range(n_t):
            idxs = list(range(max(0, t - cfg.window + 1), t + 1))
            output = model.forward_window(
                [cache.get(j) for j in idxs],
                [train_timeline.taus[j] for j in idxs],
                timestamps=idxs,
                global_centroids=global_centroids,
            )
            state = output.cluster_states[-1]
            if prev_membership is None:
                perm: tuple[int, ...] = tuple(range(cfg.n_clusters))
            else:
                # chain labels on the co-assignment counts of the dominant
                # clusters: contents evolve slowly, so the count overlap with
                # the previous timestamp carries the label correspondence.
                prev_hard = one_hot(prev_membership.argmax(dim=1), cfg.n_clusters)
                cur_hard = one_hot(state.membership.detach().argmax(dim=1), cfg.n_clusters)
                overlap = prev_hard.T.to(prev_membership.dtype) @ cur_hard.to(
                    prev_membership.dtype
                )
                perm = hungarian_match(overlap).permutation
            cols = list(perm)
            ent_states.append(output.entity_sequence[-1].detach())
            rel_states.append(output.relation_sequence[-1].detach())
            cent_rows.append(state.centroids.detach()[cols])
            mem_rows.append(state.membership.detach()[:, cols])
            rep_rows.append(state.cluster_reps.detach()[cols])
            prev_membership = state.membership.detach()[:, cols]
    extras = {
        "entity_states": torch.stack(ent_states),
        "relation_states": torch.stack(rel_states),
        "cluster_centroids": torch.stack(cent_rows),
        "cluster_memberships": torch.stack(mem_rows),
        "cluster_reps": torch.stack(rep_rows),
    }
    if global_centroids is not None:
        extras["global_centroids"] = global_centroids
        extras["global_parts"] = torch.tensor(parts, dtype=torch.float32)
    metadata = {
        "entity_names": list(splits["train"].entity_vocab.names),
        "relation_names": list(splits["train"].relation_vocab.names),
        "in_degrees": [int(v) for v in training_in_degrees(splits["train"])],
        "train_original_times": [int(v) for v in train_timeline.original_times],
        "train_taus": [int(v) for v in train_timeline.taus],
        "best_epoch": best_epoch,
        "metric_history": history,
    }
    params = {k: v for k, v in model.state_dict().items() if k != "entity_class_index"}
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "model.ckpt")
    save_checkpoint(path, params, cfg, metadata, extras)
    return path


def load_run(path: str) -> LoadedRun:
    config, params, extras, metadata = load_checkpoint(path)
    model = ForecastModel(
        config,
        n_entities=len(metadata["entity_names"]),
        n_relations=len(metadata["relation_names"]),
        in_degrees=metadata["in_degrees"],
    )
    state = model.state_dict()
    for name, tensor in params.items():
        state[name] = tensor.to(state[name].dtype)
    model.load_state_dict(state)
    model.eval()
    return LoadedRun(model=model, config=config, metadata=metadata, extras=extras)


def evaluate_run(run: LoadedRun, split: str, filter_mode: str, out_path: str | None = None):
    if split not in ("valid", "test"):
        raise ConfigError(f"split must be valid or test, got {split!r}")
    splits = load_splits(run.config)
    if split not in splits:
        raise ConfigError(f"no {split} split configured")
    timeline = merge_timeline(splits)
    global_centroids = run.extras.get("global_centroids")
    report, queries = evaluate_timeline(
        run.model, timeline, split, filter_mode, global_centroids
    )
    if out_path:
        save_report(report, queries, out_path)
    return report


def _entity_id(run: LoadedRun, token: str) -> int:
    names = run.metadata["entity_names"]
    lookup = {n: i for i, n in enumerate(names)}
    if token in lookup:
        return lookup[token]
    if token.lstrip("-").isdigit():
        idx = int(token)
        if 0 <= idx < len(names):
            return idx
    raise VocabularyError(f"unknown entity {token!r}")


def predict_run(run: LoadedRun, subject: str, obj: str, time: int, topk: int):
    """Top-k relations for a (subject, ?, object) query at a future time."""
    s = _entity_id(run, subject)
    o = _entity_id(run, obj)
    n_rel = len(run.metadata["relation_names"])
    if topk < 1 or topk > n_rel:
        raise ConfigError(f"topk must lie in [1, {n_rel}]")
    splits = load_splits(run.config)
    timeline = merge_timeline(splits)
    earlier = [i for i, ot in enumerate(timeline.original_times) if ot < time]
    if not earlier:
        raise RangeError(f"no history precedes time {time}")
    cache = _SnapshotCache(timeline)
    window = earlier[-run.config.window :]
    run.model.eval()
    with torch.no_grad():
        output = run.model.forward_window(
            [cache.get(j) for j in window],
            [timeline.taus[j] for j in window],
            timestamps=window,
            global_centroids=run.extras.get("global_centroids"),
        )
        probs = run.model.score_queries(output, [s], [o])[0].cpu().numpy()
    order = sorted(range(n_rel), key=lambda r: (-probs[r], r))[:topk]
    names = run.metadata["relation_names"]
    return [(names[r], float(probs[r])) for r in order]


def export_embeddings(run: LoadedRun, time: int, out_path: str) -> int:
    """Write one row per entity: id, name, the d-vector at the given time."""
    times = run.metadata["train_original_times"]
    if time not in times:
        raise RangeError(f"time {time} is not a trained timestamp; choices: {times[0]}..{times[-1]}")
    idx = times.index(time)
    states = run.extras["entity_states"][idx]
    names = run.metadata["entity_names"]
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(names):
            vec = "\t".join(f"{float(v):.6f}" for v in states[i])
            fh.write(f"{i}\t{name}\t{vec}\n")
    return len(names)


def load_exported_embeddings(path: str):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            rows.append((int(parts[0]), parts[1], np.array([float(v) for v in parts[2:]])))
    return rows


SYNTH_KEYS = {
    "n_entities": int,
    "n_relations": int,
    "n_timestamps": int,
    "n_clusters": int,
    "drift_prob": float,
    "intra_rate": float,
    "inter_rate": float,
    "seed": int,
    "train_frac": float,
    "valid_frac": float,
}


def run_synth(spec_path: str, out_dir: str) -> dict[str, str]:
    """Generate a synthetic dataset directory from a key = value spec file."""
    pairs = parse_kv_file(spec_path)
    values: dict = {"seed": 0, "train_frac": 0.7, "valid_frac": 0.15}
    for key, raw in pairs.items():
        if key not in SYNTH_KEYS:
            raise ConfigError(f"unknown synthetic spec key {key!r}")
        try:
            values[key] = SYNTH_KEYS[key](raw)
        except ValueError:
            raise ConfigError(f"synthetic spec key {key!r} has invalid value {raw!r}") from None
    train_frac = values.pop("train_frac")
    valid_frac = values.pop("valid_frac")
    if not 0 < train_frac < 1 or not 0 <= valid_frac < 1 or train_frac + valid_frac >= 1:
        raise ConfigError("split fractions must satisfy 0<train<1, 0<=valid, train+valid<1")
    missing = [k for k in SYNTH_KEYS if k not in values and k not in ("seed", "train_frac", "valid_frac")]
    if missing:
        raise ConfigError(f"synthetic spec lacks keys: {', '.join(sorted(missing))}")
    spec = SyntheticSpec(**values)
    dataset, planted = generate_synthetic_tkg(spec)

    n_t = dataset.num_timestamps
    if n_t < 3:
        raise ConfigError("synthetic split needs at least 3 non-empty timestamps")
    n_train = max(1, round(train_frac * n_t))
    n_valid = max(1, round(valid_frac * n_t))
    while n_train + n_valid >= n_t and n_valid > 1:
        n_valid -= 1
    while n_train + n_valid >= n_t and n_train > 1:
        n_train -= 1
    train_times = range(0, n_train)
    valid_times = range(n_train, n_train + n_valid)
    test_times = range(n_train + n_valid, n_t)

    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, times in (("train", train_times), ("valid", valid_times), ("test", test_times)):
        quads = []
        for t in times:
            for q in dataset.by_time[t]:
                quads.append(
                    type(q)(q.subject, q.relation, q.object, dataset.original_times[t])
                )
        path = os.path.join(out_dir, f"{name}.txt")
        save_quadruples(quads, path)
        paths[name] = path
    save_id_map(dataset.entity_vocab, os.path.join(out_dir, "entity2id.txt"))
    save_id_map(dataset.relation_vocab, os.path.join(out_dir, "relation2id.txt"))
    planted_path = os.path.join(out_dir, "planted.txt")
    with open(planted_path, "w", encoding="utf-8") as fh:
        for t in range(planted.shape[0]):
            labels = " ".join(str(int(v)) for v in planted[t])
            fh.write(f"{t}\t{labels}\n")
    paths["planted"] = planted_path
    return paths


def load_planted(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            _t, labels = line.rstrip("\n").split("\t")
            rows.append([int(v) for v in labels.split(" ")])
    return np.asarray(rows, dtype=np.int64)
