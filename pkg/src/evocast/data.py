"""Event data model: quadruple ingestion, per-timestamp snapshots, the static
co-occurrence graph, and a synthetic generator with planted evolving groups.

Events are (subject, relation, object, timestamp) with dense integer
vocabularies. Timestamps are compacted to 0..T-1 per dataset while the
original values are retained, both for cross-split merging and because the
temporal position encoder consumes the original interval index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParseError, RangeError, VocabularyError


@dataclass(frozen=True)
class Quadruple:
    subject: int
    relation: int
    object: int
    timestamp: int


@dataclass(frozen=True)
class Vocabulary:
    """Dense id <-> name mapping."""

    names: tuple[str, ...]
    ids: dict[str, int] = field(hash=False)

    def __len__(self) -> int:
        return len(self.names)

    @staticmethod
    def from_names(names) -> "Vocabulary":
        names = tuple(names)
        return Vocabulary(names=names, ids={n: i for i, n in enumerate(names)})


@dataclass(frozen=True)
class TkgDataset:
    """Events grouped by compacted timestamp plus both vocabularies."""

    by_time: tuple[tuple[Quadruple, ...], ...]
    entity_vocab: Vocabulary
    relation_vocab: Vocabulary
    split: str
    original_times: tuple[int, ...]
    taus: tuple[int, ...]

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    @property
    def num_timestamps(self) -> int:
        return len(self.by_time)

    @property
    def quadruples(self) -> tuple[Quadruple, ...]:
        return tuple(q for group in self.by_time for q in group)


@dataclass(frozen=True)
class EntityGraphSnapshot:
    """One timestamp's multi-relational graph with per-entity in-degrees."""

    timestamp: int
    edges: tuple[tuple[int, int, int], ...]
    in_degrees: np.ndarray
    active_entities: frozenset[int]


@dataclass(frozen=True)
class GlobalGraph:
    """Static undirected co-occurrence graph over all training events."""

    adjacency: np.ndarray


@dataclass(frozen=True)
class SyntheticSpec:
    n_entities: int
    n_relations: int
    n_timestamps: int
    n_clusters: int
    drift_prob: float
    intra_rate: float
    inter_rate: float
    seed: int = 0

    def validate(self) -> None:
        if self.n_entities <= 0 or self.n_clusters <= 0:
            raise ConfigError("synthetic spec needs positive entity and cluster counts")
        if self.n_relations <= 0 or self.n_timestamps <= 0:
            raise ConfigError("synthetic spec needs positive relation and timestamp counts")
        if self.n_clusters > self.n_entities:
            raise ConfigError("synthetic spec has more clusters than entities")
        for name, rate in (
            ("drift_prob", self.drift_prob),
            ("intra_rate", self.intra_rate),
            ("inter_rate", self.inter_rate),
        ):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"synthetic spec {name} must lie in [0, 1], got {rate}")


def _compute_taus(original_times) -> tuple[int, ...]:
    """Original interval indices: gaps normalized by their gcd."""
    if not original_times:
        return ()
    base = original_times[0]
    gaps = [t - base for t in original_times]
    g = 0
    for gap in gaps:
        g = math.gcd(g, gap)
    if g == 0:
        g = 1
    return tuple(gap // g for gap in gaps)


def _read_id_map(path: str) -> Vocabulary:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: expected name<TAB>id")
            try:
                idx = int(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: id is not an integer") from None
            pairs.append((parts[0], idx))
    ids = sorted(i for _n, i in pairs)
    if ids != list(range(len(ids))):
        raise ConfigError(f"{path}: ids are not dense 0..N-1")
    names = [""] * len(pairs)
    for name, idx in pairs:
        names[idx] = name
    return Vocabulary.from_names(names)


def load_quadruples(path: str, vocabs=None, split: str = "train") -> TkgDataset:
    """Parse a tab-separated event file into a dataset.

    Lines are ``s<TAB>r<TAB>o<TAB>t`` with integer fields (extra trailing
    columns are ignored). Duplicate lines are retained. When ``vocabs``
    (an ``(entity_vocab, relation_vocab)`` pair) is given, ids must fall
    inside those vocabularies; otherwise vocabularies are built from the file
    (companion ``entity2id.txt`` / ``relation2id.txt`` files next to it are
    used when present, else ids are densified in sorted order).
    """
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split("\t")
            if len(parts) == 1:
                parts = stripped.split()
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: expected at least 4 tab-separated fields")
            try:
                s, r, o, t = (int(parts[i]) for i in range(4))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field") from None
            raw.append((s, r, o, t, lineno))

    if vocabs is not None:
        entity_vocab, relation_vocab = vocabs
        ent_forward = None
        rel_forward = None
    else:
        base = os.path.dirname(os.path.abspath(path))
        ent_map = os.path.join(base, "entity2id.txt")
        rel_map = os.path.join(base, "relation2id.txt")
        entity_vocab = _read_id_map(ent_map) if os.path.exists(ent_map) else None
        relation_vocab = _read_id_map(rel_map) if os.path.exists(rel_map) else None
        if entity_vocab is None:
            ent_ids = sorted({s for s, _r, _o, _t, _l in raw} | {o for _s, _r, o, _t, _l in raw})
            ent_forward = {orig: i for i, orig in enumerate(ent_ids)}
            entity_vocab = Vocabulary.from_names(str(orig) for orig in ent_ids)
        else:
            ent_forward = None
        if relation_vocab is None:
            rel_ids = sorted({r for _s, r, _o, _t, _l in raw})
            rel_forward = {orig: i for i, orig in enumerate(rel_ids)}
            relation_vocab = Vocabulary.from_names(str(orig) for orig in rel_ids)
        else:
            rel_forward = None

    def map_entity(orig: int, lineno: int) -> int:
        if ent_forward is not None:
            return ent_forward[orig]
        if not 0 <= orig < len(entity_vocab):
            raise VocabularyError(f"{path}:{lineno}: entity id {orig} outside vocabulary")
        return orig

    def map_relation(orig: int, lineno: int) -> int:
        if rel_forward is not None:
            return rel_forward[orig]
        if not 0 <= orig < len(relation_vocab):
            raise VocabularyError(f"{path}:{lineno}: relation id {orig} outside vocabulary")
        return orig

    times = sorted({t for _s, _r, _o, t, _l in raw})
    time_index = {t: i for i, t in enumerate(times)}
    groups: list[list[Quadruple]] = [[] for _ in times]
    for s, r, o, t, lineno in raw:
        groups[time_index[t]].append(
            Quadruple(map_entity(s, lineno), map_relation(r, lineno), map_entity(o, lineno), time_index[t])
        )

    return TkgDataset(
        by_time=tuple(tuple(g) for g in groups),
        entity_vocab=entity_vocab,
        relation_vocab=relation_vocab,
        split=split,
        original_times=tuple(times),
        taus=_compute_taus(times),
    )


def save_quadruples(quadruples, path: str) -> None:
    """Write events as tab-separated ``s r o t`` lines (original-time field)."""
    with open(path, "w", encoding="utf-8") as fh:
        for q in quadruples:
            fh.write(f"{q.subject}\t{q.relation}\t{q.object}\t{q.timestamp}\n")


def save_id_map(vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(vocab.names):
            fh.write(f"{name}\t{i}\n")


def snapshot_from_edges(edges, n_entities: int, timestamp: int) -> EntityGraphSnapshot:
    edges = tuple((int(s), int(r), int(o)) for s, r, o in edges)
    deg = np.zeros(n_entities, dtype=np.int64)
    active = set()
    for s, _r, o in edges:
        deg[o] += 1
        active.add(s)
        active.add(o)
    return EntityGraphSnapshot(
        timestamp=timestamp, edges=edges, in_degrees=deg, active_entities=frozenset(active)
    )


def build_snapshot(dataset: TkgDataset, t: int) -> EntityGraphSnapshot:
    """Materialize one timestamp's graph with in-degree counts."""
    if not 0 <= t < dataset.num_timestamps:
        raise RangeError(f"timestamp index {t} outside [0, {dataset.num_timestamps})")
    edges = [(q.subject, q.relation, q.object) for q in dataset.by_time[t]]
    return snapshot_from_edges(edges, dataset.num_entities, t)


def build_global_graph(dataset: TkgDataset) -> GlobalGraph:
    """Count events between each unordered entity pair, symmetric."""
    n = dataset.num_entities
    adj = np.zeros((n, n), dtype=np.int64)
    for group in dataset.by_time:
        for q in group:
            if q.subject == q.object:
                adj[q.subject, q.subject] += 1
            else:
                adj[q.subject, q.object] += 1
                adj[q.object, q.subject] += 1
    return GlobalGraph(adjacency=adj)


def training_in_degrees(dataset: TkgDataset) -> np.ndarray:
    """In-degree of every entity accumulated over the full training range."""
    deg = np.zeros(dataset.num_entities, dtype=np.int64)
    for group in dataset.by_time:
        for q in group:
            deg[q.object] += 1
    return deg


def generate_synthetic_tkg(spec: SyntheticSpec):
    """Sample a dataset with planted drifting groups.

    Entities start in balanced groups. Per timestamp, each ordered pair emits
    an event with the intra rate when co-grouped, else the inter rate; the
    relation of a co-grouped event encodes the group id (mod the relation
    count) while cross-group events draw uniformly. Group labels drift
    independently per entity between timestamps. Returns the dataset and the
    planted label matrix (n_timestamps x n_entities).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_entities, spec.n_clusters
    labels = np.arange(n) % k
    planted = np.zeros((spec.n_timestamps, n), dtype=np.int64)
    groups: list[list[Quadruple]] = []
    for t in range(spec.n_timestamps):
        if t > 0 and k > 1:
            move = rng.random(n) < spec.drift_prob
            for i in np.nonzero(move)[0]:
                choices = [c for c in range(k) if c != labels[i]]
                labels[i] = choices[int(rng.integers(len(choices)))]
        planted[t] = labels
        same = labels[:, None] == labels[None, :]
        rate = np.where(same, spec.intra_rate, spec.inter_rate)
        np.fill_diagonal(rate, 0.0)
        hit = rng.random((n, n)) < rate
        quads = []
        subs, objs = np.nonzero(hit)
        for s, o in zip(subs.tolist(), objs.tolist()):
            if labels[s] == labels[o]:
                r = int(labels[s]) % spec.n_relations
            else:
                r = int(rng.integers(spec.n_relations))
            quads.append(Quadruple(s, r, o, t))
        groups.append(quads)

    kept = [t for t in range(spec.n_timestamps) if groups[t]]
    by_time = tuple(tuple(groups[t]) for t in kept)
    entity_vocab = Vocabulary.from_names(str(i) for i in range(n))
    relation_vocab = Vocabulary.from_names(str(i) for i in range(spec.n_relations))
    dataset = TkgDataset(
        by_time=by_time,
        entity_vocab=entity_vocab,
        relation_vocab=relation_vocab,
        split="all",
        original_times=tuple(kept),
        taus=_compute_taus(kept),
    )
    return dataset, planted


@dataclass(frozen=True)
class Timeline:
    """Union of splits on a shared compacted time axis.

    Events carry union time indices. History snapshots draw on every split
    (ground-truth history); query iteration filters by split tag.
    """

    events: tuple[tuple[tuple[Quadruple, str], ...], ...]
    entity_vocab: Vocabulary
    relation_vocab: Vocabulary
    original_times: tuple[int, ...]
    taus: tuple[int, ...]

    @property
    def num_timestamps(self) -> int:
        return len(self.events)

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    def snapshot(self, t: int) -> EntityGraphSnapshot:
        if not 0 <= t < self.num_timestamps:
            raise RangeError(f"timeline index {t} outside [0, {self.num_timestamps})")
        edges = [(q.subject, q.relation, q.object) for q, _split in self.events[t]]
        return snapshot_from_edges(edges, self.num_entities, t)

    def queries(self, split: str, t: int) -> list[Quadruple]:
        return [q for q, s in self.events[t] if s == split]

    def times_with_queries(self, split: str) -> list[int]:
        return [t for t in range(self.num_timestamps) if any(s == split for _q, s in self.events[t])]


def merge_timeline(datasets: dict[str, TkgDataset]) -> Timeline:
    """Merge splits by original timestamp into one compacted timeline."""
    if not datasets:
        raise ConfigError("at least one split is required to build a timeline")
    first = next(iter(datasets.values()))
    all_times = sorted({ot for ds in datasets.values() for ot in ds.original_times})
    index = {ot: i for i, ot in enumerate(all_times)}
    merged: list[list[tuple[Quadruple, str]]] = [[] for _ in all_times]
    for split, ds in datasets.items():
        for t, group in enumerate(ds.by_time):
            ut = index[ds.original_times[t]]
            for q in group:
                merged[ut].append(
                    (Quadruple(q.subject, q.relation, q.object, ut), split)
                )
    return Timeline(
        events=tuple(tuple(g) for g in merged),
        entity_vocab=first.entity_vocab,
        relation_vocab=first.relation_vocab,
        original_times=tuple(all_times),
        taus=_compute_taus(all_times),
    )
