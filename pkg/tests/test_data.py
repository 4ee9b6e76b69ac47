"""Event store: file ingestion, snapshots, the static graph, synthetic data."""

import numpy as np
import pytest

from evocast import (
    ParseError,
    Quadruple,
    SyntheticSpec,
    VocabularyError,
    build_global_graph,
    generate_synthetic_tkg,
    load_quadruples,
    merge_timeline,
    save_quadruples,
)
from evocast.data import Vocabulary, build_snapshot, snapshot_from_edges, training_in_degrees
from evocast.errors import ConfigError, RangeError

from oracles import partition_by_spectral_oracle, partitions_agree, tally_in_degrees


def write_events(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# load_quadruples


def test_load_empty_file(tmp_path):
    path = write_events(tmp_path / "empty.txt", [])
    ds = load_quadruples(path)
    assert len(ds.quadruples) == 0
    assert ds.num_entities == 0 and ds.num_relations == 0


def test_load_duplicates_preserved(tmp_path):
    path = write_events(tmp_path / "dup.txt", [(0, 0, 1, 0), (0, 0, 1, 0)])
    ds = load_quadruples(path)
    assert len(ds.quadruples) == 2


def test_load_malformed_line_reports_number(tmp_path):
    path = write_events(tmp_path / "bad.txt", [(0, 0, 1, 0)])
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("0\t1\tnot_an_int\t2\n")
    with pytest.raises(ParseError) as err:
        load_quadruples(path)
    assert "2" in str(err.value)


def test_load_short_line_is_parse_error(tmp_path):
    path = write_events(tmp_path / "short.txt", [(0, 0, 1)])
    with pytest.raises(ParseError):
        load_quadruples(path)


def test_load_unknown_id_against_given_vocab(tmp_path):
    base = load_quadruples(write_events(tmp_path / "a.txt", [(0, 0, 1, 0)]))
    path = write_events(tmp_path / "b.txt", [(0, 0, 7, 0)])
    with pytest.raises(VocabularyError):
        load_quadruples(path, vocabs=(base.entity_vocab, base.relation_vocab))


def test_timestamps_reindexed_contiguously(tmp_path):
    path = write_events(tmp_path / "gaps.txt", [(0, 0, 1, 3), (0, 0, 1, 9), (1, 0, 0, 21)])
    ds = load_quadruples(path)
    assert ds.num_timestamps == 3
    assert ds.original_times == (3, 9, 21)
    assert ds.taus == (0, 1, 3)  # gcd of gaps 6 and 18 is 6


def test_companion_id_maps(tmp_path):
    with open(tmp_path / "entity2id.txt", "w") as fh:
        fh.write("alice\t0\nbob\t1\n")
    with open(tmp_path / "relation2id.txt", "w") as fh:
        fh.write("meets\t0\n")
    path = write_events(tmp_path / "train.txt", [(0, 0, 1, 0)])
    ds = load_quadruples(path)
    assert ds.entity_vocab.names == ("alice", "bob")
    assert ds.relation_vocab.names == ("meets",)


def test_grouping_flattening_roundtrip(tmp_path):
    rows = [(0, 0, 1, 1), (1, 0, 0, 0), (0, 0, 1, 1), (1, 0, 2, 2)]
    ds = load_quadruples(write_events(tmp_path / "r.txt", rows))
    flattened = sorted(
        (q.subject, q.relation, q.object, ds.original_times[q.timestamp]) for q in ds.quadruples
    )
    assert flattened == sorted(rows)


def test_save_load_roundtrip(tmp_path):
    quads = [Quadruple(0, 1, 2, 0), Quadruple(2, 0, 1, 4)]
    path = tmp_path / "out.txt"
    save_quadruples(quads, str(path))
    ds = load_quadruples(str(path))
    assert len(ds.quadruples) == 2
    assert ds.original_times == (0, 4)


# ---------------------------------------------------------------------------
# build_snapshot


def test_snapshot_single_edge_degrees():
    snap = snapshot_from_edges([(0, 1, 2)], n_entities=3, timestamp=0)
    assert snap.in_degrees[2] == 1
    assert snap.in_degrees[0] == 0


def test_snapshot_shared_object_degree():
    snap = snapshot_from_edges([(0, 0, 5), (1, 0, 5)], n_entities=6, timestamp=0)
    assert snap.in_degrees[5] == 2


def test_snapshot_out_of_range(tmp_path):
    ds = load_quadruples(write_events(tmp_path / "t.txt", [(0, 0, 1, 0)]))
    with pytest.raises(RangeError):
        build_snapshot(ds, 5)


def test_snapshot_random_degrees_match_tally():
    rng = np.random.default_rng(0)
    edges = [
        (int(rng.integers(20)), int(rng.integers(4)), int(rng.integers(20))) for _ in range(50)
    ]
    snap = snapshot_from_edges(edges, n_entities=20, timestamp=0)
    assert np.array_equal(snap.in_degrees, tally_in_degrees(edges, 20))


def test_snapshot_degree_sum_equals_edges():
    rng = np.random.default_rng(1)
    edges = [
        (int(rng.integers(9)), int(rng.integers(3)), int(rng.integers(9))) for _ in range(30)
    ]
    snap = snapshot_from_edges(edges, n_entities=9, timestamp=0)
    assert int(snap.in_degrees.sum()) == len(edges)


# ---------------------------------------------------------------------------
# build_global_graph


def test_global_graph_absent_pair_zero(tmp_path):
    ds = load_quadruples(write_events(tmp_path / "g.txt", [(0, 0, 1, 0), (2, 0, 3, 0)]))
    g = build_global_graph(ds)
    assert g.adjacency[0, 2] == 0
    assert g.adjacency[1, 3] == 0


def test_global_graph_direction_agnostic(tmp_path):
    ds = load_quadruples(write_events(tmp_path / "g2.txt", [(0, 0, 1, 0), (1, 1, 0, 1)]))
    g = build_global_graph(ds)
    assert g.adjacency[0, 1] == 2
    assert g.adjacency[1, 0] == 2


def test_global_graph_symmetric_and_order_invariant(tmp_path):
    rows = [(0, 0, 1, 0), (1, 0, 2, 1), (2, 1, 0, 0), (0, 1, 2, 2)]
    a = build_global_graph(load_quadruples(write_events(tmp_path / "fwd.txt", rows)))
    b = build_global_graph(
        load_quadruples(
            write_events(tmp_path / "rev.txt", [(s, r, o, 5 - t) for s, r, o, t in rows])
        )
    )
    assert np.array_equal(a.adjacency, a.adjacency.T)
    assert np.array_equal(a.adjacency, b.adjacency)


def test_training_in_degrees_accumulates(tmp_path):
    ds = load_quadruples(write_events(tmp_path / "d.txt", [(0, 0, 1, 0), (2, 0, 1, 1)]))
    deg = training_in_degrees(ds)
    assert deg[1] == 2 and deg[0] == 0


# ---------------------------------------------------------------------------
# generate_synthetic_tkg


def base_spec(**overrides):
    values = dict(
        n_entities=60,
        n_relations=5,
        n_timestamps=4,
        n_clusters=3,
        drift_prob=0.02,
        intra_rate=0.9,
        inter_rate=0.01,
        seed=2,
    )
    values.update(overrides)
    return SyntheticSpec(**values)


def test_synthetic_deterministic():
    ds1, planted1 = generate_synthetic_tkg(base_spec())
    ds2, planted2 = generate_synthetic_tkg(base_spec())
    assert ds1.quadruples == ds2.quadruples
    assert np.array_equal(planted1, planted2)


def test_synthetic_zero_drift_constant_membership():
    _ds, planted = generate_synthetic_tkg(base_spec(drift_prob=0.0))
    for t in range(1, planted.shape[0]):
        assert np.array_equal(planted[t], planted[0])


def test_synthetic_degenerate_spec_rejected():
    with pytest.raises(ConfigError):
        generate_synthetic_tkg(base_spec(n_entities=0))
    with pytest.raises(ConfigError):
        generate_synthetic_tkg(base_spec(n_clusters=0))


def test_synthetic_partition_recoverable_by_spectral_oracle():
    ds, planted = generate_synthetic_tkg(base_spec(drift_prob=0.0))
    snap = build_snapshot(ds, 0)
    adj = np.zeros((ds.num_entities, ds.num_entities))
    for s, _r, o in snap.edges:
        adj[s, o] += 1
        adj[o, s] += 1
    labels = partition_by_spectral_oracle(adj, 3, seed=0)
    assert partitions_agree(labels, planted[0])


# ---------------------------------------------------------------------------
# timeline merge


def test_merge_timeline_orders_and_tags(tmp_path):
    train = load_quadruples(write_events(tmp_path / "tr.txt", [(0, 0, 1, 0), (1, 0, 0, 2)]))
    vocabs = (train.entity_vocab, train.relation_vocab)
    valid = load_quadruples(
        write_events(tmp_path / "va.txt", [(0, 0, 1, 4)]), vocabs=vocabs, split="valid"
    )
    tl = merge_timeline({"train": train, "valid": valid})
    assert tl.original_times == (0, 2, 4)
    assert tl.times_with_queries("valid") == [2]
    assert [q.relation for q in tl.queries("train", 0)] == [0]
    snap = tl.snapshot(2)
    assert snap.edges == ((0, 0, 1),)


def test_vocabulary_from_names_roundtrip():
    vocab = Vocabulary.from_names(["x", "y"])
    assert vocab.ids["y"] == 1 and len(vocab) == 2


def test_id_map_roundtrip_at_reference_scale(tmp_path):
    # 205 entities x 171 relations, the scale of the smaller reference corpus
    from evocast.data import save_id_map

    entities = Vocabulary.from_names(f"entity_{i}" for i in range(205))
    relations = Vocabulary.from_names(f"rel_{i}" for i in range(171))
    save_id_map(entities, str(tmp_path / "entity2id.txt"))
    save_id_map(relations, str(tmp_path / "relation2id.txt"))
    events = tmp_path / "train.txt"
    events.write_text("0\t0\t204\t0\n204\t170\t0\t3\n")
    ds = load_quadruples(str(events))
    assert ds.num_entities == 205
    assert ds.num_relations == 171
    assert ds.entity_vocab.names[204] == "entity_204"
    assert ds.relation_vocab.names[170] == "rel_170"
    assert ds.quadruples[-1].relation == 170
