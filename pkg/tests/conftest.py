"""Shared fixtures: a tiny deterministic dataset, a small trained run for the
CLI tests, and helpers that flatten a model into the plain-numpy parameter
dict the straight-line oracle consumes.
"""

import numpy as np
import pytest
import torch

from evocast import (
    Quadruple,
    RunConfig,
    load_quadruples,
    save_quadruples,
    train,
    training_in_degrees,
)
from evocast.cluster_graph import global_centroids_from_parts, spectral_partition
from evocast.data import build_global_graph, build_snapshot
from evocast.model import ForecastModel
from evocast.relational import SnapshotTensors


def make_tiny_quadruples():
    """12 entities, 3 relations, 3 timestamps; every entity appears at t=0."""
    rng = np.random.default_rng(5)
    quads = [Quadruple(i, i % 3, (i + 1) % 12, 0) for i in range(12)]
    for t in range(3):
        for _ in range(10):
            s = int(rng.integers(12))
            o = int(rng.integers(12))
            if o == s:
                o = (o + 1) % 12
            quads.append(Quadruple(s, int(rng.integers(3)), o, t))
    return quads


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny") / "train.txt"
    save_quadruples(make_tiny_quadruples(), str(path))
    return load_quadruples(str(path))


def tiny_config(**overrides):
    base = dict(
        dim=8,
        n_clusters=3,
        n_layers=2,
        window=3,
        batch_size=16,
        decoder_channels=4,
        decoder_kernel=3,
        dropout=0.0,
        seed=9,
        dtype="float64",
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture()
def tiny_model(tiny_dataset):
    cfg = tiny_config()
    torch.manual_seed(cfg.seed)
    model = ForecastModel(
        cfg, tiny_dataset.num_entities, tiny_dataset.num_relations, training_in_degrees(tiny_dataset)
    )
    model.eval()
    return model


@pytest.fixture()
def tiny_inputs(tiny_dataset):
    snaps = [build_snapshot(tiny_dataset, t) for t in range(tiny_dataset.num_timestamps)]
    tensors = [SnapshotTensors(s) for s in snaps]
    taus = list(tiny_dataset.taus)
    return snaps, tensors, taus


def tiny_global_centroids(dataset, model, seed=9):
    parts = spectral_partition(build_global_graph(dataset).adjacency, model.cfg.n_clusters, seed)
    return global_centroids_from_parts(parts, model.initial_entity_matrix().detach())


def oracle_params(model):
    """Flatten a model's parameters into the oracle's numpy dict."""
    sd = {k: v.detach().cpu().double().numpy() for k, v in model.state_dict().items()}
    n_layers = len(model.encoder.layers)
    return {
        "entity_init": model.initial_entity_matrix().detach().cpu().double().numpy(),
        "relation_init": sd["relation_table"],
        "w1": [sd[f"encoder.layers.{i}.w1.weight"] for i in range(n_layers)],
        "w2": [sd[f"encoder.layers.{i}.w2.weight"] for i in range(n_layers)],
        "phi_w1": sd["cluster_graph.phi.0.weight"],
        "phi_b1": sd["cluster_graph.phi.0.bias"],
        "phi_w2": sd["cluster_graph.phi.2.weight"],
        "phi_b2": sd["cluster_graph.phi.2.bias"],
        "conv_w": sd["cluster_graph.conv.weight"][0, 0],
        "conv_b": float(sd["cluster_graph.conv.bias"][0]),
        "upd_w1": sd["cluster_graph.update.0.weight"],
        "upd_b1": sd["cluster_graph.update.0.bias"],
        "upd_w2": sd["cluster_graph.update.2.weight"],
        "upd_b2": sd["cluster_graph.update.2.bias"],
        "gate_e_w": sd["gate_entity.w3.weight"],
        "gate_e_b": sd["gate_entity.w3.bias"],
        "gate_r_w": sd["gate_relation.w3.weight"],
        "gate_r_b": sd["gate_relation.w3.bias"],
        "omega_e": sd["attention_entity.omega"],
        "omega_r": sd["attention_relation.omega"],
        "wq_e": sd["attention_entity.w_q.weight"],
        "wk_e": sd["attention_entity.w_k.weight"],
        "proj_e": sd["attention_entity.out.weight"],
        "wq_r": sd["attention_relation.w_q.weight"],
        "wk_r": sd["attention_relation.w_k.weight"],
        "proj_r": sd["attention_relation.out.weight"],
    }


def oracle_frozen(pipeline_state):
    gc = pipeline_state.global_centroids
    return {
        "centroids": [c.detach().cpu().double().numpy() for c in pipeline_state.centroids],
        "align_perm": list(pipeline_state.align_perms),
        "global_perm": list(pipeline_state.global_perms),
        "global_centroids": None if gc is None else gc.detach().cpu().double().numpy(),
    }


def oracle_snapshots(snapshots):
    return [(list(s.edges), np.asarray(s.in_degrees)) for s in snapshots]


def write_synth_spec(path, **overrides):
    values = dict(
        n_entities=20,
        n_relations=5,
        n_timestamps=8,
        n_clusters=2,
        drift_prob=0.02,
        intra_rate=0.9,
        inter_rate=0.05,
        seed=3,
    )
    values.update(overrides)
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")
    return path


@pytest.fixture(scope="session")
def small_synth_dir(tmp_path_factory):
    from evocast import run_synth

    root = tmp_path_factory.mktemp("smallsynth")
    spec = write_synth_spec(root / "spec.txt")
    out = root / "data"
    run_synth(str(spec), str(out))
    return out


def small_run_config(data_dir, out_dir, **overrides):
    base = dict(
        train_path=str(data_dir / "train.txt"),
        valid_path=str(data_dir / "valid.txt"),
        test_path=str(data_dir / "test.txt"),
        out_dir=str(out_dir),
        dim=16,
        n_clusters=2,
        n_layers=1,
        window=3,
        epochs=2,
        patience=5,
        seed=7,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def trained_run(small_synth_dir, tmp_path_factory):
    """One short training run shared by the checkpoint/CLI contract tests."""
    out_dir = tmp_path_factory.mktemp("trainedrun")
    cfg = small_run_config(small_synth_dir, out_dir)
    path, history = train(cfg, log=lambda *_: None)
    return {"path": path, "config": cfg, "history": history, "data_dir": small_synth_dir}


def pytest_terminal_summary(terminalreporter):
    """Surface the acceptance verdict lines after capture is released."""
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
