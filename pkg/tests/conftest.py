import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diffcast.models import ModelConfig
from diffcast.synth import GeneratorConfig, generate_dataset
from diffcast.training import LossConfig, TrainConfig, train


TINY_MODEL = ModelConfig(
    kind="hybrid",
    window=8,
    horizon=2,
    gnn_hidden=[12, 12],
    d_model=16,
    heads=2,
    tf_layers=2,
    ff_dim=24,
    max_positions=16,
)


@pytest.fixture(scope="session")
def small_bundle():
    cfg = GeneratorConfig(seed=7, node_count=40, series_count=24, steps=60, edge_prob=0.05)
    return generate_dataset(cfg)


@pytest.fixture(scope="session")
def tiny_train_result(small_bundle):
    tcfg = TrainConfig(epochs=4, batch_size=32, lr=1e-3, seed=3, windows_per_series=4, patience=10)
    return train("hybrid", small_bundle, TINY_MODEL, tcfg, LossConfig())


def set_all(params: dict, value: float) -> None:
    for p in params.values():
        p.data[...] = value


def rand_graph(rng: np.random.Generator, n: int, p: float):
    from diffcast.graph_encoder import DiffusionGraph, Edge, Node

    nodes = [Node(id=i) for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                edges.append(Edge(src=i, dst=j))
    return DiffusionGraph(nodes=nodes, edges=edges)
