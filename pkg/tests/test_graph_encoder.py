import numpy as np
import pytest

from diffcast.errors import ContractError, DimensionError
from diffcast.graph_encoder import (
    DiffusionGraph,
    Edge,
    GnnParams,
    Node,
    attention_coefficients,
    encode_graph,
    gnn_layer,
    influencer_ranking,
    init_gnn_params,
    neighbor_mask,
    readout,
)
from diffcast.numerics import Tensor, finite_difference_check, mean

from conftest import rand_graph
from oracles import naive_encode, naive_gnn_layer


def line_graph(n):
    return DiffusionGraph(
        nodes=[Node(id=i) for i in range(n)],
        edges=[Edge(src=i, dst=i + 1) for i in range(n - 1)],
    )


def star_graph(spokes):
    # hub 0 influences every spoke: edges 0 -> i
    return DiffusionGraph(
        nodes=[Node(id=i) for i in range(spokes + 1)],
        edges=[Edge(src=0, dst=i) for i in range(1, spokes + 1)],
    )


def cycle_graph(n):
    return DiffusionGraph(
        nodes=[Node(id=i) for i in range(n)],
        edges=[Edge(src=i, dst=(i + 1) % n) for i in range(n)],
    )


def layer_triples(params: GnnParams):
    return [
        (l.w_self.data, l.w_neigh.data, l.attn.data[:, 0].copy())
        for l in params.layers
    ]


def test_graph_validation():
    with pytest.raises(ContractError):
        DiffusionGraph(nodes=[Node(id=0)], edges=[Edge(src=0, dst=1)])
    with pytest.raises(ContractError):
        DiffusionGraph(nodes=[Node(id=0), Node(id=1)], edges=[Edge(0, 1), Edge(0, 1)])


def test_in_neighbors_follow_edge_direction():
    g = line_graph(3)
    assert g.in_neighbors == [[], [0], [1]]
    mask = neighbor_mask(g)
    assert mask[1, 0] == 1.0 and mask[0, 1] == 0.0


def test_single_neighbor_gets_weight_one():
    rng = np.random.default_rng(1)
    params = init_gnn_params(rng, [3, 4])
    g = line_graph(2)
    alpha = attention_coefficients(params.layers[0], rng.normal(size=(2, 3)), g)
    assert alpha.data[1, 0] == pytest.approx(1.0)
    np.testing.assert_array_equal(alpha.data[0], [0.0, 0.0])


def test_identical_neighbor_embeddings_split_evenly():
    rng = np.random.default_rng(2)
    params = init_gnn_params(rng, [3, 4])
    g = DiffusionGraph(
        nodes=[Node(id=i) for i in range(3)],
        edges=[Edge(src=1, dst=0), Edge(src=2, dst=0)],
    )
    h = np.vstack([rng.normal(size=3), np.ones(3), np.ones(3)])
    alpha = attention_coefficients(params.layers[0], h, g)
    assert alpha.data[0, 1] == pytest.approx(0.5)
    assert alpha.data[0, 2] == pytest.approx(0.5)


def test_attention_matches_naive_loop_on_star():
    rng = np.random.default_rng(7)
    params = init_gnn_params(rng, [3, 5])
    g = star_graph(3)
    h = rng.normal(size=(4, 3))
    alpha = attention_coefficients(params.layers[0], h, g)
    _, expected = naive_gnn_layer(
        list(h), g.in_neighbors, *layer_triples(params)[0], alpha=params.leaky_alpha
    )
    np.testing.assert_allclose(alpha.data, expected, atol=1e-6)


def test_alpha_rows_sum_to_one_on_nonempty_neighborhoods():
    rng = np.random.default_rng(3)
    g = rand_graph(rng, 12, 0.3)
    params = init_gnn_params(rng, [4, 6])
    alpha = attention_coefficients(params.layers[0], rng.normal(size=(12, 4)), g)
    sums = alpha.data.sum(axis=1)
    for i, nbrs in enumerate(g.in_neighbors):
        if nbrs:
            assert abs(sums[i] - 1.0) < 1e-9
        else:
            assert sums[i] == 0.0
    mask = neighbor_mask(g)
    assert np.all(alpha.data[mask == 0.0] == 0.0)


def test_layer_with_no_edges_reduces_to_self_term():
    rng = np.random.default_rng(4)
    g = DiffusionGraph(nodes=[Node(id=i) for i in range(3)], edges=[])
    params = init_gnn_params(rng, [3, 3])
    params.layers[0].w_self.data[...] = np.eye(3)
    h = rng.normal(size=(3, 3))
    out = gnn_layer(h, g, params.layers[0])
    np.testing.assert_allclose(out.data, np.maximum(h, 0.0), atol=1e-12)


def test_zero_weights_give_zero_embeddings():
    rng = np.random.default_rng(5)
    g = cycle_graph(4)
    params = init_gnn_params(rng, [3, 4])
    params.layers[0].w_self.data[...] = 0.0
    params.layers[0].w_neigh.data[...] = 0.0
    out = gnn_layer(rng.normal(size=(4, 3)), g, params.layers[0])
    np.testing.assert_array_equal(out.data, np.zeros((4, 4)))


def test_layer_matches_naive_loop_on_cycle():
    rng = np.random.default_rng(7)
    params = init_gnn_params(rng, [3, 5])
    g = cycle_graph(4)
    h = rng.normal(size=(4, 3))
    out = gnn_layer(h, g, params.layers[0], leaky_alpha=params.leaky_alpha)
    expected, _ = naive_gnn_layer(
        list(h), g.in_neighbors, *layer_triples(params)[0], alpha=params.leaky_alpha
    )
    np.testing.assert_allclose(out.data, np.stack(expected), atol=1e-6)


def test_dimension_error_names_layer():
    rng = np.random.default_rng(6)
    params = init_gnn_params(rng, [3, 4])
    with pytest.raises(DimensionError, match="layer 0"):
        gnn_layer(rng.normal(size=(4, 5)), cycle_graph(4), params.layers[0])


def test_readout_identities():
    v = np.array([1.5, -2.0])
    same = np.tile(v, (5, 1))
    np.testing.assert_allclose(readout(same).data, v)
    np.testing.assert_allclose(readout(np.array([[0.0, 2.0], [2.0, 0.0]])).data, [1.0, 1.0])
    with pytest.raises(ContractError):
        readout(np.zeros((0, 3)))


def test_encode_single_layer_is_layer_plus_readout():
    rng = np.random.default_rng(8)
    params = init_gnn_params(rng, [3, 4])
    g = cycle_graph(5)
    h = rng.normal(size=(5, 3))
    direct = readout(gnn_layer(h, g, params.layers[0]))
    composed = encode_graph(g, h, params)
    np.testing.assert_allclose(composed.data, direct.data, atol=1e-12)


def test_encode_matches_composed_naive_oracle():
    rng = np.random.default_rng(11)
    params = init_gnn_params(rng, [4, 6, 5])
    g = rand_graph(rng, 5, 0.4)
    h = rng.normal(size=(5, 4))
    out = encode_graph(g, h, params)
    expected = naive_encode(list(h), g.in_neighbors, layer_triples(params), alpha=params.leaky_alpha)
    np.testing.assert_allclose(out.data, expected, atol=1e-6)


def test_encode_oracle_equivalence_20_seeds():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        params = init_gnn_params(rng, [3, 6, 4])
        g = rand_graph(rng, 5, rng.uniform(0.2, 0.6))
        h = rng.normal(size=(5, 3))
        out = encode_graph(g, h, params)
        expected = naive_encode(list(h), g.in_neighbors, layer_triples(params), alpha=params.leaky_alpha)
        np.testing.assert_allclose(out.data, expected, atol=1e-6)


def _permute(graph: DiffusionGraph, perm: np.ndarray) -> DiffusionGraph:
    # node at position i moves to position perm[i]; ids relabeled to match
    return DiffusionGraph(
        nodes=[Node(id=i) for i in range(graph.n)],
        edges=[Edge(src=int(perm[e.src]), dst=int(perm[e.dst]), kind=e.kind) for e in graph.edges],
    )


def test_layer_permutation_equivariance():
    rng = np.random.default_rng(13)
    params = init_gnn_params(rng, [4, 5])
    g = rand_graph(rng, 8, 0.3)
    h = rng.normal(size=(8, 4))
    base = gnn_layer(h, g, params.layers[0]).data
    for _ in range(20):
        perm = rng.permutation(8)
        permuted_h = np.empty_like(h)
        permuted_h[perm] = h
        out = gnn_layer(permuted_h, _permute(g, perm), params.layers[0]).data
        np.testing.assert_allclose(out[perm], base, atol=1e-9)


def test_encode_permutation_invariance():
    rng = np.random.default_rng(14)
    params = init_gnn_params(rng, [4, 5, 5])
    g = rand_graph(rng, 9, 0.3)
    h = rng.normal(size=(9, 4))
    base = encode_graph(g, h, params).data
    for _ in range(100):
        perm = rng.permutation(9)
        permuted_h = np.empty_like(h)
        permuted_h[perm] = h
        out = encode_graph(_permute(g, perm), permuted_h, params).data
        np.testing.assert_allclose(out, base, atol=1e-9)


def test_isolated_node_does_not_disturb_others():
    rng = np.random.default_rng(15)
    params = init_gnn_params(rng, [4, 5])
    g = rand_graph(rng, 6, 0.4)
    h = rng.normal(size=(6, 4))
    base = gnn_layer(h, g, params.layers[0]).data
    grown = DiffusionGraph(nodes=g.nodes + [Node(id=6)], edges=list(g.edges))
    h_grown = np.vstack([h, rng.normal(size=4)])
    out = gnn_layer(h_grown, grown, params.layers[0]).data
    np.testing.assert_allclose(out[:6], base, atol=1e-12)


def test_encode_gradients_match_finite_differences():
    rng = np.random.default_rng(16)
    params = init_gnn_params(rng, [3, 4, 4])
    g = rand_graph(rng, 5, 0.4)
    h = rng.normal(size=(5, 3))
    named = {
        f"l{i}.{field}": getattr(layer, attr)
        for i, layer in enumerate(params.layers)
        for field, attr in (("w_self", "w_self"), ("w_neigh", "w_neigh"), ("attn", "attn"))
    }

    def loss_fn():
        return mean(encode_graph(g, h, params) * Tensor(np.arange(4.0)))

    report = finite_difference_check(loss_fn, named, tolerance=1e-4)
    assert report.passed, report.per_param


def test_batched_encode_matches_single():
    rng = np.random.default_rng(17)
    params = init_gnn_params(rng, [4, 6])
    g = rand_graph(rng, 7, 0.3)
    feats = rng.normal(size=(3, 7, 4))
    batched = encode_graph(g, feats, params).data
    for i in range(3):
        single = encode_graph(g, feats[i], params).data
        np.testing.assert_allclose(batched[i], single, atol=1e-12)


def test_star_hub_ranks_first_influencer():
    rng = np.random.default_rng(18)
    params = init_gnn_params(rng, [3, 4])
    g = star_graph(4)
    feats = rng.normal(size=(5, 3))
    ranking = influencer_ranking(g, feats, params)
    assert ranking[0][0] == 0  # the hub feeds every spoke's neighborhood
    assert ranking[0][1] == pytest.approx(4.0)  # sole in-neighbor of 4 spokes
