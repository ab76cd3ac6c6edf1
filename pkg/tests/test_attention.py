import json

import numpy as np
import pytest

from modules.attention import (
    AttentionParams,
    NodeFeatureSet,
    aggregate,
    attention_coefficients,
    attention_logit,
    layer_forward,
    load_params,
    random_params,
    save_params,
    standardize_features,
)
from modules.errors import DomainError
from modules.event_io import EventStream
from modules.graph_build import EventGraph


def _identity_params(d, a_vector=None):
    a = np.zeros(2 * d) if a_vector is None else a_vector
    return AttentionParams(w_matrix=np.eye(d), a_vector=a)


def _leaky(x, slope):
    return x if x >= 0 else slope * x


def test_zero_attention_vector_gives_zero_logit():
    params = _identity_params(3)

    assert attention_logit(np.array([1.0, 2.0, 3.0]), np.array([-4.0, 0.5, 9.0]), 0.3, params) == 0.0


def test_logit_divides_by_weight():
    a = np.zeros(8)
    a[0] = 1.0
    params = _identity_params(4, a)

    logit = attention_logit(np.array([1.0, 0, 0, 0]), np.zeros(4), 2.0, params)

    assert logit == pytest.approx(0.5)


def test_logit_negative_uses_slope():
    a = np.zeros(4)
    a[0] = 1.0
    params = _identity_params(2, a)

    logit = attention_logit(np.array([-3.0, 0.0]), np.zeros(2), 1.5, params)

    assert logit == pytest.approx(0.2 * -3.0 / 1.5)


def test_logit_floors_zero_weight():
    a = np.zeros(4)
    a[0] = 1.0
    params = AttentionParams(w_matrix=np.eye(2), a_vector=a, w_floor=1e-3)

    assert attention_logit(np.array([1.0, 0.0]), np.zeros(2), 0.0, params) == pytest.approx(1000.0)


@pytest.mark.parametrize("seed", range(5))
def test_logit_matches_recomputation(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    params = random_params(d_in=4, d_out=6, seed=seed)
    f_i, f_j = rng.normal(size=4), rng.normal(size=4)
    w = rng.uniform(0.1, 2.0)

    e = params.a_vector[:6] @ (f_i @ params.w_matrix) + params.a_vector[6:] @ (f_j @ params.w_matrix)
    expected = _leaky(e, params.leaky_slope) / w

    assert attention_logit(f_i, f_j, w, params) == pytest.approx(expected)


def test_logit_dimension_mismatch():
    with pytest.raises(DomainError):
        attention_logit(np.zeros(3), np.zeros(4), 1.0, random_params(d_in=4))


def test_single_neighbor_coefficient():
    graph = EventGraph.from_edges([(0, 1, 0.4)], n_nodes=2)
    feats = NodeFeatureSet(np.eye(2))

    assert attention_coefficients(0, graph, feats, random_params(d_in=2, d_out=3)) == {1: 1.0}


def test_symmetric_neighbors_split_evenly():
    graph = EventGraph.from_edges([(0, 1, 0.5), (0, 2, 0.5)], n_nodes=3)
    feats = NodeFeatureSet(np.array([[1.0, 0.0], [0.3, 0.7], [0.3, 0.7]]))

    coeffs = attention_coefficients(0, graph, feats, random_params(d_in=2, d_out=4, seed=3))

    assert coeffs[1] == pytest.approx(0.5)
    assert coeffs[2] == pytest.approx(0.5)


def test_smaller_weight_gets_larger_coefficient():
    a = np.ones(4)
    params = _identity_params(2, a)
    graph = EventGraph.from_edges([(0, 1, 0.2), (0, 2, 0.8)], n_nodes=3)
    feats = NodeFeatureSet(np.ones((3, 2)))

    coeffs = attention_coefficients(0, graph, feats, params)

    assert coeffs[1] > coeffs[2]


def test_isolated_node_has_no_coefficients():
    graph = EventGraph.from_edges([(0, 1, 1.0)], n_nodes=3)

    with pytest.raises(DomainError):
        attention_coefficients(2, graph, NodeFeatureSet(np.zeros((3, 2))), random_params(d_in=2))


def test_aggregate_single_neighbor_identity():
    feats = NodeFeatureSet(np.array([[1.0, 2.0], [5.0, -1.0]]))

    out = aggregate(0, {1: 1.0}, feats, _identity_params(2))

    assert out.tolist() == [5.0, -1.0]


def test_aggregate_midpoint():
    feats = NodeFeatureSet(np.array([[0.0, 0.0], [2.0, 4.0], [4.0, 0.0]]))

    out = aggregate(0, {1: 0.5, 2: 0.5}, feats, _identity_params(2))

    assert out.tolist() == [3.0, 2.0]


def test_aggregate_matches_dense_algebra():
    rng = np.random.Generator(np.random.PCG64(5))
    params = random_params(d_in=4, d_out=5, seed=5)
    feats = NodeFeatureSet(rng.normal(size=(6, 4)))
    coeffs = {1: 0.2, 3: 0.5, 4: 0.3}

    alpha = np.zeros(6)
    for j, c in coeffs.items():
        alpha[j] = c
    expected = alpha @ (feats.features @ params.w_matrix)

    np.testing.assert_allclose(aggregate(0, coeffs, feats, params), expected, atol=1e-12)


def test_aggregate_rejects_unknown_neighbor():
    with pytest.raises(DomainError):
        aggregate(0, {7: 1.0}, NodeFeatureSet(np.zeros((2, 2))), _identity_params(2))


def test_layer_forward_without_edges_applies_w():
    params = random_params(d_in=3, d_out=2, seed=1)
    feats = NodeFeatureSet(np.arange(12, dtype=float).reshape(4, 3))
    graph = EventGraph.from_edges([], n_nodes=4)

    out = layer_forward(graph, feats, params)

    np.testing.assert_allclose(out.features, feats.features @ params.w_matrix)


def test_layer_forward_zero_attention_is_neighbor_mean():
    n = 4
    ii, jj = np.triu_indices(n, k=1)
    rng = np.random.Generator(np.random.PCG64(2))
    graph = EventGraph.from_edges(zip(ii.tolist(), jj.tolist(), rng.uniform(0.1, 1, len(ii)).tolist()), n_nodes=n)
    feats = NodeFeatureSet(rng.normal(size=(n, 3)))
    params = _identity_params(3)

    out = layer_forward(graph, feats, params)

    for i in range(n):
        others = [j for j in range(n) if j != i]
        np.testing.assert_allclose(out.features[i], feats.features[others].mean(axis=0))


def test_layer_forward_is_permutation_equivariant():
    rng = np.random.Generator(np.random.PCG64(8))
    n = 6
    ii, jj = np.triu_indices(n, k=1)
    w = rng.uniform(0.1, 2.0, len(ii))
    graph = EventGraph.from_edges(zip(ii.tolist(), jj.tolist(), w.tolist()), n_nodes=n)
    feats = rng.normal(size=(n, 4))
    params = random_params(d_in=4, d_out=3, seed=8)

    perm = rng.permutation(n)
    inverse = np.argsort(perm)
    permuted_graph = EventGraph.from_edges(
        zip(inverse[ii].tolist(), inverse[jj].tolist(), w.tolist()), n_nodes=n
    )

    out = layer_forward(graph, NodeFeatureSet(feats), params).features
    permuted = layer_forward(permuted_graph, NodeFeatureSet(feats[perm]), params).features

    np.testing.assert_allclose(permuted, out[perm], atol=1e-12)


def test_extreme_logits_stay_finite():
    a = np.full(4, 1e3)
    params = AttentionParams(w_matrix=np.eye(2) * 1e3, a_vector=a, w_floor=1e-9)
    graph = EventGraph.from_edges([(0, 1, 0.0), (0, 2, 1e-9)], n_nodes=3)
    feats = NodeFeatureSet(np.array([[1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]]))

    coeffs = attention_coefficients(0, graph, feats, params)

    assert all(np.isfinite(c) for c in coeffs.values())
    assert sum(coeffs.values()) == pytest.approx(1.0)


def test_layer_forward_feature_count_mismatch():
    with pytest.raises(DomainError):
        layer_forward(EventGraph.from_edges([], n_nodes=3), NodeFeatureSet(np.zeros((2, 4))), random_params())


def test_standardize_features():
    events = EventStream(x=[0, 2, 4], y=[1, 1, 1], t=[0, 10, 20], p=[1, -1, 1])

    feats = standardize_features(events)

    np.testing.assert_allclose(feats.features.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(feats.features[:, 0].std(), 1.0)
    assert (feats.features[:, 1] == 0).all()


def test_random_params_are_seeded():
    a = random_params(d_in=4, d_out=8, seed=42)
    b = random_params(d_in=4, d_out=8, seed=42)

    assert np.array_equal(a.w_matrix, b.w_matrix)
    assert np.array_equal(a.a_vector, b.a_vector)
    assert (a.d_in, a.d_out, a.a_vector.shape) == (4, 8, (16,))


def test_params_file_round_trip(tmp_path):
    params = random_params(d_in=4, d_out=3, seed=9)
    path = tmp_path / "params.json"

    save_params(params, path, seed=9)
    loaded = load_params(path)

    np.testing.assert_array_equal(loaded.w_matrix, params.w_matrix)
    np.testing.assert_array_equal(loaded.a_vector, params.a_vector)


def test_load_params_generates_from_seed(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({"d_in": 4, "d_out": 2, "seed": 5}), encoding="utf-8")

    loaded = load_params(path)

    np.testing.assert_array_equal(loaded.w_matrix, random_params(d_in=4, d_out=2, seed=5).w_matrix)


def test_params_reject_bad_attention_length():
    with pytest.raises(ValueError):
        AttentionParams(w_matrix=np.eye(2), a_vector=np.zeros(3))
