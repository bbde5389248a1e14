import csv
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import quad_gw, random_graph
from gwf.analysis import clustering_accuracy, gwb_km, kmeans, write_embeddings_csv
from gwf.graph import AtomParams, EmbeddingParams, Graph
from gwf.model import GwfModel, TrainConfig
from gwf.solvers import SolverConfig


def test_kmeans_single_cluster_is_the_mean(rng):
    pts = rng.normal(size=(20, 3))
    res = kmeans(pts, 1)
    np.testing.assert_array_equal(res.labels, 0)
    np.testing.assert_allclose(res.centers[0], pts.mean(axis=0), atol=1e-12)


def test_kmeans_one_cluster_per_point(rng):
    pts = rng.normal(size=(6, 2))
    res = kmeans(pts, 6)
    assert sorted(res.labels) == list(range(6))
    assert res.inertia == pytest.approx(0.0, abs=1e-24)


def test_kmeans_two_obvious_groups():
    res = kmeans([0.0, 0.1, 10.0, 10.1], 2)
    assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]
    assert res.inertia == pytest.approx(4 * 0.05**2)


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


def test_kmeans_history_non_increasing(rng):
    pts = np.vstack([rng.normal(c, 1.0, size=(30, 2)) for c in (0, 4, 8)])
    res = kmeans(pts, 3, seeds=3)
    assert np.all(np.diff(res.history) <= 1e-12)
    assert res.history[-1] == pytest.approx(res.inertia)


def test_kmeans_reproducible(rng):
    pts = rng.normal(size=(40, 4))
    a, b = kmeans(pts, 3, rng_seed=4), kmeans(pts, 3, rng_seed=4)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_accuracy_examples():
    assert clustering_accuracy([0, 1, 0], [1, 0, 1]) == 1.0
    assert clustering_accuracy([0, 1, 0, 1], [0, 1, 1, 1]) == 0.75
    assert clustering_accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        clustering_accuracy([0, 1, 2], [0, 1, 1])
    with pytest.raises(ValueError):
        clustering_accuracy([0, 1], [0, 1, 1])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_accuracy_flip_invariant_and_bounded(pairs):
    y, yh = map(np.array, zip(*pairs))
    acc = clustering_accuracy(y, yh)
    assert acc == clustering_accuracy(y, 1 - yh)
    assert 0.5 <= acc <= 1.0


def clique(n):
    return Graph(np.ones((n, n)) - np.eye(n))


def path(n):
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = 1.0
    return Graph(a)


def perm_gw(a, b):
    """Exact GW over permutation couplings (equal sizes, uniform weights)."""
    n = a.n
    return min(quad_gw(a.adjacency, b.adjacency, np.eye(n)[list(p)] / n) for p in itertools.permutations(range(n)))


def test_gwbkm_separates_clique_from_path():
    g1, g2 = clique(4), path(4)
    assert perm_gw(g1, g1) == 0.0 and perm_gw(g2, g2) == 0.0
    # 12 clique edges vs 6 path edges: 6 unmatched entries of mass 1/16 each
    assert perm_gw(g1, g2) == pytest.approx(6 / 16)
    solver = SolverConfig(kind="ppa", gamma=0.1, inner_iters=50)
    res = gwb_km([g1, g1, g2, g2], 2, solver)
    assert clustering_accuracy([0, 0, 1, 1], res.labels) == 1.0
    assert res.history[-1] <= res.history[0] + 1e-12


def test_gwbkm_single_cluster_and_errors(rng):
    graphs = [random_graph(rng, n) for n in (4, 5, 6)]
    res = gwb_km(graphs, 1, SolverConfig(kind="ppa", inner_iters=10), max_iters=3)
    np.testing.assert_array_equal(res.labels, 0)
    assert len(res.centers) == 1
    with pytest.raises(ValueError):
        gwb_km(graphs, 4)


def test_gwbkm_end_no_worse_than_first_assignment():
    rng = np.random.default_rng(11)
    graphs = [random_graph(rng, int(n), p=p) for n, p in zip(rng.integers(5, 9, size=10), [0.2, 0.8] * 5)]
    res = gwb_km(graphs, 2, SolverConfig(kind="ppa", gamma=0.1, inner_iters=30))
    assert res.history[-1] <= res.history[0] + 1e-9
    assert res.n_iter == len(res.history)


def test_embeddings_csv(tmp_path):
    model = GwfModel(
        [AtomParams(np.zeros((2, 2))), AtomParams(np.ones((3, 3)))],
        [EmbeddingParams(np.array([0.0, np.log(2)])), EmbeddingParams(np.array([1.0, 1.0]))],
        TrainConfig(num_atoms=2),
    )
    out = tmp_path / "emb.csv"
    write_embeddings_csv(out, model, labels=np.array([1, 0]))
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["graph_id", "cluster", "z_1", "z_2", "lambda_1", "lambda_2"]
    assert rows[1][:2] == ["0", "1"]
    assert float(rows[1][4]) == pytest.approx(1 / 3, abs=1e-12)
    assert float(rows[1][5]) == pytest.approx(2 / 3, abs=1e-12)
    write_embeddings_csv(out, model)
    assert next(csv.reader(open(out)))[:2] == ["graph_id", "z_1"]
