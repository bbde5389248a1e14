import numpy as np
import pytest

from conftest import random_graph
from gwf.data import sbm_dataset
from gwf.graph import AtomParams, EmbeddingParams, Graph, assemble_cost_const, feature_distance, gw_cost
from gwf.model import (
    AdamState,
    Classifier,
    ConfigurationError,
    GwfModel,
    TrainConfig,
    adam_step,
    backward,
    forward_loss,
    frozen_loss,
    init_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    train,
    train_semisupervised,
)
from gwf.solvers import SolverConfig


def random_model(rng, sizes, n_graphs=1, features=None, solver="ppa", **cfg):
    atoms = []
    for n in sizes:
        # keep raw entries away from the ReLU kink so finite differences are clean
        raw = rng.choice([-1.0, 1.0], size=(n, n)) * rng.uniform(0.1, 1.5, size=(n, n))
        feats = None if features is None else rng.normal(size=(n, features))
        atoms.append(AtomParams(raw, feats))
    emb = [EmbeddingParams(rng.normal(size=len(sizes))) for _ in range(n_graphs)]
    config = TrainConfig(num_atoms=len(sizes), solver=solver, **cfg)
    return GwfModel(atoms, emb, config)


def test_config_validation():
    assert TrainConfig(solver="badmm").gamma == 1.0
    assert TrainConfig().gamma == 0.01
    for bad in ({"num_atoms": 0}, {"learning_rate": 0.0}, {"semi_weight": -1.0}, {"solver": "sgd"}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_zero_loss_when_atom_is_the_graph(rng):
    g = random_graph(rng, 5, directed=True)
    model = GwfModel([AtomParams(g.adjacency.copy())], [EmbeddingParams(np.zeros(1))], TrainConfig(num_atoms=1))
    pinned = SolverConfig(kind="ppa", inner_iters=0, init_coupling=np.eye(5) / 5)
    art = forward_loss(model, 0, g, pinned)
    assert art.loss == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("solver", ["ppa", "badmm"])
def test_loss_matches_recomputation(solver, rng):
    model = random_model(rng, (3, 5, 4), features=2, solver=solver, inner_iters=30)
    g = random_graph(rng, 6, features=2)
    art = forward_loss(model, 0, g)
    assert art.loss >= 0
    bary = art.barycenter.as_graph()
    const = assemble_cost_const(bary, g, feature_distance(bary.features, g.features))
    assert art.loss == pytest.approx(gw_cost(bary, g, const, art.outer_coupling), abs=1e-10)
    assert frozen_loss(model, 0, g, art.barycenter.plans, art.outer_coupling.plan) == pytest.approx(art.loss, abs=1e-10)


def test_single_atom_has_zero_z_gradient(rng):
    model = random_model(rng, (4,))
    g = random_graph(rng, 5)
    grads = backward(model, g, forward_loss(model, 0, g))
    np.testing.assert_array_equal(grads.z, [0.0])


def test_inactive_relu_entries_get_zero_gradient(rng):
    model = random_model(rng, (4, 3))
    g = random_graph(rng, 5)
    grads = backward(model, g, forward_loss(model, 0, g))
    for a, ga in zip(model.atoms, grads.atoms):
        assert np.all(ga[a.raw < 0] == 0.0)


def test_z_gradient_sums_to_zero(rng):
    model = random_model(rng, (3, 4, 5), features=2)
    g = random_graph(rng, 6, features=2)
    grads = backward(model, g, forward_loss(model, 0, g))
    assert abs(grads.z.sum()) <= 1e-12


def _fd_check(model, g, rng, h=1e-6):
    art = forward_loss(model, 0, g)
    grads = backward(model, g, art)
    plans, outer = art.barycenter.plans, art.outer_coupling.plan

    def loss():
        return frozen_loss(model, 0, g, plans, outer)

    def central(arr, idx):
        old = arr[idx]
        arr[idx] = old + h
        up = loss()
        arr[idx] = old - h
        down = loss()
        arr[idx] = old
        return (up - down) / (2 * h)

    checks = []
    for k, atom in enumerate(model.atoms):
        for _ in range(4):
            idx = tuple(rng.integers(0, atom.n, size=2))
            checks.append((central(atom.raw, idx), grads.atoms[k][idx]))
        if atom.raw_features is not None:
            idx = (int(rng.integers(atom.n)), int(rng.integers(atom.raw_features.shape[1])))
            checks.append((central(atom.raw_features, idx), grads.atom_features[k][idx]))
    z = model.embeddings[0].raw
    for j in range(z.size):
        checks.append((central(z, j), grads.z[j]))
    return np.array(checks)


@pytest.mark.parametrize("solver, features", [("ppa", None), ("badmm", None), ("ppa", 2), ("badmm", 3)])
def test_gradients_match_finite_differences(solver, features):
    rng = np.random.default_rng(2024)
    model = random_model(rng, (3, 4, 5), features=features, solver=solver, inner_iters=20)
    g = random_graph(rng, 6, directed=True, features=features)
    fd, an = _fd_check(model, g, rng).T
    np.testing.assert_allclose(an, fd, rtol=1e-4, atol=1e-8)


def test_adam_first_steps():
    p = [np.array([1.0])]
    state = AdamState.zeros_like(p)
    adam_step(p, [np.array([1.0])], state, 0.05)
    assert p[0][0] == pytest.approx(1 - 0.05 / (1 + 1e-8), abs=1e-15)
    adam_step(p, [np.array([1.0])], state, 0.05)
    assert p[0][0] == pytest.approx(0.9, abs=1e-6)
    assert state.t == 2


def test_adam_zero_gradient_is_a_no_op():
    p = [np.array([[2.0, -3.0]])]
    state = AdamState.zeros_like(p)
    adam_step(p, [np.zeros((1, 2))], state, 0.1)
    np.testing.assert_array_equal(p[0], [[2.0, -3.0]])


def test_adam_shape_mismatch():
    p = [np.zeros(3)]
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros(2)], AdamState.zeros_like(p), 0.1)


def test_untrained_classifier_is_uniform(rng):
    clf = Classifier(4, 2, rng=0)
    loss, grads, grad_z = clf.loss_and_grads(rng.normal(size=4), 1)
    assert loss == pytest.approx(np.log(2), abs=1e-12)
    assert [g.shape for g in grads] == [p.shape for p in clf.params]
    np.testing.assert_array_equal(grad_z, 0.0)


def test_classifier_gradients_match_finite_differences(rng):
    clf = Classifier(3, 3, hidden=5, rng=1)
    clf.w2[:] = rng.normal(size=clf.w2.shape)
    z = rng.normal(size=3)
    _, grads, grad_z = clf.loss_and_grads(z, 2)
    h = 1e-6
    for p, g in zip(clf.params, grads):
        idx = tuple(rng.integers(0, s) for s in p.shape)
        old = p[idx]
        p[idx] = old + h
        up = clf.loss_and_grads(z, 2)[0]
        p[idx] = old - h
        down = clf.loss_and_grads(z, 2)[0]
        p[idx] = old
        assert g[idx] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-8)
    e = np.eye(3)
    fd = [(clf.loss_and_grads(z + h * e[j], 2)[0] - clf.loss_and_grads(z - h * e[j], 2)[0]) / (2 * h) for j in range(3)]
    np.testing.assert_allclose(grad_z, fd, rtol=1e-5, atol=1e-8)


def test_permuting_atoms_with_embeddings_keeps_loss(rng):
    model = random_model(rng, (3, 4, 5))
    g = random_graph(rng, 5)
    perm = [2, 0, 1]
    swapped = GwfModel([model.atoms[p] for p in perm], [EmbeddingParams(model.embeddings[0].raw[perm])], model.config)
    assert forward_loss(swapped, 0, g).loss == pytest.approx(forward_loss(model, 0, g).loss, abs=1e-10)


def test_feature_mismatch_raises(rng):
    model = random_model(rng, (3, 4), features=2)
    with pytest.raises(ConfigurationError):
        forward_loss(model, 0, random_graph(rng, 5))
    with pytest.raises(ConfigurationError):
        forward_loss(model, 0, random_graph(rng, 5, features=3))
    plain = random_model(rng, (3, 4))
    with pytest.raises(ConfigurationError):
        forward_loss(plain, 0, random_graph(rng, 5, features=2))


def test_init_model_warm_starts_from_dataset(rng):
    data = [random_graph(rng, n) for n in (3, 4, 5)]
    model = init_model(data, TrainConfig(num_atoms=5), np.random.default_rng(0))
    sizes = {g.n for g in data}
    assert all(a.n in sizes for a in model.atoms)
    assert len(model.embeddings) == 3
    with pytest.raises(ValueError):
        init_model([], TrainConfig(), rng)


SMALL = TrainConfig(num_atoms=3, inner_iters=10, outer_iters=1, epochs=2, rng_seed=5)


def small_data():
    return sbm_dataset(8, nodes=8, seed=1)


def test_training_is_reproducible():
    ds = small_data()
    m1, r1 = train(ds.graphs, SMALL)
    m2, r2 = train(ds.graphs, SMALL)
    np.testing.assert_array_equal(m1.embedding_matrix(), m2.embedding_matrix())
    assert r1.epoch_loss == r2.epoch_loss
    assert len(r1.epoch_loss) == 2 and len(r1.graph_losses[0]) == 8


def test_semisupervised_reductions():
    ds = small_data()
    base, _ = train(ds.graphs, SMALL)
    labels = {i: int(y) for i, y in enumerate(ds.labels[:4])}
    off, clf, _ = train_semisupervised(ds.graphs, labels, SMALL)
    np.testing.assert_array_equal(off.embedding_matrix(), base.embedding_matrix())
    assert clf is not None
    empty, none_clf, _ = train_semisupervised(ds.graphs, {}, SMALL)
    np.testing.assert_array_equal(empty.embedding_matrix(), base.embedding_matrix())
    assert none_clf is None
    with pytest.raises(ValueError):
        train_semisupervised(ds.graphs, {99: 1}, SMALL)


def test_label_loss_changes_embeddings():
    ds = small_data()
    base, _ = train(ds.graphs, SMALL)
    labels = {i: int(y) for i, y in enumerate(ds.labels)}
    cfg = TrainConfig(**{**SMALL.__dict__, "semi_weight": 1.0})
    semi, clf, report = train_semisupervised(ds.graphs, labels, cfg)
    assert not np.array_equal(semi.embedding_matrix(), base.embedding_matrix())
    assert report.epoch_objective[-1] >= report.epoch_loss[-1]


def test_json_round_trip_is_exact(tmp_path, rng):
    model = random_model(rng, (3, 4), n_graphs=3, features=2)
    for e in model.embeddings:
        e.raw[:] = rng.normal(size=2) * 1e-7 + 1 / 3
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    for a, b in zip(model.atoms, back.atoms):
        np.testing.assert_array_equal(a.raw, b.raw)
        np.testing.assert_array_equal(a.raw_features, b.raw_features)
    np.testing.assert_array_equal(back.embedding_matrix(), model.embedding_matrix())
    assert back.config == model.config
    with pytest.raises(ValueError):
        model_from_dict({**model_to_dict(model), "format_version": 99})


@pytest.mark.slow
def test_training_reduces_loss_on_sbm():
    ds = sbm_dataset(50, seed=0)
    _, report = train(ds.graphs, TrainConfig(num_atoms=4, rng_seed=0))
    assert report.epoch_loss[-1] < report.epoch_loss[0]


def test_model_rejects_bad_embeddings():
    with pytest.raises(ValueError):
        GwfModel([], [])
    with pytest.raises(ValueError):
        GwfModel([AtomParams(np.zeros((2, 2)))], [EmbeddingParams(np.zeros(2))])
    with pytest.raises(ConfigurationError):
        GwfModel([AtomParams(np.zeros((2, 2))), AtomParams(np.zeros((2, 2)), np.zeros((2, 1)))], [])


def test_graph_inputs_unchanged_by_training():
    ds = small_data()
    before = [g.adjacency.copy() for g in ds.graphs]
    train(ds.graphs, SMALL)
    for b, g in zip(before, ds.graphs):
        np.testing.assert_array_equal(b, g.adjacency)
    assert isinstance(ds.graphs[0], Graph)
