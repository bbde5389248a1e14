"""Gromov-Wasserstein factorization model: forward loss, gradients and training."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .barycenter import BarycenterState, combine_features, combine_structure, gwb
from .graph import (
    AtomParams,
    Coupling,
    EmbeddingParams,
    Graph,
    ShapeError,
    assemble_cost_const,
    feature_distance,
    gw_cost,
    map_atom,
    map_weights,
    uniform,
)
from .solvers import DEFAULT_GAMMA, SolverConfig, SolverKind, gwd

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ConfigurationError(ValueError):
    """Model and data disagree (e.g. features on one side only)."""


@dataclass
class TrainConfig:
    num_atoms: int = 30
    inner_iters: int = 50
    outer_iters: int = 2
    gamma: float | None = None
    learning_rate: float = 0.05
    epochs: int = 10
    solver: str = "ppa"
    semi_weight: float = 0.0
    rng_seed: int = 0
    feature_weight: float = 1.0
    hidden: int = 16

    def __post_init__(self):
        self.solver = SolverKind(self.solver).value
        if self.gamma is None:
            self.gamma = DEFAULT_GAMMA[SolverKind(self.solver)]
        for name in ("num_atoms", "inner_iters", "outer_iters", "epochs", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.semi_weight < 0:
            raise ValueError("semi_weight must be nonnegative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            kind=self.solver,
            gamma=self.gamma,
            inner_iters=self.inner_iters,
            feature_weight=self.feature_weight,
        )


@dataclass
class GwfModel:
    atoms: list[AtomParams]
    embeddings: list[EmbeddingParams]
    config: TrainConfig = field(default_factory=TrainConfig)
    graph_ids: list | None = None

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a model needs at least one atom")
        k = len(self.atoms)
        for e in self.embeddings:
            if e.raw.size != k:
                raise ShapeError(f"embedding of length {e.raw.size} for {k} atoms")
        has = {a.raw_features is not None for a in self.atoms}
        if len(has) != 1:
            raise ConfigurationError("either all atoms carry features or none do")
        if self.graph_ids is None:
            self.graph_ids = list(range(len(self.embeddings)))

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def fused(self) -> bool:
        return self.atoms[0].raw_features is not None

    def atom_graphs(self) -> list[Graph]:
        return [Graph(map_atom(a.raw), uniform(a.n), a.raw_features) for a in self.atoms]

    def weights(self, i: int) -> np.ndarray:
        return map_weights(self.embeddings[i].raw)

    def embedding_matrix(self) -> np.ndarray:
        return np.vstack([e.raw for e in self.embeddings])

    def weight_matrix(self) -> np.ndarray:
        return np.vstack([map_weights(e.raw) for e in self.embeddings])


@dataclass
class ForwardArtifacts:
    loss: float
    barycenter: BarycenterState
    outer_coupling: Coupling
    cost_const: np.ndarray
    weights: np.ndarray
    feature_dist: np.ndarray | None = None


@dataclass
class Gradients:
    atoms: list[np.ndarray]
    z: np.ndarray
    atom_features: list[np.ndarray] | None = None


def _check_compatible(model: GwfModel, graph: Graph):
    if model.fused != graph.has_features:
        raise ConfigurationError(
            "model atoms and graph disagree on node features "
            f"(atoms: {model.fused}, graph: {graph.has_features})"
        )
    if model.fused and model.atoms[0].raw_features.shape[1] != graph.features.shape[1]:
        raise ConfigurationError("feature dimension of graph differs from the atoms")


def forward_loss(model: GwfModel, graph_index: int, graph: Graph, solver: SolverConfig | None = None) -> ForwardArtifacts:
    """Reconstruct ``graph`` as a barycenter of the atoms and measure the fit.

    The barycenter starts from the observed graph itself and runs
    ``outer_iters`` alternating rounds; one more coupling solve against the
    observed graph gives the squared (fused) GW loss.

    ``solver`` overrides the solver settings derived from the model config
    (used to pin couplings in tests).
    """
    _check_compatible(model, graph)
    solver = solver or model.config.solver_config()
    weights = model.weights(graph_index)
    atoms = model.atom_graphs()
    bary = gwb(atoms, weights, BarycenterState.from_graph(graph), model.config.outer_iters, solver)
    approx = bary.as_graph()
    fdist = feature_distance(bary.features, graph.features) if model.fused else None
    result = gwd(approx, graph, solver, fdist)
    cost_const = assemble_cost_const(approx, graph, fdist, solver.feature_weight)
    return ForwardArtifacts(result.sq_discrepancy, bary, result.coupling, cost_const, weights, fdist)


def frozen_loss(model: GwfModel, graph_index: int, graph: Graph, atom_plans, outer_plan, feature_weight=None) -> float:
    """The reconstruction loss with every coupling held fixed.

    This is the closed-form function whose gradient ``backward`` returns.
    """
    feature_weight = model.config.feature_weight if feature_weight is None else feature_weight
    weights = model.weights(graph_index)
    mu_b = graph.node_dist
    atoms = model.atom_graphs()
    b = combine_structure(atom_plans, [a.adjacency for a in atoms], weights, mu_b)
    bary = Graph(np.maximum(b, 0.0), mu_b)
    fdist = None
    if model.fused:
        fb = combine_features(atom_plans, [a.features for a in atoms], weights, mu_b)
        fdist = feature_distance(fb, graph.features)
    cost_const = assemble_cost_const(bary, graph, fdist, feature_weight)
    return gw_cost(bary, graph, cost_const, outer_plan)


def backward(model: GwfModel, graph: Graph, artifacts: ForwardArtifacts, graph_index: int | None = None) -> Gradients:
    """Gradients of the frozen-coupling loss with respect to the raw parameters.

    All couplings in ``artifacts`` are treated as constants.
    """
    _check_compatible(model, graph)
    plans = artifacts.barycenter.plans
    if len(plans) != model.num_atoms:
        raise ValueError(f"artifacts hold {len(plans)} atom couplings for {model.num_atoms} atoms")
    lam = artifacts.weights if graph_index is None else model.weights(graph_index)
    bary = artifacts.barycenter.adjacency
    mu_b = artifacts.barycenter.node_dist
    plan = artifacts.outer_coupling.plan
    if plan.shape != (bary.shape[0], graph.n):
        raise ValueError("outer coupling does not match barycenter and graph sizes")
    rows = plan.sum(axis=1)
    atoms = model.atom_graphs()

    grad_b = 2.0 * bary * np.outer(rows, mu_b) - 2.0 * plan @ graph.adjacency @ plan.T
    grad_sum = grad_b / np.outer(mu_b, mu_b)
    grad_atoms, grad_lam = [], np.zeros(model.num_atoms)
    for k, (t, atom) in enumerate(zip(plans, atoms)):
        grad_u = lam[k] * (t.T @ grad_sum @ t)
        grad_atoms.append(np.where(model.atoms[k].raw >= 0, grad_u, 0.0))
        grad_lam[k] = np.sum(grad_sum * (t @ atom.adjacency @ t.T))

    grad_feats = None
    if model.fused:
        w = model.config.feature_weight
        fb = artifacts.barycenter.features
        grad_fb = w * (2.0 * rows[:, None] * fb - 2.0 * plan @ graph.features)
        grad_fsum = grad_fb / mu_b[:, None]
        grad_feats = []
        for k, (t, atom) in enumerate(zip(plans, atoms)):
            grad_feats.append(lam[k] * (t.T @ grad_fsum))
            grad_lam[k] += np.sum(grad_fsum * (t @ atom.features))

    grad_z = lam * (grad_lam - lam @ grad_lam)
    return Gradients(grad_atoms, grad_z, grad_feats)


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p, dtype=float) for p in params], [np.zeros_like(p, dtype=float) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, lr: float):
    """Bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("params, grads and optimizer state differ in length")
    for p, g, m in zip(params, grads, state.first_moment):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise ValueError(f"shape mismatch: param {np.shape(p)}, grad {np.shape(g)}, moment {np.shape(m)}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


class Classifier:
    """One-hidden-layer ReLU network mapping embeddings to class logits."""

    def __init__(self, n_in: int, n_classes: int, hidden: int = 16, rng=None):
        rng = np.random.default_rng(rng)
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = np.zeros((hidden, n_classes))
        self.b2 = np.zeros(n_classes)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def logits(self, z) -> np.ndarray:
        h = np.maximum(np.asarray(z) @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def predict(self, z) -> np.ndarray:
        return np.argmax(self.logits(np.atleast_2d(z)), axis=1)

    def loss_and_grads(self, z, label: int):
        """Cross-entropy of one example; returns ``(loss, param_grads, grad_z)``."""
        pre = z @ self.w1 + self.b1
        h = np.maximum(pre, 0.0)
        logits = h @ self.w2 + self.b2
        shifted = logits - logits.max()
        log_probs = shifted - np.log(np.exp(shifted).sum())
        loss = -log_probs[label]
        d_logits = np.exp(log_probs)
        d_logits[label] -= 1.0
        d_h = (self.w2 @ d_logits) * (pre > 0)
        grads = [np.outer(z, d_h), d_h, np.outer(h, d_logits), d_logits]
        return float(loss), grads, self.w1 @ d_h


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_objective: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    graph_losses: list[list[float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    adam: dict = field(default_factory=lambda: {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS})

    def rows(self):
        for e, (loss, secs) in enumerate(zip(self.epoch_loss, self.epoch_seconds), start=1):
            yield e, loss, secs


def _check_dataset(dataset: list[Graph]):
    if not dataset:
        raise ValueError("dataset is empty")
    fused = dataset[0].has_features
    if any(g.has_features != fused for g in dataset):
        raise ValueError("either all graphs carry node features or none do")
    if fused:
        dims = {g.features.shape[1] for g in dataset}
        if len(dims) != 1:
            raise ValueError(f"node feature dimensions differ across graphs: {sorted(dims)}")


def init_model(dataset: list[Graph], config: TrainConfig, rng) -> GwfModel:
    """Warm start: atoms copy randomly chosen observed graphs, embeddings start near zero."""
    _check_dataset(dataset)
    k, n = config.num_atoms, len(dataset)
    picks = rng.choice(n, size=k, replace=n < k)
    atoms = [
        AtomParams(dataset[j].adjacency.copy(), None if dataset[j].features is None else dataset[j].features.copy())
        for j in picks
    ]
    embeddings = [EmbeddingParams(rng.normal(0.0, 0.01, size=k)) for _ in range(n)]
    return GwfModel(atoms, embeddings, config)


def train_semisupervised(dataset: list[Graph], labels: dict | None, config: TrainConfig):
    """Learn atoms and embeddings, optionally with a label loss on some embeddings.

    Parameters
    ----------
    dataset : list of Graph
    labels : dict, optional
        Maps graph index to class label. Labeled graphs add
        ``semi_weight * cross_entropy(classifier(z_i), label)`` to their loss.
    config : TrainConfig

    Returns
    -------
    model : GwfModel
    classifier : Classifier or None
    report : TrainReport
    """
    labels = dict(labels or {})
    for i in labels:
        if not 0 <= i < len(dataset):
            raise ValueError(f"label given for unknown graph index {i}")
    rng = np.random.default_rng(config.rng_seed)
    model = init_model(dataset, config, rng)
    k = model.num_atoms

    classifier = None
    if labels:
        n_classes = max(2, int(max(labels.values())) + 1)
        classifier = Classifier(k, n_classes, config.hidden, np.random.default_rng([config.rng_seed, 1]))
        clf_state = AdamState.zeros_like(classifier.params)
    supervised = classifier is not None and config.semi_weight > 0

    atom_params = [a.raw for a in model.atoms]
    if model.fused:
        atom_params += [a.raw_features for a in model.atoms]
    atom_state = AdamState.zeros_like(atom_params)
    z_states = [AdamState.zeros_like([e.raw]) for e in model.embeddings]

    report = TrainReport(config=asdict(config))
    for epoch in range(config.epochs):
        start = time.perf_counter()
        losses, objective = np.zeros(len(dataset)), 0.0
        for i in rng.permutation(len(dataset)):
            graph = dataset[i]
            art = forward_loss(model, i, graph)
            grads = backward(model, graph, art, i)
            grad_z = grads.z
            total = art.loss
            if supervised and i in labels:
                ce, clf_grads, ce_grad_z = classifier.loss_and_grads(model.embeddings[i].raw, labels[i])
                total += config.semi_weight * ce
                grad_z = grad_z + config.semi_weight * ce_grad_z
                adam_step(classifier.params, [config.semi_weight * g for g in clf_grads], clf_state, config.learning_rate)
            atom_grads = grads.atoms + (grads.atom_features or [])
            adam_step(atom_params, atom_grads, atom_state, config.learning_rate)
            adam_step([model.embeddings[i].raw], [grad_z], z_states[i], config.learning_rate)
            losses[i] = art.loss
            objective += total
        report.epoch_loss.append(float(np.mean(losses)))
        report.epoch_objective.append(objective / len(dataset))
        report.epoch_seconds.append(time.perf_counter() - start)
        report.graph_losses.append(losses.tolist())
        logger.info("epoch %d: mean loss %.6g (%.2fs)", epoch + 1, report.epoch_loss[-1], report.epoch_seconds[-1])
    return model, classifier, report


def train(dataset: list[Graph], config: TrainConfig):
    """Unsupervised training; returns ``(model, report)``."""
    model, _, report = train_semisupervised(dataset, None, config)
    return model, report


def _flat(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def model_to_dict(model: GwfModel) -> dict:
    atoms = []
    for a in model.atoms:
        entry = {"n": a.n, "raw": _flat(a.raw)}
        if a.raw_features is not None:
            entry["raw_features"] = _flat(a.raw_features)
        atoms.append(entry)
    return {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "atoms": atoms,
        "embeddings": [{"graph_id": gid, "z": _flat(e.raw)} for gid, e in zip(model.graph_ids, model.embeddings)],
    }


def model_from_dict(data: dict) -> GwfModel:
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {data.get('format_version')!r}")
    atoms = []
    for entry in data["atoms"]:
        n = int(entry["n"])
        feats = entry.get("raw_features")
        atoms.append(
            AtomParams(
                np.asarray(entry["raw"], dtype=float).reshape(n, n),
                None if feats is None else np.asarray(feats, dtype=float).reshape(n, -1),
            )
        )
    embeddings = [EmbeddingParams(np.asarray(e["z"], dtype=float)) for e in data["embeddings"]]
    ids = [e["graph_id"] for e in data["embeddings"]]
    return GwfModel(atoms, embeddings, TrainConfig(**data["config"]), ids)


def save_model(model: GwfModel, path) -> None:
    # json writes floats with repr, the shortest string that round-trips exactly
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> GwfModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
