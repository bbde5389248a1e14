"""Clustering of embeddings and of graphs, plus the two-cluster accuracy score."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .barycenter import BarycenterState, gwb
from .graph import Graph, feature_distance, uniform
from .solvers import SolverConfig, gwd


@dataclass
class ClusterResult:
    labels: np.ndarray
    centers: list
    inertia: float
    history: list[float] = field(default_factory=list)
    n_iter: int = 0


def _kmeanspp(points, k, rng):
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(points[idx])
    return np.array(centers, dtype=float)


def _lloyd(points, centers, max_iters):
    history = []
    labels = None
    for it in range(max_iters):
        d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(points)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(centers.shape[0]):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(points)), labels].sum())
    history.append(inertia)
    return labels, centers, inertia, history, it + 1


def kmeans(points, k: int, seeds: int = 10, max_iters: int = 300, rng_seed: int = 0) -> ClusterResult:
    """Lloyd's k-means with k-means++ seeding, best of ``seeds`` restarts.

    ``history`` holds the inertia after each assignment step of the winning run.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= number of points, got k={k}, n={n}")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    rng = np.random.default_rng(rng_seed)
    best = None
    for _ in range(max(1, seeds)):
        labels, centers, inertia, history, n_iter = _lloyd(points, _kmeanspp(points, k, rng), max_iters)
        if best is None or inertia < best.inertia:
            best = ClusterResult(labels, list(centers), inertia, history, n_iter)
    return best


def clustering_accuracy(truth, predicted) -> float:
    """Two-cluster accuracy, invariant to swapping the predicted labels.

    ``1 - min(|y - y_hat|_1, |y - 1 + y_hat|_1) / N``
    """
    y = np.asarray(truth)
    yh = np.asarray(predicted)
    if y.shape != yh.shape or y.ndim != 1:
        raise ValueError("truth and predicted must be vectors of equal length")
    if not (np.isin(y, (0, 1)).all() and np.isin(yh, (0, 1)).all()):
        raise ValueError("clustering accuracy is defined for binary labels only")
    y = y.astype(float)
    yh = yh.astype(float)
    miss = min(np.abs(y - yh).sum(), np.abs(y - 1.0 + yh).sum())
    return float(1.0 - miss / y.size)


def _distances(graphs, centers, solver):
    out = np.empty((len(graphs), len(centers)))
    for i, g in enumerate(graphs):
        for c, center in enumerate(centers):
            fdist = feature_distance(g.features, center.features) if g.has_features else None
            out[i, c] = gwd(g, center, solver, fdist).sq_discrepancy
    return out


def gwb_km(
    graphs: list[Graph],
    k: int,
    solver: SolverConfig | None = None,
    max_iters: int = 10,
    rng_seed: int = 0,
    outer_iters: int = 2,
) -> ClusterResult:
    """k-means over graphs: GW assignments and GW-barycenter centers.

    Centers start as ``k`` distinct observed graphs chosen at random and keep
    their size. A cluster that ends up empty is re-seeded with the graph that
    lies farthest from its own center. ``history`` records the total
    within-cluster squared discrepancy after every assignment step.
    """
    if len(graphs) < k or k < 1:
        raise ValueError(f"need 1 <= k <= number of graphs, got k={k}, n={len(graphs)}")
    solver = solver or SolverConfig()
    rng = np.random.default_rng(rng_seed)
    centers = [graphs[j] for j in rng.choice(len(graphs), size=k, replace=False)]
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        dist = _distances(graphs, centers, solver)
        new_labels = dist.argmin(axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                own = dist[np.arange(len(graphs)), new_labels]
                far = int(np.argmax(own))
                new_labels[far] = c
                centers[c] = graphs[far]
        history.append(float(dist[np.arange(len(graphs)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = [graphs[i] for i in np.flatnonzero(labels == c)]
            init = BarycenterState(centers[c].adjacency, uniform(centers[c].n), centers[c].features)
            state = gwb(members, uniform(len(members)), init, outer_iters, solver)
            centers[c] = state.as_graph()
    return ClusterResult(np.asarray(labels), centers, history[-1], history, n_iter)


def write_embeddings_csv(path, model, labels=None) -> None:
    """Write ``graph_id[,cluster],z_1..z_K,lambda_1..lambda_K`` with 12 significant digits."""
    k = model.num_atoms
    header = ["graph_id"] + (["cluster"] if labels is not None else [])
    header += [f"z_{j + 1}" for j in range(k)] + [f"lambda_{j + 1}" for j in range(k)]
    z = model.embedding_matrix()
    lam = model.weight_matrix()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row, gid in enumerate(model.graph_ids):
            cells = [gid] + ([int(labels[row])] if labels is not None else [])
            cells += [f"{v:.12g}" for v in z[row]] + [f"{v:.12g}" for v in lam[row]]
            w.writerow(cells)
