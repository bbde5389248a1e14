"""Graph and coupling containers, parameter maps and the GW cost."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

class ShapeError(ValueError):
    """Raised when array shapes are inconsistent."""


def uniform(n: int) -> np.ndarray:
    """Uniform probability vector of length ``n``."""
    return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class Graph:
    """A weighted graph with a node distribution and optional node features.

    Parameters
    ----------
    adjacency : array-like, shape (n, n)
        Nonnegative edge weights.
    node_dist : array-like, shape (n,), optional
        Probability vector over nodes. Uniform when omitted.
    features : array-like, shape (n, d), optional
        Node attributes.
    """

    adjacency: np.ndarray
    node_dist: np.ndarray = None
    features: np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ShapeError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] == 0:
            raise ShapeError("graph must have at least one node")
        if np.any(adj < 0):
            raise ValueError("adjacency entries must be nonnegative")
        n = adj.shape[0]
        mu = uniform(n) if self.node_dist is None else np.asarray(self.node_dist, dtype=float)
        if mu.shape != (n,):
            raise ShapeError(f"node_dist must have shape ({n},), got {mu.shape}")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            raise ValueError("node_dist must be a probability vector")
        feats = self.features
        if feats is not None:
            feats = np.asarray(feats, dtype=float)
            if feats.ndim == 1:
                feats = feats[:, None]
            if feats.ndim != 2 or feats.shape[0] != n:
                raise ShapeError(f"features must have {n} rows, got shape {feats.shape}")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "node_dist", mu)
        object.__setattr__(self, "features", feats)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def has_features(self) -> bool:
        return self.features is not None


@dataclass(frozen=True)
class Coupling:
    """Transport plan between two node distributions."""

    plan: np.ndarray
    source_dist: np.ndarray
    target_dist: np.ndarray

    def __post_init__(self):
        plan = np.asarray(self.plan, dtype=float)
        p = np.asarray(self.source_dist, dtype=float)
        q = np.asarray(self.target_dist, dtype=float)
        if plan.shape != (p.size, q.size):
            raise ShapeError(f"plan shape {plan.shape} does not match marginals ({p.size}, {q.size})")
        if np.any(plan < 0):
            raise ValueError("coupling entries must be nonnegative")
        object.__setattr__(self, "plan", plan)
        object.__setattr__(self, "source_dist", p)
        object.__setattr__(self, "target_dist", q)

    @classmethod
    def product(cls, p, q) -> "Coupling":
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return cls(np.outer(p, q), p, q)

    @property
    def row_residual(self) -> float:
        return float(np.abs(self.plan.sum(axis=1) - self.source_dist).sum())

    @property
    def col_residual(self) -> float:
        return float(np.abs(self.plan.sum(axis=0) - self.target_dist).sum())


@dataclass
class AtomParams:
    """Unconstrained parameters of one atom: edge weights ``raw`` and optional features."""

    raw: np.ndarray
    raw_features: np.ndarray | None = None

    def __post_init__(self):
        self.raw = np.array(self.raw, dtype=float)
        if self.raw.ndim != 2 or self.raw.shape[0] != self.raw.shape[1]:
            raise ShapeError(f"atom parameters must be square, got {self.raw.shape}")
        if self.raw_features is not None:
            self.raw_features = np.array(self.raw_features, dtype=float)
            if self.raw_features.ndim != 2 or self.raw_features.shape[0] != self.raw.shape[0]:
                raise ShapeError("atom feature rows must match atom size")

    @property
    def n(self) -> int:
        return self.raw.shape[0]


@dataclass
class EmbeddingParams:
    """Unconstrained per-graph embedding; its softmax gives the atom weights."""

    raw: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.raw = np.array(self.raw, dtype=float).ravel()


def map_atom(raw) -> np.ndarray:
    """Map unconstrained atom parameters to nonnegative edge weights (ReLU)."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {raw.shape}")
    return np.maximum(raw, 0.0)


def map_weights(raw) -> np.ndarray:
    """Softmax onto the probability simplex."""
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0:
        raise ShapeError("cannot map an empty vector onto the simplex")
    e = np.exp(raw - raw.max())
    return e / e.sum()


def feature_distance(feat_s, feat_t) -> np.ndarray:
    r"""Squared Euclidean distances between two sets of node features.

    Returns the matrix :math:`D_{ij} = \|f^s_i - f^t_j\|^2` of shape (ns, nt).
    """
    fs = np.atleast_2d(np.asarray(feat_s, dtype=float))
    ft = np.atleast_2d(np.asarray(feat_t, dtype=float))
    if fs.shape[1] != ft.shape[1]:
        raise ShapeError(f"feature dimensions differ: {fs.shape[1]} vs {ft.shape[1]}")
    d = (fs**2).sum(axis=1)[:, None] + (ft**2).sum(axis=1)[None, :] - 2.0 * fs @ ft.T
    d[d < 0] = 0.0
    return d


def assemble_cost_const(source: Graph, target: Graph, feature_dist=None, feature_weight: float = 1.0):
    r"""Constant part of the linearized GW cost.

    .. math::
        C_{st} = (C_s \odot C_s)\mu_s 1^\top + 1 \mu_t^\top (C_t \odot C_t)^\top

    plus ``feature_weight * feature_dist`` when a feature cost is given.
    """
    cs, ct = source.adjacency, target.adjacency
    const = ((cs * cs) @ source.node_dist)[:, None] + ((ct * ct) @ target.node_dist)[None, :]
    if feature_dist is not None:
        feature_dist = np.asarray(feature_dist, dtype=float)
        if feature_dist.shape != const.shape:
            raise ShapeError(f"feature_dist has shape {feature_dist.shape}, expected {const.shape}")
        const = const + feature_weight * feature_dist
    return const


def gw_cost(source: Graph, target: Graph, cost_const, coupling) -> float:
    r"""Squared (fused) GW objective :math:`\langle C_{st} - 2 C_s T C_t^\top, T\rangle`.

    For a plan with the prescribed marginals this equals the quadruple sum
    :math:`\sum (c^s_{ij} - c^t_{i'j'})^2 T_{ii'} T_{jj'}` (plus the feature
    term carried by ``cost_const``). Small negative round-off is clamped to 0.
    """
    plan = coupling.plan if isinstance(coupling, Coupling) else np.asarray(coupling, dtype=float)
    cost_const = np.asarray(cost_const, dtype=float)
    shape = (source.n, target.n)
    if plan.shape != shape or cost_const.shape != shape:
        raise ShapeError(f"expected plan and cost of shape {shape}, got {plan.shape} and {cost_const.shape}")
    lin = cost_const - 2.0 * source.adjacency @ plan @ target.adjacency.T
    return max(float(np.sum(lin * plan)), 0.0)
