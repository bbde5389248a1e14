"""Fixed-size GW barycenters by alternating coupling solves and closed-form updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Coupling, Graph, ShapeError, feature_distance
from .solvers import SolverConfig, gwd


@dataclass
class BarycenterState:
    adjacency: np.ndarray
    node_dist: np.ndarray
    features: np.ndarray | None = None
    atom_couplings: list = field(default_factory=list)

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        self.node_dist = np.asarray(self.node_dist, dtype=float)
        if self.adjacency.ndim != 2 or self.adjacency.shape[0] != self.adjacency.shape[1]:
            raise ShapeError("barycenter adjacency must be square")
        if self.node_dist.shape != (self.adjacency.shape[0],):
            raise ShapeError("barycenter node_dist does not match its size")

    @classmethod
    def from_graph(cls, graph: Graph) -> "BarycenterState":
        feats = None if graph.features is None else graph.features.copy()
        return cls(graph.adjacency.copy(), graph.node_dist.copy(), feats)

    def as_graph(self) -> Graph:
        # round-off can leave the node_dist a hair off the simplex
        mu = self.node_dist / self.node_dist.sum()
        return Graph(np.maximum(self.adjacency, 0.0), mu, self.features)

    @property
    def plans(self) -> list[np.ndarray]:
        return [c.plan for c in self.atom_couplings]


def combine_structure(plans, atoms_adj, weights, node_dist) -> np.ndarray:
    r"""Closed-form structure update :math:`(\sum_k \lambda_k T_k U_k T_k^\top) / (\mu_b \mu_b^\top)`."""
    acc = sum(w * (t @ u @ t.T) for w, t, u in zip(weights, plans, atoms_adj))
    return acc / np.outer(node_dist, node_dist)


def combine_features(plans, atoms_feat, weights, node_dist) -> np.ndarray:
    r"""Closed-form feature update :math:`(\sum_k \lambda_k T_k H_k) / \mu_b`."""
    acc = sum(w * (t @ h) for w, t, h in zip(weights, plans, atoms_feat))
    return acc / node_dist[:, None]


def gwb(
    atoms: list[Graph],
    weights,
    init: BarycenterState,
    outer_iters: int,
    solver: SolverConfig | None = None,
    warm_start: bool = False,
) -> BarycenterState:
    """L-step approximate GW barycenter of weighted atoms.

    Each round solves one coupling per atom against the current barycenter
    and then replaces the barycenter by its closed-form minimizer for those
    couplings. When the atoms carry features, the barycenter features are
    updated with the same couplings and the coupling solves use the fused cost.

    Parameters
    ----------
    atoms : list of Graph
    weights : array-like, shape (K,)
        Point on the simplex.
    init : BarycenterState
        Initial barycenter; its size and node distribution are kept.
    outer_iters : int
        Number of alternating rounds L.
    solver : SolverConfig, optional
    warm_start : bool
        Start each coupling solve from the previous round's coupling instead
        of the product coupling.

    Returns
    -------
    BarycenterState
    """
    solver = solver or SolverConfig()
    weights = np.asarray(weights, dtype=float).ravel()
    if outer_iters < 0:
        raise ValueError("outer_iters must be nonnegative")
    if len(atoms) == 0 or len(atoms) != weights.size:
        raise ShapeError(f"got {len(atoms)} atoms and {weights.size} weights")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie on the simplex")
    fused = atoms[0].has_features
    if any(a.has_features != fused for a in atoms):
        raise ShapeError("either all atoms carry features or none do")
    if fused:
        dims = {a.features.shape[1] for a in atoms}
        if len(dims) != 1:
            raise ShapeError(f"atom feature dimensions differ: {sorted(dims)}")
        if init.features is None:
            raise ShapeError("fused barycenter needs initial features")
        if init.features.shape[1] not in dims:
            raise ShapeError("initial barycenter features have the wrong dimension")

    mu = init.node_dist
    state = BarycenterState(init.adjacency.copy(), mu.copy(), None if init.features is None else init.features.copy(),
                            list(init.atom_couplings))
    for _ in range(outer_iters):
        current = state.as_graph()
        couplings = []
        for k, atom in enumerate(atoms):
            cfg = solver
            if warm_start and len(state.atom_couplings) == len(atoms):
                cfg = solver.replace(init_coupling=state.atom_couplings[k].plan)
            fdist = feature_distance(current.features, atom.features) if fused else None
            couplings.append(gwd(current, atom, cfg, fdist).coupling)
        plans = [c.plan for c in couplings]
        adjacency = combine_structure(plans, [a.adjacency for a in atoms], weights, mu)
        features = combine_features(plans, [a.features for a in atoms], weights, mu) if fused else state.features
        state = BarycenterState(np.maximum(adjacency, 0.0), mu, features, couplings)
    return state
