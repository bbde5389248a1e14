"""Datasets: TUDataset text files and synthetic graph generators."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

import numpy as np

from .graph import Graph
from .model import TrainConfig


class DataError(ValueError):
    """Malformed dataset content."""


@dataclass
class Dataset:
    graphs: list[Graph]
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (len(self.graphs),):
                raise DataError(f"{self.labels.size} labels for {len(self.graphs)} graphs")

    def __len__(self):
        return len(self.graphs)


def _path(directory, name, suffix):
    return os.path.join(directory, f"{name}_{suffix}.txt")


def _read_rows(path, cast=float):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([cast(tok) for tok in line.replace(",", " ").split()])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    return rows


def load_tudataset(directory, name: str) -> Dataset:
    """Read a dataset in the TUDataset text layout.

    Required files are ``{name}_A.txt`` (edge list "i, j" over 1-based global
    node ids) and ``{name}_graph_indicator.txt`` (graph id of each node).
    ``{name}_graph_labels.txt`` and ``{name}_node_attributes.txt`` are read
    when present. Edges are kept as directed entries of weight 1.
    """
    ind_path = _path(directory, name, "graph_indicator")
    edge_path = _path(directory, name, "A")
    for p in (ind_path, edge_path):
        if not os.path.isfile(p):
            raise FileNotFoundError(f"missing dataset file: {p}")

    indicator = np.array([r[0] for r in _read_rows(ind_path, int)], dtype=int)
    graph_ids, graph_of_node = np.unique(indicator, return_inverse=True)
    n_graphs = graph_ids.size
    node_lists = [np.flatnonzero(graph_of_node == g) for g in range(n_graphs)]
    local = np.empty(indicator.size, dtype=int)
    for nodes in node_lists:
        local[nodes] = np.arange(nodes.size)
    adj = [np.zeros((nodes.size, nodes.size)) for nodes in node_lists]

    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                i, j = (int(tok) - 1 for tok in line.replace(",", " ").split())
            except ValueError as exc:
                raise DataError(f"{edge_path}:{lineno}: expected 'i, j', got {line!r}") from exc
            if not (0 <= i < indicator.size and 0 <= j < indicator.size):
                raise DataError(f"{edge_path}:{lineno}: node id out of range")
            g = graph_of_node[i]
            if graph_of_node[j] != g:
                raise DataError(f"{edge_path}:{lineno}: edge joins nodes of different graphs")
            adj[g][local[i], local[j]] = 1.0

    features = [None] * n_graphs
    attr_path = _path(directory, name, "node_attributes")
    if os.path.isfile(attr_path):
        rows = _read_rows(attr_path)
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise DataError(f"{attr_path}: inconsistent attribute dimensions {sorted(widths)}")
        if len(rows) != indicator.size:
            raise DataError(f"{attr_path}: {len(rows)} attribute rows for {indicator.size} nodes")
        attrs = np.asarray(rows, dtype=float)
        features = [attrs[nodes] for nodes in node_lists]

    labels = None
    label_path = _path(directory, name, "graph_labels")
    if os.path.isfile(label_path):
        labels = np.array([r[0] for r in _read_rows(label_path, int)], dtype=int)
        if labels.size != n_graphs:
            raise DataError(f"{label_path}: {labels.size} labels for {n_graphs} graphs")

    graphs = [Graph(a, features=f) for a, f in zip(adj, features)]
    return Dataset(graphs, labels, name)


def write_tudataset(dataset: Dataset, directory, name: str | None = None) -> None:
    """Write ``dataset`` in the TUDataset layout (nonzero entries become edges)."""
    name = name or dataset.name
    os.makedirs(directory, exist_ok=True)
    offset = 0
    with open(_path(directory, name, "A"), "w") as fa, open(_path(directory, name, "graph_indicator"), "w") as fi:
        for gid, g in enumerate(dataset.graphs, start=1):
            for i, j in zip(*np.nonzero(g.adjacency)):
                fa.write(f"{offset + i + 1}, {offset + j + 1}\n")
            fi.write(f"{gid}\n" * g.n)
            offset += g.n
    if dataset.labels is not None:
        with open(_path(directory, name, "graph_labels"), "w") as fh:
            fh.writelines(f"{int(y)}\n" for y in dataset.labels)
    if dataset.graphs and dataset.graphs[0].has_features:
        with open(_path(directory, name, "node_attributes"), "w") as fh:
            for g in dataset.graphs:
                for row in g.features:
                    fh.write(", ".join(repr(float(v)) for v in row) + "\n")


def symmetrize(g: Graph) -> Graph:
    """Undirected version ``A + A^T``; node distribution and features unchanged."""
    return Graph(g.adjacency + g.adjacency.T, g.node_dist, g.features)


def generate_ba(n: int, m: int, directed: bool = False, seed=None) -> Graph:
    """Barabási-Albert preferential attachment graph with binary weights.

    Starts from a complete graph on ``m + 1`` nodes; every later node links to
    ``m`` distinct earlier nodes drawn with probability proportional to
    degree + 1 (in-degree + 1 when ``directed``). Directed edges point from
    the new node to the existing ones, and the core is oriented likewise.
    """
    if not 1 <= m < n:
        raise ValueError(f"Barabási-Albert graphs need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n))
    core = m + 1
    for i in range(core):
        adj[i, :i] = 1.0
    if not directed:
        adj[:core, :core] += adj[:core, :core].T
    for new in range(core, n):
        pref = (adj[:new, :new].sum(axis=0) if directed else adj[:new, :new].sum(axis=1)) + 1.0
        targets = rng.choice(new, size=m, replace=False, p=pref / pref.sum())
        adj[new, targets] = 1.0
        if not directed:
            adj[targets, new] = 1.0
    return Graph(adj)


def generate_sbm(n: int, blocks, p_in: float, p_out: float, seed=None) -> Graph:
    """Undirected binary stochastic block model graph without self-loops."""
    blocks = [int(b) for b in blocks]
    if sum(blocks) != n or any(b < 0 for b in blocks):
        raise ValueError(f"block sizes {blocks} do not sum to n={n}")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    member = np.repeat(np.arange(len(blocks)), blocks)
    prob = np.where(member[:, None] == member[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1).astype(float)
    return Graph(upper + upper.T)


def sbm_dataset(num_graphs: int, nodes: int = 20, p_in: float = 0.7, p_out: float = 0.05,
                spread: int = 2, seed=None) -> Dataset:
    """Two-class synthetic set: class 0 has two dense blocks, class 1 one dense block.

    Graph sizes are drawn uniformly from ``nodes ± spread``; classes alternate.
    """
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for i in range(num_graphs):
        n = int(rng.integers(nodes - spread, nodes + spread + 1))
        label = i % 2
        blocks = [n // 2, n - n // 2] if label == 0 else [n]
        graphs.append(generate_sbm(n, blocks, p_in, p_out, rng))
        labels.append(label)
    return Dataset(graphs, np.array(labels), "SBM")


def ba_dataset(num_graphs: int, nodes: int, m: int, directed: bool = False, seed=None) -> Dataset:
    rng = np.random.default_rng(seed)
    graphs = [generate_ba(nodes, m, directed, rng) for _ in range(num_graphs)]
    return Dataset(graphs, None, "BA")


@dataclass
class RunConfig(TrainConfig):
    data: str | None = None
    name: str | None = None
    out: str | None = None
    labels: str | None = None
    symmetrize: bool = False
    restarts: int = 10
    clusters: int = 2

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
