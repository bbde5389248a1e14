import itertools

import numpy as np
import pytest

from gwf.graph import Graph


def quad_gw(cs, ct, plan):
    """Brute-force sum_{i,j,i',j'} (cs_ij - ct_i'j')^2 T_ii' T_jj'."""
    cs, ct, plan = (np.asarray(x, dtype=float) for x in (cs, ct, plan))
    total = 0.0
    ns, nt = plan.shape
    for i, j in itertools.product(range(ns), repeat=2):
        for a, b in itertools.product(range(nt), repeat=2):
            total += (cs[i, j] - ct[a, b]) ** 2 * plan[i, a] * plan[j, b]
    return total


def random_graph(rng, n, p=0.3, directed=False, features=None):
    adj = (rng.random((n, n)) < p).astype(float)
    np.fill_diagonal(adj, 0.0)
    if not directed:
        adj = np.triu(adj, 1)
        adj = adj + adj.T
    feats = None if features is None else rng.normal(size=(n, features))
    return Graph(adj, features=feats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
