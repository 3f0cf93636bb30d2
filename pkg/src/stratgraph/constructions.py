"""Hand-built instances with known dynamics: hitchhiking, cascades, performance gaps,
cliques and a cycle whose dynamics outlast its diameter.

Every instance carries explicit embedding weights (self weights included) and
the classifier and response config it is meant to be run with. The
``expected`` annotations are claims; the tests check them against the exact
simulator rather than trusting them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .datasets import DatasetBundle
from .errors import InvalidArgument
from .graph import DirectedGraph, EmbeddingWeights, LinearGraphClassifier
from .response import ResponseConfig

# Tiny tolerance: the constructions rely on moves that cost exactly the budget,
# which a 1e-6 tolerance would push just out of reach.
CONSTRUCTION_TOL = 1e-10
# max moving distance 3 under a budget of 2
CASCADE_BETA = 2.0 / 3.0


@dataclass
class ConstructionInstance:
    name: str
    W: EmbeddingWeights
    X: np.ndarray
    clf: LinearGraphClassifier
    config: ResponseConfig
    y: np.ndarray | None = None
    eval_nodes: np.ndarray | None = None
    node_names: list | None = None
    expected: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.W.n

    @property
    def graph(self) -> DirectedGraph:
        return self.W.as_graph()

    def to_bundle(self) -> DatasetBundle:
        labels = self.y if self.y is not None else -np.ones(self.n, dtype=int)
        test = np.zeros(self.n, dtype=bool)
        test[self.eval_nodes if self.eval_nodes is not None else np.arange(self.n)] = True
        meta = {
            "name": self.name,
            "embedding": {"scheme": "explicit"},
            "classifier": {"theta": self.clf.theta.tolist(), "b": self.clf.b},
            "response": {"beta": self.config.beta, "tol": self.config.tol},
            "node_names": self.node_names,
            "provenance": {"generator": "construction", "name": self.name},
        }
        return DatasetBundle(self.graph, self.X, labels, np.zeros(self.n, dtype=bool), test, meta)


def _weights(n, entries):
    return EmbeddingWeights.from_entries(n, entries)


def _unit_clf(b=0.0, dim=1):
    return LinearGraphClassifier(np.ones(dim), b)


def hitchhike_example() -> ConstructionInstance:
    """k -> j -> i; j crosses in round 1 and drags i over without i moving."""
    k, i, j = 0, 1, 2
    W = _weights(3, {
        (k, k): 1.0,
        (k, j): 1 / 3, (j, j): 2 / 3,
        (j, i): 0.6, (i, i): 0.4,
    })
    X = np.array([[-3.0], [-2.1], [-0.5]])
    return ConstructionInstance(
        name="hitchhike",
        W=W, X=X, clf=_unit_clf(),
        config=ResponseConfig(beta=1.0, tol=CONSTRUCTION_TOL),
        node_names=["k", "i", "j"],
        expected={
            "initial_embedding": [-3.0, -1.14, -4 / 3],
            "moved_round": {j: 1},
            "moved_to": {j: 1.5},
            "final_predictions": [-1, 1, 1],
            "hitchhikers": {i},
        },
    )


def _cascade_features(n):
    x = np.empty(n + 2)
    x[0] = -1.0
    for i in range(1, n + 2):
        x[i] = 2.0 if i % 3 == 1 else -4.0
    return x


def _cascade_entries(n):
    entries = {(0, 0): 0.5, (1, 0): 0.5}
    for i in range(1, n + 1):
        for j in (i - 1, i, i + 1):
            entries[(j, i)] = 1 / 3
    # the finish node has no in-edges; its embedding is its own features only
    entries[(n + 1, n + 1)] = 0.5
    return entries


def cascade_graph(n: int) -> ConstructionInstance:
    """Chain 0..n+1 where node i moves exactly in round i.

    Nodes 1..n carry label -1 and are the evaluation set; 0 and n+1 are the
    start and finish nodes.
    """
    if n < 1:
        raise InvalidArgument(f"cascade needs n >= 1, got {n}")
    x = _cascade_features(n)
    return ConstructionInstance(
        name=f"cascade-{n}",
        W=_weights(n + 2, _cascade_entries(n)),
        X=x[:, None],
        clf=_unit_clf(),
        config=ResponseConfig(beta=CASCADE_BETA, tol=CONSTRUCTION_TOL),
        y=-np.ones(n + 2, dtype=int),
        eval_nodes=np.arange(1, n + 1),
        expected={
            "moved_round": {i: i for i in range(1, n + 1)},
            "moved_to": {i: (5.0 if i % 3 == 1 else -1.0) for i in range(1, n + 1)},
            "rounds": n,
        },
    )


def cascade_with_late_movers(n: int, k: int) -> ConstructionInstance:
    """Cascade of length k plus n - k leaves that all move in round k.

    The leaves hang off node p = k - 1 (the start node 0 when k = 1) with
    w~_jj = w~_pj = 1/2. Node p settles at x_p* by the end of round k - 1,
    and x_j = -x_p* - 3 leaves each leaf 1.5 short of the boundary until then,
    so the max move of 3 (weighted 1/2) closes the gap in round k exactly.
    """
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got n={n}, k={k}")
    base = _cascade_entries(k)
    x = list(_cascade_features(k))
    p = k - 1
    settled = x[p] if p == 0 else x[p] + 3.0
    leaves = list(range(k + 2, k + 2 + n - k))
    for j in leaves:
        base[(p, j)] = 0.5
        base[(j, j)] = 0.5
        x.append(-settled - 3.0)
    size = k + 2 + (n - k)
    expected = {i: i for i in range(1, k + 1)}
    expected.update({j: k for j in leaves})
    return ConstructionInstance(
        name=f"cascade-late-{n}-{k}",
        W=_weights(size, base),
        X=np.array(x)[:, None],
        clf=_unit_clf(),
        config=ResponseConfig(beta=CASCADE_BETA, tol=CONSTRUCTION_TOL),
        y=-np.ones(size, dtype=int),
        expected={"moved_round": expected, "late_movers": leaves, "rounds": k},
    )


def _gap_instance(name, x1, threshold):
    W = _weights(3, {
        (0, 0): 0.5, (1, 0): 0.5,
        (0, 1): 1 / 3, (1, 1): 1 / 3, (2, 1): 1 / 3,
        (1, 2): 0.5, (2, 2): 0.5,
    })
    return ConstructionInstance(
        name=name,
        W=W,
        X=np.array([[x1], [-1.0], [-1.0]]),
        clf=_unit_clf(b=-threshold),
        config=ResponseConfig(beta=1.0, tol=CONSTRUCTION_TOL),
        y=np.array([1, -1, -1]),
    )


def gap_examples() -> tuple[ConstructionInstance, ConstructionInstance]:
    """Three-node chains differing only in x_1 (1 vs 1.2).

    With x_1 = 1 no threshold reaches full accuracy once users respond; with
    x_1 = 1.2 the threshold 1.1 does. Which is which was settled by scanning
    thresholds under the exact dynamics.
    """
    large = _gap_instance("gap-large", 1.0, 0.0)
    large.expected = {"nonstrategic_optimum": 1.0, "strategic_optimum": 2 / 3}
    no_gap = _gap_instance("gap-none", 1.2, 1.1)
    no_gap.expected = {"strategic_optimum": 1.0, "x1_after": 3.2}
    return large, no_gap


def clique(n: int, features, clf: LinearGraphClassifier, beta: float = 1.0, tol: float = 1e-6) -> ConstructionInstance:
    """n fully connected nodes, every w~ entry (self included) equal to 1/n."""
    if n < 2:
        raise InvalidArgument(f"clique needs n >= 2, got {n}")
    X = np.asarray(features, dtype=float).reshape(n, -1)
    W = EmbeddingWeights(sp.csr_matrix(np.full((n, n), 1.0 / n)))
    return ConstructionInstance(
        name=f"clique-{n}", W=W, X=X, clf=clf, config=ResponseConfig(beta=beta, tol=tol)
    )


def circular_diameter_graph(n: int) -> ConstructionInstance:
    """The cascade closed into a cycle 0..n+2 with x_{n+2} = -8 and all weights 1/3.

    The dynamics still take n rounds while the diameter is only floor((n+3)/2).
    """
    if n < 3:
        raise InvalidArgument(f"need n >= 3, got {n}")
    size = n + 3
    x = np.append(_cascade_features(n), -8.0)
    entries = {}
    for i in range(size):
        for j in (i - 1, i, i + 1):
            entries[(j % size, i)] = 1 / 3
    return ConstructionInstance(
        name=f"circular-{n}",
        W=_weights(size, entries),
        X=x[:, None],
        clf=_unit_clf(),
        config=ResponseConfig(beta=CASCADE_BETA, tol=CONSTRUCTION_TOL),
        y=-np.ones(size, dtype=int),
        expected={
            "rounds": n,
            "diameter": (n + 3) // 2,
            "never_move": [0, n + 1, n + 2],
            "moved_round": {i: i for i in range(1, n + 1)},
        },
    )


def graph_diameter(W: EmbeddingWeights) -> int:
    """Diameter of the undirected support of W (self weights ignored)."""
    A = (W.mat + W.mat.T).tocsr()
    A.setdiag(0)
    A.eliminate_zeros()
    dist = shortest_path(A, unweighted=True, directed=False)
    return int(dist[np.isfinite(dist)].max())


CONSTRUCTIONS = {
    "hitchhike": lambda **kw: hitchhike_example(),
    "cascade": lambda n=3, **kw: cascade_graph(n),
    "cascade-late": lambda n=6, k=2, **kw: cascade_with_late_movers(n, k),
    "gap-large": lambda **kw: gap_examples()[0],
    "gap-none": lambda **kw: gap_examples()[1],
    "circular": lambda n=5, **kw: circular_diameter_graph(n),
}
