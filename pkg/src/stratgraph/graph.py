"""Graphs, embedding weights and linear graph classifiers.

Weight convention used throughout: ``w[j, i]`` (written w~_ji) is how much node
j's features contribute to node i's embedding,

    phi_i = w~_ii x_i + sum_{j != i} w~_ji x_j.

Internally :class:`EmbeddingWeights` keeps the transpose, ``mat[i, j] = w~_ji``,
so that all embeddings are a single sparse product ``mat @ X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument


@dataclass(frozen=True)
class DirectedGraph:
    """Node count plus a weighted directed edge list ``(src, dst, weight)``.

    An edge src -> dst means src can influence dst's embedding.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise InvalidArgument(f"node count must be nonnegative, got {self.n}")
        edges = tuple((int(s), int(d), float(w)) for s, d, w in self.edges)
        seen = set()
        for s, d, w in edges:
            if not (0 <= s < self.n and 0 <= d < self.n):
                raise InvalidArgument(f"edge ({s}, {d}) has a node id outside [0, {self.n})")
            if (s, d) in seen:
                raise InvalidArgument(f"duplicate edge ({s}, {d})")
            if not w >= 0:
                raise InvalidArgument(f"edge ({s}, {d}) has negative or NaN weight {w}")
            seen.add((s, d))
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, n, pairs, weight=1.0):
        return cls(n, tuple((s, d, weight) for s, d in pairs))

    def adjacency(self) -> sp.csr_matrix:
        """``A[src, dst] = weight``."""
        if not self.edges:
            return sp.csr_matrix((self.n, self.n))
        src, dst, w = zip(*self.edges)
        return sp.csr_matrix((w, (src, dst)), shape=(self.n, self.n))

    def in_neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.n)]
        for s, d, _ in self.edges:
            if s != d:
                nbrs[d].append(s)
        return nbrs

    def out_degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for s, d, _ in self.edges:
            if s != d:
                deg[s] += 1
        return deg

    def without_out_edges(self, nodes) -> "DirectedGraph":
        """Drop every edge leaving ``nodes``; self-loops are kept."""
        drop = set(int(v) for v in nodes)
        return DirectedGraph(self.n, tuple(e for e in self.edges if e[0] not in drop or e[0] == e[1]))


@dataclass(frozen=True, eq=False)
class EmbeddingWeights:
    """Sparse nonnegative influence matrix; ``mat[i, j]`` holds w~_ji."""

    mat: sp.csr_matrix
    diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.mat, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise InvalidArgument(f"weight matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.eliminate_zeros()
        if m.nnz and (m.data.min() < 0 or not np.all(np.isfinite(m.data))):
            raise InvalidArgument("embedding weights must be finite and nonnegative")
        m.sort_indices()
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "diag", m.diagonal())

    @classmethod
    def from_wtilde(cls, wt) -> "EmbeddingWeights":
        """Build from a matrix indexed ``[j, i] = w~_ji``."""
        return cls(sp.csr_matrix(wt).T)

    @classmethod
    def from_entries(cls, n, entries) -> "EmbeddingWeights":
        """Build from ``{(j, i): w~_ji}``."""
        if not entries:
            return cls(sp.csr_matrix((n, n)))
        keys = list(entries)
        rows = [i for _, i in keys]
        cols = [j for j, _ in keys]
        return cls(sp.csr_matrix((list(entries.values()), (rows, cols)), shape=(n, n)))

    @classmethod
    def identity(cls, n) -> "EmbeddingWeights":
        return cls(sp.identity(n, format="csr"))

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def weight(self, j, i) -> float:
        """w~_ji: influence of node j on node i."""
        return float(self.mat[i, j])

    def wtilde(self) -> np.ndarray:
        """Dense ``[j, i]``-indexed copy. Only for small graphs and tests."""
        return self.mat.T.toarray()

    def column_sums(self) -> np.ndarray:
        """Total incoming weight of each node, sum_j w~_ji."""
        return np.asarray(self.mat.sum(axis=1)).ravel()

    def restrict(self, nodes) -> "EmbeddingWeights":
        """Weights of the induced subgraph on ``nodes`` (in that order)."""
        idx = np.asarray(nodes, dtype=int)
        return EmbeddingWeights(self.mat[idx][:, idx])

    def as_graph(self) -> DirectedGraph:
        """Every nonzero w~_ji as an edge j -> i, self weights included."""
        coo = self.mat.tocoo()
        edges = sorted(zip(coo.col.tolist(), coo.row.tolist(), coo.data.tolist()))
        return DirectedGraph(self.n, tuple(edges))


@dataclass(frozen=True, eq=False)
class LinearGraphClassifier:
    theta: np.ndarray
    b: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if theta.ndim != 1:
            raise InvalidArgument("theta must be a vector")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LinearGraphClassifier):
            return NotImplemented
        return self.b == other.b and np.array_equal(self.theta, other.theta)

    __hash__ = None


def _check_positive_k(k):
    if int(k) != k or k < 1:
        raise InvalidArgument(f"K must be a positive integer, got {k}")


def build_sgc_weights(graph: DirectedGraph, K: int = 1, add_self_loops: bool = True) -> EmbeddingWeights:
    """SGC propagation weights ``D^-1/2 A^K D^-1/2``.

    ``A[j, i]`` is the weight of edge j -> i, optionally augmented with the
    identity. ``D`` holds each node's weighted in-degree in the (augmented) A;
    a zero degree is replaced by 1.
    """
    _check_positive_k(K)
    if graph.n == 0:
        raise InvalidArgument("cannot build weights for an empty graph")
    A = graph.adjacency()
    if add_self_loops:
        A = A + sp.identity(graph.n, format="csr")
    deg = np.asarray(A.sum(axis=0)).ravel()
    deg[deg == 0] = 1.0
    dinv = sp.diags(1.0 / np.sqrt(deg))
    AK = A
    for _ in range(int(K) - 1):
        AK = AK @ A
    return EmbeddingWeights.from_wtilde(dinv @ AK @ dinv)


def build_alpha_weights(graph: DirectedGraph, alpha: float, allow_isolated: bool = False) -> EmbeddingWeights:
    """Interpolation weights: w~_ii = 1 - alpha, w~_ji = alpha / indeg(i).

    Edge weights are ignored; only the in-neighbor sets matter. With
    ``allow_isolated`` a node without in-neighbors keeps w~_ii = 1 instead of
    raising (used when edges are pruned away).
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    nbrs = graph.in_neighbors()
    entries = {}
    for i, js in enumerate(nbrs):
        js = sorted(set(js))
        if not js:
            if alpha > 0 and not allow_isolated:
                raise InvalidArgument(f"node {i} has no in-neighbors but alpha = {alpha} > 0")
            entries[(i, i)] = 1.0
            continue
        entries[(i, i)] = 1.0 - alpha
        for j in js:
            entries[(j, i)] = alpha / len(js)
    return EmbeddingWeights.from_entries(graph.n, entries)


def embed(X, W: EmbeddingWeights) -> np.ndarray:
    """Row i of the result is phi_i = sum_j w~_ji x_j."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != W.n:
        raise InvalidArgument(f"features of shape {X.shape} do not match {W.n} nodes")
    return np.asarray(W.mat @ X)


def score_and_predict(clf: LinearGraphClassifier, Phi) -> tuple[np.ndarray, np.ndarray]:
    """Scores theta^T phi_i + b and labels in {-1, +1}; a zero score counts as +1."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[1] != clf.dim:
        raise InvalidArgument(f"embeddings of shape {Phi.shape} do not match classifier dim {clf.dim}")
    scores = Phi @ clf.theta + clf.b
    return scores, np.where(scores >= 0, 1, -1)


def direct_edges_by_degree(undirected_edges, n: int | None = None) -> DirectedGraph:
    """Orient each undirected edge from its higher-degree endpoint to the lower one.

    Equal degrees orient from the lower id to the higher id. Repeated edges
    (in either orientation) are merged.
    """
    pairs = set()
    for u, v in undirected_edges:
        u, v = int(u), int(v)
        if u == v:
            raise InvalidArgument(f"self-edge ({u}, {v}) in undirected edge list")
        pairs.add((min(u, v), max(u, v)))
    if n is None:
        n = 1 + max((v for p in pairs for v in p), default=-1)
    deg = np.zeros(n, dtype=int)
    for u, v in pairs:
        deg[u] += 1
        deg[v] += 1
    directed = []
    for u, v in sorted(pairs):
        # u < v here, so ties fall through to u -> v
        directed.append((v, u) if deg[v] > deg[u] else (u, v))
    return DirectedGraph.from_pairs(n, directed)
