"""Dataset bundles: synthetic generation, on-disk format, binarization, inductive splits.

Bundle directory layout::

    meta.json      name, n, feature_dim, class_map, embedding, format_version, ...
    edges.csv      header ``src,dst,weight``; one directed edge per line
    features.csv   n rows of comma-separated reals   (or features.f32:
                   row-major little-endian float32, n * feature_dim values)
    labels.csv     one integer per line (+-1, or original classes with a class_map)
    masks.csv      header ``node_id,split``; split in {train, val, test}

Nodes not listed in masks.csv are unlabeled context nodes. ``val`` is merged
into ``train`` on load. Converting the original citation datasets into this
layout is a one-time external step.
"""

from __future__ import annotations

import copy
import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BundleFormatError, InvalidArgument
from .graph import DirectedGraph, EmbeddingWeights, build_alpha_weights, build_sgc_weights

BUNDLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BinarizationMap:
    negative_classes: frozenset
    positive_classes: frozenset

    def __post_init__(self):
        neg = frozenset(int(c) for c in self.negative_classes)
        pos = frozenset(int(c) for c in self.positive_classes)
        if neg & pos:
            raise InvalidArgument(f"classes {sorted(neg & pos)} are both negative and positive")
        object.__setattr__(self, "negative_classes", neg)
        object.__setattr__(self, "positive_classes", pos)

    def to_dict(self):
        return {"negative": sorted(self.negative_classes), "positive": sorted(self.positive_classes)}

    @classmethod
    def from_dict(cls, d):
        return cls(frozenset(d["negative"]), frozenset(d["positive"]))


CORA_MAP = BinarizationMap(frozenset({0, 2, 3}), frozenset({1, 4, 5, 6}))
CITESEER_MAP = BinarizationMap(frozenset({0, 2, 3}), frozenset({1, 4, 5}))
PUBMED_MAP = BinarizationMap(frozenset({1, 2}), frozenset({0}))
SHIPPED_MAPS = {"cora": CORA_MAP, "citeseer": CITESEER_MAP, "pubmed": PUBMED_MAP}


def binarize(labels, mapping: BinarizationMap) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros(labels.shape, dtype=int)
    for k, c in enumerate(labels.tolist()):
        if c in mapping.negative_classes:
            out[k] = -1
        elif c in mapping.positive_classes:
            out[k] = 1
        else:
            raise InvalidArgument(f"class {c} is not covered by the binarization map")
    return out


@dataclass
class GraphView:
    """A node subset ready for training or evaluation.

    Every node in the view takes part in the dynamics; only ``eval_mask``
    nodes count towards losses and accuracies.
    """

    X: np.ndarray
    W: EmbeddingWeights
    y: np.ndarray
    eval_mask: np.ndarray
    nodes: np.ndarray


@dataclass(eq=False)
class DatasetBundle:
    graph: DirectedGraph
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    meta: dict = field(default_factory=dict)
    raw_labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self.labels = np.asarray(self.labels, dtype=int)
        n = self.graph.n
        self.train_mask = _as_mask(self.train_mask, n)
        self.test_mask = _as_mask(self.test_mask, n)
        if self.features.shape[0] != n:
            raise InvalidArgument(f"{self.features.shape[0]} feature rows for {n} nodes")
        if self.labels.shape != (n,):
            raise InvalidArgument(f"{self.labels.shape[0]} labels for {n} nodes")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise InvalidArgument("labels must be -1 or +1")
        if (self.train_mask & self.test_mask).any():
            raise InvalidArgument("train and test masks overlap")
        if not np.all(np.isfinite(self.features)):
            raise InvalidArgument("features must be finite")

    @property
    def n(self):
        return self.graph.n

    @property
    def dim(self):
        return self.features.shape[1]

    def weights(self) -> EmbeddingWeights:
        """Embedding weights according to ``meta['embedding']`` (default: SGC, K=1)."""
        return weights_for(self.graph, self.meta.get("embedding"))

    def view(self, split: str, weights: EmbeddingWeights | None = None) -> GraphView:
        """The train view drops test nodes; the test view drops train nodes."""
        if split == "train":
            keep, ev = ~self.test_mask, self.train_mask
        elif split == "test":
            keep, ev = ~self.train_mask, self.test_mask
        elif split == "all":
            keep, ev = np.ones(self.n, dtype=bool), self.train_mask | self.test_mask
        else:
            raise InvalidArgument(f"unknown split {split!r}")
        W = self.weights() if weights is None else weights
        nodes = np.flatnonzero(keep)
        return GraphView(self.features[nodes], W.restrict(nodes), self.labels[nodes], ev[nodes], nodes)

    def with_graph(self, graph: DirectedGraph) -> "DatasetBundle":
        out = copy.copy(self)
        out.graph = graph
        out.meta = copy.deepcopy(self.meta)
        return out

    def equals(self, other: "DatasetBundle") -> bool:
        return (
            self.graph == other.graph
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.train_mask, other.train_mask)
            and np.array_equal(self.test_mask, other.test_mask)
            and self.meta == other.meta
        )


def _as_mask(m, n):
    m = np.asarray(m)
    if m.dtype == bool:
        if m.shape != (n,):
            raise InvalidArgument(f"mask of shape {m.shape} for {n} nodes")
        return m.copy()
    mask = np.zeros(n, dtype=bool)
    mask[m.astype(int)] = True
    return mask


def weights_for(graph: DirectedGraph, embedding: dict | None, allow_isolated: bool = False) -> EmbeddingWeights:
    embedding = embedding or {"scheme": "sgc", "K": 1}
    scheme = embedding.get("scheme", "sgc")
    if scheme == "sgc":
        return build_sgc_weights(graph, int(embedding.get("K", 1)), bool(embedding.get("self_loops", True)))
    if scheme == "alpha":
        return build_alpha_weights(graph, float(embedding["alpha"]), allow_isolated=allow_isolated)
    if scheme == "explicit":
        # edge weights are the w~ entries themselves
        return EmbeddingWeights.from_entries(graph.n, {(s, d): w for s, d, w in graph.edges})
    raise InvalidArgument(f"unknown embedding scheme {scheme!r}")


def _sample_component(n, rng):
    half = n // 2
    y = rng.permutation(np.repeat([1, -1], half))
    x = rng.normal(loc=y.astype(float), scale=1.0)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    edges = []
    for i in range(n):
        same, other = (pos, neg) if y[i] == 1 else (neg, pos)
        same = same[same != i]
        nbrs = np.concatenate([rng.choice(same, 5, replace=False), rng.choice(other, 3, replace=False)])
        edges.extend((int(j), i) for j in np.sort(nbrs))
    return x, y, edges


def generate_synthetic(n: int, alpha: float, seed: int) -> DatasetBundle:
    """Two independent n-node components (train, then test) with 1-d Gaussian features.

    Node i gets 5 in-neighbors from its own class and 3 from the other, and
    x_i ~ N(y_i, 1). Nodes [0, n) are train, [n, 2n) test.
    """
    if n < 16 or n % 2:
        raise InvalidArgument(f"n must be an even number >= 16, got {n}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    rng = np.random.default_rng(seed)
    xs, ys, edges = [], [], []
    for offset in (0, n):
        x, y, e = _sample_component(n, rng)
        xs.append(x)
        ys.append(y)
        edges.extend((s + offset, d + offset) for s, d in e)
    graph = DirectedGraph.from_pairs(2 * n, sorted(edges))
    train = np.zeros(2 * n, dtype=bool)
    train[:n] = True
    meta = {
        "name": f"synthetic-n{n}-a{alpha:g}-s{seed}",
        "embedding": {"scheme": "alpha", "alpha": float(alpha)},
        "provenance": {"generator": "synthetic", "n": n, "alpha": float(alpha), "seed": seed},
    }
    return DatasetBundle(graph, np.concatenate(xs)[:, None], np.concatenate(ys), train, ~train, meta)


def make_inductive_split(bundle: DatasetBundle, K: int = 1) -> DatasetBundle:
    """Drop test nodes that lie within K directed hops downstream of any train node."""
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K}")
    out_nbrs = [[] for _ in range(bundle.n)]
    for s, d, _ in bundle.graph.edges:
        if s != d:
            out_nbrs[s].append(d)
    depth = np.full(bundle.n, -1)
    queue = deque()
    for v in np.flatnonzero(bundle.train_mask):
        depth[v] = 0
        queue.append(v)
    while queue:
        v = queue.popleft()
        if depth[v] == K:
            continue
        for w in out_nbrs[v]:
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                queue.append(w)
    influenced = (depth >= 1) & bundle.test_mask
    out = copy.copy(bundle)
    out.meta = copy.deepcopy(bundle.meta)
    out.test_mask = bundle.test_mask & ~influenced
    before = int(bundle.test_mask.sum())
    out.meta["inductive"] = {
        "K": int(K),
        "removed": int(influenced.sum()),
        "removed_fraction": float(influenced.sum() / before) if before else 0.0,
    }
    return out


def save_bundle(bundle: DatasetBundle, path, binary_features: bool = False):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = dict(bundle.meta)
    meta.update({
        "format_version": BUNDLE_FORMAT_VERSION,
        "n": bundle.n,
        "feature_dim": bundle.dim,
        "features_file": "features.f32" if binary_features else "features.csv",
    })
    meta.setdefault("name", "bundle")
    meta.setdefault("class_map", None)
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for s, d, wt in bundle.graph.edges:
            w.writerow([s, d, repr(wt)])
    if binary_features:
        bundle.features.astype("<f4").tofile(path / "features.f32")
    else:
        with open(path / "features.csv", "w") as fh:
            for row in bundle.features:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    labels = bundle.raw_labels if bundle.raw_labels is not None else bundle.labels
    with open(path / "labels.csv", "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)
    with open(path / "masks.csv", "w") as fh:
        fh.write("node_id,split\n")
        for i in range(bundle.n):
            if bundle.train_mask[i]:
                fh.write(f"{i},train\n")
            elif bundle.test_mask[i]:
                fh.write(f"{i},test\n")


def _read(path, name):
    p = path / name
    if not p.exists():
        raise FileNotFoundError(f"bundle is missing {name}: {p}")
    return p


def load_bundle(path) -> DatasetBundle:
    path = Path(path)
    with open(_read(path, "meta.json")) as fh:
        meta = json.load(fh)
    try:
        n = int(meta["n"])
        dim = int(meta["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleFormatError(f"meta.json lacks a valid n / feature_dim: {exc}") from exc

    edges = []
    with open(_read(path, "edges.csv"), newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or (k == 0 and row[0].strip() == "src"):
                continue
            try:
                edges.append((int(row[0]), int(row[1]), float(row[2]) if len(row) > 2 else 1.0))
            except (ValueError, IndexError) as exc:
                raise BundleFormatError(f"edges.csv line {k + 1}: {row}") from exc
    try:
        graph = DirectedGraph(n, tuple(edges))
    except InvalidArgument as exc:
        raise BundleFormatError(f"edges.csv: {exc}") from exc

    if (path / "features.f32").exists() and meta.get("features_file", "features.f32") == "features.f32":
        flat = np.fromfile(path / "features.f32", dtype="<f4").astype(float)
        if flat.size != n * dim:
            raise BundleFormatError(f"features.f32 holds {flat.size} values, expected {n * dim}")
        X = flat.reshape(n, dim)
    else:
        try:
            X = np.loadtxt(_read(path, "features.csv"), delimiter=",", ndmin=2, dtype=float)
        except ValueError as exc:
            raise BundleFormatError(f"features.csv: {exc}") from exc
        if X.shape != (n, dim):
            raise BundleFormatError(f"features.csv has shape {X.shape}, expected {(n, dim)}")

    with open(_read(path, "labels.csv")) as fh:
        try:
            raw = np.array([int(line) for line in fh if line.strip()], dtype=int)
        except ValueError as exc:
            raise BundleFormatError(f"labels.csv: {exc}") from exc
    if raw.shape != (n,):
        raise BundleFormatError(f"labels.csv has {raw.shape[0]} entries, expected {n}")
    class_map = meta.get("class_map")
    if class_map:
        try:
            labels = binarize(raw, BinarizationMap.from_dict(class_map))
        except InvalidArgument as exc:
            raise BundleFormatError(str(exc)) from exc
        raw_labels = raw
    elif np.all(np.isin(raw, (-1, 1))):
        labels, raw_labels = raw, None
    else:
        bad = sorted(set(raw.tolist()) - {-1, 1})
        raise BundleFormatError(f"labels {bad[:5]} are not binary and meta.json has no class_map")

    train, test = np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)
    with open(_read(path, "masks.csv"), newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or (k == 0 and row[0].strip() == "node_id"):
                continue
            try:
                i, split = int(row[0]), row[1].strip()
            except (ValueError, IndexError) as exc:
                raise BundleFormatError(f"masks.csv line {k + 1}: {row}") from exc
            if not 0 <= i < n:
                raise BundleFormatError(f"masks.csv: node {i} out of range")
            if split in ("train", "val"):
                train[i] = True
            elif split == "test":
                test[i] = True
            else:
                raise BundleFormatError(f"masks.csv: unknown split {split!r}")
    if (train & test).any():
        raise BundleFormatError("a node is in both the train and test splits")

    for key in ("format_version", "n", "feature_dim", "features_file"):
        meta.pop(key, None)
    if meta.get("class_map") is None:
        meta.pop("class_map", None)
    return DatasetBundle(graph, X, labels, train, test, meta, raw_labels=raw_labels)
