"""Experiment orchestration: metrics, the naive / robust / benchmark arms, sweeps
and the centrality ablation.

Arms
----
benchmark
    the naive model scored on unmodified test features
naive
    the same model after users respond (exact dynamics until convergence)
robust
    a model trained through ``T`` smoothed response layers, then evaluated
    under the exact dynamics
optimum
    (1-d data only) the threshold maximizing strategic accuracy on the train
    view, found by line search; useful as a reference curve

Sweep results are wide tables: one row per (sweep value, seed), with one
column per arm and metric.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .datasets import DatasetBundle, generate_synthetic, load_bundle, make_inductive_split, weights_for
from .errors import InvalidArgument
from .graph import LinearGraphClassifier, embed, score_and_predict
from .response import DynamicsTrace, ResponseConfig, simulate_dynamics
from .training import (
    TrainConfig,
    default_threshold_grid,
    line_search_threshold,
    threshold_classifier,
    train,
)

log = logging.getLogger(__name__)

ARMS = ("naive", "robust", "benchmark", "optimum")
AXES = ("alpha", "d", "T", "K", "q")


@dataclass
class MetricsRow:
    """Outcome of one evaluation, restricted to the evaluation nodes.

    "moved" counts nodes that changed their features; "crossed" counts nodes
    whose prediction went from -1 to +1, movers and hitchhikers alike.
    """

    accuracy: float
    accuracy_before: float
    moved: float = 0.0
    crossed: float = 0.0
    moved_pos: float = 0.0
    moved_neg: float = 0.0
    crossed_pos: float = 0.0
    crossed_neg: float = 0.0
    rounds: int = 0
    moves_per_round: list = field(default_factory=list)
    n_eval: int = 0
    # accuracy lost to crossing negatives and gained from crossing positives;
    # scores never decrease during the dynamics, so
    # accuracy - accuracy_before == gain - harm exactly
    harm: float = 0.0
    gain: float = 0.0


def _frac(count, total):
    return float(count) / float(total) if total else 0.0


def movement_metrics(trace: DynamicsTrace, y, mask=None) -> MetricsRow:
    """Accuracy and movement statistics of a trace over the nodes in ``mask``."""
    y = np.asarray(y)
    n = len(y)
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    before, after = trace.initial_predictions, trace.final_predictions
    moved = np.array([r is not None for r in trace.moved_round])
    crossed = (before == -1) & (after == 1)
    pos, neg = mask & (y == 1), mask & (y == -1)
    n_eval = int(mask.sum())
    counts = [0] * trace.rounds
    for i in np.flatnonzero(mask & moved):
        counts[trace.moved_round[i] - 1] += 1
    return MetricsRow(
        accuracy=_frac(np.sum((after == y) & mask), n_eval),
        accuracy_before=_frac(np.sum((before == y) & mask), n_eval),
        moved=_frac(np.sum(moved & mask), n_eval),
        crossed=_frac(np.sum(crossed & mask), n_eval),
        moved_pos=_frac(np.sum(moved & pos), pos.sum()),
        moved_neg=_frac(np.sum(moved & neg), neg.sum()),
        crossed_pos=_frac(np.sum(crossed & pos), pos.sum()),
        crossed_neg=_frac(np.sum(crossed & neg), neg.sum()),
        rounds=trace.rounds,
        moves_per_round=counts,
        n_eval=n_eval,
        harm=_frac(np.sum(crossed & neg), n_eval),
        gain=_frac(np.sum(crossed & pos), n_eval),
    )


def evaluate(clf: LinearGraphClassifier, view, rcfg: ResponseConfig, strategic: bool = True) -> MetricsRow:
    """Score ``clf`` on a view, after the exact dynamics if ``strategic``."""
    if strategic:
        trace = simulate_dynamics(clf, view.X, view.W, rcfg)
        return movement_metrics(trace, view.y, view.eval_mask)
    _, preds = score_and_predict(clf, embed(view.X, view.W))
    m = view.eval_mask
    acc = _frac(np.sum((preds == view.y) & m), m.sum())
    return MetricsRow(accuracy=acc, accuracy_before=acc, n_eval=int(m.sum()))


def aggregate(values):
    """Mean and standard error (zero for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


@dataclass
class ExperimentConfig:
    """Everything one sweep needs; loadable from a JSON file.

    ``dataset`` is ``{"kind": "synthetic", "n": ..., "alpha": ...}`` or
    ``{"kind": "bundle", "path": ...}``. ``d`` is the maximal moving distance
    used for every point not on a ``d`` sweep.
    """

    dataset: dict = field(default_factory=lambda: {"kind": "synthetic", "n": 1000, "alpha": 0.7})
    arms: tuple = ("naive", "robust", "benchmark")
    axis: str = "alpha"
    values: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    train: TrainConfig = field(default_factory=TrainConfig)
    d: float = 2.0
    seeds: tuple = (0, 1, 2, 3, 4)
    naive_fit: str = "train"
    K: int = 1
    inductive: bool = True
    ordering: str = "degree"
    grid: tuple = (-3.0, 3.0, 0.01)
    tol: float = 1e-6

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.arms = tuple(self.arms)
        self.values = tuple(self.values)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.grid = tuple(float(v) for v in self.grid)
        bad = [a for a in self.arms if a not in ARMS]
        if bad or not self.arms:
            raise InvalidArgument(f"arms must be a nonempty subset of {ARMS}, got {list(self.arms)}")
        if self.axis not in AXES:
            raise InvalidArgument(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise InvalidArgument("empty sweep")
        if not self.seeds:
            raise InvalidArgument("need at least one seed")
        if self.d < 0:
            raise InvalidArgument(f"d must be nonnegative, got {self.d}")
        if self.naive_fit not in ("train", "line_search"):
            raise InvalidArgument(f"naive_fit must be 'train' or 'line_search', got {self.naive_fit!r}")
        if self.ordering not in ("degree", "random"):
            raise InvalidArgument(f"ordering must be 'degree' or 'random', got {self.ordering!r}")
        kind = self.dataset.get("kind")
        if kind not in ("synthetic", "bundle"):
            raise InvalidArgument(f"dataset kind must be 'synthetic' or 'bundle', got {kind!r}")
        if kind == "bundle" and self.axis == "alpha":
            raise InvalidArgument("an alpha sweep needs synthetic data")
        if kind == "synthetic" and self.axis == "K":
            raise InvalidArgument("a K sweep needs a bundle with an SGC embedding")
        checks = {
            "alpha": lambda v: 0 <= v <= 1,
            "d": lambda v: v >= 0,
            "T": lambda v: int(v) == v and 0 <= v <= 10,
            "K": lambda v: int(v) == v and v >= 1,
            "q": lambda v: 0 <= v <= 100,
        }
        for v in self.values:
            if not checks[self.axis](v):
                raise InvalidArgument(f"{self.axis} = {v} is out of range")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys {sorted(unknown)}")
        doc = dict(doc)
        if "train" in doc:
            tr = dict(doc["train"])
            tr = {k: (math.inf if v == "inf" else v) for k, v in tr.items()}
            try:
                doc["train"] = TrainConfig(**tr)
            except TypeError as exc:
                raise InvalidArgument(f"bad train config: {exc}") from exc
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        doc = asdict(self)
        doc["train"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.train).items()}
        for k in ("arms", "values", "seeds", "grid"):
            doc[k] = list(doc[k])
        return doc


def _grid(cfg):
    return default_threshold_grid(*cfg.grid)


def _base_bundle(cfg: ExperimentConfig, seed, value):
    ds = cfg.dataset
    if ds["kind"] == "synthetic":
        alpha = value if cfg.axis == "alpha" else float(ds.get("alpha", 0.7))
        return generate_synthetic(int(ds.get("n", 1000)), alpha, seed)
    return _load_cached(ds["path"])


_BUNDLES = {}


def _load_cached(path):
    key = str(Path(path).resolve())
    if key not in _BUNDLES:
        _BUNDLES[key] = load_bundle(path)
    return _BUNDLES[key]


def _prepare(bundle: DatasetBundle, cfg: ExperimentConfig, K):
    """SGC propagation depth and the inductive filter for non-synthetic bundles."""
    if cfg.dataset["kind"] == "synthetic":
        return bundle
    emb = dict(bundle.meta.get("embedding") or {"scheme": "sgc"})
    if emb.get("scheme", "sgc") == "sgc":
        emb["K"] = int(K)
        bundle = bundle.with_graph(bundle.graph)
        bundle.meta["embedding"] = emb
    if cfg.inductive:
        bundle = make_inductive_split(bundle, int(K))
    return bundle


def run_arms(bundle: DatasetBundle, cfg: ExperimentConfig, d, T, seed, weights=None) -> dict:
    """Train and evaluate every configured arm on one bundle."""
    W = bundle.weights() if weights is None else weights
    tr, te = bundle.view("train", W), bundle.view("test", W)
    rcfg = ResponseConfig.from_distance(d, tol=cfg.tol)
    tcfg = cfg.train.replace(beta=rcfg.beta, T=int(T), seed=int(seed))
    out = {}
    need_naive = {"naive", "benchmark"} & set(cfg.arms)
    if need_naive:
        if cfg.naive_fit == "line_search":
            t, _ = line_search_threshold(tr.X, tr.W, tr.y, rcfg, _grid(cfg), strategic=False, mask=tr.eval_mask)
            naive = threshold_classifier(t)
        else:
            naive = train(tr, tcfg.replace(T=0)).classifier
        if "benchmark" in cfg.arms:
            out["benchmark"] = (naive, evaluate(naive, te, rcfg, strategic=False))
        if "naive" in cfg.arms:
            out["naive"] = (naive, evaluate(naive, te, rcfg, strategic=True))
    if "robust" in cfg.arms:
        robust = train(tr, tcfg).classifier
        out["robust"] = (robust, evaluate(robust, te, rcfg, strategic=True))
    if "optimum" in cfg.arms:
        t, _ = line_search_threshold(tr.X, tr.W, tr.y, rcfg, _grid(cfg), strategic=True, mask=tr.eval_mask)
        best = threshold_classifier(t)
        out["optimum"] = (best, evaluate(best, te, rcfg, strategic=True))
    return out


METRIC_COLUMNS = (
    "accuracy", "accuracy_before", "moved", "crossed", "moved_pos", "moved_neg",
    "crossed_pos", "crossed_neg", "harm", "gain", "rounds", "moves_per_round", "b",
)


def _row(axis, value, seed, results, arms, extra=None):
    row = {"axis": axis, "value": value, "seed": seed}
    for arm in arms:
        clf, m = results[arm]
        for col in METRIC_COLUMNS:
            if col == "b":
                v = float(clf.b)
            elif col == "moves_per_round":
                v = ";".join(str(c) for c in m.moves_per_round)
            else:
                v = getattr(m, col)
            row[f"{arm}_{col}"] = v
    if extra:
        row.update(extra)
    return row


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    """One row per (sweep value, seed), in sweep order then seed order."""
    if cfg.axis == "q":
        bundle = _prepare(_base_bundle(cfg, cfg.seeds[0], None), cfg, cfg.K) if cfg.dataset["kind"] == "bundle" else None
        return centrality_ablation(bundle, cfg.values, cfg.ordering, cfg)
    rows = []
    for value in cfg.values:
        for seed in cfg.seeds:
            K = int(value) if cfg.axis == "K" else cfg.K
            bundle = _prepare(_base_bundle(cfg, seed, value), cfg, K)
            d = float(value) if cfg.axis == "d" else cfg.d
            T = int(value) if cfg.axis == "T" else cfg.train.T
            log.info("%s = %s, seed %d", cfg.axis, value, seed)
            results = run_arms(bundle, cfg, d, T, seed)
            extra = {}
            if "inductive" in bundle.meta:
                extra["test_removed_fraction"] = bundle.meta["inductive"]["removed_fraction"]
            rows.append(_row(cfg.axis, value, seed, results, cfg.arms, extra))
    return rows


def ablation_order(bundle: DatasetBundle, ordering: str, seed: int) -> np.ndarray:
    """Node ranking for the ablation: decreasing out-degree (ties by id) or random."""
    if ordering == "degree":
        deg = bundle.graph.out_degree()
        return np.lexsort((np.arange(bundle.n), -deg))
    if ordering == "random":
        return np.random.default_rng(seed).permutation(bundle.n)
    raise InvalidArgument(f"unknown ordering {ordering!r}")


def disconnect_top(bundle: DatasetBundle, q: float, ordering: str, seed: int) -> DatasetBundle:
    """Remove all out-edges of the top q% ranked nodes."""
    if not 0 <= q <= 100:
        raise InvalidArgument(f"q must lie in [0, 100], got {q}")
    count = int(math.floor(q * bundle.n / 100.0 + 0.5))
    top = ablation_order(bundle, ordering, seed)[:count]
    return bundle.with_graph(bundle.graph.without_out_edges(top))


def centrality_ablation(bundle, q_values, ordering: str, config: ExperimentConfig) -> list[dict]:
    """Retrain and evaluate every arm after disconnecting the top q% nodes.

    ``bundle = None`` draws a fresh synthetic bundle per seed. Nodes left
    without in-neighbors embed as their own features.
    """
    rows = []
    for q in q_values:
        for seed in config.seeds:
            base = bundle if bundle is not None else _base_bundle(config, seed, None)
            cut = disconnect_top(base, q, ordering, seed)
            W = weights_for(cut.graph, cut.meta.get("embedding"), allow_isolated=True)
            results = run_arms(cut, config, config.d, config.train.T, seed, weights=W)
            extra = {"ordering": ordering, "edges": len(cut.graph.edges)}
            rows.append(_row("q", q, seed, results, config.arms, extra))
    return rows


def summarize(rows: list[dict], arms) -> list[dict]:
    """Mean and standard error of every numeric arm metric, per sweep value."""
    out = []
    values = []
    for r in rows:
        if r["value"] not in values:
            values.append(r["value"])
    for v in values:
        group = [r for r in rows if r["value"] == v]
        s = {"axis": group[0]["axis"], "value": v, "seeds": len(group)}
        for arm in arms:
            for col in METRIC_COLUMNS:
                if col == "moves_per_round":
                    continue
                mean, se = aggregate([g[f"{arm}_{col}"] for g in group])
                s[f"{arm}_{col}_mean"] = mean
                s[f"{arm}_{col}_se"] = se
        out.append(s)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    for r in rows[1:]:
        cols.extend(c for c in r if c not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()
