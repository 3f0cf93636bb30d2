"""Exact myopic best-response dynamics against a linear graph classifier."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateClassifierError, InternalInvariantError, InvalidArgument, NodeImmobileError
from .graph import EmbeddingWeights, LinearGraphClassifier, embed, score_and_predict

TRACE_FORMAT_VERSION = 1
BUDGET = 2.0


@dataclass(frozen=True)
class ResponseConfig:
    """How users respond.

    beta scales 2-norm costs, so the furthest a user will ever move is
    ``budget / beta``. ``slack`` absorbs float rounding when a move costs
    exactly the budget; exact-budget moves are allowed.
    """

    beta: float = 1.0
    tol: float = 1e-6
    max_rounds: int | None = None
    budget: float = BUDGET
    slack: float = 1e-9

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidArgument(f"beta must be positive, got {self.beta}")
        if self.budget != BUDGET:
            raise InvalidArgument("the budget is the prediction gain and is fixed at 2")
        if self.tol < 0:
            raise InvalidArgument(f"tol must be nonnegative, got {self.tol}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise InvalidArgument("max_rounds must be positive")

    @classmethod
    def from_distance(cls, d: float, **kw) -> "ResponseConfig":
        """Config whose maximal moving distance is ``d``; d = 0 disables movement."""
        if d < 0:
            raise InvalidArgument(f"max distance must be nonnegative, got {d}")
        beta = math.inf if d == 0 else BUDGET / d
        return cls(beta=beta, **kw)

    @property
    def max_distance(self) -> float:
        return self.budget / self.beta

    def to_dict(self):
        return {"beta": self.beta, "tol": self.tol, "max_rounds": self.max_rounds, "slack": self.slack}


def _check_theta(clf):
    sq = float(clf.theta @ clf.theta)
    if sq == 0.0:
        raise DegenerateClassifierError("theta has zero norm")
    return sq


def _node_score(clf, X, W, i):
    row = W.mat.getrow(i)
    phi = np.asarray(row @ X).ravel()
    return float(phi @ clf.theta + clf.b)


def project_to_boundary(clf: LinearGraphClassifier, X, W: EmbeddingWeights, i: int, tol: float = 0.0) -> np.ndarray:
    """Cheapest (2-norm) new features for node i putting its score at exactly ``tol``,
    everyone else held fixed."""
    X = np.asarray(X, dtype=float)
    sq = _check_theta(clf)
    wii = W.diag[i]
    if wii <= 0:
        raise NodeImmobileError(f"node {i} has zero self-weight and cannot affect its own embedding")
    s = _node_score(clf, X, W, i)
    return X[i] - (s - tol) / (sq * wii) * clf.theta


def project_positive_only(clf, X, W, i, tol=0.0) -> np.ndarray:
    """Project only strictly negative nodes; everyone else keeps their features."""
    X = np.asarray(X, dtype=float)
    _check_theta(clf)
    if W.diag[i] <= 0:
        raise NodeImmobileError(f"node {i} has zero self-weight")
    if _node_score(clf, X, W, i) < 0:
        return project_to_boundary(clf, X, W, i, tol)
    return X[i].copy()


def project_generalized(clf, X, W, i, A, tol=0.0) -> np.ndarray:
    """Projection under the quadratic cost (x'-x)^T A (x'-x) / 2 for positive-definite A."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.shape != (clf.dim, clf.dim):
        raise InvalidArgument(f"cost matrix must be {clf.dim}x{clf.dim}, got {A.shape}")
    _check_theta(clf)
    wii = W.diag[i]
    if wii <= 0:
        raise NodeImmobileError(f"node {i} has zero self-weight")
    try:
        factor = scipy.linalg.cho_factor(A + A.T)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument("cost matrix is not positive definite") from exc
    direction = scipy.linalg.cho_solve(factor, clf.theta)
    s = _node_score(clf, X, W, i)
    return X[i] - (s - tol) / (float(clf.theta @ direction) * wii) * direction


def best_response_round(clf, X, W, cfg: ResponseConfig, kappa=None):
    """One synchronous round. Returns ``(new_X, moved, new_kappa)``.

    Every decision reads the round-start state only. Nodes with zero
    self-weight are skipped.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    kappa = np.zeros(n) if kappa is None else np.asarray(kappa, dtype=float)
    sq = _check_theta(clf)
    scores, _ = score_and_predict(clf, embed(X, W))
    wii = W.diag
    cand = (scores < 0) & (wii > 0)
    step = np.zeros(n)
    step[cand] = (scores[cand] - cfg.tol) / (sq * wii[cand])
    dist = np.abs(step) * math.sqrt(sq)
    cost = np.zeros(n)
    cost[cand] = cfg.beta * dist[cand]
    moved = cand & (cost + kappa <= cfg.budget + cfg.slack)
    new_X = X.copy()
    new_X[moved] -= step[moved, None] * clf.theta
    new_kappa = kappa + np.where(moved, cost, 0.0)
    return new_X, moved, new_kappa


@dataclass
class DynamicsTrace:
    """Full record of a dynamics run.

    ``features_by_round[t]`` is the state after round t (index 0 is the
    input), and ``predictions_by_round[t]`` the labels of that state.
    ``rounds`` counts rounds in which somebody moved.
    """

    rounds: int
    features_by_round: list
    moved_round: list
    cost: np.ndarray
    predictions_by_round: list
    scores_by_round: list = field(default_factory=list)
    node_names: list | None = None

    @property
    def final_features(self):
        return self.features_by_round[-1]

    @property
    def final_predictions(self):
        return self.predictions_by_round[-1]

    @property
    def initial_predictions(self):
        return self.predictions_by_round[0]

    def moves_per_round(self) -> list[int]:
        counts = [0] * self.rounds
        for r in self.moved_round:
            if r is not None:
                counts[r - 1] += 1
        return counts

    def to_json(self, indent=None) -> str:
        names = self.node_names or [str(i) for i in range(len(self.moved_round))]
        doc = {
            "format_version": TRACE_FORMAT_VERSION,
            "rounds": self.rounds,
            "moved_round": {names[i]: r for i, r in enumerate(self.moved_round) if r is not None},
            "cost": [float(c) for c in self.cost],
            "predictions_by_round": [[int(v) for v in p] for p in self.predictions_by_round],
            "moves_per_round": self.moves_per_round(),
            "node_names": names,
        }
        return json.dumps(doc, indent=indent)


def simulate_dynamics(clf, X, W, cfg: ResponseConfig, node_names=None) -> DynamicsTrace:
    """Run best-response rounds until a round in which nobody moves."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    max_rounds = cfg.max_rounds if cfg.max_rounds is not None else n + 1
    kappa = np.zeros(n)
    moved_round = [None] * n
    scores, preds = score_and_predict(clf, embed(X, W))
    feats, predictions, all_scores = [X], [preds], [scores]
    t = 0
    while True:
        new_X, moved, kappa = best_response_round(clf, feats[-1], W, cfg, kappa)
        if not moved.any():
            break
        t += 1
        if t > max_rounds:
            raise InternalInvariantError(f"dynamics still moving after {max_rounds} rounds")
        for i in np.flatnonzero(moved):
            if moved_round[i] is not None:
                raise InternalInvariantError(f"node {i} moved twice (rounds {moved_round[i]} and {t})")
            moved_round[i] = t
        scores, preds = score_and_predict(clf, embed(new_X, W))
        feats.append(new_X)
        predictions.append(preds)
        all_scores.append(scores)
    return DynamicsTrace(
        rounds=t,
        features_by_round=feats,
        moved_round=moved_round,
        cost=kappa,
        predictions_by_round=predictions,
        scores_by_round=all_scores,
        node_names=list(node_names) if node_names is not None else None,
    )


def hitchhikers(trace: DynamicsTrace) -> set[int]:
    """Nodes that went from -1 to +1 without ever moving."""
    first, last = trace.initial_predictions, trace.final_predictions
    return {
        i for i in range(len(first))
        if first[i] == -1 and last[i] == 1 and trace.moved_round[i] is None
    }
