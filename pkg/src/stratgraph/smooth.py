"""Differentiable surrogate of the response dynamics.

Each layer replaces the hard "move iff affordable" rule with a sigmoid gate on
the remaining budget:

    x_out = x + (x' - x) * sigmoid((2 - beta * ||x' - x0||) / tau)

where x' is the positive-only projection (with tolerance) of the current
features and x0 are the original features. Measuring cost from x0 accounts for
everything already spent, because every layer moves a node along +theta.

:func:`backward` is hand-written reverse mode over a :class:`ForwardRecord`.
The strict-negativity mask is treated as a constant (no gradient).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DegenerateClassifierError, InvalidArgument, NodeImmobileError
from .graph import EmbeddingWeights, LinearGraphClassifier, embed
from .response import BUDGET


@dataclass(frozen=True)
class SmoothConfig:
    tau: float = 0.05
    T: int = 3
    tol: float = 1e-6
    beta: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")
        if self.T < 0 or int(self.T) != self.T:
            raise InvalidArgument(f"T must be a nonnegative integer, got {self.T}")
        if not self.beta > 0:
            raise InvalidArgument(f"beta must be positive, got {self.beta}")


@dataclass
class _Layer:
    X_in: np.ndarray
    P: np.ndarray        # embeddings of X_in
    s: np.ndarray        # scores
    mask: np.ndarray     # s < 0 (and node not frozen)
    u: np.ndarray        # signed projection step along theta
    D: np.ndarray        # x' - x0
    r: np.ndarray        # ||x' - x0||
    z: np.ndarray        # sigmoid argument
    g: np.ndarray        # gate
    cost: np.ndarray     # beta * r, the x0-referenced cost


@dataclass
class ForwardRecord:
    """Everything :func:`backward` needs. ``features[0]`` is the input."""

    clf: LinearGraphClassifier
    W: EmbeddingWeights
    cfg: SmoothConfig
    X0: np.ndarray
    layers: list = field(default_factory=list)
    features: list = field(default_factory=list)
    final_embedding: np.ndarray | None = None
    frozen: np.ndarray | None = None

    @property
    def sigmoid_args(self):
        return [layer.z for layer in self.layers]

    @property
    def gates(self):
        return [layer.g for layer in self.layers]

    @property
    def costs(self):
        return [layer.cost for layer in self.layers]


def _gate(z):
    # expit is overflow-free for any finite argument
    return expit(z)


def _layer_forward(clf, X, X0, W, cfg, frozen):
    sq = float(clf.theta @ clf.theta)
    if sq == 0.0:
        raise DegenerateClassifierError("theta has zero norm")
    wii = W.diag
    bad = (wii <= 0) & ~frozen
    if bad.any():
        raise NodeImmobileError(
            f"nodes {np.flatnonzero(bad)[:5].tolist()} have zero self-weight; pass them as frozen"
        )
    P = embed(X, W)
    s = P @ clf.theta + clf.b
    mask = (s < 0) & ~frozen
    u = np.zeros_like(s)
    u[mask] = (s[mask] - cfg.tol) / (sq * wii[mask])
    D = X - u[:, None] * clf.theta - X0
    r = np.linalg.norm(D, axis=1)
    if math.isinf(cfg.beta):
        cost = np.where(r > 0, math.inf, 0.0)
    else:
        cost = cfg.beta * r
    z = (BUDGET - cost) / cfg.tau
    g = _gate(z)
    out = X - (g * u)[:, None] * clf.theta
    return out, _Layer(X, P, s, mask, u, D, r, z, g, cost)


def soft_response_layer(clf, X_t, X_0, W, cfg: SmoothConfig, frozen=None) -> np.ndarray:
    """One smoothed response round applied to every node."""
    X_t = np.asarray(X_t, dtype=float)
    frozen = np.zeros(X_t.shape[0], dtype=bool) if frozen is None else np.asarray(frozen, dtype=bool)
    out, _ = _layer_forward(clf, X_t, np.asarray(X_0, dtype=float), W, cfg, frozen)
    return out


def stacked_forward(clf, X, W, cfg: SmoothConfig, frozen=None):
    """Apply ``cfg.T`` smoothed layers. Returns ``(features, scores, record)``."""
    X = np.asarray(X, dtype=float)
    frozen = np.zeros(X.shape[0], dtype=bool) if frozen is None else np.asarray(frozen, dtype=bool)
    rec = ForwardRecord(clf=clf, W=W, cfg=cfg, X0=X, features=[X], frozen=frozen)
    cur = X
    for _ in range(cfg.T):
        cur, layer = _layer_forward(clf, cur, X, W, cfg, frozen)
        rec.layers.append(layer)
        rec.features.append(cur)
    rec.final_embedding = embed(cur, W)
    scores = rec.final_embedding @ clf.theta + clf.b
    return cur, scores, rec


def backward(record: ForwardRecord, grad_scores, clf: LinearGraphClassifier | None = None):
    """Gradients of a scalar loss w.r.t. (theta, b), given dLoss/dscores."""
    if clf is not None and clf != record.clf:
        raise InvalidArgument("record was produced with a different classifier")
    clf = record.clf
    theta = clf.theta
    W = record.W
    cfg = record.cfg
    gS = np.asarray(grad_scores, dtype=float)
    if gS.shape != (record.X0.shape[0],):
        raise InvalidArgument(f"score gradient of shape {gS.shape} does not match the record")

    d_theta = record.final_embedding.T @ gS
    d_b = float(gS.sum())
    dX = np.asarray(W.mat.T @ np.outer(gS, theta))
    sq = float(theta @ theta)

    for layer in reversed(record.layers):
        # out = X - (g*u) theta
        gtheta = dX @ theta
        d_theta -= dX.T @ (layer.g * layer.u)
        dg = -layer.u * gtheta
        du = -layer.g * gtheta
        dX_in = dX.copy()
        # g = sigmoid(z), z = (2 - beta r) / tau
        dz = dg * layer.g * (1.0 - layer.g)
        if math.isinf(cfg.beta):
            dr = np.zeros_like(dz)
        else:
            dr = -cfg.beta * dz / cfg.tau
        # r = ||D||, D = X - u theta - X0
        safe = layer.r > 0
        coef = np.where(safe, dr / np.where(safe, layer.r, 1.0), 0.0)
        dD = coef[:, None] * layer.D
        dX_in += dD
        du -= dD @ theta
        d_theta -= dD.T @ layer.u
        # u = mask (s - tol) / (|theta|^2 w_ii)
        wii = W.diag
        ds = np.zeros_like(du)
        m = layer.mask
        ds[m] = du[m] / (sq * wii[m])
        dq = -float(du[m] @ layer.u[m]) / sq
        d_theta += 2.0 * dq * theta
        # s = P theta + b, P = M X
        d_theta += layer.P.T @ ds
        d_b += float(ds.sum())
        dX_in += np.asarray(W.mat.T @ np.outer(ds, theta))
        dX = dX_in
    return d_theta, d_b
