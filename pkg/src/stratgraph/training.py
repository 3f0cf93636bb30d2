"""Naive and robust training of linear graph classifiers, plus threshold line search."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .errors import InvalidArgument, TrainingFailure
from .graph import LinearGraphClassifier, embed, score_and_predict
from .response import ResponseConfig, simulate_dynamics
from .smooth import SmoothConfig, backward, stacked_forward

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    weight_decay: float = 1.3e-5
    epochs: int = 20
    T: int = 3
    tau: float = 0.05
    beta: float = 1.0
    tol: float = 1e-6
    seed: int = 0
    # When set, theta is held at this value and only b is learned. With
    # theta = (1,) the model class is plain thresholds on the embedding.
    fixed_theta: tuple | None = None
    # "adam", or "scan": exhaustive search of the same objective over b on
    # scan_grid (needs fixed_theta; theta is then (1,) by default for 1-d data)
    optimizer: str = "adam"
    scan_grid: tuple = (-3.0, 3.0, 0.01)

    def __post_init__(self):
        if self.fixed_theta is not None:
            object.__setattr__(self, "fixed_theta", tuple(float(v) for v in self.fixed_theta))
            if not any(self.fixed_theta):
                raise InvalidArgument("fixed_theta must be nonzero")
        if self.optimizer not in ("adam", "scan"):
            raise InvalidArgument(f"unknown optimizer {self.optimizer!r}")
        object.__setattr__(self, "scan_grid", tuple(float(v) for v in self.scan_grid))
        lo, hi, step = self.scan_grid
        if not (hi >= lo and step > 0):
            raise InvalidArgument(f"bad scan grid {self.scan_grid}")
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be positive")
        if self.epochs < 1:
            raise InvalidArgument("epochs must be at least 1")
        if self.T < 0:
            raise InvalidArgument("T must be nonnegative")

    def smooth(self) -> SmoothConfig:
        return SmoothConfig(tau=self.tau, T=self.T, tol=self.tol, beta=self.beta)

    def replace(self, **kw) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **kw})


@dataclass
class TrainedModel:
    classifier: LinearGraphClassifier
    loss_curve: list = field(default_factory=list)
    config: TrainConfig | None = None

    def to_json(self) -> str:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "theta": [float(v) for v in self.classifier.theta],
            "b": float(self.classifier.b),
            "loss_curve": [float(v) for v in self.loss_curve],
            "config": _config_dict(self.config),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise InvalidArgument(f"unsupported model format version {doc.get('format_version')!r}")
        cfg = doc.get("config")
        if cfg is not None:
            cfg = {k: (math.inf if v == "inf" else v) for k, v in cfg.items()}
            cfg = TrainConfig(**cfg)
        return cls(LinearGraphClassifier(np.array(doc["theta"], dtype=float), doc["b"]),
                   list(doc.get("loss_curve", [])), cfg)


def _config_dict(cfg):
    if cfg is None:
        return None
    # json has no infinity; beta = inf encodes d = 0
    doc = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(cfg).items()}
    if doc["fixed_theta"] is not None:
        doc["fixed_theta"] = list(doc["fixed_theta"])
    doc["scan_grid"] = list(doc["scan_grid"])
    return doc


def save_model(model: TrainedModel, path):
    with open(path, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return TrainedModel.from_json(fh.read())


def logistic_loss(scores, y):
    """Mean log(1 + exp(-y * score)) and its gradient w.r.t. the scores."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    if scores.shape != y.shape:
        raise InvalidArgument(f"scores {scores.shape} and labels {y.shape} differ in shape")
    n = scores.shape[0]
    if n == 0:
        return 0.0, np.zeros(0)
    margins = y * scores
    loss = float(np.logaddexp(0.0, -margins).mean())
    grad = -y * expit(-margins) / n
    return loss, grad


class Adam:
    """Plain Adam over a single flat parameter vector."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def init_classifier(dim, seed) -> LinearGraphClassifier:
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(dim)
    theta = rng.uniform(-bound, bound, size=dim)
    b = rng.uniform(-bound, bound)
    return LinearGraphClassifier(theta, b)


def objective(clf, X, W, y, mask, cfg: TrainConfig, frozen=None):
    """Training loss through ``cfg.T`` smoothed layers and its gradient.

    The log-loss is averaged over nodes in ``mask``; every node of the graph
    still responds. Weight decay penalizes theta only.
    """
    _, scores, rec = stacked_forward(clf, X, W, cfg.smooth(), frozen=frozen)
    loss, g = logistic_loss(scores[mask], y[mask])
    grad_scores = np.zeros_like(scores)
    grad_scores[mask] = g
    d_theta, d_b = backward(rec, grad_scores)
    loss += cfg.weight_decay * float(clf.theta @ clf.theta)
    d_theta = d_theta + 2.0 * cfg.weight_decay * clf.theta
    return loss, d_theta, d_b


def train(view, cfg: TrainConfig) -> TrainedModel:
    """Full-batch Adam through the smoothed response stack. ``cfg.T = 0`` is the naive model.

    With ``cfg.fixed_theta`` set only the bias is optimized. ``cfg.optimizer =
    "scan"`` replaces Adam by an exhaustive search over b; the objective is the
    same, but in one dimension the search finds its global minimum on the grid
    while Adam can stall in a spurious basin.
    """
    X, W, y, mask = view.X, view.W, view.y, view.eval_mask
    if X.shape[0] != W.n or y.shape[0] != W.n:
        raise InvalidArgument("features, labels and weights disagree on the node count")
    frozen = W.diag <= 0
    if cfg.optimizer == "scan":
        return _scan_bias(X, W, y, mask, cfg, frozen)
    clf = init_classifier(X.shape[1], cfg.seed)
    if cfg.fixed_theta is not None:
        if len(cfg.fixed_theta) != X.shape[1]:
            raise InvalidArgument(f"fixed_theta has {len(cfg.fixed_theta)} entries, features have {X.shape[1]}")
        clf = LinearGraphClassifier(np.array(cfg.fixed_theta), clf.b)
    theta = clf.theta
    params = np.concatenate([theta, [clf.b]])
    opt = Adam(cfg.learning_rate)
    curve = []
    for epoch in range(cfg.epochs):
        clf = LinearGraphClassifier(params[:-1], params[-1])
        loss, d_theta, d_b = objective(clf, X, W, y, mask, cfg, frozen)
        if not np.isfinite(loss) or not np.all(np.isfinite(d_theta)) or not np.isfinite(d_b):
            raise TrainingFailure(f"non-finite loss or gradient at epoch {epoch}")
        curve.append(loss)
        log.debug("epoch %d loss %.6f", epoch, loss)
        if cfg.fixed_theta is not None:
            d_theta = np.zeros_like(d_theta)
        params = opt.step(params, np.concatenate([d_theta, [d_b]]))
        if cfg.fixed_theta is not None:
            params[:-1] = theta
    return TrainedModel(LinearGraphClassifier(params[:-1], params[-1]), curve, cfg)


def _scan_bias(X, W, y, mask, cfg, frozen):
    theta = np.array(cfg.fixed_theta if cfg.fixed_theta is not None else (1.0,) * X.shape[1])
    if cfg.fixed_theta is None and X.shape[1] != 1:
        raise InvalidArgument("the scan optimizer needs fixed_theta for multi-dimensional features")
    if len(theta) != X.shape[1]:
        raise InvalidArgument(f"fixed_theta has {len(theta)} entries, features have {X.shape[1]}")
    lo, hi, step = cfg.scan_grid
    grid = default_threshold_grid(lo, hi, step)
    losses = np.empty(len(grid))
    for k, t in enumerate(grid):
        losses[k], _, _ = objective(LinearGraphClassifier(theta, -t), X, W, y, mask, cfg, frozen)
    if not np.all(np.isfinite(losses)):
        raise TrainingFailure("non-finite loss during the bias scan")
    best = int(np.argmin(losses))
    return TrainedModel(LinearGraphClassifier(theta, -float(grid[best])), [float(losses[best])], cfg)


def threshold_classifier(threshold) -> LinearGraphClassifier:
    """1-d classifier predicting +1 iff phi >= threshold."""
    return LinearGraphClassifier(np.array([1.0]), -float(threshold))


def accuracy_at(clf, X, W, y, rcfg: ResponseConfig, strategic=True, mask=None):
    if strategic:
        preds = simulate_dynamics(clf, X, W, rcfg).final_predictions
    else:
        _, preds = score_and_predict(clf, embed(X, W))
    if mask is not None:
        preds, y = preds[mask], y[mask]
    return float(np.mean(preds == y)) if len(y) else float("nan")


def line_search_threshold(X, W, y, cfg: ResponseConfig, grid=None, strategic=True, mask=None):
    """Scan 1-d thresholds; a grid value t is the classifier ``phi >= t``.

    Returns ``(best_t, accuracies)``; ties go to the smallest t.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 1:
        raise InvalidArgument(f"threshold search needs 1-d features, got shape {X.shape}")
    if grid is None:
        grid = default_threshold_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgument("empty threshold grid")
    y = np.asarray(y)
    accs = np.array([
        accuracy_at(threshold_classifier(t), X, W, y, cfg, strategic=strategic, mask=mask) for t in grid
    ])
    best = int(np.flatnonzero(accs == accs.max())[np.argmin(grid[accs == accs.max()])])
    return float(grid[best]), accs


def default_threshold_grid(lo=-3.0, hi=3.0, step=0.01):
    count = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(count + 1), 10)
