import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stratgraph import (
    DegenerateClassifierError,
    EmbeddingWeights,
    InvalidArgument,
    LinearGraphClassifier,
    NodeImmobileError,
    ResponseConfig,
    SmoothConfig,
    backward,
    embed,
    project_to_boundary,
    simulate_dynamics,
    soft_response_layer,
    stacked_forward,
)
from stratgraph.constructions import cascade_graph, hitchhike_example
from stratgraph.training import logistic_loss

from oracles import central_difference


def random_instance(rng, n, ell):
    wt = rng.uniform(0.1, 1.0, size=(n, n)) * (rng.random((n, n)) < 0.5)
    np.fill_diagonal(wt, rng.uniform(0.3, 1.0, size=n))
    return EmbeddingWeights.from_wtilde(wt), rng.normal(size=(n, ell))


def test_config_validation():
    for kw in ({"tau": 0}, {"T": -1}, {"T": 1.5}, {"beta": 0}):
        with pytest.raises(InvalidArgument):
            SmoothConfig(**kw)


def test_positive_node_unchanged():
    W = EmbeddingWeights.identity(2)
    X = np.array([[0.5], [-0.5]])
    out = soft_response_layer(LinearGraphClassifier([1.0], 0.0), X, X, W, SmoothConfig())
    assert out[0, 0] == 0.5
    assert out[1, 0] > -0.5


def test_far_node_saturated():
    W = EmbeddingWeights.identity(1)
    X = np.array([[-10.0]])
    out = soft_response_layer(LinearGraphClassifier([1.0], 0.0), X, X, W, SmoothConfig(tau=0.05))
    assert abs(out[0, 0] - X[0, 0]) < 1e-8 * 10


def test_hitchhike_j_small_tau():
    inst = hitchhike_example()
    out = soft_response_layer(inst.clf, inst.X, inst.X, inst.W, SmoothConfig(tau=1e-4, tol=0.0, T=1))
    # j's move costs exactly the budget, so the gate sits at 1/2
    assert out[2, 0] == pytest.approx(-0.5 + 0.5 * 2.0, abs=1e-9)
    inst.X[2, 0] = -0.49  # a bit cheaper, so the gate is open
    out = soft_response_layer(inst.clf, inst.X, inst.X, inst.W, SmoothConfig(tau=1e-4, tol=0.0, T=1))
    assert out[2, 0] == pytest.approx(project_j(inst), abs=1e-9)


def project_j(inst):
    return project_to_boundary(inst.clf, inst.X, inst.W, 2)[0]


def test_zero_self_weight_requires_frozen():
    W = EmbeddingWeights(sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 1.0]])))
    X = np.array([[-0.5], [-0.5]])
    clf = LinearGraphClassifier([1.0], 0.0)
    with pytest.raises(NodeImmobileError):
        soft_response_layer(clf, X, X, W, SmoothConfig())
    out = soft_response_layer(clf, X, X, W, SmoothConfig(), frozen=[True, False])
    assert out[0, 0] == -0.5


def test_zero_theta():
    W = EmbeddingWeights.identity(1)
    with pytest.raises(DegenerateClassifierError):
        stacked_forward(LinearGraphClassifier([0.0], 0.0), np.zeros((1, 1)), W, SmoothConfig(T=1))


def test_T0_is_plain_embedding():
    rng = np.random.default_rng(0)
    W, X = random_instance(rng, 6, 2)
    clf = LinearGraphClassifier(rng.normal(size=2), 0.3)
    feats, scores, rec = stacked_forward(clf, X, W, SmoothConfig(T=0))
    assert np.array_equal(feats, X)
    assert np.allclose(scores, embed(X, W) @ clf.theta + clf.b, atol=1e-15)
    assert rec.layers == [] and np.array_equal(rec.features[0], X)


def test_identity_weights_extra_layers_change_nothing():
    # costs kept at least 1 away from the budget so every gate saturates
    rng = np.random.default_rng(1)
    X = np.concatenate([rng.uniform(-1.0, -0.1, 20), rng.uniform(-6, -3.0, 20), rng.uniform(0, 2, 10)])[:, None]
    W = EmbeddingWeights.identity(len(X))
    clf = LinearGraphClassifier([1.0], 0.0)
    one, _, _ = stacked_forward(clf, X, W, SmoothConfig(T=1))
    four, _, _ = stacked_forward(clf, X, W, SmoothConfig(T=4))
    assert np.allclose(one, four, atol=1e-6)


def test_cascade_small_tau_matches_exact():
    inst = cascade_graph(3)
    trace = simulate_dynamics(inst.clf, inst.X, inst.W, inst.config)
    # every cascade move costs exactly the budget, where the soft gate sits at
    # 1/2; a 1% cheaper cost scale opens the gates fully
    _, scores, _ = stacked_forward(inst.clf, inst.X, inst.W, SmoothConfig(tau=1e-4, T=3, tol=1e-3, beta=inst.config.beta * 0.99))
    assert np.array_equal(np.where(scores >= 0, 1, -1), trace.final_predictions)


def test_record_contents():
    rng = np.random.default_rng(2)
    W, X = random_instance(rng, 5, 2)
    clf = LinearGraphClassifier(rng.normal(size=2), -0.5)
    _, _, rec = stacked_forward(clf, X, W, SmoothConfig(T=3))
    assert len(rec.layers) == 3 and len(rec.features) == 4
    assert len(rec.gates) == len(rec.sigmoid_args) == len(rec.costs) == 3
    assert np.array_equal(rec.features[0], X)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(1, 4), st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_kappa_shortcut_and_monotone_displacement(n, ell, seed, T):
    rng = np.random.default_rng(seed)
    W, X = random_instance(rng, n, ell)
    clf = LinearGraphClassifier(rng.normal(size=ell), float(rng.normal()))
    cfg = SmoothConfig(T=T, tau=0.3)
    _, _, rec = stacked_forward(clf, X, W, cfg)
    unit = clf.theta / np.linalg.norm(clf.theta)
    steps = np.diff(np.array(rec.features), axis=0)
    along = steps @ unit
    # every step is a nonnegative multiple of theta
    assert np.all(along >= -1e-12)
    assert np.allclose(steps, along[..., None] * unit, atol=1e-10)
    incremental = cfg.beta * np.cumsum(np.abs(along), axis=0)
    direct = cfg.beta * np.linalg.norm(np.array(rec.features[1:]) - X, axis=2)
    assert np.allclose(incremental, direct, atol=1e-9)


def _loss(clf, X, W, y, cfg):
    _, scores, rec = stacked_forward(clf, X, W, cfg)
    return logistic_loss(scores, y), rec


@pytest.mark.parametrize("seed", range(20))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    n, ell, T = int(rng.integers(2, 11)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
    W, X = random_instance(rng, n, ell)
    y = rng.choice([-1, 1], size=n)
    cfg = SmoothConfig(T=T, tau=0.5, beta=float(rng.uniform(0.5, 2)))
    p0 = np.append(rng.normal(size=ell), rng.normal())

    def f(p):
        (L, _), _ = _loss(LinearGraphClassifier(p[:-1], p[-1]), X, W, y, cfg)
        return L

    (L, g), rec = _loss(LinearGraphClassifier(p0[:-1], p0[-1]), X, W, y, cfg)
    dth, db = backward(rec, g)
    num = central_difference(f, p0)
    ana = np.append(dth, db)
    assert np.allclose(ana, num, rtol=1e-4, atol=1e-7)


def test_saturated_gates_give_naive_gradient():
    X = np.array([[-20.0], [-30.0], [5.0]])
    W = EmbeddingWeights.identity(3)
    clf = LinearGraphClassifier([1.0], 0.0)
    y = np.array([-1, -1, 1])
    _, s0, r0 = stacked_forward(clf, X, W, SmoothConfig(T=0))
    _, s3, r3 = stacked_forward(clf, X, W, SmoothConfig(T=3))
    g0 = backward(r0, logistic_loss(s0, y)[1])
    g3 = backward(r3, logistic_loss(s3, y)[1])
    assert np.allclose(g0[0], g3[0], atol=1e-8) and g0[1] == pytest.approx(g3[1], abs=1e-8)


def test_backward_rejects_other_classifier():
    W = EmbeddingWeights.identity(2)
    X = np.array([[-0.5], [0.5]])
    clf = LinearGraphClassifier([1.0], 0.0)
    _, _, rec = stacked_forward(clf, X, W, SmoothConfig(T=1))
    with pytest.raises(InvalidArgument):
        backward(rec, np.zeros(2), clf=LinearGraphClassifier([2.0], 0.0))
    with pytest.raises(InvalidArgument):
        backward(rec, np.zeros(3))


def test_infinite_beta_freezes_movement():
    W = EmbeddingWeights.identity(2)
    X = np.array([[-0.5], [0.5]])
    clf = LinearGraphClassifier([1.0], 0.0)
    feats, _, rec = stacked_forward(clf, X, W, SmoothConfig(T=2, beta=math.inf))
    assert np.array_equal(feats, X)
    d_theta, d_b = backward(rec, np.array([0.3, -0.2]))
    assert np.all(np.isfinite(d_theta)) and np.isfinite(d_b)


def test_sigmoid_stable_for_large_arguments():
    W = EmbeddingWeights.identity(2)
    X = np.array([[-1e4], [-1e-3]])
    clf = LinearGraphClassifier([1.0], 0.0)
    with np.errstate(over="raise", invalid="raise"):
        feats, scores, rec = stacked_forward(clf, X, W, SmoothConfig(T=2, tau=1e-4))
        backward(rec, np.ones(2))
    assert np.all(np.isfinite(feats))
