import math

import numpy as np
import pytest

from stratgraph import DirectedGraph, EmbeddingWeights, InvalidArgument, LinearGraphClassifier, ResponseConfig, simulate_dynamics
from stratgraph.constructions import cascade_graph, hitchhike_example
from stratgraph.datasets import DatasetBundle, GraphView, generate_synthetic
from stratgraph.experiments import (
    ExperimentConfig,
    ablation_order,
    aggregate,
    disconnect_top,
    evaluate,
    movement_metrics,
    run_arms,
    run_sweep,
    summarize,
    to_csv,
)
from stratgraph.training import TrainConfig

SCAN = {"optimizer": "scan", "scan_grid": [-2.0, 2.0, 0.02], "T": 3}


def small_config(**kw):
    doc = {"dataset": {"kind": "synthetic", "n": 100, "alpha": 0.7}, "seeds": [0, 1], "naive_fit": "line_search",
           "arms": ["naive", "robust", "benchmark"], "train": SCAN}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


class TestMovementMetrics:
    def test_no_move(self):
        X = np.array([[1.0], [-5.0]])
        trace = simulate_dynamics(LinearGraphClassifier([1.0], 0.0), X, EmbeddingWeights.identity(2), ResponseConfig())
        m = movement_metrics(trace, np.array([1, -1]))
        assert m.accuracy == m.accuracy_before == 1.0
        assert m.moved == m.crossed == 0.0 and m.rounds == 0 and m.moves_per_round == []

    def test_hitchhike(self):
        inst = hitchhike_example()
        m = movement_metrics(simulate_dynamics(inst.clf, inst.X, inst.W, inst.config), -np.ones(3, dtype=int))
        assert m.moved == pytest.approx(1 / 3) and m.crossed == pytest.approx(2 / 3)
        assert m.harm == pytest.approx(2 / 3) and m.gain == 0.0
        # no positive nodes: the per-class rate reports 0
        assert m.moves_per_round == [1] and m.moved_pos == 0.0

    @pytest.mark.parametrize("seed", range(8))
    def test_brute_force_recount(self, seed):
        rng = np.random.default_rng(seed)
        n = 25
        wt = rng.uniform(0.1, 1, (n, n)) * (rng.random((n, n)) < 0.2)
        np.fill_diagonal(wt, rng.uniform(0.3, 1, n))
        X = rng.normal(size=(n, 1))
        y = rng.choice([-1, 1], n)
        mask = rng.random(n) < 0.7
        trace = simulate_dynamics(LinearGraphClassifier([1.0], 0.3), X, EmbeddingWeights.from_wtilde(wt), ResponseConfig(beta=0.7))
        m = movement_metrics(trace, y, mask)
        idx = [i for i in range(n) if mask[i]]
        before = [trace.scores_by_round[0][i] >= 0 for i in idx]
        after = [trace.scores_by_round[-1][i] >= 0 for i in idx]
        lab = [y[i] == 1 for i in idx]
        assert m.accuracy == pytest.approx(sum(a == b for a, b in zip(after, lab)) / len(idx))
        assert m.crossed == pytest.approx(sum((not a) and b for a, b in zip(before, after)) / len(idx))
        assert m.moved == pytest.approx(sum(trace.moved_round[i] is not None for i in idx) / len(idx))
        assert m.accuracy - m.accuracy_before == pytest.approx(m.gain - m.harm, abs=1e-12)
        assert sum(m.moves_per_round) == sum(trace.moved_round[i] is not None for i in idx)


def test_benchmark_on_separable_toy():
    X = np.array([[2.0], [1.5], [-1.5], [-2.0]])
    v = GraphView(X, EmbeddingWeights.identity(4), np.array([1, 1, -1, -1]), np.ones(4, bool), np.arange(4))
    assert evaluate(LinearGraphClassifier([1.0], 0.0), v, ResponseConfig(), strategic=False).accuracy == 1.0
    # -1.5 is within reach and crosses; -2 sits just past the budget once tol is added
    m = evaluate(LinearGraphClassifier([1.0], 0.0), v, ResponseConfig(), strategic=True)
    assert m.accuracy == 0.75 and m.harm == 0.25 and type(m.crossed_neg) is float


def test_naive_on_cascade_scores_zero():
    inst = cascade_graph(3)
    v = inst.to_bundle().view("test")
    m = evaluate(inst.clf, v, inst.config)
    assert m.accuracy == 0.0 and m.n_eval == 3 and m.rounds == 3


def test_aggregate():
    assert aggregate([0.5]) == (0.5, 0.0)
    mean, se = aggregate([1.0, 2.0, 3.0])
    assert mean == 2.0 and se == pytest.approx(1 / math.sqrt(3))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"arms": ["bogus"]}, {"arms": []}, {"axis": "beta"}, {"values": []}, {"seeds": []},
        {"d": -1.0}, {"naive_fit": "x"}, {"ordering": "pagerank"}, {"axis": "K", "values": [1]},
        {"axis": "alpha", "values": [1.5]}, {"axis": "T", "values": [1.5]},
        {"dataset": {"kind": "bundle", "path": "x"}, "axis": "alpha"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgument):
            small_config(**kw)

    def test_unknown_key(self):
        with pytest.raises(InvalidArgument):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_round_trip(self, tmp_path):
        cfg = small_config(train={**SCAN, "beta": "inf"})
        assert math.isinf(cfg.train.beta)
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg


def test_d_zero_strategic_equals_benchmark():
    cfg = small_config(axis="d", values=[0.0], seeds=[0])
    row = run_sweep(cfg)[0]
    assert row["naive_accuracy"] == row["benchmark_accuracy"]
    assert row["naive_moved"] == 0.0


def test_T_sweep_flat_without_graph():
    cfg = small_config(axis="T", values=[1, 4], seeds=[0, 1], dataset={"kind": "synthetic", "n": 200, "alpha": 0.0},
                       arms=["robust"], train={**SCAN, "scan_grid": [-1.0, 2.0, 0.05]})
    s = summarize(run_sweep(cfg), cfg.arms)
    assert abs(s[0]["robust_accuracy_mean"] - s[1]["robust_accuracy_mean"]) <= 0.02


def test_run_arms_optimum_at_least_naive_on_train():
    b = generate_synthetic(100, 0.7, 0)
    cfg = small_config(arms=["naive", "optimum"])
    out = run_arms(b, cfg, 2.0, 3, 0)
    assert set(out) == {"naive", "optimum"}
    tr = b.view("train")
    rc = ResponseConfig.from_distance(2.0)
    assert evaluate(out["optimum"][0], tr, rc).accuracy >= evaluate(out["naive"][0], tr, rc).accuracy


def test_sweep_rows_and_determinism():
    cfg = small_config(values=[0.0, 0.7])
    rows = run_sweep(cfg)
    assert [(r["value"], r["seed"]) for r in rows] == [(0.0, 0), (0.0, 1), (0.7, 0), (0.7, 1)]
    for r in rows:
        for arm in cfg.arms:
            assert r[f"{arm}_accuracy"] - r[f"{arm}_accuracy_before"] == pytest.approx(r[f"{arm}_gain"] - r[f"{arm}_harm"])
    assert to_csv(rows) == to_csv(run_sweep(cfg))
    s = summarize(rows, cfg.arms)
    assert [x["value"] for x in s] == [0.0, 0.7] and s[0]["seeds"] == 2


class TestAblation:
    def skewed(self):
        # node 0 feeds everyone, the others form a sparse ring
        n = 30
        pairs = [(0, i) for i in range(1, n)] + [(i, i % (n - 1) + 1) for i in range(1, n)] + [(n - 1, 0)]
        return DatasetBundle(DirectedGraph.from_pairs(n, sorted(set(pairs))), np.zeros(n), np.ones(n, dtype=int),
                             np.arange(15), np.arange(15, 30), {"embedding": {"scheme": "alpha", "alpha": 0.5}})

    def test_degree_order(self):
        assert ablation_order(self.skewed(), "degree", 0)[0] == 0

    def test_q_bounds(self):
        b = self.skewed()
        assert disconnect_top(b, 0, "degree", 0).graph == b.graph
        assert disconnect_top(b, 100, "degree", 0).graph.edges == ()
        with pytest.raises(InvalidArgument):
            disconnect_top(b, 101, "degree", 0)

    def test_orderings_differ(self):
        b = self.skewed()
        by_degree = len(disconnect_top(b, 10, "degree", 0).graph.edges)
        at_random = len(disconnect_top(b, 10, "random", 0).graph.edges)
        assert by_degree < at_random

    def test_sweep_on_synthetic(self):
        cfg = small_config(axis="q", values=[0, 100], seeds=[0])
        rows = run_sweep(cfg)
        assert rows[1]["edges"] == 0 and rows[0]["edges"] > 0
        # with every out-edge cut each node embeds as itself
        alpha0 = run_arms(generate_synthetic(100, 0.0, 0), cfg, cfg.d, 3, 0)
        assert rows[1]["naive_accuracy"] == alpha0["naive"][1].accuracy
