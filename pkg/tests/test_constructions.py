import numpy as np
import pytest

from stratgraph import InvalidArgument, LinearGraphClassifier, hitchhikers, simulate_dynamics
from stratgraph.constructions import (
    CONSTRUCTIONS,
    cascade_graph,
    cascade_with_late_movers,
    circular_diameter_graph,
    clique,
    gap_examples,
    graph_diameter,
    hitchhike_example,
)
from stratgraph.training import default_threshold_grid, line_search_threshold, threshold_classifier

from oracles import naive_rounds


def run(inst, clf=None):
    return simulate_dynamics(clf or inst.clf, inst.X, inst.W, inst.config)


def moved_dict(trace):
    return {i: r for i, r in enumerate(trace.moved_round) if r is not None}


def test_hitchhike_annotations():
    inst = hitchhike_example()
    trace = run(inst)
    exp = inst.expected
    assert np.allclose(trace.scores_by_round[0], exp["initial_embedding"], atol=1e-12)
    assert moved_dict(trace) == exp["moved_round"]
    for i, x in exp["moved_to"].items():
        assert trace.features_by_round[-1][i, 0] == pytest.approx(x, abs=1e-9)
    assert trace.final_predictions.tolist() == exp["final_predictions"]
    assert hitchhikers(trace) == exp["hitchhikers"]


@pytest.mark.parametrize("n", range(1, 31))
def test_cascade(n):
    inst = cascade_graph(n)
    trace = run(inst)
    assert moved_dict(trace) == inst.expected["moved_round"]
    assert trace.rounds == n
    final = trace.features_by_round[-1][:, 0]
    for i, x in inst.expected["moved_to"].items():
        assert final[i] == pytest.approx(x, abs=1e-9)
    # the finish node never moves and the evaluated nodes all end up wrong
    assert trace.moved_round[0] is None and trace.moved_round[n + 1] is None
    assert np.all(trace.final_predictions[1:n + 1] == 1)


@pytest.mark.parametrize("n", [1, 4, 9])
def test_cascade_matches_loop_oracle(n):
    inst = cascade_graph(n)
    moved, _ = naive_rounds(inst.clf.theta, inst.clf.b, inst.X, inst.W.wtilde(), inst.config.beta, inst.config.tol)
    assert moved == run(inst).moved_round


def test_cascade_naive_threshold_scores_zero():
    inst = cascade_graph(3)
    trace = run(inst)
    assert np.mean(trace.final_predictions[inst.eval_nodes] == inst.y[inst.eval_nodes]) == 0.0


@pytest.mark.parametrize("n,k", [(5, 3), (4, 4), (6, 1), (6, 2), (8, 5)])
def test_late_movers(n, k):
    inst = cascade_with_late_movers(n, k)
    trace = run(inst)
    assert moved_dict(trace) == inst.expected["moved_round"]
    assert trace.rounds == k
    assert sum(r is not None for r in trace.moved_round) == n
    for j in inst.expected["late_movers"]:
        # nobody in the leaf set moves before round k
        assert trace.moved_round[j] == k


def test_late_movers_invalid():
    with pytest.raises(InvalidArgument):
        cascade_with_late_movers(3, 4)


def test_gap_examples_by_threshold_scan():
    large, none = gap_examples()
    grid = default_threshold_grid(-3, 3, 0.005)
    for inst in (large, none):
        _, non = line_search_threshold(inst.X, inst.W, inst.y, inst.config, grid, strategic=False)
        _, strat = line_search_threshold(inst.X, inst.W, inst.y, inst.config, grid)
        assert non.max() == 1.0
        if inst is large:
            assert strat.max() == pytest.approx(large.expected["strategic_optimum"], abs=1e-12)
        else:
            assert strat.max() == 1.0


def test_gap_none_annotated_threshold():
    _, none = gap_examples()
    trace = run(none)
    assert trace.final_predictions.tolist() == none.y.tolist()
    assert trace.features_by_round[-1][0, 0] == pytest.approx(none.expected["x1_after"], abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_clique_all_or_none(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        X = rng.normal(-1.0, 1.0, size=(n, 2))
        inst = clique(n, X, LinearGraphClassifier(rng.normal(size=2), float(rng.normal())), beta=float(rng.uniform(0.3, 3)))
        trace = run(inst)
        # every node shares one embedding, so they agree before and after
        assert len(set(trace.initial_predictions.tolist())) == 1
        assert len(set(trace.final_predictions.tolist())) == 1
        assert trace.rounds <= 1


def test_clique_too_small():
    with pytest.raises(InvalidArgument):
        clique(1, [0.0], threshold_classifier(0.0))


@pytest.mark.parametrize("n", [3, 5, 8, 12])
def test_circular_rounds_exceed_diameter(n):
    inst = circular_diameter_graph(n)
    trace = run(inst)
    assert trace.rounds == n
    assert graph_diameter(inst.W) == inst.expected["diameter"]
    assert moved_dict(trace) == inst.expected["moved_round"]
    assert all(trace.moved_round[i] is None for i in inst.expected["never_move"])
    if n >= 5:
        assert trace.rounds > graph_diameter(inst.W)


def test_registry_builds_everything():
    for name, make in CONSTRUCTIONS.items():
        inst = make()
        b = inst.to_bundle()
        assert np.allclose(b.weights().wtilde(), inst.W.wtilde())
        assert b.test_mask.sum() == (len(inst.eval_nodes) if inst.eval_nodes is not None else inst.n)
