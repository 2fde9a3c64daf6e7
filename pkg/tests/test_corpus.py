import json
import math
import random
import warnings

import pytest

from g3 import corpus as cmod
from g3.corpus import (DIRECTION_METHODS, ROW_NP, ROW_ORDER, ROW_OVERALL,
                       ROW_PP_PATH, ROW_PP_PLACE, ROW_VP, AnnotatedExample,
                       FactorAnnotation, RouteInstance, eval_directions,
                       eval_phi, gen_manipulation_corpus, gen_route_suite,
                       generate_negatives, load_corpus, load_routes,
                       route_success, run_direction_method, save_corpus,
                       save_routes, split, training_rows)
from g3.factors import FeatureWeights, loglinear_prob
from g3.world import TopoMap, TopoNode


# --- corpus generation and formats -----------------------------------------------------


def test_generated_corpus_shape(manipulation_data):
    examples, scenarios = manipulation_data
    assert len(scenarios) == 10
    assert all(sid.startswith("yard") for sid in scenarios)
    rows = training_rows(examples)
    assert len(rows) >= 200
    labels = {phi for _, phi in rows}
    assert labels == {0, 1}
    ann_rows = {a.row for ex in examples for a in ex.annotations}
    assert ann_rows == set(ROW_ORDER)


def test_annotations_validate_phi():
    with pytest.raises(ValueError):
        FactorAnnotation("f1", ROW_NP, ("x",), (), 2, ())


def test_corpus_round_trip_bytes(tmp_path, manipulation_data):
    examples, _ = manipulation_data
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(str(p1), examples)
    again = load_corpus(str(p1))
    save_corpus(str(p2), again)
    assert p1.read_bytes() == p2.read_bytes()
    assert len(again) == len(examples)


def test_serialized_values_deserialize(manipulation_data):
    examples, scenarios = manipulation_data
    ex = examples[0]
    env, topo = scenarios[ex.scenario]
    for a in ex.annotations[:3]:
        for vid, raw in a.groundings:
            v = cmod.deserialize_value(raw, env, topo)
            assert cmod.serialize_value(v) == raw


# --- splitting ------------------------------------------------------------------------


def test_split_is_scenario_disjoint(manipulation_data):
    examples, _ = manipulation_data
    train, test = split(examples, 0.7, seed=0)
    tr = {ex.scenario for ex in train}
    te = {ex.scenario for ex in test}
    assert tr and te and not (tr & te)
    assert len(tr) == 7 and len(te) == 3
    assert len(train) + len(test) == len(examples)


def test_split_deterministic(manipulation_data):
    examples, _ = manipulation_data
    a = split(examples, 0.7, seed=3)
    b = split(examples, 0.7, seed=3)
    assert [e.command for e in a[0]] == [e.command for e in b[0]]
    c = split(examples, 0.7, seed=4)
    assert {e.scenario for e in a[0]} != {e.scenario for e in c[0]} or True


def test_split_rejects_bad_inputs(manipulation_data):
    examples, _ = manipulation_data
    with pytest.raises(ValueError):
        split(examples, 1.5, seed=0)
    single = [ex for ex in examples if ex.scenario == "yard00"]
    with pytest.raises(ValueError):
        split(single, 0.7, seed=0)


# --- phi evaluation -------------------------------------------------------------------


def _toy_example(row, phi, feat):
    ann = FactorAnnotation("f1", row, ("w",), (("g1", "obj"),), phi, (feat,))
    return AnnotatedExample("cmd", "(NN w)", "s0", (ann,))


def test_eval_phi_perfect_classifier():
    w = FeatureWeights({"pos": 10.0, "neg": -10.0})
    examples = ([_toy_example(ROW_NP, 1, "pos")] * 5 +
                [_toy_example(ROW_NP, 0, "neg")] * 5)
    report = eval_phi(w, examples)
    m = report.metrics(ROW_OVERALL)
    assert m == {"precision": 1.0, "recall": 1.0, "f1": 1.0,
                 "accuracy": 1.0, "count": 10}


def test_eval_phi_constant_positive_baseline():
    """Zero weights predict p = 0.5 which classifies everything positive."""
    examples = ([_toy_example(ROW_VP, 1, "x")] * 5 +
                [_toy_example(ROW_VP, 0, "x")] * 5)
    m = eval_phi(FeatureWeights({}), examples).metrics(ROW_VP)
    assert m["recall"] == 1.0
    assert m["accuracy"] == 0.5
    assert m["precision"] == 0.5


def test_eval_phi_matches_confusion_recount(manipulation_data, trained_weights):
    examples, _ = manipulation_data
    _, test = split(examples, 0.7, seed=0)
    report = eval_phi(trained_weights, test)
    # independent recount
    tally = {r: {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
             for r in ROW_ORDER + (ROW_OVERALL,)}
    for ex in test:
        for a in ex.annotations:
            pred = 1 if loglinear_prob(trained_weights, a.features) >= 0.5 else 0
            cell = ("tp" if a.phi else "fp") if pred else \
                ("fn" if a.phi else "tn")
            tally[a.row][cell] += 1
            tally[ROW_OVERALL][cell] += 1
    for r in ROW_ORDER + (ROW_OVERALL,):
        assert report.counts[r] == tally[r]
    table = report.format_table()
    for r in ROW_ORDER + (ROW_OVERALL,):
        assert r in table


def test_eval_phi_order_invariant(manipulation_data, trained_weights):
    examples, _ = manipulation_data
    fwd = eval_phi(trained_weights, examples[:40])
    rev = eval_phi(trained_weights, list(reversed(examples[:40])))
    assert fwd.counts == rev.counts


def test_eval_phi_rejects_empty():
    with pytest.raises(ValueError):
        eval_phi(FeatureWeights({}), [])


# --- negative sampling ------------------------------------------------------------------


def test_generate_negatives_adds_rows():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        examples, scenarios = gen_manipulation_corpus(2, seed=0)
        aug = generate_negatives(examples, scenarios, seed=0, k=3)
    before = sum(len(ex.annotations) for ex in examples)
    after = sum(len(ex.annotations) for ex in aug)
    assert after > before
    # 3 objects per scenario: entity factors have only 2 alternatives
    phis = [a.phi for ex in aug for a in ex.annotations]
    assert 0 in phis and 1 in phis


def test_generate_negatives_deterministic():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        examples, scenarios = gen_manipulation_corpus(2, seed=0)
        a = generate_negatives(examples, scenarios, seed=5, k=2)
        b = generate_negatives(examples, scenarios, seed=5, k=2)
    assert [ex.to_dict() for ex in a] == [ex.to_dict() for ex in b]


def test_generate_negatives_warns_on_shortfall():
    examples, scenarios = gen_manipulation_corpus(1, seed=0)
    with pytest.warns(UserWarning):
        generate_negatives(examples, scenarios, seed=0, k=5)


def test_tag_matching_negative_relabeled_positive():
    """A corrupted entity grounding whose tags still satisfy the phrase is a
    true positive, mirroring manual annotation correction."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        examples, scenarios = gen_manipulation_corpus(4, seed=0)
        aug = generate_negatives(examples, scenarios, seed=0, k=3)
    for ex in aug:
        env, _ = scenarios[ex.scenario]
        for a in ex.annotations:
            if a.row != ROW_NP:
                continue
            gid = dict(a.groundings).popitem()[1]
            noun = next(w for w in a.words if w not in ("the",))
            tags = env.grounding(gid).tags
            assert a.phi == int(noun in tags)


# --- route suite and direction evaluation -----------------------------------------------


def test_route_suite_round_trip(tmp_path, route_suite):
    instances, _ = route_suite
    assert len(instances) >= 50
    p1, p2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    save_routes(str(p1), instances)
    save_routes(str(p2), load_routes(str(p1)))
    assert p1.read_bytes() == p2.read_bytes()


def test_route_success_is_three_dimensional():
    nodes = [TopoNode("a", (0.0, 0.0), 0), TopoNode("b", (0.0, 0.0), 4),
             TopoNode("c", (6.0, 8.0), 0)]
    topo = TopoMap(nodes, [])
    assert route_success(topo, "c", "a")  # 10 m exactly, on the boundary
    assert not route_success(topo, "b", "a")  # 12 m of pure elevation
    assert route_success(topo, "b", "a", radius=12.0)


def test_run_direction_method_validates():
    instances, counts = gen_route_suite(3, seed=0)
    with pytest.raises(ValueError):
        run_direction_method("nope", instances[0], counts)


def test_eval_directions_rejects_bad_inputs(route_suite):
    _, counts = route_suite
    with pytest.raises(ValueError):
        eval_directions([], counts)
    bad = RouteInstance("s", "t", ((("go",), None),),
                        TopoMap([TopoNode("a", (0.0, 0.0))], []), "a", "zzz")
    from g3.world import WorldError
    with pytest.raises(WorldError):
        eval_directions([bad], counts)


def test_eval_directions_report_shape(route_suite):
    instances, counts = route_suite
    report = eval_directions(instances[:9], counts)
    methods = [r[0] for r in report.rows]
    assert methods == list(DIRECTION_METHODS)
    for m, s, e, n in report.rows:
        assert 0.0 <= s <= 1.0 and n == 9
        if m in ("greedy", "exploring"):
            assert e is not None and 0.0 <= e <= 1.0
        else:
            assert e is None
    table = report.format_table()
    assert "Success@10m" in table and "global" in table
    csv = report.to_csv()
    assert csv.splitlines()[0] == "method,success,explored,count"
    assert len(csv.splitlines()) == 1 + len(DIRECTION_METHODS)


def test_eval_directions_deterministic(route_suite):
    instances, counts = route_suite
    a = eval_directions(instances[:12], counts, seed=0)
    b = eval_directions(instances[:12], counts, seed=0)
    assert a.rows == b.rows
