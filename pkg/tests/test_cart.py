import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundcorr.cart import (
    Leaf,
    Question,
    RegressionTree,
    TrainingExample,
    evaluate,
    metrics_from_predictions,
    parse_tree,
    read_training_csv,
    serialize_tree,
    train,
    write_training_csv,
)
from boundcorr.errors import EmptyExamplesError, ParseError, SchemaHashMissingError, SchemaMismatchError
from boundcorr.features import Senone, extract_senones
from boundcorr.sim import SimConfig, generate_corpus

NAMES = ("a", "b", "n")


def ex(a, b, n, y, h="h"):
    return TrainingExample(Senone(h, NAMES, (a, b, n)), y)


def test_constant_targets_single_leaf():
    exs = [ex("x", "p", i, 0.02) for i in range(50)]
    tree = train(exs, 5)
    assert tree.root == Leaf(0.02, 0.0, 50)


def test_depth_one_split():
    exs = [ex("x" if i < 20 else "y", "p", i % 3, 0.03 if i < 20 else -0.01) for i in range(40)]
    tree = train(exs, 5)
    assert isinstance(tree.root, Question)
    assert (tree.root.feature, tree.root.op, tree.root.value) == ("a", "is", "x")
    assert tree.root.yes == Leaf(0.03, 0.0, 20)
    assert tree.root.no == Leaf(-0.01, 0.0, 20)


def test_numeric_midpoint_threshold():
    exs = [ex("x", "p", n, 0.0 if n <= 2 else 1.0) for n in range(6) for _ in range(5)]
    tree = train(exs, 5)
    assert tree.root.feature == "n" and tree.root.op == "<=" and tree.root.value == 2.5


def test_tie_breaks_to_earlier_feature():
    # "a" and "b" carry identical information; schema order decides
    exs = [ex(v, v, 0, 1.0 if v == "q" else 0.0) for v in ("q", "r") for _ in range(10)]
    tree = train(exs, 5)
    assert tree.root.feature == "a" and tree.root.value == "q"


def test_stop_size_larger_than_data():
    exs = [ex("x", "p", i, float(i)) for i in range(8)]
    tree = train(exs, 25)
    assert isinstance(tree.root, Leaf) and tree.root.count == 8


def test_unknown_category_routes_no():
    tree = RegressionTree("h", Question("a", "is", "x", Leaf(1.0, 0, 5), Leaf(2.0, 0, 5)))
    assert tree.predict(Senone("h", NAMES, ("unseen", "p", 0))) == 2.0
    assert tree.predict(Senone("h", NAMES, ("x", "p", 0))) == 1.0


def test_schema_mismatch():
    tree = RegressionTree("h", Leaf(0.1, 0, 5))
    with pytest.raises(SchemaMismatchError):
        tree.predict(Senone("other", NAMES, ("x", "p", 0)))
    with pytest.raises(SchemaMismatchError):
        train([ex("x", "p", 0, 0.0), ex("x", "p", 0, 0.0, h="other")], 1)
    with pytest.raises(EmptyExamplesError):
        train([], 5)


def test_single_leaf_predicts_mean():
    tree = RegressionTree("h", Leaf(0.015, 0.004, 25))
    assert all(tree.predict(Senone("h", NAMES, (a, "p", 3))) == 0.015 for a in "xyz")


def test_leaf_serialization():
    text = serialize_tree(RegressionTree("abc", Leaf(0.015, 0.004, 25)))
    assert text == ";; schema_hash abc\n((0.015000 0.004000 25))\n"
    assert parse_tree(text) == RegressionTree("abc", Leaf(0.015, 0.004, 25))


def test_quoted_atoms_roundtrip():
    tree = RegressionTree("h", Question("odd name", "is", "a(b)", Leaf(0.1, 0.0, 5),
                                        Question("n", "<=", 2.5, Leaf(-0.1, 0.01, 6), Leaf(0.0, 0.0, 7))))
    assert parse_tree(serialize_tree(tree)) == tree


def test_parse_errors():
    text = serialize_tree(RegressionTree("h", Question("a", "is", "x", Leaf(1.0, 0, 5), Leaf(2.0, 0, 5))))
    with pytest.raises(ParseError) as e:
        parse_tree(text[:-4])
    assert e.value.position >= 0
    with pytest.raises(SchemaHashMissingError):
        parse_tree("((0.1 0.0 5))\n")
    with pytest.raises(ParseError):
        parse_tree(";; schema_hash h\n((a is x) ((1 0 5)) ((2 0 5))) extra\n")


def test_metrics_exact_and_zero_variance():
    m = metrics_from_predictions([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    assert m.rmse == 0 and m.mean_abs_error == 0 and m.correlation == pytest.approx(1.0)
    assert metrics_from_predictions([0.5, 0.5], [0.1, 0.3]).correlation == 0.0
    assert metrics_from_predictions([0.1, 0.3], [0.2, 0.2]).correlation == 0.0


def test_training_csv_roundtrip(phoneset, schema):
    corpus = generate_corpus(SimConfig(seed=4, utterance_count=2), phoneset, schema)
    senones = extract_senones(corpus[0].structure, phoneset, schema)
    exs = [TrainingExample(s, i / 1000) for i, s in enumerate(senones)]
    buf = io.StringIO()
    write_training_csv(exs, schema, buf)
    assert read_training_csv(buf.getvalue(), schema) == exs


def test_evaluate_matches_predictions():
    exs = [ex("x" if i % 2 else "y", "p", i, 0.01 * (i % 2) + 0.001 * i) for i in range(30)]
    tree = train(exs, 5)
    m = evaluate(tree, exs)
    pred = np.array([tree.predict(e.senone) for e in exs])
    y = np.array([e.target for e in exs])
    assert m.rmse == pytest.approx(math.sqrt(np.mean((pred - y) ** 2)), rel=1e-12)


def _routed(tree, examples):
    groups = {}
    for e in examples:
        groups.setdefault(id(tree.route(e.senone)), []).append(e.target)
    return groups


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 80))
    rows = draw(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("pq"), st.integers(0, 5),
                                   st.integers(-50, 50)), min_size=n, max_size=n))
    return [ex(a, b, k, y / 1000) for a, b, k, y in rows], draw(st.integers(1, 10))


@settings(max_examples=300, deadline=None)
@given(datasets())
def test_tree_invariants(data):
    exs, stop = data
    tree = train(exs, stop)
    leaves = {id(lf): lf for lf in tree.leaves()}
    groups = _routed(tree, exs)
    assert sum(lf.count for lf in leaves.values()) == len(exs)
    for key, ys in groups.items():
        lf = leaves[key]
        assert lf.count == len(ys)
        assert lf.mean == pytest.approx(math.fsum(ys) / len(ys), rel=1e-12, abs=1e-15)
        if tree.n_leaves > 1:
            assert lf.count >= stop
    # every split strictly reduces the count-weighted variance
    stack = [(tree.root, exs)]
    while stack:
        node, sub = stack.pop()
        if isinstance(node, Leaf):
            continue
        yes = [e for e in sub if node.ask(e.senone[node.feature])]
        no = [e for e in sub if not node.ask(e.senone[node.feature])]

        def sse(items):
            ys = [e.target for e in items]
            m = math.fsum(ys) / len(ys)
            return math.fsum((y - m) ** 2 for y in ys)

        assert sse(yes) + sse(no) < sse(sub)
        stack += [(node.yes, yes), (node.no, no)]
    assert parse_tree(serialize_tree(tree)).n_leaves == tree.n_leaves


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from("xyz"), st.integers(-40, 40), min_size=1),
       st.dictionaries(st.sampled_from("pq"), st.integers(-40, 40), min_size=1),
       st.integers(1, 5))
def test_group_mean_oracle(fa, fb, stop):
    # additive effects on a balanced grid are recoverable by greedy splitting
    exs = [ex(a, b, 0, (fa[a] + fb[b]) / 1000) for a in fa for b in fb for _ in range(stop + 2)]
    tree = train(exs, stop)
    for a in fa:
        for b in fb:
            assert tree.predict(Senone("h", NAMES, (a, b, 0))) == pytest.approx((fa[a] + fb[b]) / 1000,
                                                                                abs=1e-15)


def test_pure_interaction_is_not_split():
    # no single question reduces variance, so the greedy stop rule keeps one leaf
    table = {("x", "p"): 1.0, ("x", "q"): 0.0, ("y", "p"): 0.0, ("y", "q"): 1.0}
    exs = [ex(a, b, 0, y) for (a, b), y in table.items() for _ in range(3)]
    assert train(exs, 1).root == Leaf(0.5, 0.5, 12)
