import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundcorr.cart import Leaf, Question, RegressionTree
from boundcorr.correct import correct_alignment, report_to_csv, shift_boundaries
from boundcorr.errors import SchemaMismatchError, StructureAlignmentMismatchError
from boundcorr.features import parse_utterance_structure
from boundcorr.labels import Alignment, serialize_label_file
from boundcorr.sim import SimConfig, generate_corpus


def _two_phone(phoneset):
    doc = {"utterance_id": "u", "words": [{"silence": "sil"},
                                          {"text": "a", "syllables": [{"stressed": False, "phones": ["a"]}]}]}
    return parse_utterance_structure(json.dumps(doc), phoneset)


def _hyp():
    return Alignment.from_boundaries("u", ["sil", "a"], [0.0, 0.10, 0.20])


def test_zero_tree_is_identity(phoneset, schema):
    hyp = _hyp()
    out, rep = correct_alignment(hyp, _two_phone(phoneset), RegressionTree(schema.hash, Leaf(0.0, 0, 1)),
                                 schema, phoneset)
    assert out == hyp
    assert all(b.applied_shift == 0 and not b.clamped for b in rep.boundaries)
    assert serialize_label_file(out) == serialize_label_file(hyp)


def test_plain_shift(phoneset, schema):
    out, rep = correct_alignment(_hyp(), _two_phone(phoneset), RegressionTree(schema.hash, Leaf(0.03, 0, 1)),
                                 schema, phoneset, min_dur=0.005)
    assert out.boundaries == pytest.approx([0.0, 0.13, 0.20], abs=1e-12)
    assert rep.clamp_count == 0


def test_clamped_shift(phoneset, schema):
    out, rep = correct_alignment(_hyp(), _two_phone(phoneset), RegressionTree(schema.hash, Leaf(0.12, 0, 1)),
                                 schema, phoneset, min_dur=0.005)
    assert out.boundaries[1] == pytest.approx(0.195, abs=1e-12)
    assert rep.boundaries[0].clamped and rep.clamp_count == 1
    assert "predicted_shift,applied_shift,clamped" in report_to_csv([rep])


def test_errors(phoneset, schema):
    u = _two_phone(phoneset)
    with pytest.raises(SchemaMismatchError):
        correct_alignment(_hyp(), u, RegressionTree("nope", Leaf(0.0, 0, 1)), schema, phoneset)
    other = Alignment.from_boundaries("u", ["sil", "e"], [0.0, 0.1, 0.2])
    tree = RegressionTree(schema.hash, Leaf(0.0, 0, 1))
    with pytest.raises(StructureAlignmentMismatchError):
        correct_alignment(other, u, tree, schema, phoneset)
    # label mismatch is tolerated when not strict, count mismatch never is
    correct_alignment(other, u, tree, schema, phoneset, strict=False)
    short = Alignment.from_boundaries("u", ["sil"], [0.0, 0.2])
    with pytest.raises(StructureAlignmentMismatchError):
        correct_alignment(short, u, tree, schema, phoneset, strict=False)


def test_context_dependent_tree(phoneset, schema):
    corpus = generate_corpus(SimConfig(seed=9, utterance_count=1), phoneset, schema)
    utt = corpus[0]
    tree = RegressionTree(schema.hash, Question("cur_phone_class", "is", "vowel",
                                                Leaf(0.01, 0, 1), Leaf(-0.002, 0, 1)))
    out, rep = correct_alignment(utt.hyp, utt.structure, tree, schema, phoneset)
    for b, p in zip(rep.boundaries, utt.hyp.phones):
        assert b.predicted_shift == (0.01 if phoneset.phone_class(p) == "vowel" else -0.002)


@st.composite
def shift_cases(draw):
    n = draw(st.integers(2, 15))
    ticks = draw(st.lists(st.integers(1, 300), min_size=n, max_size=n))
    b = [0]
    for t in ticks:
        b.append(b[-1] + t)
    shifts = draw(st.lists(st.integers(-300, 300), min_size=n - 1, max_size=n - 1))
    min_dur = draw(st.sampled_from([0.001, 0.005, 0.02]))
    return [x / 1000 for x in b], [s / 1000 for s in shifts], min_dur


@settings(max_examples=500, deadline=None)
@given(shift_cases())
def test_shift_properties(case):
    bounds, shifts, min_dur = case
    new, applied = shift_boundaries(bounds, shifts, min_dur)
    assert new[0] == bounds[0] and new[-1] == bounds[-1]
    for i in range(1, len(new) - 1):
        a, s = applied[i - 1], shifts[i - 1]
        assert 0 <= a <= s or s <= a <= 0
        assert new[i] == pytest.approx(bounds[i] + a, abs=1e-12)
    for i in range(len(new) - 1):
        orig = bounds[i + 1] - bounds[i]
        assert new[i + 1] - new[i] >= min(orig, min_dur) - 1e-12
