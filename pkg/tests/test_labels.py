import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundcorr.errors import (
    DuplicateSymbolError,
    EmptyFileError,
    InvalidAlignmentError,
    MalformedLineError,
    NoSilenceSymbolError,
    NonContiguousError,
    UnknownClassError,
    UnknownPhoneError,
)
from boundcorr.labels import (
    Alignment,
    Segment,
    format_seconds,
    parse_label_file,
    parse_phoneset,
    parse_symbol_map,
    serialize_label_file,
    serialize_phoneset,
)


def test_parse_two_segments(phoneset):
    a = parse_label_file("0.0\t0.1\tsil\n0.1\t0.25\ta\n", phoneset)
    assert len(a) == 2
    assert a.segments[1].phone == "a"
    assert a.segments[1].end == 0.25


def test_serialize_single_segment():
    a = Alignment("u", (Segment("sil", 0.0, 0.5),))
    assert serialize_label_file(a) == "0.000000\t0.500000\tsil\n"


def test_parse_phoneset_example():
    ps = parse_phoneset("sil\tsilence\na\tvowel\ni1\tvowel\tstressed\nt\tconsonant\n")
    assert len(ps) == 4
    assert ps.is_stressed_vowel("i1") and not ps.is_stressed_vowel("a")
    assert ps.silence_symbol == "sil"
    assert parse_phoneset(serialize_phoneset(ps)) == ps


@pytest.mark.parametrize("text, exc", [
    ("sil\tsilence\nsil\tsilence\n", DuplicateSymbolError),
    ("sil\tsilence\nx\tglide\n", UnknownClassError),
    ("a\tvowel\n", NoSilenceSymbolError),
])
def test_phoneset_errors(text, exc):
    with pytest.raises(exc):
        parse_phoneset(text)


def test_label_errors(phoneset):
    with pytest.raises(EmptyFileError):
        parse_label_file("\n\n", phoneset)
    with pytest.raises(MalformedLineError) as e:
        parse_label_file("0.0\t0.1\tsil\n0.1 0.2 a\n", phoneset)
    assert e.value.line_no == 2
    with pytest.raises(NonContiguousError) as e:
        parse_label_file("0.0\t0.1\tsil\n0.2\t0.3\ta\n", phoneset)
    assert e.value.line_no == 2
    with pytest.raises(UnknownPhoneError) as e:
        parse_label_file("0.0\t0.1\tsil\n0.1\t0.3\tzz\n", phoneset)
    assert (e.value.symbol, e.value.line_no) == ("zz", 2)
    with pytest.raises(MalformedLineError):
        parse_label_file("0.2\t0.1\tsil\n", phoneset)


def test_alignment_rejects_gaps():
    with pytest.raises(NonContiguousError):
        Alignment("u", (Segment("a", 0, 1), Segment("b", 1.5, 2)))
    with pytest.raises(InvalidAlignmentError):
        Segment("a", 0.3, 0.3)


def test_symbol_map():
    assert parse_symbol_map("AX\ta\n# comment\nT\tt\n") == {"AX": "a", "T": "t"}


def test_format_seconds_no_negative_zero():
    assert format_seconds(-1e-12) == "0.000000"
    assert format_seconds(-0.0125) == "-0.012500"


@st.composite
def alignments(draw, phones=("sil", "a", "e1", "t", "n")):
    n = draw(st.integers(1, 12))
    ticks = draw(st.lists(st.integers(1, 400_000), min_size=n, max_size=n))
    start = draw(st.integers(0, 1000))
    bounds = [start]
    for t in ticks:
        bounds.append(bounds[-1] + t)
    syms = draw(st.lists(st.sampled_from(phones), min_size=n, max_size=n))
    return Alignment.from_boundaries("u", syms, [b / 1e6 for b in bounds])


@settings(max_examples=300, deadline=None)
@given(alignments())
def test_label_roundtrip(phoneset, a):
    text = serialize_label_file(a)
    b = parse_label_file(text, phoneset, "u")
    assert b == a
    assert serialize_label_file(b) == text
    total = math.fsum(s.duration for s in b.segments)
    assert total == pytest.approx(b.end - b.start, abs=1e-9)
