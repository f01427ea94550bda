"""Timed phone segments, alignments, phone sets and their text formats.

Label files hold one ``start<TAB>end<TAB>phone`` record per line with times
in seconds; serialization always writes six decimals.  Phone-set files hold
``symbol<TAB>class[<TAB>stressed]`` records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateSymbolError,
    EmptyFileError,
    InvalidAlignmentError,
    MalformedLineError,
    NoSilenceSymbolError,
    NonContiguousError,
    UnknownClassError,
    UnknownPhoneError,
)

VOWEL = "vowel"
CONSONANT = "consonant"
SILENCE = "silence"
PHONE_CLASSES = (VOWEL, CONSONANT, SILENCE)

# adjacent records whose shared boundary differs by less than this are snapped
CONTIGUITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PhoneInfo:
    phone_class: str
    stressed_vowel: bool = False


class PhoneSet:
    """Mapping from phone symbol to its class (vowel, consonant or silence)."""

    def __init__(self, entries: Mapping[str, PhoneInfo]):
        entries = dict(entries)
        for symbol, info in entries.items():
            if not symbol or symbol != symbol.strip() or any(c.isspace() for c in symbol):
                raise MalformedLineError(0, f"bad phone symbol {symbol!r}")
            if info.phone_class not in PHONE_CLASSES:
                raise UnknownClassError(info.phone_class)
            if info.stressed_vowel and info.phone_class != VOWEL:
                raise UnknownClassError(f"{symbol}: only vowels may be marked stressed")
        if not any(i.phone_class == SILENCE for i in entries.values()):
            raise NoSilenceSymbolError("phone set declares no silence symbol")
        self._entries = entries

    @property
    def entries(self) -> dict[str, PhoneInfo]:
        return dict(self._entries)

    @property
    def symbols(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, symbol) -> bool:
        return symbol in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, PhoneSet) and self._entries == other._entries

    def phone_class(self, symbol: str) -> str:
        try:
            return self._entries[symbol].phone_class
        except KeyError:
            raise UnknownPhoneError(symbol) from None

    def is_stressed_vowel(self, symbol: str) -> bool:
        try:
            return self._entries[symbol].stressed_vowel
        except KeyError:
            raise UnknownPhoneError(symbol) from None

    def is_silence(self, symbol: str) -> bool:
        return self.phone_class(symbol) == SILENCE

    def of_class(self, phone_class: str) -> list[str]:
        return [s for s, i in self._entries.items() if i.phone_class == phone_class]

    @property
    def silence_symbol(self) -> str:
        """The first declared silence symbol."""
        return self.of_class(SILENCE)[0]

    def __repr__(self):
        return f"PhoneSet({len(self)} symbols)"


@dataclass(frozen=True)
class Segment:
    phone: str
    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise InvalidAlignmentError(f"non-finite time in {self}")
        if self.start < 0:
            raise InvalidAlignmentError(f"negative start in {self}")
        if not self.end > self.start:
            raise InvalidAlignmentError(f"segment {self.phone!r} has end <= start")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Alignment:
    """Contiguous, non-empty tiling of one utterance into phone segments."""

    utterance_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        object.__setattr__(self, "segments", segments)
        if not segments:
            raise InvalidAlignmentError("alignment must contain at least one segment")
        for i in range(len(segments) - 1):
            if segments[i].end != segments[i + 1].start:
                raise NonContiguousError(i + 2)

    @classmethod
    def from_boundaries(cls, utterance_id: str, phones: Sequence[str],
                        boundaries: Sequence[float]) -> "Alignment":
        """Build from ``len(phones) + 1`` boundary times."""
        if len(boundaries) != len(phones) + 1:
            raise InvalidAlignmentError("need one more boundary than phones")
        segs = tuple(Segment(p, boundaries[i], boundaries[i + 1]) for i, p in enumerate(phones))
        return cls(utterance_id, segs)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def phones(self) -> list[str]:
        return [s.phone for s in self.segments]

    @property
    def boundaries(self) -> list[float]:
        return [self.segments[0].start] + [s.end for s in self.segments]

    @property
    def start(self) -> float:
        return self.segments[0].start

    @property
    def end(self) -> float:
        return self.segments[-1].end


def format_seconds(x: float) -> str:
    """Six-decimal rendering without a negative zero."""
    return f"{round(x, 6) + 0.0:.6f}"


def parse_label_file(text: str, phoneset: PhoneSet, utterance_id: str = "") -> Alignment:
    segments: list[Segment] = []
    prev_end = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 3 or not fields[2]:
            raise MalformedLineError(line_no, "expected start<TAB>end<TAB>phone")
        try:
            start, end = float(fields[0]), float(fields[1])
        except ValueError:
            raise MalformedLineError(line_no, "times must be decimal seconds") from None
        if not (math.isfinite(start) and math.isfinite(end)) or start < 0 or end <= start:
            raise MalformedLineError(line_no, "need finite 0 <= start < end")
        phone = fields[2]
        if phone not in phoneset:
            raise UnknownPhoneError(phone, line_no)
        if prev_end is not None:
            if abs(start - prev_end) > CONTIGUITY_TOLERANCE:
                raise NonContiguousError(line_no, f"{prev_end} != {start}")
            start = prev_end
            if end <= start:
                raise MalformedLineError(line_no, "need start < end")
        segments.append(Segment(phone, start, end))
        prev_end = end
    if not segments:
        raise EmptyFileError("label file holds no records")
    return Alignment(utterance_id, tuple(segments))


def serialize_label_file(alignment: Alignment) -> str:
    return "".join(f"{s.start:.6f}\t{s.end:.6f}\t{s.phone}\n" for s in alignment.segments)


def parse_phoneset(text: str) -> PhoneSet:
    entries: dict[str, PhoneInfo] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.rstrip("\r").split("\t")
        if len(fields) not in (2, 3) or not fields[0]:
            raise MalformedLineError(line_no, "expected symbol<TAB>class[<TAB>stressed]")
        symbol, cls = fields[0], fields[1]
        if cls not in PHONE_CLASSES:
            raise UnknownClassError(f"line {line_no}: {cls!r}")
        stressed = False
        if len(fields) == 3:
            if fields[2] != "stressed":
                raise MalformedLineError(line_no, "third column must be 'stressed'")
            stressed = True
        if symbol in entries:
            raise DuplicateSymbolError(f"line {line_no}: {symbol!r}")
        entries[symbol] = PhoneInfo(cls, stressed)
    return PhoneSet(entries)


def serialize_phoneset(phoneset: PhoneSet) -> str:
    lines = []
    for symbol, info in phoneset.entries.items():
        fields = [symbol, info.phone_class] + (["stressed"] if info.stressed_vowel else [])
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def parse_symbol_map(text: str) -> dict[str, str]:
    """Read ``hyp_symbol<TAB>ref_symbol`` lines."""
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 2 or not all(fields):
            raise MalformedLineError(line_no, "expected hyp_symbol<TAB>ref_symbol")
        if fields[0] in mapping:
            raise DuplicateSymbolError(f"line {line_no}: {fields[0]!r}")
        mapping[fields[0]] = fields[1]
    return mapping


# Italian SAMPA-like inventory; digit 1 marks the stressed vowel variant
_DEFAULT_VOWELS = ["a", "e", "E", "i", "o", "O", "u"]
_DEFAULT_CONSONANTS = ["p", "b", "t", "d", "k", "g", "f", "v", "s", "z", "S",
                       "ts", "dz", "tS", "dZ", "m", "n", "J", "l", "L", "r", "j", "w"]


def default_phoneset() -> PhoneSet:
    entries: dict[str, PhoneInfo] = {"sil": PhoneInfo(SILENCE)}
    for v in _DEFAULT_VOWELS:
        entries[v] = PhoneInfo(VOWEL)
        entries[v + "1"] = PhoneInfo(VOWEL, stressed_vowel=True)
    for c in _DEFAULT_CONSONANTS:
        entries[c] = PhoneInfo(CONSONANT)
    return PhoneSet(entries)


def phoneset_from_classes(classes: Iterable[tuple[str, str, bool]]) -> PhoneSet:
    return PhoneSet({s: PhoneInfo(c, st) for s, c, st in classes})
