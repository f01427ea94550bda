"""Word/syllable/phone structure of an utterance and per-phone context features.

An utterance is a sequence of words; each word is a sequence of syllables
and each syllable a sequence of phones.  Pauses are standalone pseudo-words
holding a single silence phone.  A :class:`FeatureSchema` names the
features to extract and fixes their order; every name must be known to the
extractor registry below (fixed names plus the ``prevN_``/``nextN_``
families for arbitrary context depth).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

from .errors import (
    EmptySyllableError,
    IndexOutOfRangeError,
    InvalidStructureError,
    MalformedLineError,
    PhoneNotInPhoneSetError,
    SchemaError,
    StructureAlignmentMismatchError,
    UnknownFeatureError,
)
from .labels import CONSONANT, SILENCE, VOWEL, Alignment, PhoneSet

CATEGORICAL = "categorical"
NUMERIC = "numeric"
NONE = "none"
TRUE, FALSE = "true", "false"

Value = Union[str, int]


# --------------------------------------------------------------------------
# utterance structure

@dataclass(frozen=True)
class Syllable:
    stressed: bool
    phones: tuple[str, ...]


@dataclass(frozen=True)
class Word:
    text: str
    syllables: tuple[Syllable, ...]
    silence: bool = False

    @property
    def phones(self) -> list[str]:
        return [p for s in self.syllables for p in s.phones]


@dataclass(frozen=True)
class _PhonePosition:
    phone: str
    word: int            # index into UtteranceStructure.words
    real_word: int       # real words before this phone's word
    syllable: int        # index within the word
    global_syllable: int  # real syllables before this phone's syllable
    in_syllable: int     # index within the syllable
    silence: bool


@dataclass(frozen=True)
class UtteranceStructure:
    utterance_id: str
    words: tuple[Word, ...]

    @cached_property
    def _positions(self) -> tuple[_PhonePosition, ...]:
        out = []
        real_words = 0
        syllables = 0
        for wi, word in enumerate(self.words):
            for si, syl in enumerate(word.syllables):
                for pi, phone in enumerate(syl.phones):
                    out.append(_PhonePosition(phone, wi, real_words, si, syllables, pi, word.silence))
                if not word.silence:
                    syllables += 1
            if not word.silence:
                real_words += 1
        return tuple(out)

    @property
    def phones(self) -> list[str]:
        return [p.phone for p in self._positions]

    def __len__(self) -> int:
        return len(self._positions)

    @cached_property
    def real_words(self) -> tuple[Word, ...]:
        return tuple(w for w in self.words if not w.silence)

    @cached_property
    def _stress_prefix(self) -> tuple[int, ...]:
        # prefix[k] = stressed syllables among the first k real syllables
        prefix = [0]
        for w in self.real_words:
            for s in w.syllables:
                prefix.append(prefix[-1] + int(s.stressed))
        return tuple(prefix)

    def check_against(self, alignment: Alignment) -> None:
        if self.phones != alignment.phones:
            raise StructureAlignmentMismatchError(
                f"{self.utterance_id}: structure phones {' '.join(self.phones)} "
                f"!= alignment phones {' '.join(alignment.phones)}")


def parse_utterance_structure(text: str, phoneset: PhoneSet,
                              alignment: Alignment | None = None) -> UtteranceStructure:
    """Read the JSON structure document.

    Shape::

        {"utterance_id": "u1",
         "words": [{"silence": "sil"},
                   {"text": "in", "syllables": [{"stressed": true, "phones": ["i1", "n"]}]}]}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidStructureError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("words"), list):
        raise InvalidStructureError("expected an object with a 'words' list")
    words = []
    for wi, w in enumerate(doc["words"]):
        if not isinstance(w, dict):
            raise InvalidStructureError(f"word {wi}: expected an object")
        if "silence" in w:
            sym = w["silence"]
            if sym not in phoneset:
                raise PhoneNotInPhoneSetError(f"word {wi}: {sym!r}")
            if phoneset.phone_class(sym) != SILENCE:
                raise InvalidStructureError(f"word {wi}: {sym!r} is not a silence phone")
            words.append(Word(sym, (Syllable(False, (sym,)),), silence=True))
            continue
        syllables = []
        for si, s in enumerate(w.get("syllables") or []):
            phones = tuple(s.get("phones") or ())
            if not phones:
                raise EmptySyllableError(f"word {wi} syllable {si}")
            for p in phones:
                if p not in phoneset:
                    raise PhoneNotInPhoneSetError(f"word {wi} syllable {si}: {p!r}")
                if phoneset.phone_class(p) == SILENCE:
                    raise InvalidStructureError(f"word {wi}: silence {p!r} inside a word")
            syllables.append(Syllable(bool(s.get("stressed", False)), phones))
        if not syllables:
            raise InvalidStructureError(f"word {wi}: no syllables")
        words.append(Word(str(w.get("text", "")), tuple(syllables)))
    if not words:
        raise InvalidStructureError("utterance has no words")
    u = UtteranceStructure(str(doc.get("utterance_id", "")), tuple(words))
    if alignment is not None:
        u.check_against(alignment)
    return u


def serialize_utterance_structure(u: UtteranceStructure) -> str:
    words = []
    for w in u.words:
        if w.silence:
            words.append({"silence": w.text})
        else:
            words.append({"text": w.text,
                          "syllables": [{"stressed": s.stressed, "phones": list(s.phones)}
                                        for s in w.syllables]})
    return json.dumps({"utterance_id": u.utterance_id, "words": words},
                      ensure_ascii=False, indent=1) + "\n"


# --------------------------------------------------------------------------
# schema

@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    domain: tuple  # category values, or (lo, hi) for numeric

    def check(self, value) -> None:
        if self.kind == CATEGORICAL:
            if value not in self.domain:
                raise SchemaError(f"{self.name}: value {value!r} outside declared domain")
        else:
            lo, hi = self.domain
            if not (isinstance(value, int) and lo <= value <= hi):
                raise SchemaError(f"{self.name}: value {value!r} outside {lo}..{hi}")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        for f in self.features:
            if f.kind not in (CATEGORICAL, NUMERIC):
                raise SchemaError(f"{f.name}: unknown kind {f.kind!r}")
            resolve_feature(f.name)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __len__(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __getitem__(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    @cached_property
    def hash(self) -> str:
        return hashlib.sha256(serialize_schema(self).encode("utf-8")).hexdigest()[:16]


def serialize_schema(schema: FeatureSchema) -> str:
    lines = []
    for f in schema.features:
        if f.kind == CATEGORICAL:
            dom = ",".join(f.domain)
        else:
            dom = f"{f.domain[0]}..{f.domain[1]}"
        lines.append(f"{f.name}\t{f.kind}\t{dom}")
    return "\n".join(lines) + "\n"


def parse_schema(text: str) -> FeatureSchema:
    specs = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 3:
            raise MalformedLineError(line_no, "expected name<TAB>kind<TAB>domain")
        name, kind, dom = fields
        if kind == CATEGORICAL:
            values = tuple(dom.split(","))
            if not all(values) or len(set(values)) != len(values):
                raise MalformedLineError(line_no, "categorical domain needs distinct values")
            specs.append(FeatureSpec(name, kind, values))
        elif kind == NUMERIC:
            m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", dom)
            if not m or int(m.group(1)) > int(m.group(2)):
                raise MalformedLineError(line_no, "numeric domain must be lo..hi")
            specs.append(FeatureSpec(name, kind, (int(m.group(1)), int(m.group(2)))))
        else:
            raise MalformedLineError(line_no, f"unknown kind {kind!r}")
    try:
        return FeatureSchema(tuple(specs))
    except UnknownFeatureError:
        raise
    except SchemaError as exc:
        raise MalformedLineError(0, str(exc)) from None


# --------------------------------------------------------------------------
# senones

@dataclass(frozen=True)
class Senone:
    schema_hash: str
    names: tuple[str, ...]
    values: tuple[Value, ...]

    @property
    def features(self) -> dict[str, Value]:
        return dict(zip(self.names, self.values))

    def __getitem__(self, name: str) -> Value:
        return self.values[self.names.index(name)]

    def __len__(self) -> int:
        return len(self.values)


class _Context:
    """Per-utterance lookup tables shared by all extractors."""

    def __init__(self, u: UtteranceStructure, phoneset: PhoneSet):
        self.u = u
        self.ps = phoneset
        self.pos = u._positions
        self.n = len(self.pos)
        self.classes = [phoneset.phone_class(p.phone) for p in self.pos]
        sil_before, last = [], -1
        for i, p in enumerate(self.pos):
            sil_before.append(last)
            if p.silence:
                last = i
        sil_after, nxt = [0] * self.n, self.n
        for i in range(self.n - 1, -1, -1):
            sil_after[i] = nxt
            if self.pos[i].silence:
                nxt = i
        self.sil_before, self.sil_after = sil_before, sil_after
        self.stress_prefix = u._stress_prefix
        self.total_stressed = self.stress_prefix[-1]
        self.total_syllables = len(self.stress_prefix) - 1

    def word(self, i):
        return self.u.words[self.pos[i].word]

    def syllable(self, i):
        p = self.pos[i]
        return self.u.words[p.word].syllables[p.syllable]


def _flag(b: bool) -> str:
    return TRUE if b else FALSE


def _pos_in_syllable(ctx, i):
    if ctx.pos[i].silence:
        return SILENCE
    syl = ctx.syllable(i)
    classes = [ctx.ps.phone_class(p) for p in syl.phones]
    if VOWEL not in classes:
        return "onset"
    first = classes.index(VOWEL)
    last = first
    while last + 1 < len(classes) and classes[last + 1] == VOWEL:
        last += 1
    k = ctx.pos[i].in_syllable
    if k < first:
        return "onset"
    if k <= last:
        return "nucleus"
    return "coda"


def _pos_of_syllable(ctx, i):
    if ctx.pos[i].silence:
        return SILENCE
    n = len(ctx.word(i).syllables)
    k = ctx.pos[i].syllable
    if n == 1:
        return "single"
    if k == 0:
        return "initial"
    if k == n - 1:
        return "final"
    return "medial"


def _stressed_before(ctx, i):
    return ctx.stress_prefix[ctx.pos[i].global_syllable]


def _stressed_after(ctx, i):
    p = ctx.pos[i]
    upto = p.global_syllable if p.silence else p.global_syllable + 1
    return ctx.total_stressed - ctx.stress_prefix[upto]


def _is_word_final(ctx, i):
    if ctx.pos[i].silence:
        return SILENCE
    p = ctx.pos[i]
    word = ctx.word(i)
    last_syl = len(word.syllables) - 1
    return _flag(p.syllable == last_syl and p.in_syllable == len(word.syllables[last_syl].phones) - 1)


def _phones_since_silence(ctx, i):
    return 0 if ctx.pos[i].silence else i - ctx.sil_before[i] - 1


def _phones_to_silence(ctx, i):
    return 0 if ctx.pos[i].silence else ctx.sil_after[i] - i - 1


def _neighbour_syllable_stressed(offset):
    def get(ctx, i):
        if offset < 0:
            k = ctx.pos[i].global_syllable - 1
        elif ctx.pos[i].silence:
            k = ctx.pos[i].global_syllable
        else:
            k = ctx.pos[i].global_syllable + 1
        if not 0 <= k < ctx.total_syllables:
            return NONE
        return _flag(ctx.stress_prefix[k + 1] > ctx.stress_prefix[k])
    return get


_FIXED: dict[str, Callable[[_Context, int], Value]] = {
    "cur_phone_class": lambda ctx, i: ctx.classes[i],
    "cur_phone_symbol": lambda ctx, i: ctx.pos[i].phone,
    "cur_is_stressed_vowel": lambda ctx, i: _flag(ctx.ps.is_stressed_vowel(ctx.pos[i].phone)),
    "syllable_stressed": lambda ctx, i: SILENCE if ctx.pos[i].silence else _flag(ctx.syllable(i).stressed),
    "pos_in_syllable": _pos_in_syllable,
    "syllable_len_phones": lambda ctx, i: 0 if ctx.pos[i].silence else len(ctx.syllable(i).phones),
    "pos_of_syllable_in_word": _pos_of_syllable,
    "word_syllable_count": lambda ctx, i: 0 if ctx.pos[i].silence else len(ctx.word(i).syllables),
    "word_index_in_utterance": lambda ctx, i: ctx.pos[i].real_word,
    "words_in_utterance": lambda ctx, i: len(ctx.u.real_words),
    "stressed_syllables_before": _stressed_before,
    "stressed_syllables_after": _stressed_after,
    "phones_since_last_silence": _phones_since_silence,
    "phones_to_next_silence": _phones_to_silence,
    "syllable_index_in_utterance": lambda ctx, i: ctx.pos[i].global_syllable,
    "syllables_in_utterance": lambda ctx, i: ctx.total_syllables,
    "is_word_final_phone": _is_word_final,
    "phone_index_in_word": lambda ctx, i: 0 if ctx.pos[i].silence else (
        sum(len(s.phones) for s in ctx.word(i).syllables[:ctx.pos[i].syllable]) + ctx.pos[i].in_syllable),
    "phones_in_word": lambda ctx, i: 0 if ctx.pos[i].silence else len(ctx.word(i).phones),
    "phones_in_utterance": lambda ctx, i: ctx.n,
    "prev_syllable_stressed": _neighbour_syllable_stressed(-1),
    "next_syllable_stressed": _neighbour_syllable_stressed(+1),
}

_WINDOW = re.compile(r"(prev|next)(\d*)_(phone_class|phone_symbol|is_stressed_vowel)")


def _window_feature(direction: str, depth: int, what: str):
    step = -depth if direction == "prev" else depth

    def get(ctx, i):
        j = i + step
        if not 0 <= j < ctx.n:
            return NONE
        if what == "phone_class":
            return ctx.classes[j]
        if what == "phone_symbol":
            return ctx.pos[j].phone
        return _flag(ctx.ps.is_stressed_vowel(ctx.pos[j].phone))
    return get


def resolve_feature(name: str) -> Callable[[_Context, int], Value]:
    if name in _FIXED:
        return _FIXED[name]
    m = _WINDOW.fullmatch(name)
    if m:
        depth = int(m.group(2)) if m.group(2) else 1
        if depth < 1:
            raise UnknownFeatureError(name)
        return _window_feature(m.group(1), depth, m.group(3))
    raise UnknownFeatureError(name)


def known_feature_names() -> list[str]:
    """Fixed feature names; window families accept any depth suffix."""
    families = [f"{d}N_{w}" for d in ("prev", "next")
                for w in ("phone_class", "phone_symbol", "is_stressed_vowel")]
    return sorted(_FIXED) + families


_CLASS_DOMAIN = (VOWEL, CONSONANT, SILENCE)
_CONTEXT_CLASS_DOMAIN = (VOWEL, CONSONANT, SILENCE, NONE)
_COUNT_DOMAIN = (0, 9999)

DEFAULT_FEATURES = [
    "cur_phone_class", "cur_is_stressed_vowel",
    "prev_phone_class", "prev2_phone_class", "next_phone_class", "next2_phone_class",
    "prev_phone_symbol", "next_phone_symbol",
    "syllable_stressed", "pos_in_syllable", "syllable_len_phones",
    "pos_of_syllable_in_word", "word_syllable_count",
    "word_index_in_utterance", "words_in_utterance",
    "stressed_syllables_before", "stressed_syllables_after",
    "phones_since_last_silence", "phones_to_next_silence",
    "syllable_index_in_utterance", "is_word_final_phone",
]

_CATEGORICAL_DOMAINS = {
    "cur_phone_class": _CLASS_DOMAIN,
    "cur_is_stressed_vowel": (TRUE, FALSE),
    "syllable_stressed": (TRUE, FALSE, SILENCE),
    "pos_in_syllable": ("onset", "nucleus", "coda", SILENCE),
    "pos_of_syllable_in_word": ("initial", "medial", "final", "single", SILENCE),
    "is_word_final_phone": (TRUE, FALSE, SILENCE),
    "prev_syllable_stressed": (TRUE, FALSE, NONE),
    "next_syllable_stressed": (TRUE, FALSE, NONE),
}


def feature_spec(name: str, phoneset: PhoneSet) -> FeatureSpec:
    """Default kind and domain for any known feature name."""
    resolve_feature(name)
    if name in _CATEGORICAL_DOMAINS:
        return FeatureSpec(name, CATEGORICAL, _CATEGORICAL_DOMAINS[name])
    if name == "cur_phone_symbol":
        return FeatureSpec(name, CATEGORICAL, tuple(phoneset.symbols))
    m = _WINDOW.fullmatch(name)
    if m:
        what = m.group(3)
        if what == "phone_class":
            return FeatureSpec(name, CATEGORICAL, _CONTEXT_CLASS_DOMAIN)
        if what == "phone_symbol":
            return FeatureSpec(name, CATEGORICAL, tuple(phoneset.symbols) + (NONE,))
        return FeatureSpec(name, CATEGORICAL, (TRUE, FALSE, NONE))
    return FeatureSpec(name, NUMERIC, _COUNT_DOMAIN)


def build_schema(names: Sequence[str], phoneset: PhoneSet) -> FeatureSchema:
    return FeatureSchema(tuple(feature_spec(n, phoneset) for n in names))


def default_schema(phoneset: PhoneSet) -> FeatureSchema:
    return build_schema(DEFAULT_FEATURES, phoneset)


def extract_senones(u: UtteranceStructure, phoneset: PhoneSet, schema: FeatureSchema) -> list[Senone]:
    """Senone for every phone of the utterance, in order."""
    ctx = _Context(u, phoneset)
    getters = [resolve_feature(f.name) for f in schema.features]
    names = tuple(schema.names)
    h = schema.hash
    out = []
    for i in range(ctx.n):
        values = tuple(g(ctx, i) for g in getters)
        for spec, v in zip(schema.features, values):
            spec.check(v)
        out.append(Senone(h, names, values))
    return out


def extract_senone(u: UtteranceStructure, phoneset: PhoneSet, phone_index: int,
                   schema: FeatureSchema) -> Senone:
    if not 0 <= phone_index < len(u):
        raise IndexOutOfRangeError(f"phone index {phone_index} outside 0..{len(u) - 1}")
    ctx = _Context(u, phoneset)
    values = []
    for spec in schema.features:
        v = resolve_feature(spec.name)(ctx, phone_index)
        spec.check(v)
        values.append(v)
    return Senone(schema.hash, tuple(schema.names), tuple(values))
