"""Synthetic single-speaker corpora with known, context-dependent boundary bias.

Every utterance gets its own PCG64 stream derived from ``(seed, index)``
through numpy's ``SeedSequence``, so content does not depend on how many
utterances are generated or in which order.

For internal boundary ``k`` (right edge of phone ``k-1``) the injected error
is ``e_k = bias(phone k-1) + N(0, noise_sigma)`` and the hypothesis marker is
placed at ``ref_k - e_k``, so the measured ``ref - hyp`` equals ``e_k``.
Reference durations are log-normal per phone class, truncated from below so
that neither the shifted hypothesis nor a perfectly corrected one needs
clamping; the clamp in :func:`boundcorr.correct.shift_boundaries` remains
as a guard.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import yaml

from .correct import DEFAULT_MIN_DUR, shift_boundaries
from .errors import InvalidConfigError
from .features import (
    FALSE,
    TRUE,
    FeatureSchema,
    Senone,
    Syllable,
    UtteranceStructure,
    Word,
    extract_senones,
    serialize_schema,
    serialize_utterance_structure,
)
from .labels import (
    CONSONANT,
    PHONE_CLASSES,
    SILENCE,
    VOWEL,
    Alignment,
    PhoneSet,
    serialize_label_file,
    serialize_phoneset,
)

DEFAULT_DURATIONS = {VOWEL: (0.09, 0.3), CONSONANT: (0.06, 0.3), SILENCE: (0.20, 0.3)}

# slack over the truncation bound; absorbs microsecond rounding of both tiers
_DURATION_MARGIN = 5e-6
_MAX_REDRAWS = 64

_SYLLABLE_SHAPES = ("CV", "V", "CVC", "CCV", "VC")
_SHAPE_P = (0.5, 0.1, 0.2, 0.15, 0.05)
_SYLLABLES_P = (0.3, 0.35, 0.25, 0.1)  # 1..4 syllables per word


@dataclass(frozen=True)
class BiasRule:
    """Constant bias for phones whose senone matches every ``when`` entry.

    A ``when`` value may be a list, meaning any of its members matches.
    """
    when: Mapping[str, object]
    bias: float

    def matches(self, senone: Senone) -> bool:
        feats = senone.features
        for name, want in self.when.items():
            have = feats[name]
            if isinstance(want, (list, tuple)):
                if have not in want:
                    return False
            elif have != want:
                return False
        return True


@dataclass
class SimConfig:
    seed: int = 0
    utterance_count: int = 10
    phones_per_utterance: tuple[int, int] = (20, 40)
    durations: dict = field(default_factory=lambda: dict(DEFAULT_DURATIONS))
    bias_rules: list = field(default_factory=list)
    noise_sigma: float = 0.0
    recognition_error_rate: float = 0.0
    split_share: float = 0.0
    pause_rate: float = 0.15
    min_dur: float = DEFAULT_MIN_DUR

    def validate(self) -> None:
        if self.utterance_count < 1:
            raise InvalidConfigError("utterance_count must be >= 1")
        lo, hi = self.phones_per_utterance
        if not 3 <= lo <= hi:
            raise InvalidConfigError("phones_per_utterance must satisfy 3 <= lo <= hi")
        for cls in PHONE_CLASSES:
            if cls not in self.durations:
                raise InvalidConfigError(f"no duration model for {cls}")
            median, sigma = self.durations[cls]
            if not (median > 0 and sigma >= 0):
                raise InvalidConfigError(f"{cls}: need median > 0 and sigma >= 0")
        for name in ("recognition_error_rate", "split_share", "pause_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfigError(f"{name} must lie in [0, 1]")
        if self.noise_sigma < 0 or not self.min_dur > 0:
            raise InvalidConfigError("need noise_sigma >= 0 and min_dur > 0")
        for r in self.bias_rules:
            if not isinstance(r, BiasRule) or not math.isfinite(r.bias):
                raise InvalidConfigError(f"bad bias rule {r!r}")


def _yaml_value(v):
    if isinstance(v, bool):
        return TRUE if v else FALSE
    if isinstance(v, list):
        return [_yaml_value(x) for x in v]
    return v


def sim_config_from_dict(doc: Mapping) -> SimConfig:
    doc = dict(doc or {})
    known = {"seed", "utterance_count", "phones_per_utterance", "durations", "bias_rules",
             "noise_sigma", "recognition_error_rate", "split_share", "pause_rate", "min_dur"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = SimConfig()
    try:
        for key in ("seed", "utterance_count"):
            if key in doc:
                setattr(cfg, key, int(doc[key]))
        for key in ("noise_sigma", "recognition_error_rate", "split_share", "pause_rate", "min_dur"):
            if key in doc:
                setattr(cfg, key, float(doc[key]))
        if "phones_per_utterance" in doc:
            lo, hi = doc["phones_per_utterance"]
            cfg.phones_per_utterance = (int(lo), int(hi))
        if "durations" in doc:
            durations = dict(DEFAULT_DURATIONS)
            for cls, d in doc["durations"].items():
                durations[cls] = (float(d["median"]), float(d["sigma"]))
            cfg.durations = durations
        cfg.bias_rules = [BiasRule({k: _yaml_value(v) for k, v in r["when"].items()}, float(r["bias"]))
                          for r in doc.get("bias_rules") or []]
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise InvalidConfigError(f"malformed simulator config: {exc}") from None
    cfg.validate()
    return cfg


def load_sim_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as f:
        return sim_config_from_dict(yaml.safe_load(f))


def sim_config_to_dict(cfg: SimConfig) -> dict:
    return {
        "seed": cfg.seed,
        "utterance_count": cfg.utterance_count,
        "phones_per_utterance": list(cfg.phones_per_utterance),
        "durations": {c: {"median": m, "sigma": s} for c, (m, s) in cfg.durations.items()},
        "bias_rules": [{"when": dict(r.when), "bias": r.bias} for r in cfg.bias_rules],
        "noise_sigma": cfg.noise_sigma,
        "recognition_error_rate": cfg.recognition_error_rate,
        "split_share": cfg.split_share,
        "pause_rate": cfg.pause_rate,
        "min_dur": cfg.min_dur,
    }


@dataclass(frozen=True)
class SimUtterance:
    structure: UtteranceStructure
    ref: Alignment
    hyp: Alignment

    @property
    def utterance_id(self) -> str:
        return self.ref.utterance_id


def utterance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _random_word(rng, vowels, stressed_vowels, consonants) -> Word:
    n_syl = int(rng.choice(4, p=_SYLLABLES_P)) + 1
    if n_syl == 1:
        stress_at = 0 if rng.random() < 0.5 else -1
    elif rng.random() < 0.7:
        stress_at = n_syl - 2
    else:
        stress_at = int(rng.integers(n_syl))
    syllables = []
    for k in range(n_syl):
        shape = _SYLLABLE_SHAPES[int(rng.choice(len(_SYLLABLE_SHAPES), p=_SHAPE_P))]
        stressed = k == stress_at
        pool = stressed_vowels if stressed and stressed_vowels else vowels
        phones = tuple(pool[int(rng.integers(len(pool)))] if c == "V"
                       else consonants[int(rng.integers(len(consonants)))] for c in shape)
        syllables.append(Syllable(stressed, phones))
    return Word("".join(p for s in syllables for p in s.phones), tuple(syllables))


def random_structure(rng, utterance_id: str, phoneset: PhoneSet, cfg: SimConfig) -> UtteranceStructure:
    stressed_vowels = [s for s in phoneset.of_class(VOWEL) if phoneset.is_stressed_vowel(s)]
    vowels = [s for s in phoneset.of_class(VOWEL) if not phoneset.is_stressed_vowel(s)] or stressed_vowels
    consonants = phoneset.of_class(CONSONANT)
    if not vowels or not consonants:
        raise InvalidConfigError("phone set needs vowels and consonants")
    sil = phoneset.silence_symbol
    lo, hi = cfg.phones_per_utterance
    target = int(rng.integers(lo, hi + 1))
    pause = Word(sil, (Syllable(False, (sil,)),), silence=True)
    words = [pause]
    count = 1
    while True:
        w = _random_word(rng, vowels, stressed_vowels, consonants)
        words.append(w)
        count += len(w.phones)
        if count >= target - 1:
            break
        if rng.random() < cfg.pause_rate:
            words.append(pause)
            count += 1
    words.append(pause)
    return UtteranceStructure(utterance_id, tuple(words))


def _sample_durations(rng, classes, lower, durations) -> list[float]:
    out = []
    for cls, bound in zip(classes, lower):
        median, sigma = durations[cls]
        d = median * math.exp(sigma * rng.standard_normal())
        tries = 1
        while d < bound and tries < _MAX_REDRAWS:
            d = median * math.exp(sigma * rng.standard_normal())
            tries += 1
        out.append(max(d, bound))
    return out


def simulate_utterance(index: int, cfg: SimConfig, phoneset: PhoneSet,
                       schema: FeatureSchema, prefix: str = "utt") -> SimUtterance:
    rng = utterance_rng(cfg.seed, index)
    uid = f"{prefix}{index:04d}"
    u = random_structure(rng, uid, phoneset, cfg)
    phones = u.phones
    n = len(phones)
    senones = extract_senones(u, phoneset, schema)
    bias = []
    for s in senones[:-1]:
        bias.append(next((r.bias for r in cfg.bias_rules if r.matches(s)), 0.0))
    noise = rng.normal(0.0, cfg.noise_sigma, size=n - 1) if cfg.noise_sigma > 0 else np.zeros(n - 1)
    e = [0.0] + [b + float(z) for b, z in zip(bias, noise)] + [0.0]

    # segment j spans boundaries j..j+1; keep it >= min_dur in the reference,
    # the shifted hypothesis and every half-shifted intermediate state
    lower = [cfg.min_dur + max(0.0, e[j + 1] - e[j], e[j + 1], -e[j]) + _DURATION_MARGIN
             for j in range(n)]
    classes = [phoneset.phone_class(p) for p in phones]
    durs = _sample_durations(rng, classes, lower, cfg.durations)
    ref_b = [0.0]
    for d in durs:
        ref_b.append(round(ref_b[-1] + d, 6))
    ref = Alignment.from_boundaries(uid, phones, ref_b)

    shifts = [round(ref_b[k] - e[k], 6) - ref_b[k] for k in range(1, n)]
    hyp_b, _ = shift_boundaries(ref_b, shifts, cfg.min_dur)
    hyp_b = [round(b, 6) for b in hyp_b]

    hyp_phones = list(phones)
    hyp_bounds = list(hyp_b)
    if cfg.recognition_error_rate > 0:
        symbols = phoneset.symbols
        out_p, out_b = [], [hyp_b[0]]
        for j, p in enumerate(hyp_phones):
            start, end = hyp_b[j], hyp_b[j + 1]
            if rng.random() < cfg.recognition_error_rate:
                other = [s for s in symbols if s != p]
                wrong = other[int(rng.integers(len(other)))]
                if rng.random() < cfg.split_share and end - start > 2 * cfg.min_dur:
                    mid = round((start + end) / 2, 6)
                    out_p += [p, wrong]
                    out_b += [mid, end]
                    continue
                p = wrong
            out_p.append(p)
            out_b.append(end)
        hyp_phones, hyp_bounds = out_p, out_b
    hyp = Alignment.from_boundaries(uid, hyp_phones, hyp_bounds)
    return SimUtterance(u, ref, hyp)


def generate_corpus(cfg: SimConfig, phoneset: PhoneSet, schema: FeatureSchema) -> list[SimUtterance]:
    cfg.validate()
    for rule in cfg.bias_rules:
        for name in rule.when:
            if name not in schema.names:
                raise InvalidConfigError(f"bias rule uses feature {name!r} missing from the schema")
    return [simulate_utterance(i, cfg, phoneset, schema) for i in range(cfg.utterance_count)]


def oracle_errors(corpus: Sequence[SimUtterance]):
    """Position-by-position ``(utterance, phone_index, err)`` triples.

    Walks aligned indices directly instead of running the edit-distance
    pairing; utterances whose hypothesis changed length are skipped.
    """
    for utt in corpus:
        ref, hyp = utt.ref.segments, utt.hyp.segments
        if len(ref) != len(hyp):
            continue
        for j in range(len(ref) - 1):
            if ref[j].phone == hyp[j].phone:
                yield utt, j, ref[j].end - hyp[j].end


def oracle_class_means(corpus: Sequence[SimUtterance], phoneset: PhoneSet, schema: FeatureSchema,
                       grouping: Sequence[str]) -> dict[tuple, float]:
    """Brute-force mean boundary error for every observed feature combination."""
    cols = [schema.index(g) for g in grouping]
    sums: dict[tuple, list[float]] = {}
    cache: dict[str, list[Senone]] = {}
    for utt, j, err in oracle_errors(corpus):
        if utt.utterance_id not in cache:
            cache = {utt.utterance_id: extract_senones(utt.structure, phoneset, schema)}
        values = cache[utt.utterance_id][j].values
        key = tuple(values[c] for c in cols)
        sums.setdefault(key, []).append(err)
    return {k: math.fsum(v) / len(v) for k, v in sorted(sums.items())}


def expected_abs_error(bias: float, sigma: float) -> float:
    """E|bias + X| for X ~ N(0, sigma^2)."""
    if sigma == 0:
        return abs(bias)
    z = bias / sigma
    phi = 0.5 * (1.0 + math.erf(-z / math.sqrt(2.0)))
    return sigma * math.sqrt(2.0 / math.pi) * math.exp(-0.5 * z * z) + bias * (1.0 - 2.0 * phi)


def write_corpus(corpus: Sequence[SimUtterance], out_dir, phoneset: PhoneSet,
                 schema: FeatureSchema, cfg: SimConfig | None = None) -> None:
    """Write ref/, hyp/, struct/ plus phoneset.txt and schema.txt."""
    for sub in ("ref", "hyp", "struct"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    for utt in corpus:
        uid = utt.utterance_id
        _write(os.path.join(out_dir, "ref", uid + ".lab"), serialize_label_file(utt.ref))
        _write(os.path.join(out_dir, "hyp", uid + ".lab"), serialize_label_file(utt.hyp))
        _write(os.path.join(out_dir, "struct", uid + ".json"), serialize_utterance_structure(utt.structure))
    _write(os.path.join(out_dir, "phoneset.txt"), serialize_phoneset(phoneset))
    _write(os.path.join(out_dir, "schema.txt"), serialize_schema(schema))
    if cfg is not None:
        _write(os.path.join(out_dir, "sim_config.yaml"),
               yaml.safe_dump(sim_config_to_dict(cfg), sort_keys=False))


def _write(path, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)
