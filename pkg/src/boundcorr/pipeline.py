"""Corpus-level glue: compare, split, build training data, correct, evaluate.

Everything here works on in-memory objects keyed by utterance id; the CLI
only adds file I/O around these functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cart import RegressionTree, TrainingExample, train
from .compare import BoundaryErrorRecord, compute_errors, pair_alignments, preprocess
from .correct import DEFAULT_MIN_DUR, CorrectionReport, correct_alignment
from .errors import EmptyTrainingSetError
from .features import FeatureSchema, UtteranceStructure, extract_senones
from .labels import Alignment, PhoneSet
from .report import CorpusMetrics, corpus_metrics, triphone_class, triphone_stats

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComparisonResult:
    utterance_id: str
    records: tuple[BoundaryErrorRecord, ...]
    units: int
    discarded: int


def compare_utterance(ref: Alignment, hyp: Alignment, phoneset: PhoneSet | None = None,
                      symbol_map: Mapping[str, str] | None = None,
                      min_iou: float = 0.0) -> ComparisonResult:
    pairs = pair_alignments(ref, hyp, symbol_map, phoneset, min_iou)
    kept, _ = preprocess(pairs)
    return ComparisonResult(ref.utterance_id, tuple(compute_errors(pairs)),
                            len(pairs), len(pairs) - len(kept))


def discarded_fraction(results: Sequence[ComparisonResult]) -> float:
    units = sum(r.units for r in results)
    return sum(r.discarded for r in results) / units if units else 0.0


def split_utterances(ids: Sequence[str], train_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded utterance-level shuffle into (train, test), each sorted."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train fraction must lie in (0, 1)")
    ordered = sorted(ids)
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(len(ordered))
    n_train = int(round(train_fraction * len(ordered)))
    if len(ordered) >= 2:
        n_train = min(max(n_train, 1), len(ordered) - 1)
    train = sorted(ordered[i] for i in perm[:n_train])
    test = sorted(ordered[i] for i in perm[n_train:])
    return train, test


def build_examples(records: Sequence[BoundaryErrorRecord], structures: Mapping[str, UtteranceStructure],
                   phoneset: PhoneSet, schema: FeatureSchema) -> list[TrainingExample]:
    """Label the senone of each record's phone with its boundary error.

    All position errors are used, significant or not.
    """
    examples = []
    senones: dict[str, list] = {}
    for r in records:
        if r.utterance_id not in senones:
            senones = {r.utterance_id: extract_senones(structures[r.utterance_id], phoneset, schema)}
        examples.append(TrainingExample(senones[r.utterance_id][r.phone_index], r.err))
    return examples


def train_tree(examples: Sequence[TrainingExample], stop_size: int) -> RegressionTree:
    if not examples:
        raise EmptyTrainingSetError("no training examples after preprocessing")
    if stop_size > len(examples):
        log.warning("stop size %d exceeds %d examples; the tree will be a single leaf",
                    stop_size, len(examples))
    return train(examples, stop_size)


def correct_corpus(hyps: Mapping[str, Alignment], structures: Mapping[str, UtteranceStructure],
                   tree: RegressionTree, schema: FeatureSchema, phoneset: PhoneSet,
                   min_dur: float = DEFAULT_MIN_DUR, symbol_map: Mapping[str, str] | None = None,
                   strict: bool = False) -> dict[str, tuple[Alignment, CorrectionReport]]:
    return {uid: correct_alignment(hyps[uid], structures[uid], tree, schema, phoneset,
                                   min_dur, symbol_map, strict)
            for uid in sorted(hyps)}


def records_for(results: Mapping[str, ComparisonResult], ids: Sequence[str]) -> list[BoundaryErrorRecord]:
    return [rec for uid in ids for rec in results[uid].records]


def triphone_labels(records: Sequence[BoundaryErrorRecord], structures: Mapping[str, UtteranceStructure],
                    phoneset: PhoneSet) -> list[str]:
    return [triphone_class(phoneset, structures[r.utterance_id], r.phone_index) for r in records]


def evaluate_split(ref: Mapping[str, Alignment], variant: Mapping[str, Alignment], ids: Sequence[str],
                   phoneset: PhoneSet, symbol_map=None, min_iou: float = 0.0) -> list[BoundaryErrorRecord]:
    return [rec for uid in ids
            for rec in compare_utterance(ref[uid], variant[uid], phoneset, symbol_map, min_iou).records]


@dataclass(frozen=True)
class PipelineResult:
    tree: RegressionTree
    train_ids: list[str]
    test_ids: list[str]
    before: dict[str, CorpusMetrics]
    after: dict[str, CorpusMetrics]
    test_records_before: list[BoundaryErrorRecord]
    test_records_after: list[BoundaryErrorRecord]
    discarded_fraction: float
    clamp_count: int

    def improvement(self, split: str = "test") -> float:
        b, a = self.before[split], self.after[split]
        return (b.total_error - a.total_error) / b.total_error if b.total_error > 0 else 0.0


def run_pipeline(refs: Mapping[str, Alignment], hyps: Mapping[str, Alignment],
                 structures: Mapping[str, UtteranceStructure], phoneset: PhoneSet,
                 schema: FeatureSchema, stop_size: int, train_fraction: float = 0.9,
                 split_seed: int = 0, min_dur: float = DEFAULT_MIN_DUR) -> PipelineResult:
    """Compare, train on the training split, correct everything, and score both splits."""
    ids = sorted(refs)
    results = {uid: compare_utterance(refs[uid], hyps[uid], phoneset) for uid in ids}
    train_ids, test_ids = split_utterances(ids, train_fraction, split_seed)
    examples = build_examples(records_for(results, train_ids), structures, phoneset, schema)
    tree = train_tree(examples, stop_size)
    corrected = correct_corpus(hyps, structures, tree, schema, phoneset, min_dur)
    fixed = {uid: c[0] for uid, c in corrected.items()}
    before, after = {}, {}
    recs = {}
    for split, sids in (("train", train_ids), ("test", test_ids)):
        rb = records_for(results, sids)
        ra = evaluate_split(refs, fixed, sids, phoneset)
        before[split], after[split] = corpus_metrics(rb), corpus_metrics(ra)
        recs[split] = (rb, ra)
    clamps = sum(c[1].clamp_count for c in corrected.values())
    return PipelineResult(tree, train_ids, test_ids, before, after, recs["test"][0], recs["test"][1],
                          discarded_fraction(list(results.values())), clamps)


def total_abs(records: Sequence[BoundaryErrorRecord]) -> float:
    return math.fsum(abs(r.err) for r in records)


def triphone_tables(records_before, records_after, structures, phoneset):
    return (triphone_stats(records_before, triphone_labels(records_before, structures, phoneset)),
            triphone_stats(records_after, triphone_labels(records_after, structures, phoneset)))
