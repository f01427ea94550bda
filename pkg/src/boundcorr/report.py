"""Corpus-level and per-triphone-class boundary error statistics.

``share_of_total_error`` is this toolkit's normalization for comparing
classes: a class's summed absolute error divided by the corpus total.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .compare import BoundaryErrorRecord
from .errors import EmptyRecordsError, IndexOutOfRangeError, LengthMismatchError, ZeroBaselineError
from .features import UtteranceStructure
from .labels import CONSONANT, SILENCE, VOWEL, PhoneSet, format_seconds as _f

CLASS_LETTER = {VOWEL: "V", CONSONANT: "C", SILENCE: "-"}
TRIPHONE_LABELS = tuple("".join(t) for t in itertools.product("VC-", repeat=3))

METRICS_FIELDS = ["alignment", "split", "total_error", "mean_error", "stddev",
                  "boundary_count", "significant_count", "improvement"]


@dataclass(frozen=True)
class CorpusMetrics:
    total_error: float
    mean_error: float
    stddev: float
    boundary_count: int
    significant_count: int


@dataclass(frozen=True)
class ClassStats:
    count: int
    mean_abs_error: float
    mean_signed_error: float
    share_of_total_error: float


def corpus_metrics(records: Sequence[BoundaryErrorRecord]) -> CorpusMetrics:
    """Total and mean absolute error plus population stddev of signed errors."""
    if not records:
        raise EmptyRecordsError("no boundary error records")
    errs = [r.err for r in records]
    n = len(errs)
    total = math.fsum(abs(e) for e in errs)
    signed_mean = math.fsum(errs) / n
    std = math.sqrt(math.fsum((e - signed_mean) ** 2 for e in errs) / n)
    return CorpusMetrics(total, total / n, std, n, sum(r.significant for r in records))


def triphone_class(phoneset: PhoneSet, u: UtteranceStructure, phone_index: int) -> str:
    phones = u.phones
    if not 0 <= phone_index < len(phones):
        raise IndexOutOfRangeError(f"phone index {phone_index} outside 0..{len(phones) - 1}")

    def letter(j):
        if not 0 <= j < len(phones):
            return "-"
        return CLASS_LETTER[phoneset.phone_class(phones[j])]

    return letter(phone_index - 1) + letter(phone_index) + letter(phone_index + 1)


def triphone_stats(records: Sequence[BoundaryErrorRecord], labels: Sequence[str]) -> dict[str, ClassStats]:
    """Aggregate records by triphone label; all 27 labels are always present."""
    if len(records) != len(labels):
        raise LengthMismatchError(f"{len(records)} records but {len(labels)} labels")
    groups: dict[str, list[float]] = {lab: [] for lab in TRIPHONE_LABELS}
    for r, lab in zip(records, labels):
        if lab not in groups:
            raise ValueError(f"bad triphone label {lab!r}")
        groups[lab].append(r.err)
    total = math.fsum(abs(r.err) for r in records)
    out = {}
    for lab, errs in groups.items():
        if not errs:
            out[lab] = ClassStats(0, 0.0, 0.0, 0.0)
            continue
        abs_sum = math.fsum(abs(e) for e in errs)
        out[lab] = ClassStats(len(errs), abs_sum / len(errs), math.fsum(errs) / len(errs),
                              abs_sum / total if total > 0 else 0.0)
    return out


def improvement(before: CorpusMetrics, after: CorpusMetrics) -> float:
    if not before.total_error > 0:
        raise ZeroBaselineError("baseline total error is zero")
    return (before.total_error - after.total_error) / before.total_error


def metrics_csv(rows: Sequence[tuple[str, str, CorpusMetrics, float | None]]) -> str:
    """Rows of (alignment name, split, metrics, improvement or None)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_FIELDS)
    for name, split, m, imp in rows:
        w.writerow([name, split, _f(m.total_error), _f(m.mean_error), _f(m.stddev),
                    m.boundary_count, m.significant_count, "" if imp is None else _f(imp)])
    return buf.getvalue()


def triphone_csv(tables: Sequence[tuple[str, dict[str, ClassStats], dict[str, ClassStats]]]) -> str:
    """Before/after per-class table; ``tables`` holds (split, before, after)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["count", "mean_abs_error", "mean_signed_error", "share_of_total_error"]
    w.writerow(["split", "triphone"] + [f"{c}_before" for c in cols] + [f"{c}_after" for c in cols])
    for split, before, after in tables:
        for lab in TRIPHONE_LABELS:
            row = [split, lab]
            for stats in (before[lab], after[lab]):
                row += [stats.count, _f(stats.mean_abs_error), _f(stats.mean_signed_error),
                        _f(stats.share_of_total_error)]
            w.writerow(row)
    return buf.getvalue()
