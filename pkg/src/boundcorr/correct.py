"""Apply a trained tree to a hypothesis alignment.

Each internal boundary (right edge of segment ``i``) is moved by the tree's
prediction for phone ``i``.  Boundaries are processed left to right; a new
position is clamped so that the segment on its left (whose start is already
corrected) and the segment on its right (whose end is not yet corrected)
both keep at least ``min_dur``.  The utterance start and end never move.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .cart import RegressionTree
from .errors import SchemaMismatchError, StructureAlignmentMismatchError
from .features import FeatureSchema, UtteranceStructure, extract_senones
from .labels import Alignment, PhoneSet, format_seconds

DEFAULT_MIN_DUR = 0.005

REPORT_FIELDS = ["utterance_id", "phone_index", "predicted_shift", "applied_shift", "clamped"]


@dataclass(frozen=True)
class BoundaryCorrection:
    phone_index: int
    predicted_shift: float
    applied_shift: float
    clamped: bool


@dataclass(frozen=True)
class CorrectionReport:
    utterance_id: str
    boundaries: tuple[BoundaryCorrection, ...]

    @property
    def clamp_count(self) -> int:
        return sum(b.clamped for b in self.boundaries)


def shift_boundaries(boundaries: Sequence[float], shifts: Sequence[float],
                     min_dur: float) -> tuple[list[float], list[float]]:
    """Move internal boundaries by ``shifts`` with left-to-right clamping.

    ``boundaries`` has one more entry than there are segments and
    ``shifts[i]`` applies to ``boundaries[i + 1]``.  Returns the new
    boundaries and the shift actually applied to each one.  The applied
    shift always lies between 0 and the requested shift, so a segment that
    was already shorter than ``min_dur`` is never made shorter still.
    """
    if len(shifts) != len(boundaries) - 2:
        raise ValueError("need one shift per internal boundary")
    new = list(boundaries)
    applied = []
    for i, shift in enumerate(shifts, start=1):
        old = boundaries[i]
        lo = new[i - 1] + min_dur
        hi = boundaries[i + 1] - min_dur
        target = old + shift
        if lo <= target <= hi:
            new[i] = target
            applied.append(shift)
            continue
        # moving left may shrink the left segment down to lo, moving right the
        # right one down to hi; a segment already under min_dur never shrinks
        delta = min(max(shift, min(0.0, lo - old)), max(0.0, hi - old))
        new[i] = old + delta
        applied.append(delta)
    return new, applied


def correct_alignment(hyp: Alignment, u: UtteranceStructure, tree: RegressionTree,
                      schema: FeatureSchema, phoneset: PhoneSet,
                      min_dur: float = DEFAULT_MIN_DUR,
                      symbol_map: Mapping[str, str] | None = None,
                      strict: bool = True) -> tuple[Alignment, CorrectionReport]:
    """Shift every internal boundary of ``hyp`` by the predicted systematic error.

    The structure must describe the same phone string as ``hyp`` (after
    ``symbol_map``).  With ``strict=False`` only the phone counts must agree:
    positions where the hypothesis label differs from the structure are still
    corrected using the structure's context.
    """
    if min_dur <= 0:
        raise ValueError("min_dur must be positive")
    if tree.schema_hash != schema.hash:
        raise SchemaMismatchError(f"tree schema {tree.schema_hash} != schema {schema.hash}")
    symbol_map = symbol_map or {}
    hyp_phones = [symbol_map.get(p, p) for p in hyp.phones]
    if len(hyp_phones) != len(u) or (strict and hyp_phones != u.phones):
        raise StructureAlignmentMismatchError(
            f"{hyp.utterance_id}: structure has {len(u)} phones, hypothesis {len(hyp_phones)}"
            + ("" if len(hyp_phones) != len(u) else " with different labels"))

    senones = extract_senones(u, phoneset, schema)
    predicted = [tree.predict(s) for s in senones[:-1]]
    new_bounds, applied = shift_boundaries(hyp.boundaries, predicted, min_dur)
    corrected = Alignment.from_boundaries(hyp.utterance_id, hyp.phones, new_bounds)
    report = CorrectionReport(hyp.utterance_id, tuple(
        BoundaryCorrection(i, p, a, a != p) for i, (p, a) in enumerate(zip(predicted, applied))))
    return corrected, report


def write_report_csv(reports: Sequence[CorrectionReport], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for rep in reports:
        for b in rep.boundaries:
            writer.writerow([rep.utterance_id, b.phone_index, format_seconds(b.predicted_shift),
                             format_seconds(b.applied_shift), int(b.clamped)])


def report_to_csv(reports: Sequence[CorrectionReport]) -> str:
    buf = io.StringIO()
    write_report_csv(reports, buf)
    return buf.getvalue()
