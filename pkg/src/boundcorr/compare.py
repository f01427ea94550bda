"""Phone-by-phone comparison of a reference and a hypothesis alignment.

Pairs are classified as *position* errors (same phone, overlapping in time;
only the boundary marker is displaced) or *recognition* errors (symbol
mismatch, zero overlap, or an insertion/deletion and its neighbours).  Only
position pairs carry a signed right-boundary error ``ref.end - hyp.end``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Optional

from .errors import MalformedLineError, UtteranceMismatchError
from .labels import Alignment, PhoneSet, Segment, format_seconds

POSITION = "position"
RECOGNITION = "recognition"

SIGNIFICANCE_THRESHOLD = 0.01
# times are microsecond-quantized; absorbs float noise at exactly 0.01 s
_SIGNIFICANCE_EPS = 1e-9

# edit costs in half-units so the DP stays in integers
_SUB_SAME = 0
_SUB_SAME_CLASS = 1
_SUB_OTHER = 2
_INDEL = 2

RECORD_FIELDS = ["utterance_id", "phone_index", "phone", "err_seconds", "significant"]


@dataclass(frozen=True)
class PairedSegment:
    utterance_id: str
    ref_index: Optional[int]
    hyp_index: Optional[int]
    ref_seg: Optional[Segment]
    hyp_seg: Optional[Segment]
    kind: str

    @property
    def matched(self) -> bool:
        return self.ref_seg is not None and self.hyp_seg is not None


@dataclass(frozen=True)
class BoundaryErrorRecord:
    utterance_id: str
    phone_index: int
    phone: str
    err: float
    significant: bool


def is_significant(err: float) -> bool:
    return abs(err) - SIGNIFICANCE_THRESHOLD > _SIGNIFICANCE_EPS


def _overlap(a: Segment, b: Segment) -> float:
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


def _iou(a: Segment, b: Segment) -> float:
    inter = _overlap(a, b)
    union = max(a.end, b.end) - min(a.start, b.start)
    return inter / union if union > 0 else 0.0


def pair_alignments(ref: Alignment, hyp: Alignment, symbol_map: Mapping[str, str] | None = None,
                    phoneset: PhoneSet | None = None, min_iou: float = 0.0) -> list[PairedSegment]:
    """Globally align the two phone strings and classify every pair.

    ``symbol_map`` translates hypothesis symbols into the reference
    inventory.  ``phoneset`` supplies phone classes for the half-cost
    same-class substitution; without it every mismatch costs a full unit.
    A matched pair counts as a position pair only if its mapped symbols agree
    and the segments' intersection-over-union exceeds ``min_iou``.
    """
    if ref.utterance_id != hyp.utterance_id:
        raise UtteranceMismatchError(f"{ref.utterance_id!r} != {hyp.utterance_id!r}")
    symbol_map = symbol_map or {}
    r = ref.phones
    h = [symbol_map.get(p, p) for p in hyp.phones]

    def cls(sym):
        if phoneset is not None and sym in phoneset:
            return phoneset.phone_class(sym)
        return None

    r_cls = [cls(s) for s in r]
    h_cls = [cls(s) for s in h]
    n, m = len(r), len(h)

    def sub_cost(i, j):
        if r[i] == h[j]:
            return _SUB_SAME
        if r_cls[i] is not None and r_cls[i] == h_cls[j]:
            return _SUB_SAME_CLASS
        return _SUB_OTHER

    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i * _INDEL
    for j in range(1, m + 1):
        cost[0][j] = j * _INDEL
    for i in range(1, n + 1):
        row, prev = cost[i], cost[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + sub_cost(i - 1, j - 1),
                         prev[j] + _INDEL,
                         row[j - 1] + _INDEL)

    # backtrace preferring substitution, then deletion, then insertion;
    # this pushes indels towards the start of the utterance
    path: list[tuple[Optional[int], Optional[int]]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i][j] == cost[i - 1][j - 1] + sub_cost(i - 1, j - 1):
            path.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i][j] == cost[i - 1][j] + _INDEL:
            path.append((i - 1, None))
            i -= 1
        else:
            path.append((None, j - 1))
            j -= 1
    path.reverse()

    near_indel = [False] * len(path)
    for k, (ri, hj) in enumerate(path):
        if ri is None or hj is None:
            for q in (k - 1, k, k + 1):
                if 0 <= q < len(path):
                    near_indel[q] = True

    pairs = []
    for k, (ri, hj) in enumerate(path):
        rs = ref.segments[ri] if ri is not None else None
        hs = hyp.segments[hj] if hj is not None else None
        kind = RECOGNITION
        if rs is not None and hs is not None and not near_indel[k]:
            if r[ri] == h[hj] and _overlap(rs, hs) > 0 and _iou(rs, hs) > min_iou:
                kind = POSITION
        pairs.append(PairedSegment(ref.utterance_id, ri, hj, rs, hs, kind))
    return pairs


def compute_errors(pairs: list[PairedSegment]) -> list[BoundaryErrorRecord]:
    """Signed right-boundary error for every position pair.

    The last segment's right edge is the end of the audio for both
    alignments and is never reported.
    """
    ref_last = max((p.ref_index for p in pairs if p.ref_index is not None), default=-1)
    hyp_last = max((p.hyp_index for p in pairs if p.hyp_index is not None), default=-1)
    records = []
    for p in pairs:
        if p.kind != POSITION or p.ref_index == ref_last or p.hyp_index == hyp_last:
            continue
        err = p.ref_seg.end - p.hyp_seg.end
        records.append(BoundaryErrorRecord(p.utterance_id, p.ref_index, p.ref_seg.phone,
                                           err, is_significant(err)))
    return records


def preprocess(pairs: list[PairedSegment]) -> tuple[list[PairedSegment], float]:
    """Drop recognition pairs; return survivors and the discarded fraction."""
    if not pairs:
        return [], 0.0
    kept = [p for p in pairs if p.kind == POSITION]
    return kept, (len(pairs) - len(kept)) / len(pairs)


def write_records_csv(records, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow([r.utterance_id, r.phone_index, r.phone, format_seconds(r.err), int(r.significant)])


def records_to_csv(records) -> str:
    buf = io.StringIO()
    write_records_csv(records, buf)
    return buf.getvalue()


def parse_records_csv(text: str) -> list[BoundaryErrorRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != RECORD_FIELDS:
        raise MalformedLineError(1, f"expected header {','.join(RECORD_FIELDS)}")
    records = []
    for line_no, row in enumerate(reader, start=2):
        try:
            err = float(row["err_seconds"])
            records.append(BoundaryErrorRecord(row["utterance_id"], int(row["phone_index"]),
                                               row["phone"], err, row["significant"] == "1"))
        except (TypeError, ValueError):
            raise MalformedLineError(line_no) from None
    return records
