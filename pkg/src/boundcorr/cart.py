"""CART regression trees over senones.

Trees are grown greedily: at each node every candidate question is scored by
the count-weighted variance of the two children it would create, and the
node is split on the best one until no question leaves at least
``stop_size`` examples on both sides or the split stops reducing impurity.
There is no pruning; ``stop_size`` is the only complexity control.

The text format is a parenthesized s-expression tree::

    ;; schema_hash 0123456789abcdef
    ((cur_phone_class is vowel)
     ((0.030000 0.001000 812))
     ((-0.010000 0.002000 1377)))

Categorical questions use ``is`` (equality), numeric ones ``<=``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import (
    EmptyExamplesError,
    MalformedLineError,
    ParseError,
    SchemaHashMissingError,
    SchemaMismatchError,
)
from .features import CATEGORICAL, FeatureSchema, Senone
from .labels import format_seconds

IS = "is"
LE = "<="

# a node whose targets have RMS spread below 1 ns is pure: times are stored
# at 1 us resolution, so any smaller variance is float round-off
PURE_VARIANCE = 1e-18
# gains within this fraction of the node SSE are treated as ties / no gain
RELATIVE_GAIN_TOL = 1e-12

STOP_SIZE_PRESETS = (5, 10, 25, 100)


@dataclass(frozen=True)
class TrainingExample:
    senone: Senone
    target: float


@dataclass(frozen=True)
class Leaf:
    mean: float
    stddev: float
    count: int


@dataclass(frozen=True)
class Question:
    feature: str
    op: str
    value: Union[str, float]
    yes: "Node"
    no: "Node"

    def ask(self, value) -> bool:
        if self.op == IS:
            return value == self.value
        # a categorical value reaching a numeric question cannot satisfy it
        return not isinstance(value, str) and value <= self.value


Node = Union[Leaf, Question]


@dataclass(frozen=True)
class RegressionTree:
    schema_hash: str
    root: Node

    def leaves(self) -> Iterator[Leaf]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.extend((node.no, node.yes))

    def route(self, senone: Senone) -> Leaf:
        if senone.schema_hash != self.schema_hash:
            raise SchemaMismatchError(
                f"senone schema {senone.schema_hash} != tree schema {self.schema_hash}")
        node = self.root
        values = senone.features
        while isinstance(node, Question):
            node = node.yes if node.ask(values.get(node.feature)) else node.no
        return node

    def predict(self, senone: Senone) -> float:
        return self.route(senone).mean

    @property
    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    @property
    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if isinstance(node, Question):
                stack.append((node.yes, d + 1))
                stack.append((node.no, d + 1))
        return best


@dataclass(frozen=True)
class TreeMetrics:
    rmse: float
    correlation: float
    mean_error: float
    mean_abs_error: float


def predict(tree: RegressionTree, senone: Senone) -> float:
    return tree.predict(senone)


# --------------------------------------------------------------------------
# training

def _check_examples(examples: Sequence[TrainingExample]) -> tuple[str, tuple[str, ...]]:
    if not examples:
        raise EmptyExamplesError("no training examples")
    first = examples[0].senone
    for ex in examples:
        if ex.senone.schema_hash != first.schema_hash or ex.senone.names != first.names:
            raise SchemaMismatchError("training examples do not share one schema")
        if not math.isfinite(ex.target):
            raise ValueError(f"non-finite target {ex.target!r}")
    return first.schema_hash, first.names


class _Column:
    def __init__(self, name: str, values: list):
        self.name = name
        if all(isinstance(v, str) for v in values):
            self.categorical = True
            self.categories = sorted(set(values))
            code = {c: k for k, c in enumerate(self.categories)}
            self.data = np.fromiter((code[v] for v in values), dtype=np.int64, count=len(values))
        elif all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            self.categorical = False
            self.data = np.asarray(values, dtype=np.float64)
        else:
            raise SchemaMismatchError(f"feature {name!r} mixes categorical and numeric values")


def _best_categorical(col: _Column, idx, yc, sse, stop_size):
    codes = col.data[idx]
    k = len(col.categories)
    n = len(idx)
    cnt = np.bincount(codes, minlength=k)
    s = np.bincount(codes, weights=yc, minlength=k)
    q = np.bincount(codes, weights=yc * yc, minlength=k)
    ok = (cnt >= stop_size) & (n - cnt >= stop_size)
    if not ok.any():
        return None
    S, Q = yc.sum(), q.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        sse_yes = q - s * s / cnt
        sse_no = (Q - q) - (S - s) ** 2 / (n - cnt)
    gain = np.where(ok, sse - sse_yes - sse_no, -np.inf)
    best = gain.max()
    # first (lexicographically smallest) category within tie tolerance
    pick = int(np.flatnonzero(gain >= best - RELATIVE_GAIN_TOL * sse)[0])
    return gain[pick], IS, col.categories[pick], col.data[idx] == pick


def _best_numeric(col: _Column, idx, yc, sse, stop_size):
    x = col.data[idx]
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], yc[order]
    n = len(idx)
    cuts = np.flatnonzero(xs[:-1] < xs[1:])  # split after position k
    nl = cuts + 1
    ok = (nl >= stop_size) & (n - nl >= stop_size)
    if not ok.any():
        return None
    cuts, nl = cuts[ok], nl[ok]
    cs = np.cumsum(ys)
    cq = np.cumsum(ys * ys)
    S, Q = cs[-1], cq[-1]
    sl, ql = cs[cuts], cq[cuts]
    sse_l = ql - sl * sl / nl
    sse_r = (Q - ql) - (S - sl) ** 2 / (n - nl)
    gain = sse - sse_l - sse_r
    best = gain.max()
    pick = int(np.flatnonzero(gain >= best - RELATIVE_GAIN_TOL * sse)[0])
    k = cuts[pick]
    threshold = (xs[k] + xs[k + 1]) / 2.0
    return gain[pick], LE, float(threshold), x <= threshold


def _make_leaf(y: np.ndarray) -> Leaf:
    mean = math.fsum(y) / len(y)
    std = math.sqrt(math.fsum((y - mean) ** 2) / len(y))
    return Leaf(mean, std, int(len(y)))


def train(examples: Sequence[TrainingExample], stop_size: int) -> RegressionTree:
    """Grow a regression tree; every leaf keeps at least ``stop_size`` examples.

    Ties between equally good questions go to the earliest feature in schema
    order, then the smallest threshold or lexicographically smallest value.
    """
    if stop_size < 1:
        raise ValueError("stop_size must be >= 1")
    schema_hash, names = _check_examples(examples)
    y_all = np.array([ex.target for ex in examples], dtype=np.float64)
    columns = [_Column(name, [ex.senone.values[j] for ex in examples])
               for j, name in enumerate(names)]

    # iterative build: each work item fills one slot of its parent
    root_slot: list = [None]
    work = [(np.arange(len(examples)), root_slot, 0)]
    pending = []  # (question args, yes slot, no slot, target slot, key)
    while work:
        idx, slot, key = work.pop()
        y = y_all[idx]
        n = len(idx)
        mean = math.fsum(y) / n
        yc = y - mean
        sse = math.fsum(yc * yc)
        best = None
        if n >= 2 * stop_size and sse > n * PURE_VARIANCE:
            for col in columns:
                cand = (_best_categorical if col.categorical else _best_numeric)(
                    col, idx, yc, sse, stop_size)
                if cand is None:
                    continue
                if best is None or cand[0] > best[0] + RELATIVE_GAIN_TOL * sse:
                    best = (cand[0], col.name) + cand[1:]
        if best is None or not best[0] > RELATIVE_GAIN_TOL * sse:
            slot[key] = _make_leaf(y)
            continue
        _, feature, op, value, mask = best
        children: list = [None, None]
        pending.append((feature, op, value, children, slot, key))
        work.append((idx[~mask], children, 1))
        work.append((idx[mask], children, 0))

    # assemble bottom-up: later pending entries are deeper
    for feature, op, value, children, slot, key in reversed(pending):
        slot[key] = Question(feature, op, value, children[0], children[1])
    return RegressionTree(schema_hash, root_slot[0])


def evaluate(tree: RegressionTree, examples: Sequence[TrainingExample]) -> TreeMetrics:
    if not examples:
        raise EmptyExamplesError("no examples to evaluate")
    pred = np.array([tree.predict(ex.senone) for ex in examples])
    target = np.array([ex.target for ex in examples])
    return metrics_from_predictions(pred, target)


def metrics_from_predictions(pred, target) -> TreeMetrics:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if len(pred) == 0:
        raise EmptyExamplesError("no predictions")
    diff = pred - target
    rmse = math.sqrt(float(np.mean(diff * diff)))
    pc, tc = pred - pred.mean(), target - target.mean()
    vp, vt = float(np.sum(pc * pc)), float(np.sum(tc * tc))
    # test constancy exactly; a computed mean can leave round-off residue
    if vp == 0.0 or vt == 0.0 or np.all(pred == pred[0]) or np.all(target == target[0]):
        corr = 0.0
    else:
        corr = float(np.sum(pc * tc)) / math.sqrt(vp * vt)
        corr = min(1.0, max(-1.0, corr))
    return TreeMetrics(rmse, corr, float(np.mean(diff)), float(np.mean(np.abs(diff))))


# --------------------------------------------------------------------------
# text format

_BARE_ATOM = re.compile(r'[^\s()";]+')
_HEADER = re.compile(r";;\s*schema_hash\s+(\S+)")


def _atom(value: str) -> str:
    return value if _BARE_ATOM.fullmatch(value) else json.dumps(value, ensure_ascii=False)


def _write(node: Node, indent: int, out: list) -> None:
    pad = " " * indent
    if isinstance(node, Leaf):
        out.append(f"{pad}(({format_seconds(node.mean)} {format_seconds(node.stddev)} {node.count}))")
        return
    value = _atom(node.value) if node.op == IS else format_seconds(node.value)
    out.append(f"{pad}(({_atom(node.feature)} {node.op} {value})")
    _write(node.yes, indent + 1, out)
    _write(node.no, indent + 1, out)
    out[-1] += ")"


def serialize_tree(tree: RegressionTree) -> str:
    out = [f";; schema_hash {tree.schema_hash}"]
    _write(tree.root, 0, out)
    return "\n".join(out) + "\n"


def _tokenize(text: str, offset: int):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append((c, offset + i, False))
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise ParseError(offset + i, "unterminated string")
            try:
                tokens.append((json.loads(text[i:j + 1]), offset + i, True))
            except json.JSONDecodeError:
                raise ParseError(offset + i, "bad string escape") from None
            i = j + 1
        else:
            m = _BARE_ATOM.match(text, i)
            tokens.append((m.group(0), offset + i, False))
            i = m.end()
    return tokens


def parse_tree(text: str) -> RegressionTree:
    lines = text.split("\n", 1)
    m = _HEADER.fullmatch(lines[0].strip()) if lines else None
    if not m:
        raise SchemaHashMissingError("first line must be ';; schema_hash <hash>'")
    body = lines[1] if len(lines) > 1 else ""
    tokens = _tokenize(body, len(lines[0]) + 1)
    pos = 0
    end_offset = len(text)

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, end_offset, False)

    def expect(tok):
        nonlocal pos
        t, off, quoted = peek()
        if t != tok or quoted:
            raise ParseError(off, f"expected {tok!r}, found {'end of input' if t is None else repr(t)}")
        pos += 1

    def atom():
        nonlocal pos
        t, off, quoted = peek()
        if t is None or (not quoted and t in "()"):
            raise ParseError(off, "expected an atom")
        pos += 1
        return t, off

    def number(kind):
        t, off = atom()
        try:
            return kind(t)
        except ValueError:
            raise ParseError(off, f"expected a number, found {t!r}") from None

    def node():
        expect("(")
        expect("(")
        t, off, quoted = peek()
        if t is None:
            raise ParseError(off, "unexpected end of input")
        # leaf: ((mean stddev count)); question: ((feature op value) yes no)
        save = pos
        first, _ = atom()
        t2, _, _ = peek()
        op_tok = t2
        if op_tok in (IS, LE):
            feature = first
            atom()
            if op_tok == IS:
                value, _ = atom()
            else:
                value = number(float)
            expect(")")
            yes = node()
            no = node()
            expect(")")
            return Question(feature, op_tok, value, yes, no)
        _restore(save)
        mean = number(float)
        std = number(float)
        count = number(int)
        expect(")")
        expect(")")
        return Leaf(mean, std, count)

    def _restore(p):
        nonlocal pos
        pos = p

    root = node()
    if pos != len(tokens):
        raise ParseError(tokens[pos][1], "trailing input after tree")
    return RegressionTree(m.group(1), root)


# --------------------------------------------------------------------------
# training data CSV

def write_training_csv(examples: Sequence[TrainingExample], schema: FeatureSchema, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(schema.names + ["target"])
    for ex in examples:
        writer.writerow(list(ex.senone.values) + [format_seconds(ex.target)])


def read_training_csv(text: str, schema: FeatureSchema) -> list[TrainingExample]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != schema.names + ["target"]:
        raise SchemaMismatchError("training CSV header does not match the schema")
    names = tuple(schema.names)
    kinds = [f.kind for f in schema.features]
    out = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(names) + 1:
            raise MalformedLineError(line_no, "wrong column count")
        try:
            values = tuple(v if k == CATEGORICAL else int(v) for v, k in zip(row, kinds))
            target = float(row[-1])
        except ValueError:
            raise MalformedLineError(line_no, "bad numeric field") from None
        out.append(TrainingExample(Senone(schema.hash, names, values), target))
    return out
