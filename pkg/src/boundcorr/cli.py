"""Command line front end: simulate, compare, train, correct, evaluate.

A run is described by a YAML config holding the input paths and knobs;
relative paths resolve against the config file's directory, and any key
can be overridden by the matching flag.  Every command writes its outputs
into ``output_dir``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from functools import partial

import yaml

from . import __version__
from .cart import (
    STOP_SIZE_PRESETS,
    evaluate,
    parse_tree,
    serialize_tree,
    write_training_csv,
)
from .compare import parse_records_csv, records_to_csv
from .correct import DEFAULT_MIN_DUR, correct_alignment, report_to_csv
from .errors import (
    BoundcorrError,
    EmptyRecordsError,
    EmptyTrainingSetError,
    InvalidConfigError,
    SchemaMismatchError,
)
from .features import FeatureSchema, default_schema, parse_schema, parse_utterance_structure
from .labels import default_phoneset, format_seconds, parse_label_file, parse_phoneset, parse_symbol_map, serialize_label_file
from .pipeline import (
    build_examples,
    compare_utterance,
    evaluate_split,
    split_utterances,
    train_tree,
    triphone_tables,
)
from .report import corpus_metrics, improvement, metrics_csv, triphone_csv
from .sim import SimConfig, generate_corpus, load_sim_config, write_corpus

log = logging.getLogger("boundcorr")

LABEL_EXT = ".lab"
STRUCT_EXT = ".json"


@dataclass
class RunConfig:
    phoneset: str | None = None
    hyp_phoneset: str | None = None
    schema: str | None = None
    symbol_map: str | None = None
    ref_dir: str | None = None
    hyp_dir: str | None = None
    structure_dir: str | None = None
    corrected_dir: str | None = None
    output_dir: str = "out"
    tree: str | None = None
    stop_size: int = 25
    min_dur: float = DEFAULT_MIN_DUR
    split: float = 0.9
    seed: int = 0
    min_iou: float = 0.0
    strict: bool = False
    jobs: int = 1

    _PATHS = ("phoneset", "hyp_phoneset", "schema", "symbol_map", "ref_dir", "hyp_dir",
              "structure_dir", "corrected_dir", "output_dir", "tree")

    def validate(self):
        if not 0.0 < self.split < 1.0:
            raise InvalidConfigError("split must lie in (0, 1)")
        if self.stop_size < 1:
            raise InvalidConfigError("stop_size must be >= 1")
        if not self.min_dur > 0:
            raise InvalidConfigError("min_dur must be positive")
        if self.jobs < 1:
            raise InvalidConfigError("jobs must be >= 1")


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if path:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
        unknown = set(doc) - names
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        base = os.path.dirname(os.path.abspath(path))
        for key, value in doc.items():
            if key in RunConfig._PATHS and value is not None and not os.path.isabs(value):
                value = os.path.join(base, value)
            setattr(cfg, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    try:
        cfg.stop_size, cfg.seed, cfg.jobs = int(cfg.stop_size), int(cfg.seed), int(cfg.jobs)
        cfg.min_dur, cfg.split, cfg.min_iou = float(cfg.min_dur), float(cfg.split), float(cfg.min_iou)
    except (TypeError, ValueError) as exc:
        raise InvalidConfigError(str(exc)) from None
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# file helpers

def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _require(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise InvalidConfigError("missing config entries: " + ", ".join(missing))


def _ids_in(directory, ext):
    return sorted(f[:-len(ext)] for f in os.listdir(directory) if f.endswith(ext))


def _load_phonesets(cfg):
    ps = parse_phoneset(_read(cfg.phoneset)) if cfg.phoneset else default_phoneset()
    hyp_ps = parse_phoneset(_read(cfg.hyp_phoneset)) if cfg.hyp_phoneset else ps
    return ps, hyp_ps


def _load_schema(cfg, phoneset) -> FeatureSchema:
    return parse_schema(_read(cfg.schema)) if cfg.schema else default_schema(phoneset)


def _symbol_map(cfg):
    return parse_symbol_map(_read(cfg.symbol_map)) if cfg.symbol_map else None


def _tree_path(cfg):
    return cfg.tree or os.path.join(cfg.output_dir, f"cor.S{cfg.stop_size}.tree")


def _write_failures(cfg, failures):
    """Machine-readable per-utterance error listing; removed when clean."""
    path = os.path.join(cfg.output_dir, "failures.csv")
    if not failures:
        if os.path.exists(path):
            os.remove(path)
        return 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["utterance_id", "error"])
    for uid, msg in failures:
        w.writerow([uid, msg])
        print(f"error: {uid}: {msg}", file=sys.stderr)
    _write(path, buf.getvalue())
    return 1


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=16))


def _load_alignment(path, phoneset, uid):
    return parse_label_file(_read(path), phoneset, uid)


def _load_structures(cfg, phoneset, ids):
    return {uid: parse_utterance_structure(_read(os.path.join(cfg.structure_dir, uid + STRUCT_EXT)), phoneset)
            for uid in ids}


def _read_split(cfg):
    path = os.path.join(cfg.output_dir, "split.csv")
    if not os.path.exists(path):
        return None
    out = {}
    for row in csv.DictReader(io.StringIO(_read(path))):
        out.setdefault(row["split"], []).append(row["utterance_id"])
    return out


# --------------------------------------------------------------------------
# commands

def _compare_one(uid, cfg, ps, hyp_ps, smap):
    try:
        ref = _load_alignment(os.path.join(cfg.ref_dir, uid + LABEL_EXT), ps, uid)
        hyp = _load_alignment(os.path.join(cfg.hyp_dir, uid + LABEL_EXT), hyp_ps, uid)
        return uid, compare_utterance(ref, hyp, ps, smap, cfg.min_iou), None
    except (BoundcorrError, OSError) as exc:
        return uid, None, f"{type(exc).__name__}: {exc}"


def cmd_compare(cfg: RunConfig) -> int:
    _require(cfg, "ref_dir", "hyp_dir")
    ps, hyp_ps = _load_phonesets(cfg)
    smap = _symbol_map(cfg)
    ref_ids = _ids_in(cfg.ref_dir, LABEL_EXT)
    hyp_ids = set(_ids_in(cfg.hyp_dir, LABEL_EXT))
    failures = [(uid, "missing hypothesis file") for uid in ref_ids if uid not in hyp_ids]
    failures += [(uid, "missing reference file") for uid in sorted(hyp_ids - set(ref_ids))]
    ids = [uid for uid in ref_ids if uid in hyp_ids]
    out = _map(partial(_compare_one, cfg=cfg, ps=ps, hyp_ps=hyp_ps, smap=smap), ids, cfg.jobs)
    results = []
    for uid, res, err in out:
        if err:
            failures.append((uid, err))
        else:
            results.append(res)
    failures.sort()
    records = [r for res in results for r in res.records]
    _write(os.path.join(cfg.output_dir, "errors.csv"), records_to_csv(records))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["utterance_id", "units", "discarded", "discarded_fraction", "records"])
    for res in results:
        w.writerow([res.utterance_id, res.units, res.discarded,
                    f"{res.discarded / res.units:.6f}", len(res.records)])
    units = sum(r.units for r in results)
    discarded = sum(r.discarded for r in results)
    frac = discarded / units if units else 0.0
    w.writerow(["TOTAL", units, discarded, f"{frac:.6f}", len(records)])
    _write(os.path.join(cfg.output_dir, "compare_summary.csv"), buf.getvalue())
    nonzero = sum(1 for r in records if r.err != 0.0)
    print(f"compared {len(results)} utterances: {units} units, {discarded} discarded "
          f"({100 * frac:.2f}%), {len(records)} boundary records, {nonzero} nonzero errors")
    return _write_failures(cfg, failures)


def cmd_train(cfg: RunConfig) -> int:
    _require(cfg, "structure_dir")
    ps, _ = _load_phonesets(cfg)
    schema = _load_schema(cfg, ps)
    errors_path = os.path.join(cfg.output_dir, "errors.csv")
    if not os.path.exists(errors_path):
        raise InvalidConfigError(f"{errors_path} not found; run 'compare' first")
    records = parse_records_csv(_read(errors_path))
    summary = os.path.join(cfg.output_dir, "compare_summary.csv")
    ids = sorted({row["utterance_id"] for row in csv.DictReader(io.StringIO(_read(summary)))
                  if row["utterance_id"] != "TOTAL"}) if os.path.exists(summary) \
        else sorted({r.utterance_id for r in records})
    if not ids:
        raise EmptyTrainingSetError("no compared utterances")
    train_ids = split_utterances(ids, cfg.split, cfg.seed)[0] if len(ids) >= 2 else list(ids)
    structures = _load_structures(cfg, ps, ids)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["utterance_id", "split"])
    for uid in ids:
        w.writerow([uid, "train" if uid in set(train_ids) else "test"])
    _write(os.path.join(cfg.output_dir, "split.csv"), buf.getvalue())

    train_set = set(train_ids)
    train_ex = build_examples([r for r in records if r.utterance_id in train_set], structures, ps, schema)
    test_ex = build_examples([r for r in records if r.utterance_id not in train_set], structures, ps, schema)
    if cfg.stop_size not in STOP_SIZE_PRESETS:
        log.info("stop size %d is not one of the presets %s", cfg.stop_size, STOP_SIZE_PRESETS)
    tree = train_tree(train_ex, cfg.stop_size)

    buf = io.StringIO()
    write_training_csv(train_ex, schema, buf)
    _write(os.path.join(cfg.output_dir, "train_data.csv"), buf.getvalue())
    tree_path = _tree_path(cfg)
    _write(tree_path, serialize_tree(tree))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tree", "split", "examples", "rmse", "correlation", "mean_error", "mean_abs_error"])
    for split, ex in (("train", train_ex), ("test", test_ex)):
        if not ex:
            continue
        m = evaluate(tree, ex)
        w.writerow([os.path.basename(tree_path), split, len(ex), format_seconds(m.rmse), format_seconds(m.correlation),
                    format_seconds(m.mean_error), format_seconds(m.mean_abs_error)])
    _write(os.path.join(cfg.output_dir, "tree_metrics.csv"), buf.getvalue())
    print(f"trained {os.path.basename(tree_path)}: {tree.n_leaves} leaves, depth {tree.depth}, "
          f"{len(train_ex)} training / {len(test_ex)} test examples")
    return 0


def _correct_one(uid, cfg, ps, hyp_ps, schema, tree, smap):
    try:
        hyp = _load_alignment(os.path.join(cfg.hyp_dir, uid + LABEL_EXT), hyp_ps, uid)
        u = parse_utterance_structure(_read(os.path.join(cfg.structure_dir, uid + STRUCT_EXT)), ps)
        fixed, rep = correct_alignment(hyp, u, tree, schema, ps, cfg.min_dur, smap, cfg.strict)
        return uid, serialize_label_file(fixed), rep, None
    except (BoundcorrError, OSError) as exc:
        return uid, None, None, f"{type(exc).__name__}: {exc}"


def cmd_correct(cfg: RunConfig) -> int:
    _require(cfg, "hyp_dir", "structure_dir")
    ps, hyp_ps = _load_phonesets(cfg)
    schema = _load_schema(cfg, ps)
    tree = parse_tree(_read(_tree_path(cfg)))
    if tree.schema_hash != schema.hash:
        raise SchemaMismatchError(f"tree schema {tree.schema_hash} != schema {schema.hash}")
    out_dir = cfg.corrected_dir or os.path.join(cfg.output_dir, "corrected")
    ids = _ids_in(cfg.hyp_dir, LABEL_EXT)
    out = _map(partial(_correct_one, cfg=cfg, ps=ps, hyp_ps=hyp_ps, schema=schema, tree=tree,
                       smap=_symbol_map(cfg)), ids, cfg.jobs)
    failures, reports = [], []
    for uid, text, rep, err in out:
        if err:
            failures.append((uid, err))
            continue
        _write(os.path.join(out_dir, uid + LABEL_EXT), text)
        reports.append(rep)
    _write(os.path.join(cfg.output_dir, "correction_report.csv"), report_to_csv(reports))
    clamps = sum(r.clamp_count for r in reports)
    bounds = sum(len(r.boundaries) for r in reports)
    print(f"corrected {len(reports)} utterances: {bounds} boundaries, {clamps} clamped")
    return _write_failures(cfg, failures)


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "ref_dir", "hyp_dir", "structure_dir")
    ps, hyp_ps = _load_phonesets(cfg)
    smap = _symbol_map(cfg)
    corrected_dir = cfg.corrected_dir or os.path.join(cfg.output_dir, "corrected")
    ids = _ids_in(cfg.ref_dir, LABEL_EXT)
    failures = []
    refs, hyps, fixed = {}, {}, {}
    for uid in ids:
        try:
            refs[uid] = _load_alignment(os.path.join(cfg.ref_dir, uid + LABEL_EXT), ps, uid)
            hyps[uid] = _load_alignment(os.path.join(cfg.hyp_dir, uid + LABEL_EXT), hyp_ps, uid)
            if os.path.isdir(corrected_dir):
                fixed[uid] = _load_alignment(os.path.join(corrected_dir, uid + LABEL_EXT), hyp_ps, uid)
        except (BoundcorrError, OSError) as exc:
            failures.append((uid, f"{type(exc).__name__}: {exc}"))
    ok = [uid for uid in ids if uid in refs and uid in hyps and (not fixed or uid in fixed)]
    structures = _load_structures(cfg, ps, ok)
    split = _read_split(cfg)
    if split:
        splits = [(name, [u for u in sorted(split[name]) if u in set(ok)])
                  for name in ("train", "test") if name in split]
    else:
        splits = [("all", ok)]

    variants = [("uncorrected", hyps)] + ([("corrected", fixed)] if fixed else [])
    rows, tables = [], []
    for split_name, sids in splits:
        if not sids:
            continue
        per_variant = {}
        for name, aligns in variants:
            per_variant[name] = evaluate_split(refs, aligns, sids, ps, smap, cfg.min_iou)
            if not per_variant[name]:
                raise EmptyRecordsError(f"no boundary records for {name}/{split_name}")
        base = corpus_metrics(per_variant["uncorrected"])
        for name, _ in variants:
            m = corpus_metrics(per_variant[name])
            imp = improvement(base, m) if base.total_error > 0 else None
            rows.append((name, split_name, m, imp))
        after = per_variant.get("corrected", per_variant["uncorrected"])
        before_t, after_t = triphone_tables(per_variant["uncorrected"], after, structures, ps)
        tables.append((split_name, before_t, after_t))
    _write(os.path.join(cfg.output_dir, "metrics.csv"), metrics_csv(rows))
    _write(os.path.join(cfg.output_dir, "triphone.csv"), triphone_csv(tables))
    for name, split_name, m, imp in rows:
        extra = "" if imp is None else f"  improvement {100 * imp:.2f}%"
        print(f"{name:12s} {split_name:5s} total {m.total_error:.3f} s  mean {m.mean_error:.4f} s  "
              f"std {m.stddev:.4f} s  n={m.boundary_count}{extra}")
    return _write_failures(cfg, failures)


def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config) if args.config else SimConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.utterances is not None:
        cfg.utterance_count = args.utterances
    ps = parse_phoneset(_read(args.phoneset)) if args.phoneset else default_phoneset()
    schema = parse_schema(_read(args.schema)) if args.schema else default_schema(ps)
    corpus = generate_corpus(cfg, ps, schema)
    write_corpus(corpus, args.out, ps, schema, cfg)
    print(f"wrote {len(corpus)} utterances to {args.out}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic corpus")
    sim.add_argument("--config", help="simulator YAML config")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--utterances", type=int)
    sim.add_argument("--phoneset")
    sim.add_argument("--schema")

    for name, help_ in (("compare", "pair alignments and export boundary errors"),
                        ("train", "train a regression tree on the training split"),
                        ("correct", "apply a tree to hypothesis alignments"),
                        ("evaluate", "score uncorrected and corrected alignments")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="run YAML config")
        p.add_argument("--output-dir", dest="output_dir")
        for key in ("phoneset", "hyp_phoneset", "schema", "symbol_map", "ref_dir", "hyp_dir",
                    "structure_dir", "corrected_dir", "tree"):
            p.add_argument("--" + key.replace("_", "-"), dest=key)
        p.add_argument("--seed", type=int, help="train/test split seed")
        p.add_argument("--stop-size", dest="stop_size", type=int,
                       help=f"minimum leaf size (presets {', '.join(map(str, STOP_SIZE_PRESETS))})")
        p.add_argument("--min-dur", dest="min_dur", type=float, help="minimum corrected segment duration")
        p.add_argument("--split", type=float, help="training fraction of utterances")
        p.add_argument("--min-iou", dest="min_iou", type=float)
        p.add_argument("--strict", action="store_const", const=True, default=None,
                       help="require hypothesis labels to match the structure exactly")
        p.add_argument("--jobs", type=int)
    return parser


_COMMANDS = {"compare": cmd_compare, "train": cmd_train, "correct": cmd_correct, "evaluate": cmd_evaluate}
_OVERRIDES = ("output_dir", "phoneset", "hyp_phoneset", "schema", "symbol_map", "ref_dir", "hyp_dir",
              "structure_dir", "corrected_dir", "tree", "seed", "stop_size", "min_dur", "split",
              "min_iou", "strict", "jobs")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        cfg = load_run_config(args.config, {k: getattr(args, k) for k in _OVERRIDES})
        return _COMMANDS[args.command](cfg)
    except (BoundcorrError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
