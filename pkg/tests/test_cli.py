import csv
import os
import shutil
import time

import pytest

from boundcorr.cart import Leaf, parse_tree
from boundcorr.cli import main


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    assert main(["simulate", "--out", str(out), "--utterances", "12", "--seed", "5"]) == 0
    return out


def run_args(corpus, out, *extra):
    return ["--ref-dir", str(corpus / "ref"), "--hyp-dir", str(corpus / "hyp"),
            "--structure-dir", str(corpus / "struct"), "--phoneset", str(corpus / "phoneset.txt"),
            "--schema", str(corpus / "schema.txt"), "--output-dir", str(out), *extra]


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_simulate_file_counts_and_speed(tmp_path):
    t0 = time.perf_counter()
    assert main(["simulate", "--out", str(tmp_path / "c"), "--utterances", "10"]) == 0
    assert time.perf_counter() - t0 < 1.0
    n = sum(len(os.listdir(tmp_path / "c" / d)) for d in ("ref", "hyp", "struct"))
    assert n == 10 * 3


def test_full_run(corpus, tmp_path):
    out = tmp_path / "out"
    for cmd in ("compare", "train", "correct", "evaluate"):
        assert main([cmd, *run_args(corpus, out, "--stop-size", "25")]) == 0, cmd
    assert (out / "cor.S25.tree").exists()
    assert len(os.listdir(out / "corrected")) == 12
    rows = read_csv(out / "triphone.csv")
    assert len(rows) == 54 and {r["split"] for r in rows} == {"train", "test"}
    metrics = read_csv(out / "metrics.csv")
    assert [(r["alignment"], r["split"]) for r in metrics] == [
        ("uncorrected", "train"), ("corrected", "train"), ("uncorrected", "test"), ("corrected", "test")]
    summary = read_csv(out / "compare_summary.csv")
    assert summary[-1]["utterance_id"] == "TOTAL"


def test_self_comparison_is_zero(corpus, tmp_path):
    out = tmp_path / "self"
    args = ["--ref-dir", str(corpus / "ref"), "--hyp-dir", str(corpus / "ref"),
            "--structure-dir", str(corpus / "struct"), "--output-dir", str(out)]
    assert main(["compare", *args]) == 0
    assert all(float(r["err_seconds"]) == 0.0 for r in read_csv(out / "errors.csv"))
    assert read_csv(out / "compare_summary.csv")[-1]["discarded"] == "0"
    assert main(["evaluate", *args]) == 0
    (row,) = read_csv(out / "metrics.csv")
    assert float(row["total_error"]) == 0.0 and float(row["stddev"]) == 0.0
    assert row["improvement"] == ""


def test_missing_counterpart(corpus, tmp_path):
    hyp = tmp_path / "hyp"
    shutil.copytree(corpus / "hyp", hyp)
    os.remove(hyp / "utt0003.lab")
    out = tmp_path / "out"
    args = ["--ref-dir", str(corpus / "ref"), "--hyp-dir", str(hyp), "--output-dir", str(out)]
    assert main(["compare", *args]) == 1
    failures = read_csv(out / "failures.csv")
    assert [f["utterance_id"] for f in failures] == ["utt0003"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["compare", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert "error" in capsys.readouterr().err


def test_large_stop_size_single_leaf(corpus, tmp_path, caplog):
    out = tmp_path / "out"
    assert main(["compare", *run_args(corpus, out)]) == 0
    assert main(["train", *run_args(corpus, out, "--stop-size", "100000")]) == 0
    tree = parse_tree((out / "cor.S100000.tree").read_text())
    assert isinstance(tree.root, Leaf)
    assert "single leaf" in caplog.text


def test_config_file_and_jobs(corpus, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"ref_dir: {corpus / 'ref'}\nhyp_dir: {corpus / 'hyp'}\n"
                   f"structure_dir: {corpus / 'struct'}\noutput_dir: a\nstop_size: 5\n")
    assert main(["compare", "--config", str(cfg)]) == 0
    assert main(["compare", "--config", str(cfg), "--output-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "errors.csv").read_bytes() == (tmp_path / "b" / "errors.csv").read_bytes()


def test_correct_rejects_foreign_tree(corpus, tmp_path):
    out = tmp_path / "out"
    tree = out / "cor.S25.tree"
    os.makedirs(out)
    tree.write_text(";; schema_hash 0000000000000000\n((0.0 0.0 1))\n")
    assert main(["correct", *run_args(corpus, out)]) == 1
