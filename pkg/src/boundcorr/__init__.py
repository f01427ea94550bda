"""Context-dependent correction of forced-alignment phone boundaries.

Learns the systematic right-boundary error an automatic aligner makes, as a
function of each phone's linguistic context, with a CART regression tree,
and shifts the boundaries of new alignments by the predicted error.
"""

__version__ = "0.1.0"

from .cart import RegressionTree, TrainingExample, TreeMetrics, evaluate, parse_tree, predict, serialize_tree, train
from .compare import BoundaryErrorRecord, PairedSegment, compute_errors, pair_alignments, preprocess
from .correct import CorrectionReport, correct_alignment
from .features import (
    FeatureSchema,
    Senone,
    UtteranceStructure,
    default_schema,
    extract_senone,
    extract_senones,
    parse_schema,
    parse_utterance_structure,
)
from .labels import Alignment, PhoneSet, Segment, parse_label_file, parse_phoneset, serialize_label_file
from .report import CorpusMetrics, corpus_metrics, improvement, triphone_class, triphone_stats
from .sim import SimConfig, generate_corpus, oracle_class_means

__all__ = [
    "RegressionTree",
    "TrainingExample",
    "TreeMetrics",
    "evaluate",
    "parse_tree",
    "predict",
    "serialize_tree",
    "train",
    "BoundaryErrorRecord",
    "PairedSegment",
    "compute_errors",
    "pair_alignments",
    "preprocess",
    "CorrectionReport",
    "correct_alignment",
    "FeatureSchema",
    "Senone",
    "UtteranceStructure",
    "default_schema",
    "extract_senone",
    "extract_senones",
    "parse_schema",
    "parse_utterance_structure",
    "Alignment",
    "PhoneSet",
    "Segment",
    "parse_label_file",
    "parse_phoneset",
    "serialize_label_file",
    "CorpusMetrics",
    "corpus_metrics",
    "improvement",
    "triphone_class",
    "triphone_stats",
    "SimConfig",
    "generate_corpus",
    "oracle_class_means",
]
