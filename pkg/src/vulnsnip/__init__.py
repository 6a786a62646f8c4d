"""Snippet-level PHP vulnerability sample pipeline.

Sink localization and backward slicing turn source trees into single-sink
snippets; normalization, deduplication, and semi-synthetic insertion build
training corpora from them; split protocols, metrics, and classify clients
close the evaluation loop.
"""

from .cfg import CfPath, Cfg, DefUse, build_cfg, def_use, random_path
from .classify import (EndpointConfig, Prediction, classify_remote,
                       classify_rule, scan_project)
from .dataset import (DatasetStats, Sample, load, persist, split_project_disjoint,
                      split_random, stats)
from .dedup import DedupConfig, dedup, similarity
from .metrics import Confusion, Metrics, confusion, metrics
from .normalize import NormalizeConfig, elide_strings, normalize, rename_vars
from .phpast import AstNode, ParseError, emit, parse, strip_comments, syntax_check
from .pipeline import SourceFile, extract_dir, extract_from_source
from .sinks import (SinkKind, SinkRules, SinkSite, TaintCandidate,
                    find_sinks, load_rules, taint_candidates)
from .slicing import Snippet, backward_slice, globalize, mark_taint
from .synth import HostUnit, RawSample, SynthConfig, SynthReport, synthesize

__version__ = "0.1.0"

__all__ = [
    "AstNode", "CfPath", "Cfg", "Confusion", "DatasetStats", "DedupConfig",
    "DefUse", "EndpointConfig", "HostUnit", "Metrics", "NormalizeConfig",
    "ParseError", "Prediction", "RawSample", "Sample", "SinkKind", "SinkRules",
    "SinkSite", "Snippet", "SourceFile", "SynthConfig", "SynthReport",
    "TaintCandidate",
    "backward_slice", "build_cfg", "classify_remote", "classify_rule",
    "confusion", "dedup", "def_use", "elide_strings", "emit", "extract_dir",
    "extract_from_source", "find_sinks", "globalize", "load", "load_rules",
    "mark_taint", "metrics", "normalize", "parse", "persist", "random_path",
    "rename_vars", "scan_project", "similarity", "split_project_disjoint",
    "split_random", "stats", "strip_comments", "syntax_check",
    "taint_candidates", "synthesize",
]
