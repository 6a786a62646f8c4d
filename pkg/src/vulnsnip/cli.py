"""Command-line surface for the extraction/synthesis/evaluation pipeline.

Every run prints its resolved configuration and seed so experiment outputs
are reproducible; identical argv + inputs + seed produce byte-identical
output files. Exit codes: 0 success, 1 input/usage error, 2 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

from . import dataset
from .classify import (EndpointConfig, classify_remote, classify_rule,
                       findings_json, format_findings, load_predictions,
                       save_predictions, scan_project)
from .dedup import DedupConfig, dedup
from .metrics import confusion, format_metrics, metrics, metrics_json
from .normalize import NormalizeConfig
from .pipeline import apply_labels, extract_dir, load_labels
from .sinks import DEFAULT_RULES, SinkKind, load_rules
from .synth import RawSample, SynthConfig, hosts_from_dir, synthesize

ENDPOINT_ENV = "REALVUL_ENDPOINT"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise InputError(f"ratios must be three comma-separated numbers, got {text!r}")
    try:
        r = tuple(float(p) for p in parts)
    except ValueError as e:
        raise InputError(f"bad ratios {text!r}: {e}") from e
    return r  # validated again by the split functions


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    config: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise InputError(f"cannot read config file: {e}") from e
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


class _Run:
    """Resolved per-run options plus the config/seed banner and --log sink."""

    def __init__(self, args):
        self.args = args
        self.config = _load_config_file(getattr(args, "config", None))
        self.lines: list[str] = []
        seed = getattr(args, "seed", None)
        if seed is None:
            seed = int(self.config.get("seed", 0))
        self.seed = seed

    def opt(self, flag_value, key: str, default):
        """Flag beats config file beats default."""
        if flag_value is not None:
            return flag_value
        if key in self.config:
            raw = self.config[key]
            if isinstance(default, bool):
                return raw.lower() in ("1", "true", "yes", "on")
            if isinstance(default, int):
                return int(raw)
            if isinstance(default, float):
                return float(raw)
            return raw
        return default

    def say(self, text: str = ""):
        print(text)
        self.lines.append(text)

    def banner(self, **resolved):
        self.say(f"seed = {self.seed}")
        for key in sorted(resolved):
            self.say(f"config {key} = {resolved[key]}")

    def finish(self):
        log = getattr(self.args, "log", None)
        if log:
            Path(log).write_text("\n".join(self.lines) + "\n", encoding="utf-8")


def _rules_for(run: _Run):
    path = run.opt(getattr(run.args, "rules", None), "rules", None)
    return load_rules(path) if path else DEFAULT_RULES, path


def _normalize_cfg(run: _Run, rules) -> NormalizeConfig:
    enabled = not getattr(run.args, "no_normalize", False)
    if enabled:
        enabled = run.opt(None, "normalize.enabled", True)
    return NormalizeConfig(
        max_string_len=run.opt(None, "normalize.max_string_len", 20),
        placeholder=run.opt(None, "normalize.placeholder", "s"),
        enabled=enabled,
        rules=rules,
    )


def _endpoint(run: _Run) -> EndpointConfig | None:
    url = run.opt(getattr(run.args, "endpoint", None), "endpoint.base_url",
                  os.environ.get(ENDPOINT_ENV))
    if not url:
        return None
    return EndpointConfig(
        base_url=url,
        timeout=run.opt(None, "endpoint.timeout", 30.0),
        batch_size=run.opt(None, "endpoint.batch_size", 16),
        retries=run.opt(None, "endpoint.retries", 2),
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_extract(run: _Run) -> int:
    args = run.args
    rules, rules_path = _rules_for(run)
    norm = _normalize_cfg(run, rules)
    kind = SinkKind.from_string(args.cwe)
    threshold = run.opt(args.threshold, "dedup.threshold", 0.90)
    run.banner(cwe=kind.value, normalize=norm.enabled, rules=rules_path or "built-in",
               dedup_threshold=threshold, out=args.output)
    outcome = extract_dir(Path(args.root), kind, rules=rules, normalize_cfg=norm,
                          project=args.project)
    labeled = 0
    if args.labels:
        labeled = apply_labels(outcome.samples, load_labels(Path(args.labels)))
    kept = dedup(outcome.samples, DedupConfig(threshold=threshold))
    dataset.persist(kept, args.output)
    run.say(f"extracted {len(outcome.samples)} candidates "
            f"({outcome.discarded} discarded), {labeled} labeled, "
            f"{len(kept)} kept after dedup -> {args.output}")
    for rel, reason in outcome.skipped:
        run.say(f"skipped: {rel} ({reason})")
    return 0


def cmd_synth(run: _Run) -> int:
    args = run.args
    rules, rules_path = _rules_for(run)
    norm = _normalize_cfg(run, rules)
    times = run.opt(args.times, "synth.times", 1)
    select_simple = args.select_simple or run.opt(None, "synth.select_simple", False)
    max_path_blocks = run.opt(None, "synth.max_path_blocks", 64)
    run.banner(times=times, select_simple=select_simple,
               max_path_blocks=max_path_blocks,
               normalize=norm.enabled, rules=rules_path or "built-in",
               raw=args.raw, hosts=args.hosts, out=args.output)
    raw_samples = dataset.load(args.raw)
    raws = []
    for s in raw_samples:
        if s.label is None:
            raise InputError(f"raw sample {s.id} has no label")
        raws.append(RawSample(id=s.id, code=s.code, label=s.label,
                              cwe=SinkKind.from_string(s.cwe)))
    hosts, skipped = hosts_from_dir(Path(args.hosts), args.project)
    cfg = SynthConfig(times=times, seed=run.seed, select_simple=select_simple,
                      max_path_blocks=max_path_blocks)
    samples, report = synthesize(raws, hosts, cfg, normalize_cfg=norm, rules=rules)
    dataset.persist(samples, args.output)
    run.say(report.summary())
    run.say(f"{len(hosts)} host unit(s) from {args.hosts} -> {args.output}")
    for rel, reason in skipped:
        run.say(f"skipped host file: {rel} ({reason})")
    return 0


def cmd_split(run: _Run) -> int:
    args = run.args
    raw_ratios = run.opt(args.ratios, "split.ratios", None)
    ratios = _parse_ratios(raw_ratios) if raw_ratios else (0.8, 0.1, 0.1)
    run.banner(mode=args.mode, ratios=ratios, out=args.output)
    if args.mode == "random":
        if not args.input:
            raise InputError("random mode requires an input JSONL")
        samples = dataset.load(args.input)
        dataset.split_random(samples, ratios, run.seed)
        groups = {name: [s for s in samples if s.split == name]
                  for name in dataset.SPLITS}
        dropped = 0
    else:
        if not args.real or not args.syn:
            raise InputError("project mode requires --real and --syn")
        real = dataset.load(args.real)
        syn = dataset.load(args.syn)
        result = dataset.split_project_disjoint(real, syn, ratios, run.seed)
        groups = {"train": result.train, "val": result.val, "test": result.test}
        dropped = result.dropped
    for name, group in groups.items():
        path = f"{args.output}.{name}.jsonl"
        dataset.persist(group, path)
        run.say(f"{name}: {len(group)} samples -> {path}")
    run.say(f"dropped {dropped} synthetic sample(s) for provenance")
    return 0


def cmd_dedup(run: _Run) -> int:
    args = run.args
    threshold = run.opt(args.threshold, "dedup.threshold", 0.90)
    run.banner(threshold=threshold, input=args.input, out=args.output)
    samples = dataset.load(args.input)
    kept = dedup(samples, DedupConfig(threshold=threshold))
    dataset.persist(kept, args.output)
    run.say(f"kept {len(kept)} of {len(samples)} samples -> {args.output}")
    return 0


def cmd_stats(run: _Run) -> int:
    args = run.args
    run.banner(input=args.input)
    ds = dataset.stats(dataset.load(args.input))
    if args.json:
        import json as _json
        run.say(_json.dumps(dataset.stats_json(ds), indent=2))
    else:
        run.say(dataset.format_stats(ds))
    return 0


def cmd_eval(run: _Run) -> int:
    args = run.args
    run.banner(preds=args.preds, truth=args.truth)
    preds = load_predictions(Path(args.preds))
    truth_samples = dataset.load(args.truth)
    by_id = {p.sample_id: p.label for p in preds}
    pred_labels, truth_labels = [], []
    for s in truth_samples:
        if s.label is None:
            raise InputError(f"truth sample {s.id} has no label")
        if s.id not in by_id:
            raise InputError(f"no prediction for sample {s.id}")
        pred_labels.append(by_id[s.id])
        truth_labels.append(s.label)
    c = confusion(pred_labels, truth_labels)
    m = metrics(c)
    run.say(format_metrics(m, title="eval"))
    run.say(f"confusion: TP={c.tp} FP={c.fp} FN={c.fn} TN={c.tn}")
    if args.json_out:
        Path(args.json_out).write_text(metrics_json(m, c), encoding="utf-8")
        run.say(f"metrics JSON -> {args.json_out}")
    return 0


def cmd_scan(run: _Run) -> int:
    args = run.args
    rules, rules_path = _rules_for(run)
    norm = _normalize_cfg(run, rules)
    endpoint = _endpoint(run)
    if args.classifier == "remote" and endpoint is None:
        raise InputError(f"remote classifier needs --endpoint or ${ENDPOINT_ENV}")
    kinds = ([SinkKind.CWE79, SinkKind.CWE89] if args.cwe == "both"
             else [SinkKind.from_string(args.cwe)])
    run.banner(classifier=args.classifier, cwe=args.cwe,
               rules=rules_path or "built-in",
               endpoint=endpoint.base_url if endpoint else "-")
    from .classify import ScanReport
    merged = ScanReport()
    for kind in kinds:
        report = scan_project(Path(args.root), kind, classifier=args.classifier,
                              endpoint=endpoint, rules=rules, normalize_cfg=norm)
        merged.findings.extend(report.findings)
        merged.discarded += report.discarded
        for item in report.skipped:
            if item not in merged.skipped:
                merged.skipped.append(item)
    merged.findings.sort(key=lambda f: (f.file, f.line, f.taint_var))
    run.say(format_findings(merged))
    if args.json_out:
        Path(args.json_out).write_text(findings_json(merged), encoding="utf-8")
        run.say(f"findings JSON -> {args.json_out}")
    return 0


def cmd_classify(run: _Run) -> int:
    args = run.args
    endpoint = _endpoint(run)
    run.banner(classifier=args.classifier, input=args.input, out=args.output)
    samples = dataset.load(args.input)
    if args.classifier == "remote":
        if endpoint is None:
            raise InputError(f"remote classifier needs --endpoint or ${ENDPOINT_ENV}")
        preds = classify_remote(samples, endpoint)
    else:
        rules, _ = _rules_for(run)
        preds = classify_rule(samples, rules)
    save_predictions(preds, Path(args.output))
    bad = sum(1 for p in preds if p.label == "bad")
    run.say(f"{len(preds)} predictions ({bad} bad) -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="vulnsnip",
                     description="snippet-level PHP vulnerability sample pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="global RNG seed")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--log", default=None, help="also write run output here")

    p = sub.add_parser("extract", help="mine labeled snippets from a source tree")
    p.add_argument("root")
    p.add_argument("--cwe", required=True, choices=["79", "89"])
    p.add_argument("--labels", default=None, help="id<TAB>label file")
    p.add_argument("--project", default=None, help="project name override")
    p.add_argument("--rules", default=None, help="sink rules file")
    p.add_argument("--threshold", type=float, default=None, help="dedup threshold")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip normalization (ablation)")
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="synthesize samples into host code")
    p.add_argument("--raw", required=True, help="labeled pure samples JSONL")
    p.add_argument("--hosts", required=True, help="directory of host projects")
    p.add_argument("-T", "--times", type=int, default=None,
                   help="rounds per (sample, host) pair")
    p.add_argument("--select-simple", action="store_true",
                   help="restrict raw samples to simple data/control shapes")
    p.add_argument("--project", default=None)
    p.add_argument("--rules", default=None)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="train/val/test splits")
    p.add_argument("input", nargs="?", default=None, help="JSONL (random mode)")
    p.add_argument("--mode", required=True, choices=["random", "project"])
    p.add_argument("--real", default=None, help="real samples JSONL (project mode)")
    p.add_argument("--syn", default=None, help="synthetic samples JSONL (project mode)")
    p.add_argument("--ratios", default=None, help="train,val,test e.g. 0.8,0.1,0.1")
    p.add_argument("-o", "--output", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("dedup", help="remove near-duplicate samples")
    p.add_argument("input")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("input")
    p.add_argument("--json", action="store_true")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score predictions against labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--json-out", default=None)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="scan a project and report findings")
    p.add_argument("root")
    p.add_argument("--cwe", default="both", choices=["79", "89", "both"])
    p.add_argument("--classifier", default="rule", choices=["rule", "remote"])
    p.add_argument("--endpoint", default=None, help="classify service base URL")
    p.add_argument("--rules", default=None)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--json-out", default=None)
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("classify", help="classify a sample file")
    p.add_argument("input")
    p.add_argument("--classifier", default="rule", choices=["rule", "remote"])
    p.add_argument("--endpoint", default=None)
    p.add_argument("--rules", default=None)
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        run = _Run(args)
        code = args.func(run)
        run.finish()
        return code
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, dataset.DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except Exception:
        traceback.print_exc()
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
