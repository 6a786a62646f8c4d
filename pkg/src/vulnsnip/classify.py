"""Prediction sources: a remote model endpoint and a built-in rule baseline.

The remote path speaks the classify wire protocol with batching and
exponential-backoff retries. The rule baseline is a deliberately simple
heuristic (direct superglobal-to-sink flow with a small sanitizer list) that
makes the pipeline runnable end to end without any model; it favors recall
and will happily false-positive on indirect flows.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from . import protocol
from .cfg import build_cfg, def_use
from .dataset import Sample
from .normalize import NormalizeConfig
from .phpast import AstNode, parse
from .pipeline import extract_dir
from .sinks import DEFAULT_RULES, SinkKind, SinkRules, find_sinks

SUPERGLOBAL_NAMES = {"_GET", "_POST", "_REQUEST", "_COOKIE", "_SERVER"}


class ClassifyTransportError(Exception):
    pass


class ClassifyProtocolError(Exception):
    pass


@dataclass
class Prediction:
    sample_id: str
    label: str
    score: float
    source: str  # "remote" | "rule"


@dataclass
class EndpointConfig:
    base_url: str
    timeout: float = 30.0
    batch_size: int = 16
    retries: int = 2
    backoff: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.base_url = self.base_url.rstrip("/")


# ---------------------------------------------------------------------------
# Remote classification
# ---------------------------------------------------------------------------

def _post_batch(cfg: EndpointConfig, cwe: str, codes: list[str],
                batch_label: str) -> list[tuple[str, float]]:
    url = cfg.base_url + protocol.CLASSIFY_PATH
    payload = protocol.make_request(cwe, codes)
    last_exc: Exception | None = None
    for attempt in range(cfg.retries + 1):
        if attempt and cfg.backoff > 0:
            time.sleep(cfg.backoff * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=payload, timeout=cfg.timeout)
        except requests.RequestException as e:
            last_exc = e
            continue
        if resp.status_code >= 500:
            last_exc = ClassifyTransportError(
                f"{batch_label}: server error {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise ClassifyProtocolError(
                f"{batch_label}: status {resp.status_code}, "
                f"body: {resp.text[:200]}")
        try:
            return protocol.parse_response(resp.text, len(codes))
        except protocol.ProtocolViolation as e:
            raise ClassifyProtocolError(
                f"{batch_label}: {e}; body: {resp.text[:200]}") from e
    raise ClassifyTransportError(
        f"{batch_label}: no response after {cfg.retries + 1} attempts "
        f"({last_exc})")


def classify_remote(samples: list[Sample], cfg: EndpointConfig) -> list[Prediction]:
    """One prediction per sample, order-aligned, batched per CWE kind."""
    results: list[Prediction | None] = [None] * len(samples)
    by_cwe: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_cwe.setdefault(s.cwe, []).append(i)
    for cwe, indices in by_cwe.items():
        for start in range(0, len(indices), cfg.batch_size):
            chunk = indices[start:start + cfg.batch_size]
            codes = [samples[i].code for i in chunk]
            label = f"batch {cwe}[{start}:{start + len(chunk)}]"
            for i, (pred_label, score) in zip(chunk, _post_batch(cfg, cwe, codes, label)):
                results[i] = Prediction(samples[i].id, pred_label, score, "remote")
    return [r for r in results if r is not None]


# ---------------------------------------------------------------------------
# Rule baseline
# ---------------------------------------------------------------------------

def _taint_reaches(program: AstNode, taint_var: str, kind: SinkKind,
                   rules: SinkRules) -> bool:
    """Fixpoint taint propagation from superglobal reads to the taint var.

    A definition whose right-hand side is a single sanitizer call is clean;
    anything else reading tainted data taints its targets.
    """
    sanitizers = set(rules.cwe79_sanitizers if kind is SinkKind.CWE79
                     else rules.cwe89_sanitizers)
    if kind is SinkKind.CWE89:
        markers = set(rules.parameterized_markers)
        for n in program.walk():
            if n.kind == "Call" and n.name in markers:
                return False  # parameterized-query path
    if taint_var in SUPERGLOBAL_NAMES:
        return True  # the sink reads attacker input directly
    du = def_use(build_cfg(program), program)
    index = {n.id: n for n in program.walk()}

    def sanitized(stmt_id: int) -> bool:
        stmt = index[stmt_id]
        if stmt.kind != "Assign":
            return False
        value = stmt.children[1]
        return value.kind == "Call" and value.name in sanitizers

    tainted: set[str] = set()
    changed = True
    while changed:
        changed = False
        for sid, defs in du.defs.items():
            if not defs or sanitized(sid):
                continue
            uses = du.uses.get(sid, set())
            if (uses & SUPERGLOBAL_NAMES) or (uses & tainted):
                if not defs <= tainted:
                    tainted |= defs
                    changed = True
    return taint_var in tainted


def classify_rule(samples: list[Sample],
                  rules: SinkRules = DEFAULT_RULES) -> list[Prediction]:
    """Heuristic baseline: bad iff the taint variable's backward flow reaches
    a superglobal read with no sanitizer on the defining statement."""
    preds = []
    for s in samples:
        kind = SinkKind.from_string(s.cwe)
        program = parse(s.code)
        bad = _taint_reaches(program, s.taint_var, kind, rules)
        preds.append(Prediction(s.id, "bad" if bad else "good",
                                1.0 if bad else 0.0, "rule"))
    return preds


# ---------------------------------------------------------------------------
# Project scanning
# ---------------------------------------------------------------------------

@dataclass
class Finding:
    file: str
    line: int
    taint_var: str
    cwe: str
    label: str
    score: float


@dataclass
class ScanReport:
    findings: list[Finding] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    discarded: int = 0


def scan_project(root: Path, kind: SinkKind, classifier: str = "rule",
                 endpoint: EndpointConfig | None = None,
                 rules: SinkRules = DEFAULT_RULES,
                 normalize_cfg: NormalizeConfig | None = None) -> ScanReport:
    """Run the full pipeline over a project tree and classify every snippet."""
    outcome = extract_dir(Path(root), kind, rules=rules,
                          normalize_cfg=normalize_cfg)
    if classifier == "remote":
        if endpoint is None:
            raise ValueError("remote classifier requires an endpoint config")
        preds = classify_remote(outcome.samples, endpoint)
    elif classifier == "rule":
        preds = classify_rule(outcome.samples, rules)
    else:
        raise ValueError(f"unknown classifier {classifier!r}")
    findings = [
        Finding(file=s.file, line=s.line, taint_var=s.taint_var, cwe=s.cwe,
                label=p.label, score=p.score)
        for s, p in zip(outcome.samples, preds)
    ]
    findings.sort(key=lambda f: (f.file, f.line, f.taint_var))
    return ScanReport(findings=findings, skipped=outcome.skipped,
                      discarded=outcome.discarded)


def format_findings(report: ScanReport) -> str:
    head = f"{'file':<32} {'line':>5} {'var':<12} {'cwe':<7} {'label':<5} {'score':>6}"
    lines = [head, "-" * len(head)]
    for f in report.findings:
        lines.append(f"{f.file:<32} {f.line:>5} {f.taint_var:<12} {f.cwe:<7} "
                     f"{f.label:<5} {f.score:>6.2f}")
    lines.append(f"{len(report.findings)} finding(s), "
                 f"{len(report.skipped)} file(s) skipped, "
                 f"{report.discarded} candidate(s) discarded")
    for rel, reason in report.skipped:
        lines.append(f"skipped: {rel} ({reason})")
    return "\n".join(lines)


def findings_json(report: ScanReport) -> str:
    return json.dumps({
        "findings": [vars(f) for f in report.findings],
        "skipped": [{"file": f, "reason": r} for f, r in report.skipped],
        "discarded": report.discarded,
    }, indent=2)


def save_predictions(preds: list[Prediction], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps({"sample_id": p.sample_id, "label": p.label,
                                 "score": p.score, "source": p.source}) + "\n")


def load_predictions(path: Path) -> list[Prediction]:
    preds = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            if obj.get("label") not in ("good", "bad"):
                raise ValueError(f"{path}:{lineno}: bad label {obj.get('label')!r}")
            preds.append(Prediction(
                sample_id=str(obj.get("sample_id", obj.get("id", ""))),
                label=obj["label"], score=float(obj.get("score", 0.0)),
                source=str(obj.get("source", "remote"))))
    return preds
