"""Semi-synthetic sample generation by insertion into cleaned host code.

For every (pure sample, host unit, round) triple: draw a seeded random
control-flow path through the host, drop the host's own sink statements,
interleave the sample's top-level statements into the path at random cut
points (their relative order preserved, so the data flow that justifies the
label survives), then re-slice and preprocess the merged code. Host variables
that collide with sample variables are renamed first; a collision would
silently rewire data flow and could falsify the carried label.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .cfg import build_cfg, def_use, path_statement_ids, random_path
from .dataset import Sample
from .normalize import NormalizeConfig, normalize
from .phpast import (AstNode, CONTROL_KINDS, ParseError, child_blocks,
                     copy_tree, emit, iter_statements, parse, renumber,
                     syntax_check)
from .pipeline import project_of
from .sinks import (DEFAULT_RULES, SinkKind, SinkRules, TaintCandidate,
                    find_sinks)
from .slicing import SliceError, backward_slice, filter_program, globalize

SIMPLE_MAX_DATAFLOW_EDGES = 8
SIMPLE_MAX_BRANCHES = 2

_PLACEHOLDER_RE = re.compile(r"^(\s*)__raw_chunk_(\d+)__\(\);$")


@dataclass
class RawSample:
    id: str
    code: str            # full snippet text including the <?php tag
    label: str           # "good" | "bad"
    cwe: SinkKind


@dataclass
class HostUnit:
    id: str
    code: str            # statements only; valid once wrapped in <?php
    project: str


@dataclass
class SynthConfig:
    times: int = 1       # synthesis rounds per (sample, host) pair
    seed: int = 0
    max_path_blocks: int = 64
    select_simple: bool = False

    def __post_init__(self):
        if self.times < 1:
            raise ValueError("times must be >= 1")


@dataclass
class SynthReport:
    attempts: int = 0
    produced: int = 0
    syntax_failures: int = 0
    sink_failures: int = 0
    raw_total: int = 0
    raw_selected: int = 0

    def summary(self) -> str:
        return (f"synthesis: {self.attempts} attempts, {self.produced} samples, "
                f"{self.syntax_failures} syntax failures, "
                f"{self.sink_failures} sink-invariant failures "
                f"({self.raw_selected}/{self.raw_total} raw samples used)")


def _wrap(code: str) -> str:
    return "<?php\n" + code if not code.lstrip().startswith("<?php") else code


def _body_text(program: AstNode) -> str:
    text = emit(program)
    return text[len("<?php\n"):]


def _derive_seed(seed: int, *parts: object) -> int:
    key = "|".join(str(p) for p in (seed,) + parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def remove_vuln_triggers(host: HostUnit, kind: SinkKind,
                         rules: SinkRules = DEFAULT_RULES) -> HostUnit:
    """Delete every statement that matches a sink of ``kind``."""
    program = parse(_wrap(host.code))
    sink_ids = {site.stmt_id for site in find_sinks(program, kind, rules)}
    keep = {s.id for s in iter_statements(program)} - sink_ids
    cleaned = filter_program(program, keep)
    return replace(host, code=_body_text(cleaned))


def split_top_level(sample: RawSample) -> list[str]:
    """The sample's top-level statements as re-emittable text chunks.

    Chunks are cut from the original text, so trailing taint markers travel
    with their statement; a compound statement is one chunk.
    """
    program = parse(sample.code)
    starts = [s.span[0] for s in program.children]
    chunks = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(sample.code)
        chunks.append(sample.code[start:end].strip())
    return chunks


def is_simple(raw: RawSample) -> bool:
    """Selection filter for synthesis sources: short data streams and few
    conditional branches."""
    program = parse(raw.code)
    du = def_use(build_cfg(program), program)
    ids = sorted(du.defs)
    edges = 0
    for d in ids:
        for u in ids:
            if d != u and du.defs[d] & du.uses.get(u, set()):
                edges += 1
    branches = sum(1 for n in program.walk()
                   if n.kind in CONTROL_KINDS or n.kind == "Ternary")
    return edges <= SIMPLE_MAX_DATAFLOW_EDGES and branches <= SIMPLE_MAX_BRANCHES


def _raw_var_names(raw: RawSample) -> set[str]:
    names = set()
    for n in parse(raw.code).walk():
        if n.kind in ("Variable", "Param"):
            names.add(n.name)
    return names


def _rename_collisions(program: AstNode, raw_names: set[str]) -> None:
    host_names = {n.name for n in program.walk()
                  if n.kind in ("Variable", "Param")}
    taken = host_names | raw_names
    mapping = {}
    for name in sorted(host_names & raw_names):
        fresh = name + "_h"
        k = 2
        while fresh in taken:
            fresh = f"{name}_h{k}"
            k += 1
        mapping[name] = fresh
        taken.add(fresh)
    if not mapping:
        return
    for n in program.walk():
        if n.kind in ("Variable", "Param") and n.name in mapping:
            n.name = mapping[n.name]


def _collect_slots(program: AstNode) -> list[tuple[list, int]]:
    """Every statement-boundary insertion point, in document order."""
    slots: list[tuple[list, int]] = []

    def walk_list(stmts: list[AstNode]):
        for i, stmt in enumerate(stmts):
            slots.append((stmts, i))
            for blk in child_blocks(stmt):
                walk_list(blk.children)
        slots.append((stmts, len(stmts)))

    walk_list(program.children)
    return slots


def _insert_chunks(program: AstNode, chunks: list[str],
                   rng: random.Random) -> str:
    """Interleave chunk texts into the program at random cut points,
    preserving chunk order, and return the merged source text."""
    slots = _collect_slots(program)
    choices = sorted(rng.randrange(len(slots)) for _ in chunks)
    placements = list(zip(choices, range(len(chunks))))
    # insert from the back so earlier slot indices stay valid; reversed chunk
    # order at an equal slot keeps the final text in chunk order
    for slot_idx, chunk_no in reversed(placements):
        lst, pos = slots[slot_idx]
        marker = AstNode("ExprStmt", [
            AstNode("Call", [], name=f"__raw_chunk_{chunk_no}__")])
        lst.insert(pos, marker)
    renumber(program)
    text = emit(program)
    out_lines = []
    for line in text.split("\n"):
        m = _PLACEHOLDER_RE.match(line)
        if not m:
            out_lines.append(line)
            continue
        indent, chunk_no = m.group(1), int(m.group(2))
        for chunk_line in chunks[chunk_no].split("\n"):
            out_lines.append(indent + chunk_line)
    return "\n".join(out_lines)


# ---------------------------------------------------------------------------
# Algorithm driver
# ---------------------------------------------------------------------------

def synthesize(raws: list[RawSample], hosts: list[HostUnit], cfg: SynthConfig,
               normalize_cfg: NormalizeConfig | None = None,
               rules: SinkRules = DEFAULT_RULES,
               ) -> tuple[list[Sample], SynthReport]:
    """Synthesize up to len(raws) * len(hosts) * cfg.times samples.

    Rounds whose merged code fails the syntax check or whose snippet breaks
    the single-sink invariant are discarded and counted. Fully deterministic
    for a fixed config seed.
    """
    report = SynthReport(raw_total=len(raws))
    selected = [r for r in raws if not cfg.select_simple or is_simple(r)]
    report.raw_selected = len(selected)
    host_programs: dict[str, AstNode] = {}
    out: list[Sample] = []

    for raw in selected:
        chunks = split_top_level(raw)
        if not chunks:
            continue
        for host in hosts:
            if host.id not in host_programs:
                host_programs[host.id] = parse(_wrap(host.code))
            base = host_programs[host.id]
            host_cfg = build_cfg(base)
            for round_no in range(cfg.times):
                report.attempts += 1
                rng_seed = _derive_seed(cfg.seed, raw.id, host.id, round_no)
                rng = random.Random(rng_seed)
                path = random_path(host_cfg, rng_seed, cfg.max_path_blocks)
                visited = path_statement_ids(host_cfg, path)
                path_prog = filter_program(base, visited)
                _rename_collisions(path_prog, _raw_var_names(raw))
                sink_ids = {s.stmt_id
                            for s in find_sinks(path_prog, raw.cwe, rules)}
                if sink_ids:
                    keep = {s.id for s in iter_statements(path_prog)} - sink_ids
                    path_prog = filter_program(path_prog, keep)
                merged = _insert_chunks(path_prog, chunks, rng)
                if not syntax_check(merged):
                    report.syntax_failures += 1
                    continue
                merged_prog = parse(merged)
                sites = find_sinks(merged_prog, raw.cwe, rules)
                if len(sites) != 1 or len(sites[0].concat_vars) != 1:
                    report.sink_failures += 1
                    continue
                cand = TaintCandidate(sites[0], sites[0].concat_vars[0])
                try:
                    snippet = backward_slice(merged_prog, cand, rules)
                    snippet = normalize(snippet, normalize_cfg)
                except SliceError:
                    report.sink_failures += 1
                    continue
                out.append(Sample(
                    id=f"syn:{raw.id}:{host.id}:{round_no}",
                    cwe=raw.cwe.value, code=snippet.code, label=raw.label,
                    project=host.project, file=host.id,
                    line=snippet.sink_line, taint_var=snippet.taint_var,
                    synthetic=True, origin=raw.id,
                ))
                report.produced += 1
    return out, report


# ---------------------------------------------------------------------------
# Host collection
# ---------------------------------------------------------------------------

def hosts_from_program(program: AstNode, project: str,
                       file_id: str) -> list[HostUnit]:
    """Host units of one parsed file: the top-level code (function
    declarations dropped) plus each function body in globalized form."""
    hosts = []
    top = [s for s in program.children if s.kind != "FunctionDecl"]
    if top:
        top_prog = renumber(AstNode("Program", [copy_tree(s) for s in top],
                                    span=program.span))
        hosts.append(HostUnit(id=file_id, project=project,
                              code=_body_text(top_prog)))
    for stmt in program.children:
        if stmt.kind == "FunctionDecl":
            body = globalize(stmt)
            if body.children:
                hosts.append(HostUnit(id=f"{file_id}::{stmt.name}",
                                      project=project,
                                      code=_body_text(body)))
    return hosts


def hosts_from_dir(root: Path, project: str | None = None,
                   ) -> tuple[list[HostUnit], list[tuple[str, str]]]:
    """Collect host units from every parseable .php file under ``root``."""
    root = Path(root)
    hosts: list[HostUnit] = []
    skipped: list[tuple[str, str]] = []
    for path in sorted(p for p in root.rglob("*.php") if p.is_file()):
        rel = str(path.relative_to(root))
        try:
            program = parse(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, ParseError) as e:
            skipped.append((rel, str(e)))
            continue
        hosts.extend(hosts_from_program(
            program, project_of(root, path, project), rel))
    return hosts, skipped
