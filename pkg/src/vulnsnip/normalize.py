"""Snippet normalization: constant-string elision and canonical variable names.

Long or markup-looking string literals carry no vulnerability signal and are
collapsed to a placeholder; literals carrying SQL keywords are exempt because
they define the SQL-injection sink semantics, as is the slicer's replacement
constant. User variables then become var0, var1, ... in first-occurrence
order while superglobals and user-defined function names stay untouched.
The whole pass is a no-op when disabled (non-normalized ablation runs).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .phpast import AstNode, emit, parse
from .sinks import DEFAULT_RULES, SinkRules, is_sql_literal
from .slicing import REPLACEMENT_CONSTANT, Snippet, _attach_marker, strip_taint_markers

_OPEN_TAG_RE = re.compile(r"<[A-Za-z]")


@dataclass
class NormalizeConfig:
    max_string_len: int = 20
    # "<" means: an opening HTML tag (< followed by a letter); other entries
    # are plain substring matches
    html_markers: tuple[str, ...] = ("<", "href", "style", "</")
    placeholder: str = "s"
    enabled: bool = True
    rules: SinkRules = field(default_factory=lambda: DEFAULT_RULES)

    def __post_init__(self):
        if self.max_string_len < 1:
            raise ValueError("max_string_len must be >= 1")
        if not self.placeholder or any(q in self.placeholder for q in "'\""):
            raise ValueError("placeholder must be non-empty and quote-free")


def _matches_marker(value: str, markers: tuple[str, ...]) -> bool:
    for m in markers:
        if m == "<":
            if _OPEN_TAG_RE.search(value):
                return True
        elif m in value:
            return True
    return False


def _should_elide(value: str, cfg: NormalizeConfig) -> bool:
    if value == REPLACEMENT_CONSTANT:
        return False
    if is_sql_literal(value, cfg.rules):
        return False
    if len(value) > cfg.max_string_len:
        return True
    return _matches_marker(value, cfg.html_markers)


def elide_strings(snippet: Snippet, cfg: NormalizeConfig | None = None) -> Snippet:
    """Replace bulky or markup-bearing string literals with the placeholder."""
    cfg = cfg or NormalizeConfig()
    program = parse(strip_taint_markers(snippet.code))
    for node in program.walk():
        if node.kind == "StringLit" and _should_elide(node.value, cfg):
            node.value = cfg.placeholder
    code, line = _attach_marker(emit(program), snippet.taint_var,
                                snippet.cwe, cfg.rules)
    return replace(snippet, code=code, sink_line=line)


def rename_vars(snippet: Snippet) -> Snippet:
    """Canonically rename user variables to var0, var1, ...

    Order of first occurrence in the emitted text; superglobals and function
    names keep their identity; the taint marker follows its variable.
    """
    program = parse(strip_taint_markers(snippet.code))
    mapping: dict[str, str] = {}
    for node in program.walk():
        if node.kind in ("Variable", "Param") and node.name not in mapping:
            mapping[node.name] = f"var{len(mapping)}"
    for node in program.walk():
        if node.kind in ("Variable", "Param"):
            node.name = mapping[node.name]
    new_var = mapping.get(snippet.taint_var, snippet.taint_var)
    code, line = _attach_marker(emit(program), new_var, snippet.cwe,
                                DEFAULT_RULES)
    return replace(snippet, code=code, taint_var=new_var, sink_line=line)


def normalize(snippet: Snippet, cfg: NormalizeConfig | None = None) -> Snippet:
    """Elide strings then rename variables; identity when disabled."""
    cfg = cfg or NormalizeConfig()
    if not cfg.enabled:
        return snippet
    return rename_vars(elide_strings(snippet, cfg))
