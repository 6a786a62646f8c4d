"""Potential-vulnerability statement localization for XSS and SQL injection.

A sink site pairs a statement with the variables concatenated into it; each
concatenated variable becomes one taint candidate analyzed in isolation.
Matching is pure AST pattern matching and is independent of variable names
and whitespace. The rules (output statements, SQL keyword lists, sanitizer
names) load from a line-oriented ``key = v1,v2`` rules file so they can be
extended without code changes; defaults are embedded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

from .phpast import AstNode, iter_statements


class SinkKind(enum.Enum):
    CWE79 = "CWE-79"
    CWE89 = "CWE-89"

    @classmethod
    def from_string(cls, s: str) -> "SinkKind":
        s = str(s).strip().upper().replace("CWE-", "").replace("CWE", "")
        if s == "79":
            return cls.CWE79
        if s == "89":
            return cls.CWE89
        raise ValueError(f"unknown CWE kind: {s!r} (expected 79 or 89)")


@dataclass
class SinkRules:
    """Declarative matching rules; see rules file format in the README."""
    cwe79_sinks: tuple[str, ...] = ("echo", "print")
    cwe89_keywords: tuple[str, ...] = ("SELECT", "INSERT", "UPDATE", "DELETE", "REPLACE")
    cwe89_infixes: tuple[str, ...] = ("WHERE ", "FROM ")
    cwe79_sanitizers: tuple[str, ...] = ("htmlspecialchars", "htmlentities", "intval")
    cwe89_sanitizers: tuple[str, ...] = ("intval", "addslashes")
    parameterized_markers: tuple[str, ...] = ("prepare", "bind_param", "bindParam", "execute")


DEFAULT_RULES = SinkRules()

_RULE_KEYS = {
    "cwe79.sink": "cwe79_sinks",
    "cwe89.keywords": "cwe89_keywords",
    "cwe89.infix": "cwe89_infixes",
    "cwe79.sanitizers": "cwe79_sanitizers",
    "cwe89.sanitizers": "cwe89_sanitizers",
    "cwe89.parameterized": "parameterized_markers",
}


def load_rules(path: str | Path) -> SinkRules:
    """Parse a rules file: ``key = a,b,c`` lines, ``#`` comments allowed."""
    rules = DEFAULT_RULES
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = values'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _RULE_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown rule key {key!r}")
        values = tuple(v.strip() for v in value.split(",") if v.strip())
        rules = replace(rules, **{_RULE_KEYS[key]: values})
    return rules


@dataclass
class SinkSite:
    kind: SinkKind
    stmt_id: int
    span: tuple[int, int]
    concat_vars: list[str] = field(default_factory=list)


@dataclass
class TaintCandidate:
    sink: SinkSite
    var: str


def is_sql_literal(text: str, rules: SinkRules = DEFAULT_RULES) -> bool:
    """SQL-looking string: trimmed uppercase text starts with a query keyword
    or contains a clause infix like ``WHERE ``."""
    t = text.strip().upper()
    if any(t.startswith(k) for k in rules.cwe89_keywords):
        return True
    return any(infix in t for infix in rules.cwe89_infixes)


def _concat_operand_vars(expr: AstNode) -> list[str]:
    """Variable names that are direct concatenation operands of ``expr``
    (or the expression itself when it is a bare variable/array read),
    deduplicated in first-occurrence order."""
    operands: list[AstNode]
    if expr.kind == "Concat":
        operands = expr.children
    else:
        operands = [expr]
    seen: list[str] = []
    for op in operands:
        name = _operand_var_name(op)
        if name is not None and name not in seen:
            seen.append(name)
    return seen


def _operand_var_name(node: AstNode) -> str | None:
    """Variable identity of a concat operand. Superglobal reads count as
    variables under their canonical name: globalized function parameters
    surface as ``$_GET['p']`` and must stay recognizable as taint sources."""
    if node.kind == "Variable":
        return node.name
    if node.kind == "SuperGlobal":
        return node.name
    if node.kind == "ArrayAccess":
        base = node.children[0]
        while base.kind == "ArrayAccess":
            base = base.children[0]
        if base.kind in ("Variable", "SuperGlobal"):
            return base.name
    return None


def _iter_exprs(stmt: AstNode):
    """Expression roots of a statement (headers only for compounds)."""
    k = stmt.kind
    if k in ("EchoStmt", "ExprStmt", "Return"):
        yield from stmt.children
    elif k == "Assign":
        yield stmt
    elif k in ("If", "While"):
        yield stmt.children[0]
    elif k == "For":
        yield from stmt.children[:3]
    elif k == "Foreach":
        yield stmt.children[0]


def _subtree_concats(expr: AstNode):
    for n in expr.walk():
        if n.kind == "Concat":
            yield n


def _match_cwe79(stmt: AstNode, rules: SinkRules) -> list[str] | None:
    if stmt.kind == "EchoStmt":
        if "echo" not in rules.cwe79_sinks:
            return None
        exprs = stmt.children
    elif (stmt.kind == "ExprStmt" and stmt.children
          and stmt.children[0].kind == "PrintExpr"):
        if "print" not in rules.cwe79_sinks:
            return None
        exprs = stmt.children[0].children
    else:
        return None
    found: list[str] = []
    for e in exprs:
        for name in _concat_operand_vars(e):
            if name not in found:
                found.append(name)
    return found or None


def _match_cwe89(stmt: AstNode, rules: SinkRules) -> list[str] | None:
    """A statement whose expression concatenates an SQL-keyword literal with
    at least one variable (assignment RHS, call argument, or bare concat)."""
    found: list[str] = []
    for root in _iter_exprs(stmt):
        for concat in _subtree_concats(root):
            has_sql = any(c.kind == "StringLit" and is_sql_literal(c.value, rules)
                          for c in concat.children)
            if not has_sql:
                continue
            for name in _concat_operand_vars(concat):
                if name not in found:
                    found.append(name)
    return found or None


def find_sinks(program: AstNode, kind: SinkKind,
               rules: SinkRules = DEFAULT_RULES) -> list[SinkSite]:
    """All sink statements of ``kind`` in source-position order.

    A statement with no concatenated variables is never a site. Function
    bodies are separate scopes and are not scanned here.
    """
    sites = []
    for stmt in iter_statements(program):
        if kind is SinkKind.CWE79:
            names = _match_cwe79(stmt, rules)
        else:
            names = _match_cwe89(stmt, rules)
        if names:
            sites.append(SinkSite(kind, stmt.id, stmt.span, names))
    sites.sort(key=lambda s: s.span[0])
    return sites


def taint_candidates(site: SinkSite) -> list[TaintCandidate]:
    """One candidate per concatenated variable, preserving order."""
    return [TaintCandidate(site, v) for v in site.concat_vars]
