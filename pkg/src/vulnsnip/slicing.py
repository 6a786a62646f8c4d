"""Backward program slicing around one taint candidate.

A slice keeps the sink statement (other concatenated variables replaced by a
constant), every statement in the transitive defs->uses closure of the taint
variable, and the enclosing control headers of everything kept, rebuilt so the
result is a syntactically valid standalone snippet. Function code is first
rewritten to top-level form with parameter reads turned into superglobal
reads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .cfg import build_cfg, def_use
from .phpast import (AstNode, CONTROL_KINDS, copy_tree, emit, iter_statements,
                     parse, renumber)
from .sinks import (DEFAULT_RULES, SinkKind, SinkRules, TaintCandidate,
                    find_sinks, _operand_var_name)

TAINT_MARKER_RE = re.compile(r" ?/\* taint: \$([A-Za-z_][A-Za-z0-9_]*) \*/")
REPLACEMENT_CONSTANT = "x"


class SliceError(Exception):
    pass


class SliceInvariantError(SliceError):
    """The emitted snippet did not re-scan to exactly one single-variable sink."""


@dataclass
class SnippetOrigin:
    project: str
    file: str
    span: tuple[int, int]


@dataclass
class Snippet:
    code: str
    cwe: SinkKind
    taint_var: str
    sink_line: int
    origin: SnippetOrigin | None = None
    from_function: str | None = None
    slice_empty: bool = False


def strip_taint_markers(code: str) -> str:
    return TAINT_MARKER_RE.sub("", code)


def _attach_marker(code: str, var: str, kind: SinkKind,
                   rules: SinkRules) -> tuple[str, int]:
    """Append ``/* taint: $var */`` to the sink line of marker-free code."""
    program = parse(code)
    sites = find_sinks(program, kind, rules)
    if len(sites) != 1:
        raise SliceInvariantError(
            f"expected exactly one {kind.value} sink, found {len(sites)}")
    line = code.count("\n", 0, sites[0].span[0]) + 1
    lines = code.split("\n")
    lines[line - 1] = lines[line - 1] + f" /* taint: ${var} */"
    return "\n".join(lines), line


def mark_taint(snippet: Snippet, var: str | None = None) -> Snippet:
    """Mark the sink line with a taint comment; replaces any existing marker."""
    var = var or snippet.taint_var
    code = strip_taint_markers(snippet.code)
    marked, line = _attach_marker(code, var, snippet.cwe, DEFAULT_RULES)
    return replace(snippet, code=marked, taint_var=var, sink_line=line)


# ---------------------------------------------------------------------------
# Backward slice
# ---------------------------------------------------------------------------

def _enclosures(program: AstNode) -> dict[int, list[int]]:
    """Map statement id -> ids of enclosing control statements, outermost first."""
    result: dict[int, list[int]] = {}

    def rec(stmts, stack):
        for s in stmts:
            result[s.id] = list(stack)
            if s.kind == "If":
                rec(s.children[1].children, stack + [s.id])
                if len(s.children) == 3:
                    inner = s.children[2].children[0]
                    if inner.kind == "If":
                        rec([inner], stack + [s.id])
                    else:
                        rec(inner.children, stack + [s.id])
            elif s.kind in ("While", "For", "Foreach"):
                rec(s.children[-1].children, stack + [s.id])
            elif s.kind == "Block":
                rec(s.children, stack)

    rec(program.children, [])
    return result


def slice_statement_ids(program: AstNode, cand: TaintCandidate) -> set[int]:
    """Ids of statements the slice keeps: the sink, the defs->uses closure of
    the taint variable, and enclosing control headers (whose condition
    variables join the relevant set)."""
    du = def_use(build_cfg(program), program)
    stmts = list(iter_statements(program))
    enclosure = _enclosures(program)
    relevant = {cand.var}
    included = {cand.sink.stmt_id}
    changed = True
    while changed:
        changed = False
        for s in stmts:
            if s.id in included:
                continue
            if du.defs.get(s.id, set()) & relevant:
                included.add(s.id)
                relevant |= du.uses.get(s.id, set())
                changed = True
        for sid in list(included):
            for header in enclosure.get(sid, ()):
                if header not in included:
                    included.add(header)
                    relevant |= du.uses.get(header, set())
                    changed = True
    return included


def _replace_other_vars(stmt: AstNode, keep: str, others: set[str]) -> None:
    """In a sink statement, swap concatenated variables other than ``keep``
    for the replacement constant, in place."""

    def constant(span):
        return AstNode("StringLit", span=span, value=REPLACEMENT_CONSTANT,
                       quote="single")

    def is_other(node: AstNode) -> bool:
        name = _operand_var_name(node)
        return name is not None and name != keep and name in others

    def rec(node: AstNode):
        if node.kind == "Concat":
            node.children = [constant(c.span) if is_other(c) else c
                             for c in node.children]
        for c in node.children:
            rec(c)

    if stmt.kind == "EchoStmt":
        stmt.children = [constant(c.span) if is_other(c) else c
                         for c in stmt.children]
    elif stmt.kind == "ExprStmt" and stmt.children[0].kind == "PrintExpr":
        pe = stmt.children[0]
        pe.children = [constant(c.span) if is_other(c) else c
                       for c in pe.children]
    for c in stmt.children:
        rec(c)


def filter_program(program: AstNode, included: set[int],
                   transforms: dict[int, object] | None = None) -> AstNode:
    """Copy of ``program`` keeping only statements whose id is in ``included``
    (compounds keep their headers, bodies are filtered recursively).
    ``transforms`` maps statement id -> callable applied to the kept copy."""
    transforms = transforms or {}

    def filter_stmts(stmts: list[AstNode]) -> list[AstNode]:
        out = []
        for s in stmts:
            if s.id not in included:
                continue
            c = copy_tree(s)
            if s.id in transforms:
                transforms[s.id](c)
            if s.kind == "If":
                c.children[1].children = filter_stmts(s.children[1].children)
                if len(s.children) == 3:
                    inner = s.children[2].children[0]
                    if inner.kind == "If":
                        kept_if = filter_stmts([inner])
                        if kept_if:
                            c.children[2].children = kept_if
                        else:
                            c.children = c.children[:2]
                    else:
                        kept = filter_stmts(inner.children)
                        if kept:
                            c.children[2].children[0].children = kept
                        else:
                            c.children = c.children[:2]
            elif s.kind in ("While", "For", "Foreach", "FunctionDecl"):
                c.children[-1].children = filter_stmts(s.children[-1].children)
            elif s.kind == "Block":
                c.children = filter_stmts(s.children)
            out.append(c)
        return out

    filtered = AstNode("Program", filter_stmts(program.children),
                       span=program.span)
    return renumber(filtered)


def backward_slice(program: AstNode, cand: TaintCandidate,
                   rules: SinkRules = DEFAULT_RULES,
                   origin: SnippetOrigin | None = None,
                   from_function: str | None = None) -> Snippet:
    """Slice ``program`` down to the statements relevant to one candidate.

    Raises SliceInvariantError when the emitted snippet does not re-scan to
    exactly one sink carrying exactly the candidate variable.
    """
    included = slice_statement_ids(program, cand)
    others = set(cand.sink.concat_vars) - {cand.var}
    sliced = filter_program(program, included, {
        cand.sink.stmt_id: lambda c: _replace_other_vars(c, cand.var, others)})
    code = emit(sliced)

    reparsed = parse(code)
    sites = find_sinks(reparsed, cand.sink.kind, rules)
    if len(sites) != 1 or sites[0].concat_vars != [cand.var]:
        got = [s.concat_vars for s in sites]
        raise SliceInvariantError(
            f"snippet re-scan found {len(sites)} sink(s) with vars {got}, "
            f"wanted one with [{cand.var!r}]")

    du = def_use(build_cfg(program), program)
    slice_empty = not any(
        sid != cand.sink.stmt_id
        and (cand.var in du.defs.get(sid, set()) or cand.var in du.uses.get(sid, set()))
        for sid in du.defs)

    marked, line = _attach_marker(code, cand.var, cand.sink.kind, rules)
    return Snippet(code=marked, cwe=cand.sink.kind, taint_var=cand.var,
                   sink_line=line, origin=origin, from_function=from_function,
                   slice_empty=slice_empty)


# ---------------------------------------------------------------------------
# Function globalization
# ---------------------------------------------------------------------------

def globalize(fn: AstNode, cand: TaintCandidate | None = None) -> AstNode:
    """Rewrite a function body to top-level form.

    Reads of a parameter ``$p`` become ``$_GET['p']`` until the first write to
    ``$p`` in document order re-introduces it as an ordinary local. ``global``
    declarations are dropped and their variables treated as locals. A
    ``$p .= expr`` first write expands to ``$p = $_GET['p'] . expr`` so the
    parameter's incoming value is not lost.
    """
    if fn.kind != "FunctionDecl":
        raise ValueError("globalize expects a FunctionDecl")
    params = {p.name for p in fn.children[:-1]}
    killed: set[str] = set()

    def rewrite_expr(node: AstNode) -> AstNode:
        if node.kind == "Variable":
            if node.name in params and node.name not in killed:
                return AstNode("SuperGlobal", span=node.span, name="_GET",
                               key=node.name)
            return copy_tree(node)
        if node.kind == "Assign":
            target, value = node.children
            new_value = rewrite_expr(value)
            if target.kind == "Variable":
                if (node.op == ".=" and target.name in params
                        and target.name not in killed):
                    # expand compound append so the parameter read survives
                    incoming = AstNode("SuperGlobal", span=target.span,
                                       name="_GET", key=target.name)
                    operands = ([incoming] + new_value.children
                                if new_value.kind == "Concat"
                                else [incoming, new_value])
                    killed.add(target.name)
                    return AstNode("Assign",
                                   [copy_tree(target),
                                    AstNode("Concat", operands, span=node.span)],
                                   span=node.span, op="=")
                killed.add(target.name)
                return AstNode("Assign", [copy_tree(target), new_value],
                               span=node.span, op=node.op)
            # array element write: indexes are reads, base becomes local
            new_target = copy_tree(target)
            idxs = []
            base = new_target
            while base.kind == "ArrayAccess":
                idxs.append(base)
                base = base.children[0]
            for acc in idxs:
                acc.children[1] = rewrite_expr(acc.children[1])
            if base.kind == "Variable":
                killed.add(base.name)
            return AstNode("Assign", [new_target, new_value],
                           span=node.span, op=node.op)
        out = copy_tree(node)
        out.children = [rewrite_expr(c) for c in node.children]
        return out

    def rewrite_stmt(stmt: AstNode) -> AstNode | None:
        k = stmt.kind
        if k == "GlobalDecl":
            for v in stmt.children:
                killed.add(v.name)
            return None
        if k == "Assign":
            return rewrite_expr(stmt)
        if k in ("EchoStmt", "ExprStmt", "Return"):
            out = copy_tree(stmt)
            out.children = [rewrite_expr(c) for c in stmt.children]
            return out
        if k in ("If", "While"):
            out = copy_tree(stmt)
            out.children[0] = rewrite_expr(stmt.children[0])
            if k == "If":
                out.children[1].children = rewrite_block(stmt.children[1].children)
                if len(stmt.children) == 3:
                    inner = stmt.children[2].children[0]
                    if inner.kind == "If":
                        out.children[2].children = [rewrite_stmt(inner)]
                    else:
                        out.children[2].children[0].children = \
                            rewrite_block(inner.children)
            else:
                out.children[1].children = rewrite_block(stmt.children[1].children)
            return out
        if k == "For":
            out = copy_tree(stmt)
            for i in range(3):
                out.children[i] = rewrite_expr(stmt.children[i])
            out.children[3].children = rewrite_block(stmt.children[3].children)
            return out
        if k == "Foreach":
            out = copy_tree(stmt)
            out.children[0] = rewrite_expr(stmt.children[0])
            for target in stmt.children[1:-1]:
                killed.add(target.name)
            out.children[-1].children = rewrite_block(stmt.children[-1].children)
            return out
        if k == "Block":
            out = copy_tree(stmt)
            out.children = rewrite_block(stmt.children)
            return out
        return copy_tree(stmt)

    def rewrite_block(stmts: list[AstNode]) -> list[AstNode]:
        out = []
        for s in stmts:
            r = rewrite_stmt(s)
            if r is not None:
                out.append(r)
        return out

    body = fn.children[-1].children
    program = AstNode("Program", rewrite_block(body), span=fn.span)
    return renumber(program)
