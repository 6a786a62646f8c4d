"""PHP-subset front end: comment stripping, lexing, parsing, and code emission.

The supported subset covers the statement and expression shapes the pipeline
analyzes (echo/print output, string-building assignments, if/while/for/foreach,
function declarations, calls). Everything else fails loudly with an
``Unsupported`` parse error instead of being silently mis-analyzed.

Spans are (start, end) offsets into the source string. Double-quoted string
interpolation is desugared at parse time into concatenation, so downstream
analysis only ever sees one concatenation representation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

SUPERGLOBALS = ("_GET", "_POST", "_REQUEST", "_COOKIE", "_SERVER")

# Statement-level node kinds (the CFG/def-use universe).
STMT_KINDS = frozenset({
    "EchoStmt", "ExprStmt", "Assign", "If", "While", "For", "Foreach",
    "FunctionDecl", "Return", "GlobalDecl", "Block",
})

# Compound statements whose condition encloses their body (control dependence).
CONTROL_KINDS = frozenset({"If", "While", "For", "Foreach"})

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ParseError(Exception):
    """Lex/Syntax/Unsupported failure with the offending span."""

    def __init__(self, message: str, span: tuple[int, int], kind: str = "Syntax"):
        super().__init__(f"{kind}: {message} at {span[0]}..{span[1]}")
        self.message = message
        self.span = span
        self.kind = kind  # one of "Lex", "Syntax", "Unsupported"


@dataclass
class AstNode:
    """Uniform syntax-tree node; ``kind`` selects which attrs are meaningful.

    name  -- Variable/Call/FunctionDecl/Param/SuperGlobal identifier
    key   -- SuperGlobal string key (None for a bare superglobal)
    value -- StringLit content, Number raw lexeme, Bool "true"/"false"
    quote -- StringLit quote style: "single" or "double"
    op    -- Assign ("=", ".=") or BinaryOp operator
    """

    kind: str
    children: list["AstNode"] = field(default_factory=list)
    span: tuple[int, int] = (0, 0)
    id: int = -1
    name: str | None = None
    key: str | None = None
    value: str | None = None
    quote: str | None = None
    op: str | None = None

    def walk(self):
        """Pre-order traversal of this subtree."""
        yield self
        for c in self.children:
            yield from c.walk()


def structurally_equal(a: AstNode, b: AstNode) -> bool:
    """Equality on kinds, attrs, and child structure; spans and ids ignored."""
    if (a.kind, a.name, a.key, a.value, a.quote, a.op) != (
            b.kind, b.name, b.key, b.value, b.quote, b.op):
        return False
    if len(a.children) != len(b.children):
        return False
    return all(structurally_equal(x, y) for x, y in zip(a.children, b.children))


def copy_tree(node: AstNode) -> AstNode:
    return AstNode(
        kind=node.kind,
        children=[copy_tree(c) for c in node.children],
        span=node.span,
        id=node.id,
        name=node.name,
        key=node.key,
        value=node.value,
        quote=node.quote,
        op=node.op,
    )


def renumber(root: AstNode) -> AstNode:
    """Reassign ids in pre-order so they are unique within the tree."""
    for i, n in enumerate(root.walk()):
        n.id = i
    return root


# ---------------------------------------------------------------------------
# Comment stripping
# ---------------------------------------------------------------------------

def strip_comments(text: str) -> str:
    """Remove //, #, and /* */ comments outside string literals.

    String literal contents stay byte-identical. Newlines inside block
    comments are kept so line numbers downstream remain stable.
    """
    out = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "'":
            j = i + 1
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    j += 2
                    continue
                if text[j] == "'":
                    j += 1
                    break
                j += 1
            out.append(text[i:j])
            i = j
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    j += 2
                    continue
                if text[j] == '"':
                    j += 1
                    break
                j += 1
            out.append(text[i:j])
            i = j
        elif c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "/" and i + 1 < n and text[i + 1] == "*":
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", (i, n), "Lex")
            out.append("\n" * text.count("\n", i, end + 2))
            i = end + 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_KEYWORDS = frozenset({
    "echo", "print", "if", "else", "elseif", "while", "for", "foreach", "as",
    "function", "return", "global", "true", "false", "null",
})

# Constructs we recognise enough to reject by name.
_UNSUPPORTED_KEYWORDS = frozenset({
    "class", "interface", "trait", "namespace", "use", "new", "switch",
    "case", "default", "do", "goto", "static", "public", "private",
    "protected", "const", "abstract", "final", "try", "catch", "finally",
    "throw", "match", "fn", "list", "clone", "yield", "instanceof",
    "and", "or", "xor", "endif", "endwhile", "endfor", "endforeach",
})

_CALL_KEYWORDS = frozenset({"include", "require", "include_once", "require_once"})

_OPS3 = ("===", "!==")
_OPS2 = ("==", "!=", "<=", ">=", "&&", "||", ".=", "=>", "->", "::", "++", "--")
_OPS1 = "=.,;(){}[]?:<>+-*/%!&|@"


@dataclass
class Token:
    kind: str   # var, ident, number, string, dstring, op, eof
    text: str
    span: tuple[int, int]
    value: object = None  # decoded string value, or dstring segment list


def _lex_single_quoted(text: str, i: int) -> tuple[str, int]:
    j = i + 1
    buf = []
    n = len(text)
    while j < n:
        c = text[j]
        if c == "\\" and j + 1 < n:
            nxt = text[j + 1]
            if nxt in ("'", "\\"):
                buf.append(nxt)
            else:
                buf.append(c)
                buf.append(nxt)
            j += 2
            continue
        if c == "'":
            return "".join(buf), j + 1
        buf.append(c)
        j += 1
    raise ParseError("unterminated string literal", (i, n), "Lex")


_D_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "$": "$", "0": "\0"}


def _lex_double_quoted(text: str, i: int) -> tuple[list, int]:
    """Scan a double-quoted literal into interpolation segments.

    Returns (segments, next_index) where each segment is
    ("text", value, start, end) or ("expr", start, end); expr segments mark
    $var / {$expr} regions for the parser to desugar.
    """
    segments: list = []
    buf: list[str] = []
    buf_start = i + 1
    j = i + 1
    n = len(text)

    def flush(upto: int):
        if buf:
            segments.append(("text", "".join(buf), buf_start, upto))
            buf.clear()

    while j < n:
        c = text[j]
        if c == "\\" and j + 1 < n:
            nxt = text[j + 1]
            if nxt in _D_ESCAPES:
                buf.append(_D_ESCAPES[nxt])
            else:
                buf.append(c)
                buf.append(nxt)
            j += 2
            continue
        if c == '"':
            flush(j)
            return segments, j + 1
        if c == "$" and j + 1 < n and (text[j + 1].isalpha() or text[j + 1] == "_"):
            m = _NAME_RE.match(text, j + 1)
            end = m.end()
            # simple $name[...] form: unquoted word, number, or quoted key
            if end < n and text[end] == "[":
                close = text.find("]", end)
                if close < 0:
                    raise ParseError("unterminated interpolation index", (j, n), "Lex")
                end = close + 1
            flush(j)
            segments.append(("expr", j, end))
            j = end
            buf_start = j
            continue
        if c == "{" and j + 1 < n and text[j + 1] == "$":
            close = text.find("}", j)
            if close < 0:
                raise ParseError("unterminated {$...} interpolation", (j, n), "Lex")
            flush(j)
            segments.append(("expr", j, close + 1))
            j = close + 1
            buf_start = j
            continue
        buf.append(c)
        j += 1
    raise ParseError("unterminated string literal", (i, n), "Lex")


def tokenize(text: str) -> list[Token]:
    """Lex PHP-subset source. Comments are skipped exactly as strip_comments
    removes them; content before/after the PHP tags must be whitespace."""
    open_at = text.find("<?php")
    if open_at < 0:
        raise ParseError("missing <?php open tag", (0, min(len(text), 1)), "Syntax")
    if text[:open_at].strip():
        raise ParseError("inline HTML before <?php is not supported",
                         (0, open_at), "Unsupported")
    tokens: list[Token] = []
    i = open_at + len("<?php")
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated block comment", (i, n), "Lex")
            i = end + 2
            continue
        if c == "?" and i + 1 < n and text[i + 1] == ">":
            if text[i + 2:].strip():
                raise ParseError("inline HTML after ?> is not supported",
                                 (i, n), "Unsupported")
            break
        if c == "$":
            m = _NAME_RE.match(text, i + 1)
            if not m:
                raise ParseError("bad variable name", (i, i + 1), "Lex")
            tokens.append(Token("var", m.group(0), (i, m.end())))
            i = m.end()
            continue
        if c.isdigit():
            m = re.match(r"\d+(\.\d+)?", text[i:])
            lex = m.group(0)
            tokens.append(Token("number", lex, (i, i + len(lex))))
            i += len(lex)
            continue
        if c.isalpha() or c == "_":
            m = _NAME_RE.match(text, i)
            tokens.append(Token("ident", m.group(0), (i, m.end())))
            i = m.end()
            continue
        if c == "'":
            value, j = _lex_single_quoted(text, i)
            tokens.append(Token("string", text[i:j], (i, j), value))
            i = j
            continue
        if c == '"':
            segments, j = _lex_double_quoted(text, i)
            tokens.append(Token("dstring", text[i:j], (i, j), segments))
            i = j
            continue
        if text[i:i + 3] in _OPS3:
            tokens.append(Token("op", text[i:i + 3], (i, i + 3)))
            i += 3
            continue
        if text[i:i + 2] in _OPS2:
            tokens.append(Token("op", text[i:i + 2], (i, i + 2)))
            i += 2
            continue
        if c in _OPS1:
            tokens.append(Token("op", c, (i, i + 1)))
            i += 1
            continue
        if text[i:i + 3] == "<<<":
            raise ParseError("heredoc/nowdoc is not supported", (i, i + 3), "Unsupported")
        raise ParseError(f"unexpected character {c!r}", (i, i + 1), "Lex")
    tokens.append(Token("eof", "", (n, n)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # --- token helpers ---

    def peek(self, ahead: int = 0) -> Token:
        k = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[k]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "op" and t.text in ops

    def at_kw(self, *kws: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text.lower() in kws

    def expect_op(self, op: str) -> Token:
        t = self.peek()
        if not (t.kind == "op" and t.text == op):
            raise ParseError(f"expected {op!r}, found {t.text or t.kind!r}", t.span)
        return self.next()

    def fail_unsupported(self, what: str, tok: Token):
        raise ParseError(f"{what} is not supported", tok.span, "Unsupported")

    # --- grammar ---

    def parse_program(self) -> AstNode:
        stmts = []
        while self.peek().kind != "eof":
            s = self.parse_stmt(top_level=True)
            if s is not None:
                stmts.append(s)
        return AstNode("Program", stmts, span=(0, len(self.text)))

    def parse_stmt(self, top_level: bool = False) -> AstNode | None:
        t = self.peek()
        if t.kind == "op" and t.text == ";":
            self.next()
            return None
        if t.kind == "op" and t.text == "{":
            return self.parse_block(as_stmt=True)
        if t.kind == "ident":
            kw = t.text.lower()
            if kw in _UNSUPPORTED_KEYWORDS:
                self.fail_unsupported(kw, t)
            if kw == "echo":
                return self.parse_echo()
            if kw == "print":
                return self.parse_print()
            if kw == "if":
                return self.parse_if()
            if kw == "while":
                return self.parse_while()
            if kw == "for":
                return self.parse_for()
            if kw == "foreach":
                return self.parse_foreach()
            if kw == "function":
                if not top_level:
                    self.fail_unsupported("nested function declaration", t)
                return self.parse_function()
            if kw == "return":
                return self.parse_return()
            if kw == "global":
                return self.parse_global()
        expr = self.parse_expr()
        end = self.expect_op(";")
        if expr.kind == "Assign":
            expr.span = (expr.span[0], end.span[1])
            return expr
        return AstNode("ExprStmt", [expr], span=(expr.span[0], end.span[1]))

    def parse_block(self, as_stmt: bool = False) -> AstNode:
        start = self.expect_op("{")
        stmts = []
        while not self.at_op("}"):
            if self.peek().kind == "eof":
                raise ParseError("unterminated block", start.span)
            s = self.parse_stmt()
            if s is not None:
                stmts.append(s)
        end = self.expect_op("}")
        return AstNode("Block", stmts, span=(start.span[0], end.span[1]))

    def parse_echo(self) -> AstNode:
        kw = self.next()
        exprs = [self.parse_expr()]
        while self.at_op(","):
            self.next()
            exprs.append(self.parse_expr())
        end = self.expect_op(";")
        return AstNode("EchoStmt", exprs, span=(kw.span[0], end.span[1]))

    def parse_print(self) -> AstNode:
        kw = self.next()
        expr = self.parse_expr()
        end = self.expect_op(";")
        pe = AstNode("PrintExpr", [expr], span=(kw.span[0], expr.span[1]))
        return AstNode("ExprStmt", [pe], span=(kw.span[0], end.span[1]))

    def _parse_cond(self) -> AstNode:
        self.expect_op("(")
        cond = self.parse_expr()
        self.expect_op(")")
        return cond

    def parse_if(self) -> AstNode:
        kw = self.next()
        cond = self._parse_cond()
        then = self.parse_block()
        children = [cond, then]
        end_span = then.span[1]
        if self.at_kw("elseif"):
            sub = self.parse_if_chain_from(self.peek().span[0], skip_kw=True)
            children.append(AstNode("ElseBranch", [sub], span=sub.span))
            end_span = sub.span[1]
        elif self.at_kw("else"):
            self.next()
            if self.at_kw("if"):
                sub = self.parse_if()
                children.append(AstNode("ElseBranch", [sub], span=sub.span))
                end_span = sub.span[1]
            else:
                blk = self.parse_block()
                children.append(AstNode("ElseBranch", [blk], span=blk.span))
                end_span = blk.span[1]
        return AstNode("If", children, span=(kw.span[0], end_span))

    def parse_if_chain_from(self, start: int, skip_kw: bool) -> AstNode:
        if skip_kw:
            self.next()  # consume 'elseif'
        cond = self._parse_cond()
        then = self.parse_block()
        children = [cond, then]
        end_span = then.span[1]
        if self.at_kw("elseif"):
            sub = self.parse_if_chain_from(self.peek().span[0], skip_kw=True)
            children.append(AstNode("ElseBranch", [sub], span=sub.span))
            end_span = sub.span[1]
        elif self.at_kw("else"):
            self.next()
            if self.at_kw("if"):
                sub = self.parse_if()
                children.append(AstNode("ElseBranch", [sub], span=sub.span))
                end_span = sub.span[1]
            else:
                blk = self.parse_block()
                children.append(AstNode("ElseBranch", [blk], span=blk.span))
                end_span = blk.span[1]
        return AstNode("If", children, span=(start, end_span))

    def parse_while(self) -> AstNode:
        kw = self.next()
        cond = self._parse_cond()
        body = self.parse_block()
        return AstNode("While", [cond, body], span=(kw.span[0], body.span[1]))

    def parse_for(self) -> AstNode:
        kw = self.next()
        self.expect_op("(")
        if self.at_op(";"):
            self.fail_unsupported("for loop with empty clause", self.peek())
        init = self.parse_expr()
        self.expect_op(";")
        if self.at_op(";"):
            self.fail_unsupported("for loop with empty clause", self.peek())
        cond = self.parse_expr()
        self.expect_op(";")
        if self.at_op(")"):
            self.fail_unsupported("for loop with empty clause", self.peek())
        step = self.parse_expr()
        self.expect_op(")")
        body = self.parse_block()
        return AstNode("For", [init, cond, step, body], span=(kw.span[0], body.span[1]))

    def parse_foreach(self) -> AstNode:
        kw = self.next()
        self.expect_op("(")
        iterable = self.parse_expr()
        t = self.peek()
        if not self.at_kw("as"):
            raise ParseError("expected 'as' in foreach", t.span)
        self.next()
        first = self._parse_loop_var()
        key = None
        value = first
        if self.at_op("=>"):
            self.next()
            key = first
            value = self._parse_loop_var()
        self.expect_op(")")
        body = self.parse_block()
        children = [iterable] + ([key] if key is not None else []) + [value, body]
        return AstNode("Foreach", children, span=(kw.span[0], body.span[1]))

    def _parse_loop_var(self) -> AstNode:
        t = self.peek()
        if t.kind == "op" and t.text == "&":
            self.fail_unsupported("by-reference foreach target", t)
        if t.kind != "var":
            raise ParseError("expected variable in foreach target", t.span)
        self.next()
        if t.text in SUPERGLOBALS:
            self.fail_unsupported("superglobal as foreach target", t)
        return AstNode("Variable", span=t.span, name=t.text)

    def parse_function(self) -> AstNode:
        kw = self.next()
        t = self.peek()
        if t.kind != "ident":
            self.fail_unsupported("anonymous function", t)
        name = self.next().text
        self.expect_op("(")
        params = []
        while not self.at_op(")"):
            pt = self.peek()
            if pt.kind == "op" and pt.text == "&":
                self.fail_unsupported("by-reference parameter", pt)
            if pt.kind == "ident":
                self.fail_unsupported("parameter type hint", pt)
            if pt.kind != "var":
                raise ParseError("expected parameter", pt.span)
            self.next()
            param = AstNode("Param", span=pt.span, name=pt.text)
            if self.at_op("="):
                self.next()
                default = self.parse_expr()
                param.children.append(default)
                param.span = (pt.span[0], default.span[1])
            params.append(param)
            if self.at_op(","):
                self.next()
        self.expect_op(")")
        body = self.parse_block()
        return AstNode("FunctionDecl", params + [body],
                       span=(kw.span[0], body.span[1]), name=name)

    def parse_return(self) -> AstNode:
        kw = self.next()
        if self.at_op(";"):
            end = self.next()
            return AstNode("Return", [], span=(kw.span[0], end.span[1]))
        expr = self.parse_expr()
        end = self.expect_op(";")
        return AstNode("Return", [expr], span=(kw.span[0], end.span[1]))

    def parse_global(self) -> AstNode:
        kw = self.next()
        names = []
        while True:
            t = self.peek()
            if t.kind != "var":
                raise ParseError("expected variable in global declaration", t.span)
            self.next()
            names.append(AstNode("Variable", span=t.span, name=t.text))
            if self.at_op(","):
                self.next()
                continue
            break
        end = self.expect_op(";")
        return AstNode("GlobalDecl", names, span=(kw.span[0], end.span[1]))

    # --- expressions ---

    def parse_expr(self) -> AstNode:
        return self.parse_assign()

    def parse_assign(self) -> AstNode:
        left = self.parse_ternary()
        if self.at_op("=", ".="):
            op = self.next()
            if left.kind not in ("Variable", "ArrayAccess"):
                self.fail_unsupported(f"assignment to {left.kind}", op)
            right = self.parse_assign()
            return AstNode("Assign", [left, right],
                           span=(left.span[0], right.span[1]), op=op.text)
        return left

    def parse_ternary(self) -> AstNode:
        cond = self.parse_or()
        if self.at_op("?"):
            self.next()
            a = self.parse_expr()
            self.expect_op(":")
            b = self.parse_ternary()
            return AstNode("Ternary", [cond, a, b], span=(cond.span[0], b.span[1]))
        return cond

    def _left_assoc(self, sub, *ops: str) -> AstNode:
        node = sub()
        while self.at_op(*ops):
            op = self.next()
            right = sub()
            node = AstNode("BinaryOp", [node, right],
                           span=(node.span[0], right.span[1]), op=op.text)
        return node

    def parse_or(self) -> AstNode:
        return self._left_assoc(self.parse_and, "||")

    def parse_and(self) -> AstNode:
        return self._left_assoc(self.parse_cmp, "&&")

    def parse_cmp(self) -> AstNode:
        return self._left_assoc(self.parse_concat, "==", "!=", "===", "!==",
                                "<", ">", "<=", ">=")

    def parse_concat(self) -> AstNode:
        items = [self.parse_add()]
        while self.at_op("."):
            self.next()
            items.append(self.parse_add())
        if len(items) == 1:
            return items[0]
        flat: list[AstNode] = []
        for it in items:
            if it.kind == "Concat":
                flat.extend(it.children)
            else:
                flat.append(it)
        return AstNode("Concat", flat, span=(flat[0].span[0], flat[-1].span[1]))

    def parse_add(self) -> AstNode:
        return self._left_assoc(self.parse_mul, "+", "-")

    def parse_mul(self) -> AstNode:
        return self._left_assoc(self.parse_postfix, "*", "/", "%")

    def parse_postfix(self) -> AstNode:
        node = self.parse_primary()
        while True:
            if self.at_op("["):
                self.next()
                idx = self.parse_expr()
                end = self.expect_op("]")
                if (node.kind == "SuperGlobal" and node.key is None
                        and idx.kind == "StringLit"):
                    node.key = idx.value
                    node.span = (node.span[0], end.span[1])
                else:
                    node = AstNode("ArrayAccess", [node, idx],
                                   span=(node.span[0], end.span[1]))
                continue
            if self.at_op("->", "::"):
                self.fail_unsupported("object/static member access", self.peek())
            if self.at_op("++", "--"):
                self.fail_unsupported("increment/decrement operator", self.peek())
            break
        return node

    def parse_primary(self) -> AstNode:
        t = self.peek()
        if t.kind == "var":
            self.next()
            if t.text in SUPERGLOBALS:
                return AstNode("SuperGlobal", span=t.span, name=t.text)
            return AstNode("Variable", span=t.span, name=t.text)
        if t.kind == "number":
            self.next()
            return AstNode("Number", span=t.span, value=t.text)
        if t.kind == "op" and t.text == "-" and self.peek(1).kind == "number":
            self.next()
            num = self.next()
            return AstNode("Number", span=(t.span[0], num.span[1]), value="-" + num.text)
        if t.kind == "string":
            self.next()
            return AstNode("StringLit", span=t.span, value=t.value, quote="single")
        if t.kind == "dstring":
            self.next()
            return self._desugar_dstring(t)
        if t.kind == "op" and t.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        if t.kind == "op" and t.text in ("!", "+", "-", "&", "|", "@"):
            self.fail_unsupported(f"unary operator {t.text!r}", t)
        if t.kind == "ident":
            kw = t.text.lower()
            if kw in _UNSUPPORTED_KEYWORDS:
                self.fail_unsupported(kw, t)
            if kw == "true" or kw == "false":
                self.next()
                return AstNode("Bool", span=t.span, value=kw)
            if kw == "null":
                self.next()
                return AstNode("Null", span=t.span)
            if kw in _CALL_KEYWORDS:
                self.next()
                arg = self.parse_expr()
                return AstNode("Call", [arg], span=(t.span[0], arg.span[1]), name=kw)
            if kw == "print":
                self.fail_unsupported("print inside an expression", t)
            if kw == "function":
                self.fail_unsupported("anonymous function", t)
            if kw in _KEYWORDS:
                raise ParseError(f"unexpected keyword {t.text!r}", t.span)
            self.next()
            if self.at_op("("):
                self.next()
                args = []
                while not self.at_op(")"):
                    args.append(self.parse_expr())
                    if self.at_op(","):
                        self.next()
                        continue
                    break
                end = self.expect_op(")")
                return AstNode("Call", args, span=(t.span[0], end.span[1]), name=t.text)
            self.fail_unsupported(f"bare constant {t.text!r}", t)
        raise ParseError(f"unexpected token {t.text or t.kind!r}", t.span)

    def _desugar_dstring(self, tok: Token) -> AstNode:
        """Interpolated double-quoted string -> Concat of literal and
        variable/array segments (plain literal when nothing interpolates)."""
        parts: list[AstNode] = []
        for seg in tok.value:
            if seg[0] == "text":
                _, value, start, end = seg
                parts.append(AstNode("StringLit", span=(start, end),
                                     value=value, quote="double"))
            else:
                _, start, end = seg
                parts.append(self._parse_interp_expr(start, end))
        if not parts:
            return AstNode("StringLit", span=tok.span, value="", quote="double")
        if len(parts) == 1:
            return parts[0]
        return AstNode("Concat", parts, span=tok.span)

    def _parse_interp_expr(self, start: int, end: int) -> AstNode:
        src = self.text[start:end]
        if src.startswith("{"):
            inner = src[1:-1]
            node = _parse_expr_fragment(inner, offset=start + 1)
            if node.kind not in ("Variable", "ArrayAccess", "SuperGlobal"):
                raise ParseError("unsupported interpolation expression",
                                 (start, end), "Unsupported")
            return node
        m = _NAME_RE.match(src, 1)
        name = m.group(0)
        base_span = (start, start + m.end())
        if name in SUPERGLOBALS:
            base = AstNode("SuperGlobal", span=base_span, name=name)
        else:
            base = AstNode("Variable", span=base_span, name=name)
        rest = src[m.end():]
        if not rest:
            return base
        # $name[...] index: quoted string, bare word, or number
        key_src = rest[1:-1].strip()
        if key_src.startswith("'") or key_src.startswith('"'):
            key = key_src[1:-1]
            idx = AstNode("StringLit", span=(start + m.end(), end), value=key,
                          quote="single")
        elif key_src.isdigit():
            idx = AstNode("Number", span=(start + m.end(), end), value=key_src)
        elif _NAME_RE.fullmatch(key_src):
            idx = AstNode("StringLit", span=(start + m.end(), end), value=key_src,
                          quote="single")
        else:
            raise ParseError("unsupported interpolation index",
                             (start, end), "Unsupported")
        if base.kind == "SuperGlobal" and idx.kind == "StringLit":
            base.key = idx.value
            base.span = (start, end)
            return base
        return AstNode("ArrayAccess", [base, idx], span=(start, end))


def _parse_expr_fragment(src: str, offset: int = 0) -> AstNode:
    """Parse a bare expression (no tags) and shift spans by ``offset``."""
    p = _Parser("<?php " + src + ";")
    node = p.parse_expr()
    if not p.at_op(";"):
        raise ParseError("trailing tokens in interpolation expression",
                         (offset, offset + len(src)), "Unsupported")
    shift = offset - len("<?php ")
    for n in node.walk():
        n.span = (n.span[0] + shift, n.span[1] + shift)
    return node


def parse(text: str) -> AstNode:
    """Parse PHP-subset source into a Program node with unique node ids."""
    program = _Parser(text).parse_program()
    return renumber(program)


def syntax_check(text: str) -> bool:
    try:
        parse(text)
        return True
    except ParseError:
        return False


# ---------------------------------------------------------------------------
# Emitter
# ---------------------------------------------------------------------------

_SINGLE_ESC = {"\\": "\\\\", "'": "\\'"}
_DOUBLE_ESC = {"\\": "\\\\", '"': '\\"', "$": "\\$", "\n": "\\n", "\t": "\\t",
               "\r": "\\r", "\0": "\\0"}

_WRAP_KINDS = frozenset({"BinaryOp", "Ternary", "Assign", "Concat"})


def _esc_single(value: str) -> str:
    return "".join(_SINGLE_ESC.get(c, c) for c in value)


def _esc_double(value: str) -> str:
    return "".join(_DOUBLE_ESC.get(c, c) for c in value)


def _expr_text(node: AstNode) -> str:
    k = node.kind
    if k == "Variable":
        return "$" + node.name
    if k == "SuperGlobal":
        if node.key is None:
            return "$" + node.name
        return f"${node.name}['{_esc_single(node.key)}']"
    if k == "StringLit":
        if node.quote == "double":
            return '"' + _esc_double(node.value) + '"'
        return "'" + _esc_single(node.value) + "'"
    if k == "Number":
        return node.value
    if k == "Bool":
        return node.value
    if k == "Null":
        return "null"
    if k == "Concat":
        return " . ".join(_operand(c) for c in node.children)
    if k == "BinaryOp":
        left, right = node.children
        return f"{_operand(left)} {node.op} {_operand(right)}"
    if k == "Ternary":
        cond, a, b = node.children
        return f"{_operand(cond)} ? {_operand(a)} : {_operand(b)}"
    if k == "Assign":
        target, value = node.children
        return f"{_expr_text(target)} {node.op} {_expr_text(value)}"
    if k == "ArrayAccess":
        base, idx = node.children
        base_text = _expr_text(base)
        if base.kind in _WRAP_KINDS:
            base_text = f"({base_text})"
        return f"{base_text}[{_expr_text(idx)}]"
    if k == "Call":
        if node.name in _CALL_KEYWORDS:
            return f"{node.name} {_expr_text(node.children[0])}"
        args = ", ".join(_expr_text(a) for a in node.children)
        return f"{node.name}({args})"
    if k == "PrintExpr":
        return "print " + _expr_text(node.children[0])
    raise ValueError(f"cannot emit expression kind {k}")


def _operand(node: AstNode) -> str:
    text = _expr_text(node)
    if node.kind in _WRAP_KINDS:
        return f"({text})"
    return text


def _stmt_lines(node: AstNode, depth: int, out: list[str]) -> None:
    pad = "    " * depth
    k = node.kind
    if k == "EchoStmt":
        out.append(pad + "echo " + ", ".join(_expr_text(c) for c in node.children) + ";")
    elif k == "ExprStmt":
        out.append(pad + _expr_text(node.children[0]) + ";")
    elif k == "Assign":
        out.append(pad + _expr_text(node) + ";")
    elif k == "Return":
        if node.children:
            out.append(pad + "return " + _expr_text(node.children[0]) + ";")
        else:
            out.append(pad + "return;")
    elif k == "GlobalDecl":
        out.append(pad + "global " + ", ".join("$" + c.name for c in node.children) + ";")
    elif k == "Block":
        out.append(pad + "{")
        for c in node.children:
            _stmt_lines(c, depth + 1, out)
        out.append(pad + "}")
    elif k == "If":
        _if_lines(node, depth, out)
    elif k == "While":
        cond, body = node.children
        out.append(pad + f"while ({_expr_text(cond)}) {{")
        for c in body.children:
            _stmt_lines(c, depth + 1, out)
        out.append(pad + "}")
    elif k == "For":
        init, cond, step, body = node.children
        out.append(pad + f"for ({_expr_text(init)}; {_expr_text(cond)}; {_expr_text(step)}) {{")
        for c in body.children:
            _stmt_lines(c, depth + 1, out)
        out.append(pad + "}")
    elif k == "Foreach":
        body = node.children[-1]
        iterable = node.children[0]
        if len(node.children) == 4:
            key, value = node.children[1], node.children[2]
            head = f"foreach ({_expr_text(iterable)} as ${key.name} => ${value.name}) {{"
        else:
            value = node.children[1]
            head = f"foreach ({_expr_text(iterable)} as ${value.name}) {{"
        out.append(pad + head)
        for c in body.children:
            _stmt_lines(c, depth + 1, out)
        out.append(pad + "}")
    elif k == "FunctionDecl":
        params = node.children[:-1]
        body = node.children[-1]
        sig = []
        for p in params:
            if p.children:
                sig.append(f"${p.name} = {_expr_text(p.children[0])}")
            else:
                sig.append("$" + p.name)
        out.append(pad + f"function {node.name}({', '.join(sig)}) {{")
        for c in body.children:
            _stmt_lines(c, depth + 1, out)
        out.append(pad + "}")
    else:
        raise ValueError(f"cannot emit statement kind {k}")


def _if_lines(node: AstNode, depth: int, out: list[str]) -> None:
    pad = "    " * depth
    cond, then = node.children[0], node.children[1]
    out.append(pad + f"if ({_expr_text(cond)}) {{")
    for c in then.children:
        _stmt_lines(c, depth + 1, out)
    branch = node.children[2] if len(node.children) == 3 else None
    while branch is not None:
        inner = branch.children[0]
        if inner.kind == "If":
            icond, ithen = inner.children[0], inner.children[1]
            out.append(pad + f"}} elseif ({_expr_text(icond)}) {{")
            for c in ithen.children:
                _stmt_lines(c, depth + 1, out)
            branch = inner.children[2] if len(inner.children) == 3 else None
        else:
            out.append(pad + "} else {")
            for c in inner.children:
                _stmt_lines(c, depth + 1, out)
            branch = None
    out.append(pad + "}")


def emit(node: AstNode) -> str:
    """Emit canonical source: one statement per line, 4-space indentation.

    The emitted text re-parses to a structurally identical tree.
    """
    if node.kind == "Program":
        lines = ["<?php"]
        for c in node.children:
            _stmt_lines(c, 0, lines)
        return "\n".join(lines) + "\n"
    if node.kind in STMT_KINDS:
        lines: list[str] = []
        _stmt_lines(node, 0, lines)
        return "\n".join(lines)
    return _expr_text(node)


# ---------------------------------------------------------------------------
# Statement helpers shared by the analysis passes
# ---------------------------------------------------------------------------

def body_statements(node: AstNode) -> list[AstNode]:
    """Top-level statement list of a Program or FunctionDecl body."""
    if node.kind == "Program":
        return node.children
    if node.kind == "FunctionDecl":
        return node.children[-1].children
    if node.kind == "Block":
        return node.children
    raise ValueError(f"no statement body on {node.kind}")


def child_blocks(stmt: AstNode) -> list[AstNode]:
    """Blocks nested directly under a statement (If branches, loop bodies)."""
    blocks = []
    if stmt.kind == "If":
        blocks.append(stmt.children[1])
        if len(stmt.children) == 3:
            inner = stmt.children[2].children[0]
            if inner.kind == "If":
                blocks.extend(child_blocks(inner))
            else:
                blocks.append(inner)
    elif stmt.kind in ("While", "For", "Foreach", "FunctionDecl"):
        blocks.append(stmt.children[-1])
    elif stmt.kind == "Block":
        blocks.append(stmt)
    return blocks


def iter_statements(node: AstNode, into_functions: bool = False):
    """All statement nodes in document order.

    Function bodies are separate analysis scopes and are skipped unless
    ``into_functions`` is set.
    """
    def rec(stmts):
        for s in stmts:
            yield s
            if s.kind == "FunctionDecl":
                if into_functions:
                    yield from rec(body_statements(s))
                continue
            if s.kind == "If":
                yield from rec(s.children[1].children)
                if len(s.children) == 3:
                    inner = s.children[2].children[0]
                    if inner.kind == "If":
                        yield from rec([inner])
                    else:
                        yield from rec(inner.children)
            elif s.kind in ("While", "For", "Foreach"):
                yield from rec(s.children[-1].children)
            elif s.kind == "Block":
                yield from rec(s.children)
    yield from rec(body_statements(node))


def node_index(root: AstNode) -> dict[int, AstNode]:
    return {n.id: n for n in root.walk()}
