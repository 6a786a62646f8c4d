"""Control-flow graphs, def-use sets, and seeded random path sampling.

Granularity: one CFG node universe per Program or FunctionDecl body; nested
function bodies are separate scopes and never enter an enclosing graph.
Arrays are tracked by base variable name only; superglobal reads surface
under their canonical name (e.g. ``_GET``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .phpast import AstNode, body_statements

FALLTHROUGH = "fallthrough"
TRUE = "true"
FALSE = "false"
LOOP_BACK = "loop-back"
LOOP_EXIT = "loop-exit"


@dataclass
class BasicBlock:
    id: int
    stmts: list[int] = field(default_factory=list)


@dataclass
class Edge:
    src: int
    dst: int
    label: str


@dataclass
class Cfg:
    blocks: list[BasicBlock]
    edges: list[Edge]
    entry: int
    exit: int

    def successors(self, block_id: int) -> list[Edge]:
        return [e for e in self.edges if e.src == block_id]

    def predecessors(self, block_id: int) -> list[Edge]:
        return [e for e in self.edges if e.dst == block_id]

    def statement_ids(self) -> set[int]:
        ids: set[int] = set()
        for b in self.blocks:
            ids.update(b.stmts)
        return ids


@dataclass
class DefUse:
    defs: dict[int, set[str]]
    uses: dict[int, set[str]]


@dataclass
class CfPath:
    blocks: list[int]
    rng_seed: int


class _Builder:
    def __init__(self):
        self.blocks: list[BasicBlock] = []
        self.edges: list[Edge] = []

    def new_block(self) -> BasicBlock:
        b = BasicBlock(len(self.blocks))
        self.blocks.append(b)
        return b

    def connect(self, src: BasicBlock, dst: BasicBlock, label: str):
        self.edges.append(Edge(src.id, dst.id, label))

    def seq(self, stmts: list[AstNode], cur: BasicBlock) -> BasicBlock:
        for s in stmts:
            k = s.kind
            if k == "If":
                cur = self._if(s, cur)
            elif k in ("While", "For", "Foreach"):
                cur = self._loop(s, cur)
            elif k == "Block":
                cur.stmts.append(s.id)
                cur = self.seq(s.children, cur)
            else:
                cur.stmts.append(s.id)
        return cur

    def _if(self, stmt: AstNode, cur: BasicBlock) -> BasicBlock:
        cur.stmts.append(stmt.id)
        then_entry = self.new_block()
        self.connect(cur, then_entry, TRUE)
        then_end = self.seq(stmt.children[1].children, then_entry)
        join = self.new_block()
        if len(stmt.children) == 3:
            inner = stmt.children[2].children[0]
            else_entry = self.new_block()
            self.connect(cur, else_entry, FALSE)
            if inner.kind == "If":
                else_end = self.seq([inner], else_entry)
            else:
                else_end = self.seq(inner.children, else_entry)
            self.connect(else_end, join, FALLTHROUGH)
        else:
            self.connect(cur, join, FALSE)
        self.connect(then_end, join, FALLTHROUGH)
        return join

    def _loop(self, stmt: AstNode, cur: BasicBlock) -> BasicBlock:
        cond = self.new_block()
        self.connect(cur, cond, FALLTHROUGH)
        cond.stmts.append(stmt.id)
        body_entry = self.new_block()
        self.connect(cond, body_entry, TRUE)
        body_end = self.seq(stmt.children[-1].children, body_entry)
        self.connect(body_end, cond, LOOP_BACK)
        after = self.new_block()
        self.connect(cond, after, LOOP_EXIT)
        return after


def build_cfg(node: AstNode) -> Cfg:
    """Build the CFG of a Program or FunctionDecl.

    Straight-line code yields entry -> B -> exit. ``for`` is treated as a
    while-shaped loop whose header holds the whole statement node.
    """
    b = _Builder()
    entry = b.new_block()
    first = b.new_block()
    b.connect(entry, first, FALLTHROUGH)
    last = b.seq(body_statements(node), first)
    exit_block = b.new_block()
    b.connect(last, exit_block, FALLTHROUGH)
    return Cfg(b.blocks, b.edges, entry.id, exit_block.id)


# ---------------------------------------------------------------------------
# Def-use
# ---------------------------------------------------------------------------

def _walk_expr(node: AstNode, uses: set[str], defs: set[str]):
    k = node.kind
    if k == "Variable":
        uses.add(node.name)
        return
    if k == "SuperGlobal":
        uses.add(node.name)
        return
    if k == "Assign":
        target, value = node.children
        if target.kind == "Variable":
            defs.add(target.name)
            if node.op == ".=":
                uses.add(target.name)
        elif target.kind == "ArrayAccess":
            base = target
            while base.kind == "ArrayAccess":
                _walk_expr(base.children[1], uses, defs)
                base = base.children[0]
            if base.kind == "Variable":
                # element writes preserve the rest of the array
                defs.add(base.name)
                uses.add(base.name)
            else:
                _walk_expr(base, uses, defs)
        _walk_expr(value, uses, defs)
        return
    for c in node.children:
        _walk_expr(c, uses, defs)


def _stmt_def_use(stmt: AstNode) -> tuple[set[str], set[str]]:
    defs: set[str] = set()
    uses: set[str] = set()
    k = stmt.kind
    if k == "Assign":
        _walk_expr(stmt, uses, defs)
    elif k in ("EchoStmt", "ExprStmt", "Return"):
        for c in stmt.children:
            _walk_expr(c, uses, defs)
    elif k in ("If", "While"):
        _walk_expr(stmt.children[0], uses, defs)
    elif k == "For":
        for c in stmt.children[:3]:
            _walk_expr(c, uses, defs)
    elif k == "Foreach":
        _walk_expr(stmt.children[0], uses, defs)
        for target in stmt.children[1:-1]:
            defs.add(target.name)
    elif k == "GlobalDecl":
        for c in stmt.children:
            defs.add(c.name)
    # Block and FunctionDecl contribute nothing themselves
    return defs, uses


def def_use(cfg: Cfg, program: AstNode) -> DefUse:
    """Per-statement defined/read variable names for every CFG statement."""
    index = {n.id: n for n in program.walk()}
    defs: dict[int, set[str]] = {}
    uses: dict[int, set[str]] = {}
    for sid in sorted(cfg.statement_ids()):
        d, u = _stmt_def_use(index[sid])
        defs[sid] = d
        uses[sid] = u
    return DefUse(defs, uses)


# ---------------------------------------------------------------------------
# Random path sampling
# ---------------------------------------------------------------------------

def random_path(cfg: Cfg, seed: int, max_blocks: int = 64) -> CfPath:
    """Walk entry -> exit choosing uniformly among successors.

    Each loop-back edge is taken at most once; past ``max_blocks`` interior
    blocks the walk stops re-entering loops so it always reaches the exit.
    """
    rng = random.Random(seed)
    out_edges: dict[int, list[tuple[int, Edge]]] = {}
    for i, e in enumerate(cfg.edges):
        out_edges.setdefault(e.src, []).append((i, e))
    path = [cfg.entry]
    used_loop_backs: set[int] = set()
    exhausted_headers: set[int] = set()
    cur = cfg.entry
    while cur != cfg.exit:
        options = [(i, e) for i, e in out_edges.get(cur, [])
                   if not (e.label == LOOP_BACK and i in used_loop_backs)
                   and not (e.label == TRUE and cur in exhausted_headers)]
        if len(path) > max_blocks:
            # past the cap, always leave loops at their headers
            exits = [(i, e) for i, e in options if e.label == LOOP_EXIT]
            if exits:
                options = exits
        idx, edge = options[rng.randrange(len(options))]
        if edge.label == LOOP_BACK:
            used_loop_backs.add(idx)
            exhausted_headers.add(edge.dst)
        path.append(edge.dst)
        cur = edge.dst
    return CfPath(path, seed)


def path_statement_ids(cfg: Cfg, path: CfPath) -> set[int]:
    """Statement ids visited by a path (union of its blocks)."""
    by_id = {b.id: b for b in cfg.blocks}
    visited: set[int] = set()
    for bid in path.blocks:
        visited.update(by_id[bid].stmts)
    return visited
