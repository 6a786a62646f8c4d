import random
import re

from vulnsnip.cfg import (LOOP_BACK, build_cfg, def_use, path_statement_ids,
                          random_path)
from vulnsnip.phpast import iter_statements, parse

from progen import make_program


def _edge_set(cfg):
    return {(e.src, e.dst, e.label) for e in cfg.edges}


class TestBuildCfg:
    def test_straight_line_single_block(self):
        cfg = build_cfg(parse("<?php $a = 1; echo $a;"))
        interior = [b for b in cfg.blocks
                    if b.id not in (cfg.entry, cfg.exit) and b.stmts]
        assert len(interior) == 1
        assert _edge_set(cfg) == {
            (cfg.entry, interior[0].id, "fallthrough"),
            (interior[0].id, cfg.exit, "fallthrough"),
        }

    def test_if_else_diamond(self):
        cfg = build_cfg(parse("<?php if ($c) { echo 1; } else { echo 2; }"))
        labels = sorted(e.label for e in cfg.edges)
        assert labels.count("true") == 1
        assert labels.count("false") == 1
        # one join point reached from both branches
        joins = [e.dst for e in cfg.edges if e.label == "fallthrough"
                 and e.src != cfg.entry]
        assert len(set(joins)) >= 1

    def test_while_shape_matches_hand_built_adjacency(self):
        prog = parse("<?php while ($c) { $i = $i + 1; }")
        cfg = build_cfg(prog)
        # entry -> pre -> cond; cond ->true-> body ->loop-back-> cond;
        # cond ->loop-exit-> after -> exit
        assert _edge_set(cfg) == {
            (0, 1, "fallthrough"),
            (1, 2, "fallthrough"),
            (2, 3, "true"),
            (3, 2, "loop-back"),
            (2, 4, "loop-exit"),
            (4, 5, "fallthrough"),
        }
        while_id = prog.children[0].id
        assert cfg.blocks[2].stmts == [while_id]

    def test_invariants(self):
        rng = random.Random(5)
        for _ in range(40):
            prog = parse(make_program(rng, rng.randrange(2, 16)))
            cfg = build_cfg(prog)
            assert not cfg.predecessors(cfg.entry)
            assert not cfg.successors(cfg.exit)
            for b in cfg.blocks:
                if b.id != cfg.exit:
                    assert cfg.successors(b.id), f"block {b.id} has no successor"

    def test_statement_coverage_equals_ast(self):
        rng = random.Random(9)
        for _ in range(40):
            prog = parse(make_program(rng, rng.randrange(2, 16)))
            cfg = build_cfg(prog)
            ast_ids = {s.id for s in iter_statements(prog)}
            assert cfg.statement_ids() == ast_ids
            # each statement appears in exactly one block
            seen = []
            for b in cfg.blocks:
                seen.extend(b.stmts)
            assert len(seen) == len(set(seen))


def _token_def_use(src_line):
    """Positional oracle: variables left of the first assignment operator are
    defs, everything else (and .= targets) are uses."""
    names = re.findall(r"\$([A-Za-z_][A-Za-z0-9_]*)", src_line)
    m = re.search(r"\$([A-Za-z_][A-Za-z0-9_]*)(?:\[[^=]*\])?\s*(\.?=)[^=]", src_line)
    if not m:
        return set(), set(names)
    target, op = m.group(1), m.group(2)
    uses = set(names) - {target} if op == "=" else set(names)
    return {target}, uses


class TestDefUse:
    def test_assign_concat(self):
        prog = parse("<?php $a = $b . $c;")
        du = def_use(build_cfg(prog), prog)
        sid = prog.children[0].id
        assert du.defs[sid] == {"a"}
        assert du.uses[sid] == {"b", "c"}

    def test_compound_assign_reads_target(self):
        prog = parse("<?php $a .= $b;")
        du = def_use(build_cfg(prog), prog)
        sid = prog.children[0].id
        assert du.defs[sid] == {"a"}
        assert du.uses[sid] == {"a", "b"}

    def test_foreach_targets(self):
        prog = parse("<?php foreach ($rows as $r) { echo $r; }")
        du = def_use(build_cfg(prog), prog)
        fe = prog.children[0]
        assert du.defs[fe.id] == {"r"}
        assert du.uses[fe.id] == {"rows"}

    def test_superglobal_reads_canonical(self):
        prog = parse("<?php $a = $_GET['x'] . $_POST['y'];")
        du = def_use(build_cfg(prog), prog)
        sid = prog.children[0].id
        assert du.uses[sid] == {"_GET", "_POST"}

    def test_oracle_on_simple_assignments(self):
        rng = random.Random(21)
        for _ in range(60):
            src = make_program(rng, 1, ensure_sink=False)
            prog = parse(src)
            if not prog.children or prog.children[0].kind != "Assign":
                continue
            line = src.split("\n")[1]
            if "$_" in line:  # superglobals use canonical names, not $ tokens
                continue
            du = def_use(build_cfg(prog), prog)
            sid = prog.children[0].id
            want_defs, want_uses = _token_def_use(line)
            assert du.defs[sid] == want_defs, line
            assert du.uses[sid] == want_uses, line

    def test_independent_of_block_partitioning(self):
        # same statements, straight-line vs wrapped in a block statement
        flat = parse("<?php $a = $b; echo $a;")
        blocky = parse("<?php { $a = $b; echo $a; }")
        du_flat = def_use(build_cfg(flat), flat)
        du_blocky = def_use(build_cfg(blocky), blocky)
        assert sorted(map(tuple, du_flat.defs.values())) == \
            sorted(map(tuple, (v for k, v in du_blocky.defs.items()
                               if blocky.children[0].id != k)))


class TestRandomPath:
    def test_straight_line_unique_path(self):
        cfg = build_cfg(parse("<?php $a = 1; echo $a;"))
        paths = {tuple(random_path(cfg, seed).blocks) for seed in range(8)}
        assert len(paths) == 1

    def test_diamond_both_branches_within_16_seeds(self):
        cfg = build_cfg(parse("<?php if ($c) { echo 1; } else { echo 2; }"))
        prog_paths = {tuple(random_path(cfg, seed).blocks) for seed in range(16)}
        assert len(prog_paths) == 2

    def test_determinism(self):
        prog = parse("<?php while ($c) { if ($d) { $x = 1; } $c = $c + 1; }")
        cfg = build_cfg(prog)
        for seed in range(10):
            assert random_path(cfg, seed).blocks == random_path(cfg, seed).blocks

    def test_valid_walk_no_repeated_loop_back(self):
        rng = random.Random(2)
        for _ in range(25):
            prog = parse(make_program(rng, rng.randrange(4, 18)))
            cfg = build_cfg(prog)
            edges = {(e.src, e.dst): e.label for e in cfg.edges}
            for seed in range(6):
                path = random_path(cfg, seed)
                assert path.blocks[0] == cfg.entry
                assert path.blocks[-1] == cfg.exit
                back_taken = set()
                for a, b in zip(path.blocks, path.blocks[1:]):
                    assert (a, b) in edges, "path step is not an edge"
                    if edges[(a, b)] == LOOP_BACK:
                        assert (a, b) not in back_taken
                        back_taken.add((a, b))

    def test_path_statement_ids_subset(self):
        prog = parse("<?php $a = 1; if ($a) { $b = 2; } else { $c = 3; } echo $a;")
        cfg = build_cfg(prog)
        all_ids = cfg.statement_ids()
        for seed in range(8):
            ids = path_statement_ids(cfg, random_path(cfg, seed))
            assert ids <= all_ids
