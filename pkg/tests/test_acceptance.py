"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the
per-criterion PASS lines). Tolerances are pinned here, not configurable.
"""

import random
import time

from vulnsnip.dataset import Sample, split_project_disjoint
from vulnsnip.dedup import DedupConfig, dedup, similarity
from vulnsnip.normalize import NormalizeConfig, normalize
from vulnsnip.phpast import emit, parse, renumber, structurally_equal
from vulnsnip.pipeline import extract_dir
from vulnsnip.sinks import SinkKind, find_sinks, taint_candidates
from vulnsnip.slicing import (SliceInvariantError, backward_slice, globalize,
                              mark_taint, slice_statement_ids)
from vulnsnip.synth import HostUnit, RawSample, SynthConfig, synthesize
from vulnsnip.classify import scan_project

from progen import make_program
from test_metrics import PUBLISHED_ROWS
from test_slicing import oracle_slice_ids

ALL_KINDS = {
    "Program", "EchoStmt", "PrintExpr", "ExprStmt", "Assign", "If",
    "ElseBranch", "While", "For", "Foreach", "FunctionDecl", "Param",
    "Return", "GlobalDecl", "Block", "Call", "Variable", "SuperGlobal",
    "StringLit", "Concat", "ArrayAccess", "Ternary", "BinaryOp", "Number",
    "Bool", "Null",
}


def _ok(name):
    print(f"ACCEPTANCE PASS: {name}")


def _corpus_snippets(corpus_files):
    snippets = []
    for path in corpus_files:
        prog = parse(path.read_text(encoding="utf-8"))
        units = [prog] + [globalize(s) for s in prog.children
                          if s.kind == "FunctionDecl"]
        for unit in units:
            for kind in SinkKind:
                for site in find_sinks(unit, kind):
                    for cand in taint_candidates(site):
                        try:
                            snippets.append((backward_slice(unit, cand), kind))
                        except SliceInvariantError:
                            pass
    return snippets


def _extract_all(root):
    samples = []
    for kind in SinkKind:
        samples.extend(extract_dir(root, kind).samples)
    return samples


def test_parser_round_trip_over_corpus(corpus_files):
    """Every fixture file round-trips structurally; all AST kinds covered."""
    start = time.monotonic()
    assert len(corpus_files) >= 60
    kinds_seen = set()
    for path in corpus_files:
        src = path.read_text(encoding="utf-8")
        first = parse(src)
        second = parse(emit(first))
        assert structurally_equal(first, second), path.name
        kinds_seen.update(n.kind for n in first.walk())
        # interpolation must be desugared away, never surfacing as a node
        assert all(n.kind != "InterpSegment" for n in first.walk())
    assert kinds_seen == ALL_KINDS, ALL_KINDS - kinds_seen
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"round-trip took {elapsed:.2f}s"
    _ok(f"parser round-trip: {len(corpus_files)} files, "
        f"{len(kinds_seen)} kinds, {elapsed:.2f}s")


def test_slicing_matches_bruteforce_oracle():
    """30 randomized programs of <= 30 statements: exact statement-set match."""
    rng = random.Random(4242)
    checked = 0
    while checked < 30:
        src = make_program(rng, rng.randrange(3, 30))
        prog = parse(src)
        sites = find_sinks(prog, SinkKind.CWE79)
        if not sites:
            continue
        cands = [c for s in sites for c in taint_candidates(s)]
        cand = cands[rng.randrange(len(cands))]
        assert slice_statement_ids(prog, cand) == oracle_slice_ids(prog, cand), src
        checked += 1
    _ok("slicing oracle: 30/30 randomized programs match exactly")


def test_single_sink_invariant_on_all_outputs(scanproj_dir, threeproj_dir,
                                              corpus_dir):
    """extract and synthesize outputs re-scan to exactly one sink, one
    concatenated variable, one taint marker."""
    extracted = _extract_all(scanproj_dir) + _extract_all(threeproj_dir)
    raws = [RawSample(id=s.id, code=s.code, label="bad", cwe=SinkKind.from_string(s.cwe))
            for s in _extract_all(threeproj_dir)]
    hosts = [HostUnit(id="h1", project="PX",
                      code="$k = 1;\nif ($k) {\n    $m = $k + 1;\n}\necho $m . $k;\n")]
    synthesized, _ = synthesize(raws, hosts, SynthConfig(times=2, seed=99))
    checked = 0
    for s in extracted + synthesized:
        kind = SinkKind.from_string(s.cwe)
        sites = find_sinks(parse(s.code), kind)
        assert len(sites) == 1, s.id
        assert len(sites[0].concat_vars) == 1, s.id
        assert sites[0].concat_vars == [s.taint_var], s.id
        assert s.code.count("/* taint:") == 1, s.id
        checked += 1
    assert checked > 0
    _ok(f"single-sink invariant: {checked}/{checked} snippets")


def test_normalization_idempotent_and_sink_preserving(corpus_files):
    """Byte-equal idempotence, sink preservation, and canonicalization under
    20 randomized consistent alpha-renamings."""
    cfg = NormalizeConfig()
    snippets = _corpus_snippets(corpus_files)
    assert snippets
    for snip, kind in snippets:
        once = normalize(snip, cfg)
        assert normalize(once, cfg).code == once.code, "idempotence"
        before = find_sinks(parse(snip.code), kind)
        after = find_sinks(parse(once.code), kind)
        assert len(before) == len(after) == 1
        assert after[0].concat_vars == [once.taint_var]

    rng = random.Random(515)
    base_snip, _ = snippets[0]
    base = normalize(base_snip, cfg).code
    for _ in range(20):
        prog = parse(base_snip.code)
        names = sorted({n.name for n in prog.walk()
                        if n.kind in ("Variable", "Param")})
        mapping = {n: f"r{rng.randrange(10**6)}_{n}" for n in names}
        for n in prog.walk():
            if n.kind in ("Variable", "Param"):
                n.name = mapping[n.name]
        renamed = type(base_snip)(
            code=emit(renumber(prog)), cwe=base_snip.cwe,
            taint_var=mapping.get(base_snip.taint_var, base_snip.taint_var),
            sink_line=base_snip.sink_line)
        renamed = mark_taint(renamed)
        assert normalize(renamed, cfg).code == base, "canonicalization"
    _ok(f"normalization: {len(snippets)} snippets idempotent + sink-preserving, "
        "20 renamings canonical")


def test_dedup_postconditions():
    """similarity('abcd','abce') = 0.75 exactly; no retained pair >= 0.90
    on a 50-snippet corpus (exact O(n^2) verification)."""
    assert similarity("abcd", "abce") == 0.75
    rng = random.Random(77)
    samples = []
    shapes = [
        "<?php\n$v{i} = $_GET['{k}'];\necho $v{i};\n",
        "<?php\n$w{i} = $_POST['{k}'];\necho '<i>' . $w{i} . '</i>';\n",
        "<?php\n$q{i} = \"SELECT c FROM t{i} WHERE k=\" . $u{i};\nrun($q{i});\n",
        "<?php\n$n{i} = 0;\nwhile ($n{i} < {i}) {{\n    $n{i} = $n{i} + 1;\n}}\necho $n{i};\n",
    ]
    for i in range(50):
        code = rng.choice(shapes).format(i=i, k=rng.choice("abcdefgh"))
        samples.append(Sample(id=f"s{i}", cwe="CWE-79", code=code, project="P",
                              file=f"f{i}", line=1, taint_var="v",
                              synthetic=False))
    cfg = DedupConfig(threshold=0.90)
    kept = dedup(samples, cfg)
    assert kept
    for i, a in enumerate(kept):
        for b in kept[i + 1:]:
            s = similarity(a.code, b.code)
            assert s < cfg.threshold, (a.id, b.id, s)
    _ok(f"dedup: exact 0.75 anchor, {len(kept)}/50 retained, "
        "O(n^2) post-check clean")


def test_synthesis_contracts(threeproj_dir):
    """Count bound with discards reconciled, 100% label preservation,
    byte-exact seed determinism, zero residual host sinks."""
    raw_bad = RawSample(
        id="rb", code="<?php\n$var0 = $_GET['a'];\necho $var0; /* taint: $var0 */\n",
        label="bad", cwe=SinkKind.CWE79)
    raw_good = RawSample(
        id="rg",
        code=("<?php\n$var0 = htmlspecialchars($_GET['b']);\n"
              "echo $var0; /* taint: $var0 */\n"),
        label="good", cwe=SinkKind.CWE79)
    hosts = [
        HostUnit(id="ha", project="P1",
                 code="$u = 'x';\necho $u;\n$t = $u . 'y';\n"),
        HostUnit(id="hb", project="P2", code="""$m = load();
if ($m == 1) {
    $s = 'one';
    echo $s;
}
while ($m < 3) {
    $m = $m + 1;
}
"""),
    ]
    cfg = SynthConfig(times=3, seed=123)
    out1, rep1 = synthesize([raw_bad, raw_good], hosts, cfg)
    out2, rep2 = synthesize([raw_bad, raw_good], hosts, cfg)

    bound = 2 * len(hosts) * cfg.times
    assert rep1.attempts == bound
    assert len(out1) == bound - rep1.syntax_failures - rep1.sink_failures
    labels = {"rb": "bad", "rg": "good"}
    assert all(s.label == labels[s.origin] for s in out1)
    assert [(s.id, s.code) for s in out1] == [(s.id, s.code) for s in out2]
    for s in out1:
        sites = find_sinks(parse(s.code), SinkKind.CWE79)
        assert len(sites) == 1  # the carried sink; host sinks are gone
    _ok(f"synthesis: {len(out1)}/{bound} produced, labels preserved, "
        "determinism byte-exact, host sinks removed")


def test_project_disjoint_split_with_adversarial_origins(threeproj_dir):
    """EXP2: pairwise-disjoint project sets and synthesis provenance on a
    3-project fixture; violators dropped and counted."""
    real = _extract_all(threeproj_dir)
    for s in real:
        s.label = "bad"
    projects = sorted({s.project for s in real})
    assert projects == ["P1", "P2", "P3"]
    result = split_project_disjoint(real, [], (0.4, 0.3, 0.3), seed=2)
    assign = result.project_assignment
    assert sorted(assign.values()) == ["test", "train", "val"]

    by_split = {b: next(p for p, bb in assign.items() if bb == b)
                for b in ("train", "val", "test")}
    sample_in = {b: next(s for s in real if s.project == by_split[b])
                 for b in ("train", "val", "test")}

    def syn(i, host_bucket, origin_bucket):
        return Sample(id=f"adv{i}", cwe="CWE-79", code="<?php\necho $a;\n",
                      project=by_split[host_bucket], file="h", line=2,
                      taint_var="a", synthetic=True, label="bad",
                      origin=sample_in[origin_bucket].id)

    adversarial = [
        syn(0, "train", "test"),   # drop: test origin feeds train
        syn(1, "train", "val"),    # drop: val origin feeds train
        syn(2, "val", "test"),     # drop: test origin feeds val
        syn(3, "test", "train"),   # drop: synthetic never lands in test
        syn(4, "train", "train"),  # keep
        syn(5, "val", "train"),    # keep
    ]
    real2 = _extract_all(threeproj_dir)
    for s in real2:
        s.label = "bad"
    result2 = split_project_disjoint(real2, adversarial, (0.4, 0.3, 0.3), seed=2)
    assert result2.dropped == 4
    kept = {s.id for s in result2.all_samples() if s.synthetic}
    assert kept == {"adv4", "adv5"}

    for a in ("train", "val", "test"):
        for b in ("train", "val", "test"):
            if a < b:
                pa = {s.project for s in getattr(result2, a)}
                pb = {s.project for s in getattr(result2, b)}
                assert not pa & pb, (a, b)
    _ok("splits: project sets pairwise disjoint, 4/6 adversarial synthetic "
        "samples dropped")


def test_metric_rows_satisfy_f1_identity():
    """Every transcribed published row: F1 = 2PR/(P+R) within 0.01 points;
    anchor row (79.80, 87.96) -> 83.68."""
    assert round(2 * 79.80 * 87.96 / (79.80 + 87.96), 2) == 83.68
    worst = 0.0
    for pre, rec, f1 in PUBLISHED_ROWS:
        computed = 2 * pre * rec / (pre + rec)
        worst = max(worst, abs(computed - f1))
        assert abs(computed - f1) <= 0.01, (pre, rec, f1)
    _ok(f"metrics: {len(PUBLISHED_ROWS)} published rows satisfy the F1 "
        f"identity (worst gap {worst:.4f} points)")


def test_end_to_end_scan_recall(scanproj_dir):
    """Seeded project: all 3 XSS and 2 SQLi direct flows reported bad,
    within 10 seconds."""
    start = time.monotonic()
    bad = []
    for kind in SinkKind:
        report = scan_project(scanproj_dir, kind, classifier="rule")
        bad.extend((f.file, f.line) for f in report.findings if f.label == "bad")
    elapsed = time.monotonic() - start
    expected = [("index.php", 5), ("search.php", 5), ("widget.php", 4),
                ("db.php", 3), ("report.php", 3)]
    assert sorted(bad) == sorted(expected)
    assert elapsed < 10.0, f"scan took {elapsed:.2f}s"
    _ok(f"end-to-end scan: 5/5 seeded flows found in {elapsed:.2f}s")
