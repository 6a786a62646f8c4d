import random

import pytest

from vulnsnip.normalize import (NormalizeConfig, elide_strings, normalize,
                                rename_vars)
from vulnsnip.phpast import parse, renumber, emit, syntax_check
from vulnsnip.sinks import SinkKind, find_sinks, taint_candidates
from vulnsnip.slicing import (SliceInvariantError, backward_slice, globalize,
                              mark_taint)


def _snippet(src, kind=SinkKind.CWE79, index=0):
    prog = parse(src)
    sites = find_sinks(prog, kind)
    cands = [c for s in sites for c in taint_candidates(s)]
    return backward_slice(prog, cands[index])


def _corpus_snippets(corpus_files, limit=None):
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
    return snippets[:limit] if limit else snippets


class TestElideStrings:
    def test_long_html_string_elided_sink_preserved(self):
        snip = _snippet('<?php $a = $_GET[\'a\'];'
                        'echo "<div class=wide-banner-header-row>" . $a;')
        out = elide_strings(snip)
        assert 'echo "s" . $a;' in out.code
        sites = find_sinks(parse(out.code), SinkKind.CWE79)
        assert len(sites) == 1 and sites[0].concat_vars == [out.taint_var]

    def test_sql_literal_exempt(self):
        snip = _snippet('<?php $id = $_GET[\'id\'];'
                        '$q = "SELECT * FROM t WHERE id=" . $id;',
                        kind=SinkKind.CWE89)
        out = elide_strings(snip)
        assert '"SELECT * FROM t WHERE id="' in out.code

    def test_short_plain_string_unchanged(self):
        snip = _snippet("<?php $a = $_GET['a']; echo 'ok' . $a;")
        out = elide_strings(snip)
        assert "'ok'" in out.code

    def test_marker_strings_elided_regardless_of_length(self):
        snip = _snippet("<?php $a = $_GET['a']; echo '<b>' . $a . '</b>';")
        out = elide_strings(snip)
        assert "'<b>'" not in out.code
        assert out.code.count("'s'") == 2

    def test_replacement_constant_exempt(self):
        snip = _snippet("<?php $a = $_GET['a']; $b = $_GET['b']; echo $a . $b;")
        out = elide_strings(snip)
        assert "'x'" in out.code  # slicer constant survives


class TestRenameVars:
    def test_first_occurrence_order(self):
        snip = _snippet("<?php $foo = $_GET['a']; echo $foo;")
        out = rename_vars(snip)
        assert out.code == ("<?php\n$var0 = $_GET['a'];\n"
                            "echo $var0; /* taint: $var0 */\n")
        assert out.taint_var == "var0"

    def test_function_names_kept(self):
        snip = _snippet("<?php $x = myHelper($_GET['q']); echo $x;")
        out = rename_vars(snip)
        assert "myHelper(" in out.code
        assert "$var0" in out.code

    def test_superglobals_untouched(self):
        snip = _snippet("<?php $v = $_POST['v']; echo $v;")
        out = rename_vars(snip)
        assert "$_POST['v']" in out.code

    def test_already_canonical_is_fixed_point(self):
        snip = _snippet("<?php $var0 = $_GET['a']; $var1 = $var0; echo $var1;")
        assert rename_vars(snip).code == snip.code

    def test_mapping_is_bijection(self):
        snip = _snippet("<?php $p = $_GET['p']; $q = $p; $r = $p . $q; echo $r;")
        out = rename_vars(snip)
        assert "$var0" in out.code and "$var1" in out.code and "$var2" in out.code
        # distinct names never collapse
        assert out.code.count("$var2") >= 2  # def + sink read


class TestNormalize:
    def test_config_invariants(self):
        with pytest.raises(ValueError):
            NormalizeConfig(max_string_len=0)
        with pytest.raises(ValueError):
            NormalizeConfig(placeholder="")
        with pytest.raises(ValueError):
            NormalizeConfig(placeholder="a'b")

    def test_disabled_is_identity(self):
        snip = _snippet("<?php $weird = $_GET['w']; echo $weird;")
        out = normalize(snip, NormalizeConfig(enabled=False))
        assert out.code == snip.code

    def test_idempotent_on_corpus(self, corpus_files):
        cfg = NormalizeConfig()
        for snip, _ in _corpus_snippets(corpus_files):
            once = normalize(snip, cfg)
            twice = normalize(once, cfg)
            assert twice.code == once.code

    def test_sink_preserved_on_corpus(self, corpus_files):
        cfg = NormalizeConfig()
        for snip, kind in _corpus_snippets(corpus_files):
            before = find_sinks(parse(snip.code), kind)
            after_snip = normalize(snip, cfg)
            after = find_sinks(parse(after_snip.code), kind)
            assert len(after) == len(before) == 1
            assert after[0].concat_vars == [after_snip.taint_var]
            # same statement position: same ordinal among statements
            assert syntax_check(after_snip.code)

    def test_marker_follows_taint_var(self, corpus_files):
        cfg = NormalizeConfig()
        for snip, kind in _corpus_snippets(corpus_files, limit=20):
            out = normalize(snip, cfg)
            sites = find_sinks(parse(out.code), kind)
            assert sites[0].concat_vars == [out.taint_var]
            assert f"/* taint: ${out.taint_var} */" in out.code
            assert out.code.count("/* taint:") == 1

    def test_alpha_renaming_canonicalization(self, corpus_files):
        """Consistently renaming input variables must not change the
        normalized output."""
        rng = random.Random(99)
        snippets = _corpus_snippets(corpus_files, limit=10)
        cfg = NormalizeConfig()
        for snip, _ in snippets:
            base = normalize(snip, cfg).code
            for trial in range(2):
                prog = parse(snip.code)
                names = sorted({n.name for n in prog.walk()
                                if n.kind in ("Variable", "Param")})
                fresh = {}
                for name in names:
                    fresh[name] = f"ren{rng.randrange(1000, 9999)}_{name}"
                for n in prog.walk():
                    if n.kind in ("Variable", "Param"):
                        n.name = fresh[n.name]
                renamed_code = emit(renumber(prog))
                renamed = type(snip)(
                    code=renamed_code, cwe=snip.cwe,
                    taint_var=fresh.get(snip.taint_var, snip.taint_var),
                    sink_line=snip.sink_line)
                renamed = mark_taint(renamed)
                assert normalize(renamed, cfg).code == base
