import random

import pytest

from vulnsnip.dataset import Sample
from vulnsnip.dedup import DedupConfig, dedup, lcs_length, similarity


def lcs_oracle(a: str, b: str) -> int:
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    return dp[m][n]


def _sample(i, code, project="P", file="f.php", line=None):
    return Sample(id=f"s{i}", cwe="CWE-79", code=code, project=project,
                  file=file, line=line if line is not None else i,
                  taint_var="a", synthetic=False)


class TestSimilarity:
    def test_identical(self):
        assert similarity("echo $a;", "echo $a;") == 1.0

    def test_disjoint(self):
        assert similarity("abcd", "wxyz") == 0.0

    def test_exact_quarter_loss(self):
        assert similarity("abcd", "abce") == 0.75

    def test_whitespace_stripped(self):
        assert similarity("echo  $a ;\n", "echo $a;") == 1.0
        assert similarity(" \t\n", "") == 1.0

    def test_symmetric(self):
        rng = random.Random(1)
        for _ in range(50):
            a = "".join(rng.choice("abc; ") for _ in range(rng.randrange(20)))
            b = "".join(rng.choice("abc; ") for _ in range(rng.randrange(20)))
            assert similarity(a, b) == similarity(b, a)

    def test_lcs_matches_dp_oracle(self):
        rng = random.Random(2)
        for _ in range(200):
            a = "".join(rng.choice("abcx$(){};=.") for _ in range(rng.randrange(0, 60)))
            b = "".join(rng.choice("abcx$(){};=.") for _ in range(rng.randrange(0, 60)))
            assert lcs_length(a, b) == lcs_oracle(a, b), (a, b)


class TestDedup:
    def test_exact_copy_removed(self):
        a = _sample(0, "<?php\necho $a;\n")
        a_copy = _sample(1, "<?php\necho  $a ;\n")
        b = _sample(2, "<?php\n$q = 'SELECT 1 FROM t' . $x;\n")
        kept = dedup([a, a_copy, b], DedupConfig(threshold=0.9))
        assert [s.id for s in kept] == ["s0", "s2"]

    def test_threshold_one_keeps_near_duplicates(self):
        a = _sample(0, "abcd")
        b = _sample(1, "abce")
        c = _sample(2, "ab cd")  # whitespace-equal to a
        kept = dedup([a, b, c], DedupConfig(threshold=1.0))
        assert [s.id for s in kept] == ["s0", "s1"]

    def test_tie_order_keeps_first_by_provenance(self):
        late = _sample(0, "echo $a;", project="zzz")
        early = _sample(1, "echo $a;", project="aaa")
        kept = dedup([late, early], DedupConfig())
        assert [s.id for s in kept] == ["s1"]

    def test_order_independent_given_tie_order(self):
        rng = random.Random(3)
        samples = [_sample(i, f"echo $a{i} . 'x{i % 3}';") for i in range(12)]
        kept_a = [s.id for s in dedup(list(samples))]
        shuffled = list(samples)
        rng.shuffle(shuffled)
        kept_b = [s.id for s in dedup(shuffled)]
        assert kept_a == kept_b

    def test_monotone_in_threshold(self):
        rng = random.Random(4)
        base = "<?php\n$a = $_GET['k'];\necho $a"
        samples = [_sample(i, base + " . '" + "pad" * rng.randrange(4) + "';\n")
                   for i in range(20)]
        kept_sets = []
        for t in (0.6, 0.75, 0.9, 1.0):
            kept_sets.append({s.id for s in dedup(samples, DedupConfig(threshold=t))})
        for lo, hi in zip(kept_sets, kept_sets[1:]):
            assert lo <= hi

    def test_no_retained_pair_reaches_threshold(self):
        rng = random.Random(5)
        shapes = [
            "<?php\n$v{i} = $_GET['{k}'];\necho $v{i};\n",
            "<?php\n$v{i} = $_POST['{k}'];\necho '<b>' . $v{i} . '</b>';\n",
            "<?php\n$q{i} = \"SELECT * FROM t{i} WHERE k=\" . $z{i};\nrun($q{i});\n",
            "<?php\n$n{i} = 0;\nwhile ($n{i} < {i}) {{\n    $n{i} = $n{i} + 1;\n}}\necho $n{i};\n",
        ]
        samples = []
        for i in range(50):
            shape = rng.choice(shapes)
            samples.append(_sample(i, shape.format(i=i, k=rng.choice("abcdef"))))
        cfg = DedupConfig(threshold=0.9)
        kept = dedup(samples, cfg)
        assert kept, "dedup removed everything"
        for i, x in enumerate(kept):
            for y in kept[i + 1:]:
                assert similarity(x.code, y.code) < cfg.threshold

    def test_deduplicates_within_cwe_partition_only(self):
        a = _sample(0, "<?php\necho $a;\n")
        b = _sample(1, "<?php\necho  $a ;\n")
        b.cwe = "CWE-89"
        kept = dedup([a, b], DedupConfig(threshold=0.9))
        assert [s.id for s in kept] == ["s0", "s1"]

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValueError):
            DedupConfig(threshold=0.0)
        with pytest.raises(ValueError):
            DedupConfig(threshold=1.2)
