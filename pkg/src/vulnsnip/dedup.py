"""Near-duplicate removal via sequence-alignment similarity.

Similarity strips all whitespace and scores 2*LCS(a,b) / (|a|+|b|) over
characters, so reformatted copies of the same snippet score 1.0. The greedy
pass keeps the first sample (in provenance order) of every near-duplicate
group; no retained pair reaches the threshold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

_WS_RE = re.compile(r"\s+")


@dataclass
class DedupConfig:
    threshold: float = 0.90

    def __post_init__(self):
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError("threshold must be in (0, 1]")


def _strip_ws(text: str) -> str:
    return _WS_RE.sub("", text)


def lcs_length(a: str, b: str) -> int:
    """Exact longest-common-subsequence length over characters.

    Row-vectorized DP: per row, candidates c[j] = max(prev[j], prev[j-1]+eq)
    and the row itself is the running maximum of c.
    """
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    codes_a = np.fromiter((ord(ch) for ch in a), dtype=np.int32, count=len(a))
    codes_b = np.fromiter((ord(ch) for ch in b), dtype=np.int32, count=len(b))
    prev = np.zeros(len(codes_b) + 1, dtype=np.int32)
    cur = np.zeros_like(prev)
    for ch in codes_a:
        eq = (codes_b == ch).astype(np.int32)
        cand = np.maximum(prev[1:], prev[:-1] + eq)
        np.maximum.accumulate(cand, out=cand)
        cur[1:] = cand
        prev, cur = cur, prev
    return int(prev[-1])


def similarity(a: str, b: str) -> float:
    """Whitespace-insensitive alignment score in [0, 1]; symmetric."""
    sa = _strip_ws(a)
    sb = _strip_ws(b)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return 2.0 * lcs_length(sa, sb) / (len(sa) + len(sb))


def _tie_key(sample):
    return (sample.project, sample.file, sample.line, sample.id)


def dedup(samples: list, cfg: DedupConfig | None = None) -> list:
    """Greedy near-duplicate filter in (project, file, line, id) order.

    A sample is retained iff its similarity to every previously retained
    sample of the same CWE kind stays below the threshold (deduplication is
    per CWE partition). Output keeps the tie order.
    """
    cfg = cfg or DedupConfig()
    ordered = sorted(samples, key=_tie_key)
    retained = []
    kept_by_kind: dict[str, list[str]] = {}
    for sample in ordered:
        stripped = _strip_ws(sample.code)
        bucket = kept_by_kind.setdefault(sample.cwe, [])
        duplicate = False
        for kept in bucket:
            la, lb = len(stripped), len(kept)
            if la == 0 and lb == 0:
                duplicate = True
                break
            # exact upper bound: similarity can never exceed 2*min/(min+max)
            if 2.0 * min(la, lb) / (la + lb) < cfg.threshold:
                continue
            score = (2.0 * lcs_length(stripped, kept) / (la + lb)) if la and lb else 0.0
            if score >= cfg.threshold:
                duplicate = True
                break
        if not duplicate:
            retained.append(sample)
            bucket.append(stripped)
    return retained
