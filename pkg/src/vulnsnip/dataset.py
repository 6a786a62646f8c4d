"""Sample records, JSONL persistence, dataset statistics, and split protocols.

Two split modes: plain seeded random sampling, and the project-disjoint mode
that partitions source projects across train/val/test and additionally
enforces synthesis provenance -- a synthetic sample may not be trained on if
its host project or its origin sample's project belongs to a later split.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

LABELS = ("good", "bad")
SPLITS = ("train", "val", "test")

# stable serialization order for diffable JSONL
_FIELDS = ("id", "cwe", "code", "label", "project", "file", "line",
           "taint_var", "synthetic", "origin", "split")
_OPTIONAL = ("label", "origin", "split")


class DatasetError(Exception):
    pass


@dataclass
class Sample:
    id: str
    cwe: str                      # "CWE-79" | "CWE-89"
    code: str
    project: str
    file: str
    line: int
    taint_var: str
    synthetic: bool = False
    label: str | None = None      # "good" | "bad" | None for unlabeled
    origin: str | None = None     # raw-sample id for synthetic samples
    split: str | None = None


def _to_record(s: Sample) -> dict:
    record = {}
    for name in _FIELDS:
        value = getattr(s, name)
        if name in _OPTIONAL and value is None:
            continue
        record[name] = value
    return record


def _from_record(obj: dict, lineno: int) -> Sample:
    if not isinstance(obj, dict):
        raise DatasetError(f"line {lineno}: expected an object")
    unknown = set(obj) - set(_FIELDS)
    if unknown:
        raise DatasetError(f"line {lineno}: unknown fields {sorted(unknown)}")
    missing = [f for f in _FIELDS if f not in _OPTIONAL and f not in obj]
    if missing:
        raise DatasetError(f"line {lineno}: missing fields {missing}")
    label = obj.get("label")
    if label is not None and label not in LABELS:
        raise DatasetError(f"line {lineno}: label must be one of {LABELS}, "
                           f"got {label!r}")
    split = obj.get("split")
    if split is not None and split not in SPLITS:
        raise DatasetError(f"line {lineno}: split must be one of {SPLITS}")
    if obj["synthetic"] and obj.get("origin") is None:
        raise DatasetError(f"line {lineno}: synthetic sample without origin")
    if int(obj["line"]) < 1:
        raise DatasetError(f"line {lineno}: sample line must be >= 1")
    return Sample(
        id=str(obj["id"]), cwe=str(obj["cwe"]), code=str(obj["code"]),
        project=str(obj["project"]), file=str(obj["file"]),
        line=int(obj["line"]), taint_var=str(obj["taint_var"]),
        synthetic=bool(obj["synthetic"]), label=label,
        origin=obj.get("origin"), split=split,
    )


def persist(samples: list[Sample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(_to_record(s), ensure_ascii=False) + "\n")


def load(path) -> list[Sample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DatasetError(f"line {lineno}: invalid JSON ({e.msg})") from e
            samples.append(_from_record(obj, lineno))
    return samples


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def _check_ratios(ratios):
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")


def split_random(samples: list[Sample], ratios=(0.8, 0.1, 0.1),
                 seed: int = 0) -> list[Sample]:
    """Seeded shuffle, then contiguous partition; floor sizes with the
    remainder assigned to train. Fewer than 3 samples all go to train."""
    _check_ratios(ratios)
    if len(samples) < 3:
        for s in samples:
            s.split = "train"
        return samples
    order = list(range(len(samples)))
    random.Random(seed).shuffle(order)
    n = len(samples)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    for pos, idx in enumerate(order):
        if pos < n_train:
            samples[idx].split = "train"
        elif pos < n_train + n_val:
            samples[idx].split = "val"
        else:
            samples[idx].split = "test"
    return samples


@dataclass
class SplitResult:
    train: list[Sample] = field(default_factory=list)
    val: list[Sample] = field(default_factory=list)
    test: list[Sample] = field(default_factory=list)
    dropped: int = 0
    project_assignment: dict[str, str] = field(default_factory=dict)

    def all_samples(self) -> list[Sample]:
        return self.train + self.val + self.test


def split_project_disjoint(real: list[Sample], syn: list[Sample],
                           ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitResult:
    """Partition projects (not samples) across splits, then place samples.

    Real samples follow their project. A synthetic sample lands in its host
    project's split but is dropped (and counted) when provenance would leak:
    train admits it only if neither host nor origin project is in val/test;
    val only if neither is in test; synthetic samples are never placed in
    test. Origins that do not resolve to a real sample carry no project
    constraint.
    """
    _check_ratios(ratios)
    rng = random.Random(seed)

    mass: dict[str, int] = {}
    for s in real:
        mass[s.project] = mass.get(s.project, 0) + 1
    for s in syn:
        mass.setdefault(s.project, 0)

    projects = sorted(mass)
    rng.shuffle(projects)
    projects.sort(key=lambda p: -mass[p])  # stable: keeps shuffled tie order

    total = sum(mass.values()) or 1
    targets = [r * total for r in ratios]
    filled = [0.0, 0.0, 0.0]
    assignment: dict[str, str] = {}
    for p in projects:
        deficits = [targets[i] - filled[i] for i in range(3)]
        bucket = max(range(3), key=lambda i: deficits[i])
        assignment[p] = SPLITS[bucket]
        filled[bucket] += mass[p]

    origin_project = {s.id: s.project for s in real}
    result = SplitResult(project_assignment=assignment)

    for s in real:
        s.split = assignment[s.project]
        getattr(result, s.split).append(s)

    rank = {"train": 0, "val": 1, "test": 2}
    for s in syn:
        host_split = assignment.get(s.project)
        origin_split = assignment.get(origin_project.get(s.origin, ""))
        if host_split == "test":
            result.dropped += 1
            continue
        bucket = host_split or "train"
        # provenance: nothing from a later split may feed an earlier one
        max_rank = rank[bucket]
        if origin_split is not None and rank[origin_split] > max_rank:
            result.dropped += 1
            continue
        s.split = bucket
        getattr(result, bucket).append(s)

    if not result.val or not result.test:
        logger.warning("project-disjoint split left val or test empty "
                       "(projects: %d)", len(projects))
    return result


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass
class StatRow:
    cwe: str
    total: int
    vuln: int
    projects: int
    synthetic_fraction: float
    mean_loc: float


@dataclass
class DatasetStats:
    rows: list[StatRow]
    overall: StatRow


def _row(cwe: str, samples: list[Sample]) -> StatRow:
    total = len(samples)
    vuln = sum(1 for s in samples if s.label == "bad")
    projects = len({s.project for s in samples})
    syn = sum(1 for s in samples if s.synthetic)
    loc = [len(s.code.splitlines()) for s in samples]
    return StatRow(
        cwe=cwe, total=total, vuln=vuln, projects=projects,
        synthetic_fraction=(syn / total) if total else 0.0,
        mean_loc=(sum(loc) / total) if total else 0.0,
    )


def stats(samples: list[Sample]) -> DatasetStats:
    by_cwe: dict[str, list[Sample]] = {}
    for s in samples:
        by_cwe.setdefault(s.cwe, []).append(s)
    rows = [_row(cwe, group) for cwe, group in sorted(by_cwe.items())]
    return DatasetStats(rows=rows, overall=_row("Total", samples))


def format_stats(ds: DatasetStats) -> str:
    header = f"{'CWE':<8} {'Total':>7} {'Vuln':>6} {'Projects':>9} {'Syn%':>7} {'MeanLoC':>8}"
    lines = [header, "-" * len(header)]
    for row in ds.rows + [ds.overall]:
        lines.append(
            f"{row.cwe:<8} {row.total:>7} {row.vuln:>6} {row.projects:>9} "
            f"{row.synthetic_fraction * 100:>6.1f}% {row.mean_loc:>8.2f}")
    return "\n".join(lines)


def stats_json(ds: DatasetStats) -> dict:
    def enc(row: StatRow) -> dict:
        return {
            "cwe": row.cwe, "total": row.total, "vuln": row.vuln,
            "projects": row.projects,
            "synthetic_fraction": round(row.synthetic_fraction, 6),
            "mean_loc": round(row.mean_loc, 3),
        }
    return {"per_cwe": [enc(r) for r in ds.rows], "overall": enc(ds.overall)}
