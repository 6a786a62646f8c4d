"""End-to-end snippet extraction: parse -> sinks -> slices -> normalization.

Works per source file; a file that fails to parse is reported as skipped and
never aborts a run. Function bodies are analyzed as globalized top-level
units so function code and global code share one representation. Byte spans
survive globalization, so sample line numbers always point into the original
file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Sample
from .normalize import NormalizeConfig, normalize
from .phpast import ParseError, parse
from .sinks import DEFAULT_RULES, SinkKind, SinkRules, find_sinks, taint_candidates
from .slicing import (SliceError, SnippetOrigin, backward_slice, globalize)


@dataclass
class SourceFile:
    """One analyzable input: raw text plus per-project provenance."""
    path: str
    text: str
    project: str

    def __post_init__(self):
        if not self.path or not self.project:
            raise ValueError("SourceFile requires a non-empty path and project")
        if "<?php" not in self.text:
            raise ValueError(f"{self.path}: no <?php open tag")


@dataclass
class ExtractOutcome:
    samples: list[Sample] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    discarded: int = 0  # candidates whose snippet broke the single-sink invariant


def php_files(root: Path) -> list[Path]:
    return sorted(p for p in Path(root).rglob("*.php") if p.is_file())


def project_of(root: Path, path: Path, override: str | None = None) -> str:
    """Project identity: an explicit override, the first directory component
    under the scan root, or the root's own name for flat layouts."""
    if override:
        return override
    rel = path.relative_to(root)
    if len(rel.parts) > 1:
        return rel.parts[0]
    return Path(root).name


def extract_from_source(source: SourceFile, kind: SinkKind,
                        rules: SinkRules = DEFAULT_RULES,
                        normalize_cfg: NormalizeConfig | None = None,
                        ) -> tuple[list[Sample], int]:
    """All normalized single-sink samples of one source file.

    Returns (samples, discarded). Raises ParseError for unparseable input;
    the directory driver maps that to a skip.
    """
    text, project, file = source.text, source.project, source.path
    program = parse(text)
    units: list[tuple[object, str | None]] = [(program, None)]
    for stmt in program.children:
        if stmt.kind == "FunctionDecl":
            units.append((globalize(stmt), stmt.name))

    samples: list[Sample] = []
    discarded = 0
    used_ids: dict[str, int] = {}
    for unit, fn_name in units:
        for site in find_sinks(unit, kind, rules):
            line = text.count("\n", 0, site.span[0]) + 1
            for cand in taint_candidates(site):
                origin = SnippetOrigin(project=project, file=file,
                                       span=site.span)
                try:
                    snippet = backward_slice(unit, cand, rules, origin=origin,
                                             from_function=fn_name)
                    snippet = normalize(snippet, normalize_cfg)
                except SliceError:
                    discarded += 1
                    continue
                base_id = f"{project}/{file}:{line}:{cand.var}"
                n = used_ids.get(base_id, 0)
                used_ids[base_id] = n + 1
                sample_id = base_id if n == 0 else f"{base_id}#{n}"
                samples.append(Sample(
                    id=sample_id, cwe=kind.value, code=snippet.code,
                    project=project, file=file, line=line,
                    taint_var=snippet.taint_var, synthetic=False,
                ))
    return samples, discarded


def extract_dir(root: Path, kind: SinkKind, *,
                rules: SinkRules = DEFAULT_RULES,
                normalize_cfg: NormalizeConfig | None = None,
                project: str | None = None) -> ExtractOutcome:
    """Extract samples from every .php file under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"scan root {root} is not a directory")
    outcome = ExtractOutcome()
    for path in php_files(root):
        rel = str(path.relative_to(root))
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            outcome.skipped.append((rel, f"unreadable: {e}"))
            continue
        if "<?php" not in text:
            outcome.skipped.append((rel, "no <?php tag"))
            continue
        source = SourceFile(path=rel, text=text,
                            project=project_of(root, path, project))
        try:
            samples, discarded = extract_from_source(
                source, kind, rules=rules, normalize_cfg=normalize_cfg)
        except ParseError as e:
            outcome.skipped.append((rel, f"{e.kind}: {e.message}"))
            continue
        outcome.samples.extend(samples)
        outcome.discarded += discarded
    return outcome


def apply_labels(samples: list[Sample], labels: dict[str, str]) -> int:
    """Attach labels by sample id; returns how many samples got one."""
    hit = 0
    for s in samples:
        if s.id in labels:
            s.label = labels[s.id]
            hit += 1
    return hit


def load_labels(path: Path) -> dict[str, str]:
    """Labels file: one ``id<TAB>label`` per line, ``#`` comments allowed."""
    labels: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'id<TAB>label'")
        sample_id, _, label = line.rpartition("\t")
        label = label.strip()
        if label not in ("good", "bad"):
            raise ValueError(f"{path}:{lineno}: label must be good or bad")
        labels[sample_id] = label
    return labels
