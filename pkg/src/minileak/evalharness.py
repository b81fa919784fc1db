"""Score findings against labeled ground truth; run regression corpora."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .ruleflow import Disposition, Finding
from .taxonomy import SensitiveCategory


class UnknownCategoryInLabels(ValueError):
    pass


class CorpusLayoutError(ValueError):
    pass


class MatchPolicy(Enum):
    CATEGORY_PER_FILE = "category-per-file"
    LINE_WINDOW = "line-window"


LINE_WINDOW = 2


@dataclass(frozen=True)
class GroundTruthLabel:
    file: str
    category: SensitiveCategory
    line: Optional[int] = None
    disposition: Optional[Disposition] = None


def load_labels(path: Union[str, Path]) -> list[GroundTruthLabel]:
    """Read a labels.json: array of {file, category, line?, disposition?}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusLayoutError(f"unparseable labels file {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise CorpusLayoutError(f"labels file {path} must hold a JSON array")
    labels = []
    for item in raw:
        try:
            category = SensitiveCategory[item["category"]]
        except KeyError as exc:
            raise UnknownCategoryInLabels(
                f"unknown category in {path}: {item.get('category')!r}"
            ) from exc
        disposition = None
        if item.get("disposition") is not None:
            try:
                disposition = Disposition[item["disposition"]]
            except KeyError as exc:
                raise UnknownCategoryInLabels(
                    f"unknown disposition in {path}: {item['disposition']!r}"
                ) from exc
        labels.append(GroundTruthLabel(item["file"], category, item.get("line"), disposition))
    return labels


@dataclass(frozen=True)
class CategoryMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


def _rates(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if (tp + fp) else 1.0
    recall = tp / (tp + fn) if (tp + fn) else 1.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_category: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, per_category: Optional[dict] = None) -> "Metrics":
        p, r, f1 = _rates(tp, fp, fn)
        return cls(tp, fp, fn, p, r, f1, per_category or {})

    def to_dict(self) -> dict:
        d = {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.per_category:
            d["per_category"] = {
                cat.value: {
                    "tp": m.tp, "fp": m.fp, "fn": m.fn,
                    "precision": m.precision, "recall": m.recall, "f1": m.f1,
                }
                for cat, m in sorted(self.per_category.items(), key=lambda kv: kv[0].value)
            }
        return d


def _label_sort_key(label: GroundTruthLabel):
    return (
        label.file,
        label.category.value,
        label.line if label.line is not None else 0,
        label.disposition.value if label.disposition else "",
    )


def _compatible(label: GroundTruthLabel, finding: Finding, policy: MatchPolicy) -> bool:
    if finding.source.file != label.file or finding.category is not label.category:
        return False
    if label.disposition is not None and finding.disposition is not label.disposition:
        return False
    if policy is MatchPolicy.LINE_WINDOW and label.line is not None:
        return abs(finding.source.line - label.line) <= LINE_WINDOW
    return True


def score(
    findings: list[Finding],
    labels: list[GroundTruthLabel],
    policy: MatchPolicy = MatchPolicy.CATEGORY_PER_FILE,
) -> Metrics:
    """Greedy one-to-one matching of labels to findings.

    Labels and findings are both visited in sorted order; each side matches
    at most once, so the result is permutation-invariant. Dispositions (and
    under the line-window policy, lines) constrain the match only when the
    label states them.
    """
    sorted_labels = sorted(labels, key=_label_sort_key)
    sorted_findings = sorted(
        findings, key=lambda f: (f.source.file, f.source.line, f.category.value, f.id)
    )
    used: set[int] = set()
    matched_pairs: list[tuple[GroundTruthLabel, Finding]] = []
    for label in sorted_labels:
        for idx, finding in enumerate(sorted_findings):
            if idx in used:
                continue
            if _compatible(label, finding, policy):
                used.add(idx)
                matched_pairs.append((label, finding))
                break
    tp = len(matched_pairs)
    fp = len(sorted_findings) - tp
    fn = len(sorted_labels) - tp

    per_category: dict = {}
    cats = {l.category for l in labels} | {f.category for f in findings}
    matched_labels = {id(l) for l, _ in matched_pairs}
    matched_findings = {id(f) for _, f in matched_pairs}
    for cat in cats:
        cat_tp = sum(1 for l, _ in matched_pairs if l.category is cat)
        cat_fp = sum(1 for f in findings if f.category is cat and id(f) not in matched_findings)
        cat_fn = sum(1 for l in labels if l.category is cat and id(l) not in matched_labels)
        p, r, f1 = _rates(cat_tp, cat_fp, cat_fn)
        per_category[cat] = CategoryMetrics(cat_tp, cat_fp, cat_fn, p, r, f1)
    return Metrics.from_counts(tp, fp, fn, per_category)


# ---------------------------------------------------------------------------
# Corpus runner


@dataclass
class EvalConfig:
    detector: str = "rule"
    threshold: float = 0.0
    f1_floor: float = 0.0
    policy: MatchPolicy = MatchPolicy.CATEGORY_PER_FILE
    taxonomy: Optional[object] = None  # Taxonomy; defaults to builtin at run time
    backend: Optional[object] = None  # BackendConfig, for detector=llm/both
    budget_tokens: int = 4096


@dataclass
class CorpusResult:
    per_project: dict  # name -> Metrics
    aggregate: Metrics

    def to_dict(self) -> dict:
        return {
            "projects": {name: m.to_dict() for name, m in sorted(self.per_project.items())},
            "aggregate": self.aggregate.to_dict(),
        }


def run_corpus(corpus_dir: Union[str, Path], config: Optional[EvalConfig] = None) -> CorpusResult:
    """Scan and score every project under `corpus_dir`.

    Layout: one subdirectory per project, each holding the project tree and
    a labels.json beside its app.json. The aggregate is the micro-average
    (tp/fp/fn summed before computing rates).
    """
    from . import pipeline  # local import: pipeline pulls in the detectors

    config = config or EvalConfig()
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise CorpusLayoutError(f"corpus directory not found: {corpus_dir}")
    project_dirs = sorted(p for p in corpus.iterdir() if p.is_dir())
    if not project_dirs:
        raise CorpusLayoutError(f"corpus {corpus_dir} contains no project directories")

    per_project: dict = {}
    total_tp = total_fp = total_fn = 0
    for proj_dir in project_dirs:
        labels_path = proj_dir / "labels.json"
        if not labels_path.is_file():
            raise CorpusLayoutError(f"project {proj_dir.name} has no labels.json")
        labels = load_labels(labels_path)
        outcome = pipeline.scan_project(
            proj_dir,
            detector=config.detector,
            taxonomy=config.taxonomy,
            backend=config.backend,
            budget_tokens=config.budget_tokens,
        )
        findings = [f for f in outcome.findings if f.confidence >= config.threshold]
        metrics = score(findings, labels, config.policy)
        per_project[proj_dir.name] = metrics
        total_tp += metrics.tp
        total_fp += metrics.fp
        total_fn += metrics.fn
    aggregate = Metrics.from_counts(total_tp, total_fp, total_fn)
    return CorpusResult(per_project, aggregate)
