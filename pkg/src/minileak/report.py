"""Fuse detector outputs, apply confidence thresholds, emit reports."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .ruleflow import (
    Detector,
    Disposition,
    Evidence,
    Finding,
    disposition_rank,
    finding_sort_key,
    make_finding_id,
)
from .taxonomy import SensitiveCategory

SCHEMA_VERSION = "1"
TOOL_NAME = "minileak"
TOOL_VERSION = "0.1.0"

MERGE_LINE_WINDOW = 2

_SEVERITY_LABELS = ("INFO", "LOW", "MEDIUM", "HIGH", "CRITICAL")
_SARIF_LEVELS = ("note", "note", "warning", "error", "error")


def severity(disposition: Disposition) -> str:
    return _SEVERITY_LABELS[disposition_rank(disposition)]


@dataclass
class ScanReport:
    project_root: str  # basename of the scanned root
    project_hash: str
    taxonomy_version: int
    threshold: float
    findings: tuple[Finding, ...]
    parse_gaps: dict[str, int]
    llm_errors: tuple[str, ...] = ()
    created_at: Optional[str] = None  # omitted under --deterministic


def fuse(rule: list[Finding], llm: list[Finding]) -> list[Finding]:
    """Merge corroborating findings across the two detectors.

    A RULE and an LLM finding agreeing on (file, category, line within +-2)
    collapse into one FUSED finding with noisy-or confidence; everything
    else passes through unchanged. Greedy over canonically sorted inputs, so
    the pairing is deterministic.
    """
    left = sorted(rule, key=finding_sort_key)
    right = sorted(llm, key=finding_sort_key)
    used: set[int] = set()
    out: list[Finding] = []
    for fa in left:
        partner_idx = None
        if fa.detector in (Detector.RULE, Detector.LLM):
            for idx, fb in enumerate(right):
                if idx in used or fb.detector not in (Detector.RULE, Detector.LLM):
                    continue
                if fb.detector is fa.detector:
                    continue
                if fb.source.file != fa.source.file or fb.category is not fa.category:
                    continue
                if abs(fb.source.line - fa.source.line) <= MERGE_LINE_WINDOW:
                    partner_idx = idx
                    break
        if partner_idx is None:
            out.append(fa)
            continue
        used.add(partner_idx)
        out.append(_merge(fa, right[partner_idx]))
    out.extend(fb for idx, fb in enumerate(right) if idx not in used)
    return sorted(out, key=finding_sort_key)


def _merge(a: Finding, b: Finding) -> Finding:
    rule_side = a if a.detector is Detector.RULE else b
    llm_side = b if rule_side is a else a
    confidence = 1.0 - (1.0 - a.confidence) * (1.0 - b.confidence)
    return Finding(
        id=make_finding_id(
            rule_side.source.file,
            rule_side.category,
            rule_side.source.line,
            rule_side.disposition,
            Detector.FUSED,
        ),
        category=rule_side.category,
        source=rule_side.source,
        sink=rule_side.sink,
        flow=rule_side.flow,
        disposition=rule_side.disposition,
        confidence=confidence,
        detector=Detector.FUSED,
        corroborated=True,
        note=rule_side.note or llm_side.note,
    )


def apply_threshold(findings: list[Finding], theta: float) -> tuple[list[Finding], int]:
    """Keep findings with confidence >= theta; also report how many fell."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"threshold out of range: {theta}")
    kept = [f for f in findings if f.confidence >= theta]
    return kept, len(findings) - len(kept)


# ---------------------------------------------------------------------------
# Serialization


def _evidence_dict(ev: Evidence) -> dict:
    return {"file": ev.file, "line": ev.line, "snippet": ev.snippet}


def _finding_dict(f: Finding) -> dict:
    d = {
        "id": f.id,
        "category": f.category.value,
        "detector": f.detector.value,
        "disposition": f.disposition.value,
        "confidence": f.confidence,
        "source": _evidence_dict(f.source),
    }
    if f.sink is not None:
        d["sink"] = _evidence_dict(f.sink)
    d["flow"] = [_evidence_dict(e) for e in f.flow]
    d["corroborated"] = f.corroborated
    if f.note is not None:
        d["note"] = f.note
    return d


def _evidence_from(d: dict) -> Evidence:
    return Evidence(d["file"], d["line"], d["snippet"])


def _finding_from(d: dict) -> Finding:
    return Finding(
        id=d["id"],
        category=SensitiveCategory[d["category"]],
        source=_evidence_from(d["source"]),
        sink=_evidence_from(d["sink"]) if "sink" in d else None,
        flow=tuple(_evidence_from(e) for e in d.get("flow", [])),
        disposition=Disposition[d["disposition"]],
        confidence=d["confidence"],
        detector=Detector[d["detector"]],
        corroborated=d.get("corroborated", False),
        note=d.get("note"),
    )


def report_to_dict(report: ScanReport) -> dict:
    d = {
        "schema_version": SCHEMA_VERSION,
        "project": {"root": report.project_root, "hash": report.project_hash},
        "taxonomy_version": report.taxonomy_version,
        "threshold": report.threshold,
        "findings": [_finding_dict(f) for f in report.findings],
        "parse_gaps": {k: report.parse_gaps[k] for k in sorted(report.parse_gaps)},
        "llm_errors": list(report.llm_errors),
    }
    if report.created_at is not None:
        d["created_at"] = report.created_at
    return d


def parse_report(data: bytes) -> ScanReport:
    d = json.loads(data.decode("utf-8"))
    return ScanReport(
        project_root=d["project"]["root"],
        project_hash=d["project"]["hash"],
        taxonomy_version=d["taxonomy_version"],
        threshold=d["threshold"],
        findings=tuple(_finding_from(f) for f in d["findings"]),
        parse_gaps=dict(d["parse_gaps"]),
        llm_errors=tuple(d["llm_errors"]),
        created_at=d.get("created_at"),
    )


def emit(report: ScanReport, fmt: str = "json") -> bytes:
    """Serialize the report as json, sarif, or text. Deterministic given a
    report without a timestamp."""
    if fmt == "json":
        return (json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "sarif":
        return (json.dumps(_sarif_dict(report), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "text":
        return _text_report(report).encode("utf-8")
    raise ValueError(f"unknown report format: {fmt}")


def _sarif_dict(report: ScanReport) -> dict:
    rule_ids = sorted({f.category.value for f in report.findings})
    results = []
    for f in sorted(report.findings, key=finding_sort_key):
        results.append(
            {
                "ruleId": f.category.value,
                "level": _SARIF_LEVELS[disposition_rank(f.disposition)],
                "message": {
                    "text": f"{f.category.value} {f.disposition.value.lower()} ({f.detector.value.lower()}): {f.source.snippet}"
                },
                "locations": [
                    {
                        "physicalLocation": {
                            "artifactLocation": {"uri": f.source.file},
                            "region": {"startLine": f.source.line},
                        }
                    }
                ],
                "partialFingerprints": {"findingId": f.id},
                "properties": {
                    "confidence": f.confidence,
                    "disposition": f.disposition.value,
                    "corroborated": f.corroborated,
                },
            }
        )
    return {
        "version": "2.1.0",
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": TOOL_NAME,
                        "version": TOOL_VERSION,
                        "rules": [{"id": rid} for rid in rule_ids],
                    }
                },
                "results": results,
            }
        ],
    }


def _text_report(report: ScanReport) -> str:
    lines = [
        f"{TOOL_NAME} scan of {report.project_root} ({report.project_hash})"
        f" threshold={report.threshold} findings={len(report.findings)}"
    ]
    for f in sorted(report.findings, key=finding_sort_key):
        lines.append(
            f"{severity(f.disposition):<8} {f.category.value:<12} "
            f"{f.source.file}:{f.source.line} {f.disposition.value} "
            f"({f.confidence:.3f}) - {f.source.snippet}"
        )
    if report.parse_gaps:
        lines.append("parse gaps: " + ", ".join(f"{k}={v}" for k, v in sorted(report.parse_gaps.items())))
    for err in report.llm_errors:
        lines.append(f"llm error: {err}")
    return "\n".join(lines) + "\n"
