"""Wiring: project loading through detection to a finding list."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import llmdetect, report, ruleflow
from .extract import extract_markup_forms, extract_script_model, tokenize
from .ingest import MiniappProject, load_project, project_hash
from .ruleflow import Finding
from .taxonomy import Taxonomy, builtin_taxonomy


@dataclass
class ScanOutcome:
    project: MiniappProject
    findings: list[Finding] = field(default_factory=list)
    parse_gaps: dict[str, int] = field(default_factory=dict)
    llm_errors: list[str] = field(default_factory=list)


def scan_project(
    root: Union[str, Path],
    detector: str = "rule",
    taxonomy: Optional[Taxonomy] = None,
    backend: Optional[llmdetect.BackendConfig] = None,
    budget_tokens: int = 4096,
    include_markup: bool = True,
) -> ScanOutcome:
    """Scan one project with the requested detector(s) and fuse the results."""
    if detector not in ("rule", "llm", "both"):
        raise ValueError(f"unknown detector mode: {detector}")
    if detector in ("llm", "both") and backend is None:
        raise ValueError("llm detection needs a backend config (endpoint or mock dir)")
    tax = taxonomy or builtin_taxonomy()
    project = load_project(root)
    outcome = ScanOutcome(project)

    rule_findings: list[Finding] = []
    llm_findings: list[Finding] = []
    for unit in project.pages:
        tokens = tokenize(unit.script.text)
        model, gaps = extract_script_model(tokens, unit.script.text)
        if gaps:
            outcome.parse_gaps[unit.script.path] = len(gaps)
        forms = extract_markup_forms(unit.markup.text) if unit.markup else []
        if detector in ("rule", "both"):
            rule_findings.extend(ruleflow.analyze_page(model, forms, tax, unit.script))
        if detector in ("llm", "both"):
            assert backend is not None
            found, errors = llmdetect.detect(
                backend, unit, tax, budget_tokens, include_markup=include_markup
            )
            llm_findings.extend(found)
            outcome.llm_errors.extend(f"{e.chunk_id}: {e.error}" for e in errors)

    if detector == "rule":
        outcome.findings = sorted(rule_findings, key=ruleflow.finding_sort_key)
    elif detector == "llm":
        outcome.findings = sorted(llm_findings, key=ruleflow.finding_sort_key)
    else:
        outcome.findings = report.fuse(rule_findings, llm_findings)
    return outcome


def build_report(
    outcome: ScanOutcome,
    taxonomy_version: int,
    threshold: float,
    created_at: Optional[str] = None,
) -> report.ScanReport:
    findings, _dropped = report.apply_threshold(outcome.findings, threshold)
    root_name = Path(outcome.project.root).name
    return report.ScanReport(
        project_root=root_name,
        project_hash=project_hash(outcome.project),
        taxonomy_version=taxonomy_version,
        threshold=threshold,
        findings=tuple(findings),
        parse_gaps=dict(outcome.parse_gaps),
        llm_errors=tuple(outcome.llm_errors),
        created_at=created_at,
    )
