"""Command-line entry point.

Exit codes follow linter conventions: 0 clean, 1 findings at or above the
threshold (or an eval run under its F1 floor), 2 operational error. Report
bytes go only to the chosen output; diagnostics only to stderr.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import evalharness, llmdetect, pipeline, report
from .ingest import ScanError
from .taxonomy import OverrideParse, Taxonomy, builtin_taxonomy, load_overrides


@dataclass
class CliConfig:
    project: Optional[str] = None
    detector: str = "rule"
    threshold: float = 0.0
    format: str = "text"
    out: Optional[str] = None
    llm_endpoint: Optional[str] = None
    llm_model: str = "gpt-3.5-turbo"
    mock_llm: Optional[str] = None
    taxonomy_path: Optional[str] = None
    deterministic: bool = False
    max_inflight: int = 2
    budget_tokens: int = 4096
    llm_markup: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"--threshold must be in [0,1], got {self.threshold}")
        if self.detector in ("llm", "both") and not (self.llm_endpoint or self.mock_llm):
            raise ValueError(f"--detector {self.detector} needs --llm-endpoint or --mock-llm")


def _add_scan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--project", required=True, help="project root directory")
    p.add_argument("--detector", choices=("rule", "llm", "both"), default="rule")
    p.add_argument("--threshold", type=float, default=0.0, help="confidence floor in [0,1]")
    p.add_argument("--format", choices=("text", "json", "sarif"), default="text")
    p.add_argument("--out", help="write the report here instead of stdout")
    _add_llm_flags(p)
    p.add_argument("--taxonomy", dest="taxonomy_path", help="override file applied to the builtin taxonomy")
    p.add_argument("--deterministic", action="store_true", help="suppress the report timestamp")


def _add_llm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--llm-endpoint", help="chat-completion endpoint URL")
    p.add_argument("--llm-model", default="gpt-3.5-turbo")
    p.add_argument("--mock-llm", help="directory of <sha256>.reply.txt replay fixtures")
    p.add_argument("--max-inflight", type=int, default=2, help="max concurrent LLM calls")
    p.add_argument("--budget-tokens", type=int, default=4096, help="per-bundle prompt budget")
    p.add_argument("--no-llm-markup", action="store_true", help="exclude page markup from prompts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minileak",
        description="Detect collection, storage, and transmission of sensitive user data "
        "in WeChat Mini Program source projects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="scan one project and emit a report")
    _add_scan_flags(scan)

    ev = sub.add_parser("eval", help="score a labeled corpus and enforce an F1 floor")
    ev.add_argument("--corpus", required=True, help="directory of project dirs with labels.json")
    ev.add_argument("--detector", choices=("rule", "llm", "both"), default="rule")
    ev.add_argument("--threshold", type=float, default=0.0)
    ev.add_argument("--f1-floor", type=float, default=0.0)
    ev.add_argument(
        "--policy",
        choices=tuple(p.value for p in evalharness.MatchPolicy),
        default=evalharness.MatchPolicy.CATEGORY_PER_FILE.value,
    )
    ev.add_argument("--out", help="write metrics JSON here instead of stdout")
    ev.add_argument("--taxonomy", dest="taxonomy_path")
    _add_llm_flags(ev)

    tax = sub.add_parser("taxonomy", help="print the effective source/sink taxonomy")
    tax.add_argument("--taxonomy", dest="taxonomy_path")
    tax.add_argument("--out")

    explain = sub.add_parser("explain", help="print a finding's flow path with snippets")
    explain.add_argument("finding_id")
    explain.add_argument("--report", help="a JSON report produced by scan --format json")
    explain.add_argument("--project", help="or re-scan this project with the rule detector")
    explain.add_argument("--taxonomy", dest="taxonomy_path")
    explain.add_argument("--out")
    return parser


def _effective_taxonomy(path: Optional[str]) -> Taxonomy:
    tax = builtin_taxonomy()
    if path:
        tax = load_overrides(path, tax)
    return tax


def _backend_from(args: argparse.Namespace) -> Optional[llmdetect.BackendConfig]:
    if getattr(args, "mock_llm", None):
        return llmdetect.BackendConfig(mock_dir=args.mock_llm, max_inflight=args.max_inflight)
    if getattr(args, "llm_endpoint", None):
        return llmdetect.BackendConfig(
            endpoint=args.llm_endpoint,
            model=args.llm_model,
            max_inflight=args.max_inflight,
        )
    return None


def _write_output(data: bytes, out: Optional[str]) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def _cmd_scan(args: argparse.Namespace) -> int:
    config = CliConfig(
        project=args.project,
        detector=args.detector,
        threshold=args.threshold,
        format=args.format,
        out=args.out,
        llm_endpoint=args.llm_endpoint,
        llm_model=args.llm_model,
        mock_llm=args.mock_llm,
        taxonomy_path=args.taxonomy_path,
        deterministic=args.deterministic,
        max_inflight=args.max_inflight,
        budget_tokens=args.budget_tokens,
        llm_markup=not args.no_llm_markup,
    )
    config.validate()
    tax = _effective_taxonomy(config.taxonomy_path)
    outcome = pipeline.scan_project(
        config.project,
        detector=config.detector,
        taxonomy=tax,
        backend=_backend_from(args),
        budget_tokens=config.budget_tokens,
        include_markup=config.llm_markup,
    )
    created = None if config.deterministic else datetime.now(timezone.utc).isoformat()
    scan_report = pipeline.build_report(outcome, tax.version, config.threshold, created)
    _write_output(report.emit(scan_report, config.format), config.out)
    kept = len(scan_report.findings)
    dropped = len(outcome.findings) - kept
    print(
        f"scan: {kept} finding(s) at threshold {config.threshold} ({dropped} below)",
        file=sys.stderr,
    )
    return 1 if scan_report.findings else 0


def _cmd_eval(args: argparse.Namespace) -> int:
    tax = _effective_taxonomy(args.taxonomy_path)
    config = evalharness.EvalConfig(
        detector=args.detector,
        threshold=args.threshold,
        f1_floor=args.f1_floor,
        policy=evalharness.MatchPolicy(args.policy),
        taxonomy=tax,
        backend=_backend_from(args),
        budget_tokens=args.budget_tokens,
    )
    result = evalharness.run_corpus(args.corpus, config)
    import json

    _write_output((json.dumps(result.to_dict(), indent=2) + "\n").encode(), args.out)
    agg = result.aggregate
    print(
        f"eval: aggregate P={agg.precision:.3f} R={agg.recall:.3f} F1={agg.f1:.3f} "
        f"(floor {args.f1_floor})",
        file=sys.stderr,
    )
    return 0 if agg.f1 >= args.f1_floor else 1


def _cmd_taxonomy(args: argparse.Namespace) -> int:
    tax = _effective_taxonomy(args.taxonomy_path)
    lines = [f"taxonomy version {tax.version}", "sources:"]
    for s in tax.sources:
        gate = " [gated]" if s.requires_context else ""
        lines.append(f"  {s.kind.value:<18} {s.pattern:<44} {s.category.value} ({s.base_confidence}){gate}")
    lines.append("sinks:")
    for k in tax.sinks:
        lines.append(f"  {k.kind.value:<18} {k.pattern:<44} {k.disposition.value}")
    _write_output(("\n".join(lines) + "\n").encode(), args.out)
    return 0


def _cmd_explain(args: argparse.Namespace) -> int:
    if not args.report and not args.project:
        raise ValueError("explain needs --report or --project")
    if args.report:
        scan_report = report.parse_report(Path(args.report).read_bytes())
        findings = scan_report.findings
    else:
        tax = _effective_taxonomy(args.taxonomy_path)
        outcome = pipeline.scan_project(args.project, detector="rule", taxonomy=tax)
        findings = tuple(outcome.findings)
    match = next((f for f in findings if f.id == args.finding_id), None)
    if match is None:
        print(f"no finding with id {args.finding_id}", file=sys.stderr)
        return 2
    lines = [
        f"{match.id}: {match.category.value} {match.disposition.value} "
        f"({match.detector.value}, confidence {match.confidence:.3f})"
    ]
    for i, ev in enumerate(match.flow):
        marker = "source" if i == 0 else ("sink" if i == len(match.flow) - 1 and match.sink else "step")
        lines.append(f"  {marker:<6} {ev.file}:{ev.line}  {ev.snippet}")
    _write_output(("\n".join(lines) + "\n").encode(), args.out)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own usage to stderr
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "scan": _cmd_scan,
        "eval": _cmd_eval,
        "taxonomy": _cmd_taxonomy,
        "explain": _cmd_explain,
    }
    try:
        return handlers[args.command](args)
    except (ScanError, OverrideParse, ValueError, OSError,
            evalharness.CorpusLayoutError, evalharness.UnknownCategoryInLabels) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
