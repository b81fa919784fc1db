#!/usr/bin/env python3
"""Independent re-scorer for analyzer findings against labels.json.

Deliberately self-contained (no package imports, plain dicts only) so it can
cross-check the evaluation harness. Two implementations:

  greedy_rescore     the production matching rule, re-derived from scratch
  exhaustive_rescore enumerates every maximal one-to-one matching and picks
                     the lexicographically-first one (small instances only)

Usage:
  python scripts/rescore.py --labels labels.json --findings report.json [--policy line-window]

The findings file may be a scan report (with a "findings" array) or a bare
JSON array of finding objects.
"""
from __future__ import annotations

import argparse
import json
import sys

LINE_WINDOW = 2


def _norm_finding(f):
    src = f.get("source", f)
    return {
        "file": src.get("file"),
        "line": src.get("line"),
        "category": f.get("category"),
        "disposition": f.get("disposition"),
        "id": f.get("id", ""),
    }


def _label_key(label):
    return (
        label.get("file") or "",
        label.get("category") or "",
        label.get("line") or 0,
        label.get("disposition") or "",
    )


def _finding_key(f):
    return (f["file"] or "", f["line"] or 0, f["category"] or "", f["id"])


def _compatible(label, finding, policy):
    if finding["file"] != label.get("file"):
        return False
    if finding["category"] != label.get("category"):
        return False
    if label.get("disposition") is not None and finding["disposition"] != label["disposition"]:
        return False
    if policy == "line-window" and label.get("line") is not None:
        if finding["line"] is None or abs(finding["line"] - label["line"]) > LINE_WINDOW:
            return False
    return True


def greedy_rescore(labels, findings, policy="category-per-file"):
    """tp/fp/fn via the deterministic greedy matching, re-derived."""
    labels = sorted(labels, key=_label_key)
    findings = sorted((_norm_finding(f) for f in findings), key=_finding_key)
    taken = [False] * len(findings)
    tp = 0
    for label in labels:
        for i, finding in enumerate(findings):
            if taken[i]:
                continue
            if _compatible(label, finding, policy):
                taken[i] = True
                tp += 1
                break
    return {"tp": tp, "fp": len(findings) - tp, "fn": len(labels) - tp}


def exhaustive_rescore(labels, findings, policy="category-per-file"):
    """Enumerate all maximal one-to-one matchings; take the greedy-first one.

    A matching assigns each sorted label a distinct finding index or None;
    it is maximal when no skipped label is still compatible with an unused
    finding. Among the maximal matchings, the lexicographically smallest
    choice sequence (low finding indices before skips) is selected, which
    is exactly the assignment the greedy rule constructs. Exponential: keep
    instances small.
    """
    labels = sorted(labels, key=_label_key)
    findings = sorted((_norm_finding(f) for f in findings), key=_finding_key)
    compat = [
        [i for i, f in enumerate(findings) if _compatible(label, f, policy)]
        for label in labels
    ]

    matchings: list[tuple] = []

    def walk(idx, used, choices):
        if idx == len(labels):
            matchings.append(tuple(choices))
            return
        for i in compat[idx]:
            if i not in used:
                walk(idx + 1, used | {i}, choices + [i])
        walk(idx + 1, used, choices + [None])

    walk(0, frozenset(), [])

    def is_maximal(choice_seq):
        used = {c for c in choice_seq if c is not None}
        for j, c in enumerate(choice_seq):
            if c is None and any(i not in used for i in compat[j]):
                return False
        return True

    maximal = [m for m in matchings if is_maximal(m)]
    if not maximal:
        return {"tp": 0, "fp": len(findings), "fn": len(labels)}
    skip_rank = len(findings)  # None sorts after every real index
    chosen = min(maximal, key=lambda seq: tuple(skip_rank if c is None else c for c in seq))
    tp = sum(1 for c in chosen if c is not None)
    return {"tp": tp, "fp": len(findings) - tp, "fn": len(labels) - tp}


def metrics_from_counts(counts):
    tp, fp, fn = counts["tp"], counts["fp"], counts["fn"]
    precision = tp / (tp + fp) if (tp + fp) else 1.0
    recall = tp / (tp + fn) if (tp + fn) else 1.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return {**counts, "precision": precision, "recall": recall, "f1": f1}


def load_findings(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc.get("findings", [])
    return doc


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--labels", required=True)
    parser.add_argument("--findings", required=True)
    parser.add_argument("--policy", choices=("category-per-file", "line-window"),
                        default="category-per-file")
    args = parser.parse_args(argv)
    with open(args.labels, encoding="utf-8") as fh:
        labels = json.load(fh)
    findings = load_findings(args.findings)
    counts = greedy_rescore(labels, findings, args.policy)
    print(json.dumps(metrics_from_counts(counts), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
