#!/usr/bin/env python3
"""Regenerate the canned LLM reply fixtures for the bundled bazi project.

The mock backend looks up replies by sha256 of the prompt's user text, so
these files must be rebuilt whenever the prompt template, the chunking, or
the fixture sources change:

    python scripts/gen_mock_replies.py

The canned reply reports the six findings a capable model states for this
page (full name, gender, birth date, email, openid, nickname), with line
numbers derived from the fixture text rather than hardcoded.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from minileak.ingest import load_project  # noqa: E402
from minileak.llmdetect import build_prompt  # noqa: E402
from minileak.taxonomy import builtin_taxonomy  # noqa: E402

BUDGET_TOKENS = 4096  # the CLI default; scan --detector both must hit these fixtures


def line_of(text: str, needle: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    raise SystemExit(f"fixture drift: {needle!r} not found")


def bazi_reply(script_text: str, script_path: str) -> str:
    entries = [
        ("FULL_NAME", "var xing = e.detail.value.xing", 0.88,
         "var xing = e.detail.value.xing;"),
        ("GENDER", "var sex = e.detail.value.sex", 0.9,
         "var sex = e.detail.value.sex;"),
        ("NICKNAME", "getApp().globalData.userInfo.nickName", 0.95,
         "var username = getApp().globalData.userInfo.nickName;"),
        ("OPENID", "wechat = getApp().globalData.openid", 0.8,
         "wechat = getApp().globalData.openid;"),
        ("BIRTHDATE", "var birthday = e.detail.value.date", 0.92,
         "var birthday = e.detail.value.date;"),
        ("EMAIL", "var email = e.detail.value.email", 0.9,
         "var email = e.detail.value.email;"),
    ]
    findings = [
        {
            "category": category,
            "file": script_path,
            "line": line_of(script_text, needle),
            "evidence": evidence,
            "disposition": "COLLECTED",
            "confidence": confidence,
        }
        for category, needle, confidence, evidence in entries
    ]
    body = json.dumps(findings, indent=2)
    return (
        "The page collects personal data through its form and global state.\n"
        "Detections:\n\n```json\n" + body + "\n```\n"
    )


def main() -> None:
    replies_dir = REPO / "fixtures" / "replies"
    replies_dir.mkdir(parents=True, exist_ok=True)
    for stale in replies_dir.glob("*.reply.txt"):
        stale.unlink()

    project = load_project(REPO / "fixtures" / "bazi")
    taxonomy = builtin_taxonomy()
    unit = project.pages[0]
    bundles = build_prompt(unit, taxonomy, BUDGET_TOKENS)
    if len(bundles) != 1:
        raise SystemExit(f"expected 1 bundle for the bazi fixture, got {len(bundles)}")
    bundle = bundles[0]
    reply = bazi_reply(unit.script.text, unit.script.path)
    out = replies_dir / f"{bundle.content_hash()}.reply.txt"
    out.write_text(reply, encoding="utf-8")
    print(f"wrote {out.relative_to(REPO)} ({len(reply)} bytes)")


if __name__ == "__main__":
    main()
