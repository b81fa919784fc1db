"""LLM-based detector: prompt construction, backend invocation, reply parsing.

The wire contract is a plain chat-completion POST; the backend is pluggable
so CI runs against a deterministic replay directory instead of the network.
Replies are parsed defensively: models wrap JSON in prose, fences, and
single quotes, and cite lines that drift or do not exist.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import requests

from .extract import extract_script_model, tokenize
from .ingest import PageUnit
from .ruleflow import Detector, Evidence, Finding, finding_sort_key, make_finding_id
from .taxonomy import Disposition, SensitiveCategory, Taxonomy

API_KEY_ENV = "MINILEAK_API_KEY"
PROMPT_VERSION = "1"

_SYSTEM_TEMPLATE = """You are a privacy auditor for WeChat Mini Program source code (prompt v{version}).
Find every place the code collects, stores, or transmits sensitive user data.

Sensitive categories (use these exact names):
{categories}

Dispositions (use these exact names):
{dispositions}

Respond with ONLY a JSON array, one object per detection:
[{{"category": "...", "file": "<file path>", "line": <1-based line number from the numbered listing>, "evidence": "<the offending code>", "disposition": "...", "confidence": <0.0 to 1.0>}}]
Use the line numbers shown at the start of each listing line. Return [] if nothing sensitive is found."""


def system_text(taxonomy: Taxonomy) -> str:
    return _SYSTEM_TEMPLATE.format(
        version=PROMPT_VERSION,
        categories=", ".join(c.value for c in SensitiveCategory),
        dispositions=", ".join(d.value for d in Disposition),
    )


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    file: str
    start_line: int
    end_line: int
    text: str  # line-numbered code

    def header(self) -> str:
        return f"=== {self.file} lines {self.start_line}-{self.end_line} ==="


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    chunks: tuple[Chunk, ...]
    token_estimate: int

    @property
    def user_text(self) -> str:
        return "\n".join(f"{c.header()}\n{c.text}" for c in self.chunks)

    def content_hash(self) -> str:
        return hashlib.sha256(self.user_text.encode("utf-8")).hexdigest()

    def line_range(self, file: str) -> Optional[tuple[int, int]]:
        for c in self.chunks:
            if c.file == file:
                return (c.start_line, c.end_line)
        return None


def number_lines(lines: list[str], start: int) -> str:
    return "\n".join(f"{start + i:5d} | {line}" for i, line in enumerate(lines))


_NUMBER_PREFIX_RE = re.compile(r"^\s*\d+ \| ", re.MULTILINE)


def strip_line_numbers(numbered: str) -> str:
    return _NUMBER_PREFIX_RE.sub("", numbered)


def _estimate(system: str, chunks: list[Chunk]) -> int:
    total = len(system) + sum(len(c.header()) + 1 + len(c.text) for c in chunks)
    return math.ceil(total / 4)


def build_prompt(
    unit: PageUnit,
    taxonomy: Taxonomy,
    budget_tokens: int,
    include_markup: bool = True,
) -> list[PromptBundle]:
    """Split a page unit into prompt bundles that fit the token budget.

    The script is cut at function boundaries when they exist, with an
    unconditional hard split by lines as the fallback, so chunk line ranges
    always partition the file. Markup rides along when it fits.
    """
    if budget_tokens < 512:
        raise ValueError("budget_tokens must be at least 512")
    system = system_text(taxonomy)
    segments = _script_segments(unit, budget_tokens, system)
    bundles: list[PromptBundle] = []
    pending: list[Chunk] = []
    for chunk in segments:
        if pending and _estimate(system, pending + [chunk]) > budget_tokens:
            bundles.append(PromptBundle(system, tuple(pending), _estimate(system, pending)))
            pending = []
        pending.append(chunk)
    if include_markup and unit.markup is not None and unit.markup.text:
        m_lines = unit.markup.text.splitlines()
        m_chunk = Chunk(
            f"{unit.markup.path}:1",
            unit.markup.path,
            1,
            len(m_lines),
            number_lines(m_lines, 1),
        )
        if pending and _estimate(system, pending + [m_chunk]) <= budget_tokens:
            pending.append(m_chunk)
        elif _estimate(system, [m_chunk]) <= budget_tokens:
            if pending:
                bundles.append(PromptBundle(system, tuple(pending), _estimate(system, pending)))
            pending = [m_chunk]
        # Markup bigger than a whole budget is dropped; the script chunks
        # still partition the script.
    if pending:
        bundles.append(PromptBundle(system, tuple(pending), _estimate(system, pending)))
    return bundles


def _script_segments(unit: PageUnit, budget_tokens: int, system: str) -> list[Chunk]:
    text = unit.script.text
    if not text:
        return []
    lines = text.splitlines()
    if not lines:
        return []
    # Function start lines give the preferred cut points.
    model, _ = extract_script_model(tokenize(text), text)
    cut_lines = sorted(
        {
            fn.span.line
            for reg in model.registrations
            for fn in reg.functions.values()
            if fn.span.line > 1
        }
    )
    boundaries = [1] + [ln for ln in cut_lines if ln <= len(lines)] + [len(lines) + 1]
    boundaries = sorted(set(boundaries))

    # Char budget available for one chunk's numbered text.
    overhead = len(system) + 80
    max_chars = max(budget_tokens * 4 - overhead, 400)

    chunks: list[Chunk] = []
    start = 1
    for next_boundary in boundaries[1:]:
        if next_boundary <= start:
            continue
        segment = lines[start - 1 : next_boundary - 1]
        numbered = number_lines(segment, start)
        if len(numbered) <= max_chars:
            chunks.append(
                Chunk(f"{unit.script.path}:{start}", unit.script.path, start, next_boundary - 1, numbered)
            )
        else:
            chunks.extend(_hard_split(unit.script.path, segment, start, max_chars))
        start = next_boundary
    return _coalesce(chunks, max_chars, unit.script.path)


def _hard_split(path: str, segment: list[str], start: int, max_chars: int) -> list[Chunk]:
    out: list[Chunk] = []
    i = 0
    while i < len(segment):
        j = i
        size = 0
        while j < len(segment):
            line_cost = len(segment[j]) + 9  # number prefix and newline
            if size + line_cost > max_chars and j > i:
                break
            size += line_cost
            j += 1
        chunk_lines = segment[i:j]
        out.append(
            Chunk(
                f"{path}:{start + i}",
                path,
                start + i,
                start + j - 1,
                number_lines(chunk_lines, start + i),
            )
        )
        i = j
    return out


def _coalesce(chunks: list[Chunk], max_chars: int, path: str) -> list[Chunk]:
    """Merge adjacent small chunks so tiny functions do not fragment."""
    out: list[Chunk] = []
    for chunk in chunks:
        if out and len(out[-1].text) + len(chunk.text) + 1 <= max_chars:
            prev = out[-1]
            out[-1] = Chunk(
                prev.chunk_id,
                path,
                prev.start_line,
                chunk.end_line,
                prev.text + "\n" + chunk.text,
            )
        else:
            out.append(chunk)
    return out


# ---------------------------------------------------------------------------
# Backends


class BackendError(Exception):
    pass


class BackendUnreachable(BackendError):
    pass


class AuthFailed(BackendError):
    pass


class BudgetExceeded(BackendError):
    pass


@dataclass
class BackendConfig:
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 1024
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_base_s: float = 0.5
    max_inflight: int = 2
    context_tokens: int = 16384
    mock_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class ParseFailure:
    reason: str
    raw: str


@dataclass
class LlmReply:
    raw_text: str
    parsed: Union[list[Finding], ParseFailure]
    usage: Optional[dict] = None
    dropped_lines: int = 0


PostFn = Callable[[str, dict, dict, float], tuple[int, str]]


def _requests_post(url: str, headers: dict, payload: dict, timeout: float) -> tuple[int, str]:
    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return resp.status_code, resp.text


_RETRYABLE_STATUS = frozenset((429, 500, 502, 503, 504))


def invoke(
    backend: BackendConfig,
    bundle: PromptBundle,
    post: Optional[PostFn] = None,
    sleeper: Callable[[float], None] = time.sleep,
    env: Optional[dict] = None,
) -> LlmReply:
    """Send one bundle to the backend and parse the reply.

    Mock backends replay `<sha256-of-chunk-content>.reply.txt` fixtures.
    Live calls retry transport errors, 429 and 5xx with exponential backoff;
    the raw reply text is always preserved verbatim.
    """
    if bundle.token_estimate > backend.context_tokens:
        raise BudgetExceeded(
            f"prompt of ~{bundle.token_estimate} tokens exceeds context of {backend.context_tokens}"
        )
    if backend.mock_dir is not None:
        raw = _mock_reply(backend.mock_dir, bundle)
        parsed, dropped = parse_reply(raw, bundle)
        return LlmReply(raw, parsed, usage=None, dropped_lines=dropped)

    environ = env if env is not None else os.environ
    api_key = environ.get(API_KEY_ENV, "")
    if not api_key:
        raise AuthFailed(f"no credential in ${API_KEY_ENV}; refusing to call {backend.endpoint}")
    payload = {
        "model": backend.model,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": bundle.user_text},
        ],
        "temperature": backend.temperature,
        "max_tokens": backend.max_output_tokens,
    }
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
    do_post = post or _requests_post

    last_error = "no attempt made"
    for attempt in range(backend.max_attempts):
        try:
            status, body = do_post(backend.endpoint, headers, payload, backend.timeout_s)
        except Exception as exc:  # transport failure: retryable
            last_error = f"transport error: {exc}"
            status = None
            body = ""
        if status == 200:
            raw, usage = _completion_text(body)
            parsed, dropped = parse_reply(raw, bundle)
            return LlmReply(raw, parsed, usage=usage, dropped_lines=dropped)
        if status in (401, 403):
            raise AuthFailed(f"backend rejected credential (HTTP {status})")
        if status is not None:
            last_error = f"HTTP {status}"
            if status not in _RETRYABLE_STATUS:
                raise BackendUnreachable(f"backend error without retry: {last_error}")
        if attempt + 1 < backend.max_attempts:
            sleeper(backend.backoff_base_s * (2 ** attempt))
    raise BackendUnreachable(f"backend unreachable after {backend.max_attempts} attempts: {last_error}")


def _mock_reply(mock_dir: str, bundle: PromptBundle) -> str:
    path = Path(mock_dir) / f"{bundle.content_hash()}.reply.txt"
    if not path.is_file():
        raise BackendUnreachable(f"no mock reply fixture: {path}")
    return path.read_text(encoding="utf-8")


def _completion_text(body: str) -> tuple[str, Optional[dict]]:
    try:
        doc = json.loads(body)
        return doc["choices"][0]["message"]["content"], doc.get("usage")
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        # Non-conforming 200 body: audit the raw text as-is.
        return body, None


# ---------------------------------------------------------------------------
# Reply parsing


def parse_reply(
    raw_text: str, bundle: Optional[PromptBundle] = None
) -> tuple[Union[list[Finding], ParseFailure], int]:
    """Decode findings from a model reply.

    Strict pass first (first JSON array in the text), then a lenient pass
    that strips code fences, swaps single quotes, and drops trailing commas.
    Returns (findings-or-failure, count of findings dropped for citing lines
    outside the prompt).
    """
    items = _find_array(raw_text)
    if items is None:
        items = _find_array(_leniently_repair(raw_text))
    if items is None:
        return ParseFailure("no structured finding array in reply", raw_text), 0

    findings: list[Finding] = []
    dropped = 0
    for item in items:
        if not isinstance(item, dict):
            continue
        finding = _item_to_finding(item, bundle)
        if finding is None:
            dropped += 1
            continue
        findings.append(finding)
    findings.sort(key=finding_sort_key)
    return findings, dropped


def _find_array(text: str) -> Optional[list]:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\[", text):
        try:
            value, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    return None


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _leniently_repair(text: str) -> str:
    m = _FENCE_RE.search(text)
    if m:
        text = m.group(1)
    repaired = text.replace("'", '"')
    repaired = re.sub(r",\s*([\]}])", r"\1", repaired)
    return repaired


def _item_to_finding(item: dict, bundle: Optional[PromptBundle]) -> Optional[Finding]:
    note = None
    raw_category = str(item.get("category", "")).strip()
    try:
        category = SensitiveCategory[raw_category.upper().replace(" ", "_").replace("-", "_")]
    except KeyError:
        category = SensitiveCategory.OTHER_PII
        note = f"unknown category {raw_category!r}"

    raw_disposition = str(item.get("disposition", "")).strip()
    try:
        disposition = Disposition[raw_disposition.upper().replace(" ", "_").replace("-", "_")]
    except KeyError:
        disposition = Disposition.COLLECTED

    try:
        line = int(item.get("line", 0))
    except (TypeError, ValueError):
        return None
    if line < 1:
        return None

    file = str(item.get("file", "")).strip()
    snippet = str(item.get("evidence", "")).strip()[:160]
    if bundle is not None:
        resolved = _resolve_cited_line(bundle, file, line)
        if resolved is None:
            return None  # outside the prompt: dropped and counted
        file, snippet = resolved

    try:
        confidence = float(item.get("confidence", 0.7))
    except (TypeError, ValueError):
        confidence = 0.7
    confidence = min(max(confidence, 0.0), 1.0)

    ev = Evidence(file, line, snippet)
    sink = ev if disposition is not Disposition.COLLECTED else None
    return Finding(
        id=make_finding_id(file, category, line, disposition, Detector.LLM),
        category=category,
        source=ev,
        sink=sink,
        flow=(ev,),
        disposition=disposition,
        confidence=confidence,
        detector=Detector.LLM,
        note=note,
    )


def _resolve_cited_line(
    bundle: PromptBundle, file: str, line: int
) -> Optional[tuple[str, str]]:
    for chunk in bundle.chunks:
        if file and chunk.file != file:
            continue
        if chunk.start_line <= line <= chunk.end_line:
            plain = strip_line_numbers(chunk.text).splitlines()
            text = plain[line - chunk.start_line].strip()[:160]
            return chunk.file, text
    return None


# ---------------------------------------------------------------------------
# Detection orchestration


@dataclass(frozen=True)
class BundleError:
    chunk_id: str
    error: str


def detect(
    backend: BackendConfig,
    unit: PageUnit,
    taxonomy: Taxonomy,
    budget_tokens: int,
    include_markup: bool = True,
    post: Optional[PostFn] = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> tuple[list[Finding], list[BundleError]]:
    """build_prompt -> invoke -> parse for every bundle of a page unit.

    Bundle failures are recorded, never raised: partial results win over
    none. Finding order is canonical regardless of completion order.
    """
    bundles = build_prompt(unit, taxonomy, budget_tokens, include_markup=include_markup)
    if not bundles:
        return [], []

    def run(bundle: PromptBundle) -> Union[LlmReply, BundleError]:
        try:
            return invoke(backend, bundle, post=post, sleeper=sleeper)
        except BackendError as exc:
            return BundleError(bundle.chunks[0].chunk_id, f"{exc.__class__.__name__}: {exc}")

    workers = max(1, backend.max_inflight)
    if workers > 1 and len(bundles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, bundles))
    else:
        results = [run(b) for b in bundles]

    findings: list[Finding] = []
    errors: list[BundleError] = []
    for bundle, result in zip(bundles, results):
        if isinstance(result, BundleError):
            errors.append(result)
            continue
        if isinstance(result.parsed, ParseFailure):
            errors.append(BundleError(bundle.chunks[0].chunk_id, f"ParseFailure: {result.parsed.reason}"))
            continue
        findings.extend(result.parsed)
    deduped: dict[str, Finding] = {}
    for f in findings:
        if f.id not in deduped or f.confidence > deduped[f.id].confidence:
            deduped[f.id] = f
    return sorted(deduped.values(), key=finding_sort_key), errors
