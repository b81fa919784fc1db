"""Load a mini-program project tree and pair page scripts with their assets."""
from __future__ import annotations

import hashlib
import json
import posixpath
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

DEFAULT_MAX_FILE_BYTES = 2 * 1024 * 1024


class ScanError(Exception):
    """Fatal, user-facing scan errors."""


class RootNotFound(ScanError):
    pass


class AppConfigMissing(ScanError):
    pass


class FileKind(Enum):
    SCRIPT = "SCRIPT"
    MARKUP = "MARKUP"
    CONFIG = "CONFIG"
    STYLE = "STYLE"
    OTHER = "OTHER"


_EXTENSION_KINDS = {
    ".js": FileKind.SCRIPT,
    ".wxs": FileKind.SCRIPT,
    ".wxml": FileKind.MARKUP,
    ".json": FileKind.CONFIG,
    ".wxss": FileKind.STYLE,
}


def classify_file(path: str) -> FileKind:
    """File kind from the extension alone; unknown extensions are OTHER."""
    ext = posixpath.splitext(path)[1].lower()
    return _EXTENSION_KINDS.get(ext, FileKind.OTHER)


@dataclass(frozen=True)
class SourceFile:
    path: str  # relative, normalized, posix separators
    kind: FileKind
    text: str
    line_starts: tuple[int, ...]

    def line_of(self, offset: int) -> int:
        """1-based line containing the char offset (bisect over line starts)."""
        import bisect

        return bisect.bisect_right(self.line_starts, offset)

    def line_text(self, line: int) -> str:
        start = self.line_starts[line - 1]
        end = self.line_starts[line] - 1 if line < len(self.line_starts) else len(self.text)
        return self.text[start:end].rstrip("\r")


def _line_starts(text: str) -> tuple[int, ...]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return tuple(starts)


@dataclass(frozen=True)
class SkippedFile:
    path: str
    reason: str


@dataclass(frozen=True)
class AppConfig:
    pages: tuple[str, ...]
    raw: dict


@dataclass(frozen=True)
class PageUnit:
    page_path: str
    script: SourceFile
    markup: Optional[SourceFile] = None
    page_config: Optional[SourceFile] = None


@dataclass
class MiniappProject:
    root: str
    app_config: AppConfig
    files: list[SourceFile] = field(default_factory=list)
    pages: list[PageUnit] = field(default_factory=list)
    missing_pages: list[str] = field(default_factory=list)
    skipped: list[SkippedFile] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Deterministic serialization, used for idempotence checks."""
        return {
            "root": posixpath.basename(self.root.rstrip("/")) or self.root,
            "pages": [
                {
                    "page_path": u.page_path,
                    "script": u.script.path,
                    "markup": u.markup.path if u.markup else None,
                    "page_config": u.page_config.path if u.page_config else None,
                }
                for u in self.pages
            ],
            "files": [{"path": f.path, "kind": f.kind.value, "sha256": _sha256(f.text)} for f in self.files],
            "missing_pages": list(self.missing_pages),
            "skipped": [{"path": s.path, "reason": s.reason} for s in self.skipped],
        }


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def normalize_rel(path: str) -> Optional[str]:
    """Normalize a project-relative path; None if it would escape the root."""
    norm = posixpath.normpath(path.replace("\\", "/"))
    if norm.startswith("/") or norm == ".." or norm.startswith("../") or norm == ".":
        return None
    return norm


def load_project(
    root_dir: Union[str, Path], max_file_bytes: int = DEFAULT_MAX_FILE_BYTES
) -> MiniappProject:
    """Load and classify every file under `root_dir`.

    Individual unreadable, binary, or oversized files are recorded in
    `skipped` and never abort the scan. A missing root or app config is
    fatal.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise RootNotFound(f"project root not found: {root_dir}")
    root = root.resolve()

    files: list[SourceFile] = []
    skipped: list[SkippedFile] = []
    paths = sorted(
        p for p in root.rglob("*")
        if p.is_file() and not any(part.startswith(".") for part in p.relative_to(root).parts)
    )
    for p in paths:
        rel = p.relative_to(root).as_posix()
        try:
            size = p.stat().st_size
            if size > max_file_bytes:
                skipped.append(SkippedFile(rel, f"oversized ({size} bytes)"))
                continue
            text = p.read_bytes().decode("utf-8")
        except UnicodeDecodeError:
            skipped.append(SkippedFile(rel, "not valid UTF-8"))
            continue
        except OSError as exc:
            skipped.append(SkippedFile(rel, f"unreadable: {exc.__class__.__name__}"))
            continue
        files.append(SourceFile(rel, classify_file(rel), text, _line_starts(text)))

    by_path = {f.path: f for f in files}
    app_json = by_path.get("app.json")
    if app_json is None:
        raise AppConfigMissing(f"no app.json at project root: {root_dir}")
    try:
        raw = json.loads(app_json.text)
    except json.JSONDecodeError as exc:
        raise AppConfigMissing(f"app.json is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise AppConfigMissing("app.json must hold a JSON object")
    page_list = raw.get("pages", [])
    pages = tuple(p for p in page_list if isinstance(p, str)) if isinstance(page_list, list) else ()
    config = AppConfig(pages, raw)

    project = MiniappProject(str(root), config, files, skipped=skipped)
    _build_page_units(project, by_path)
    return project


def _build_page_units(project: MiniappProject, by_path: dict[str, SourceFile]) -> None:
    for page in project.app_config.pages:
        norm = normalize_rel(page)
        if norm is None:
            project.missing_pages.append(page)
            continue
        script = by_path.get(norm + ".js") or by_path.get(norm + ".wxs")
        if script is None or script.kind is not FileKind.SCRIPT:
            project.missing_pages.append(page)
            continue
        project.pages.append(
            PageUnit(
                page_path=page,
                script=script,
                markup=by_path.get(norm + ".wxml"),
                page_config=by_path.get(norm + ".json"),
            )
        )
    # App-level script, analyzed as a synthetic unit after the config pages.
    app_script = by_path.get("app.js")
    if app_script is not None:
        project.pages.append(PageUnit(page_path="app", script=app_script))


def page_units(project: MiniappProject) -> list[PageUnit]:
    """One unit per resolvable page, in app-config order."""
    return list(project.pages)


def project_hash(project: MiniappProject) -> str:
    """Stable content hash over (path, sha256) pairs of the loaded files."""
    h = hashlib.sha256()
    for f in project.files:
        h.update(f.path.encode("utf-8"))
        h.update(b"\0")
        h.update(_sha256(f.text).encode("ascii"))
        h.update(b"\n")
    return h.hexdigest()[:12]
