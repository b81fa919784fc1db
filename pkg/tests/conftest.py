from __future__ import annotations

import importlib.util
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
SCRIPTS = REPO / "scripts"

if str(REPO / "src") not in sys.path:
    sys.path.insert(0, str(REPO / "src"))

from minileak.extract import extract_markup_forms, extract_script_model, tokenize  # noqa: E402
from minileak.ingest import load_project  # noqa: E402
from minileak.taxonomy import builtin_taxonomy  # noqa: E402


def load_script_module(name: str):
    """Import a file from scripts/ (they are standalone, not packaged)."""
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def line_where(text: str, needle: str) -> int:
    """1-based line containing `needle`; keeps tests robust to fixture edits."""
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    raise AssertionError(f"{needle!r} not found in fixture")


@pytest.fixture(scope="session")
def bazi_project():
    return load_project(FIXTURES / "bazi")


@pytest.fixture(scope="session")
def bazi_unit(bazi_project):
    return bazi_project.pages[0]


@pytest.fixture(scope="session")
def bazi_model(bazi_unit):
    model, gaps = extract_script_model(tokenize(bazi_unit.script.text), bazi_unit.script.text)
    return model


@pytest.fixture(scope="session")
def bazi_gaps(bazi_unit):
    _, gaps = extract_script_model(tokenize(bazi_unit.script.text), bazi_unit.script.text)
    return gaps


@pytest.fixture(scope="session")
def bazi_forms(bazi_unit):
    return extract_markup_forms(bazi_unit.markup.text)


@pytest.fixture(scope="session")
def taxonomy():
    return builtin_taxonomy()


def make_script(tmp_path: Path, body: str, page: str = "pages/x/x") -> Path:
    """Write a one-page project with `body` as the page script."""
    root = tmp_path / "proj"
    script = root / f"{page}.js"
    script.parent.mkdir(parents=True, exist_ok=True)
    (root / "app.json").write_text('{"pages": ["%s"]}' % page, encoding="utf-8")
    script.write_text(body, encoding="utf-8")
    return root
