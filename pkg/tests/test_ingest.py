from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minileak.ingest import (
    AppConfigMissing,
    FileKind,
    RootNotFound,
    classify_file,
    load_project,
    normalize_rel,
    page_units,
    project_hash,
)


class TestClassify:
    @pytest.mark.parametrize(
        "path,kind",
        [
            ("pages/input/input.js", FileKind.SCRIPT),
            ("utils/helper.wxs", FileKind.SCRIPT),
            ("pages/input/input.wxml", FileKind.MARKUP),
            ("app.json", FileKind.CONFIG),
            ("styles/app.wxss", FileKind.STYLE),
            ("readme.md", FileKind.OTHER),
            ("Makefile", FileKind.OTHER),
        ],
    )
    def test_extension_table(self, path, kind):
        assert classify_file(path) is kind


class TestLoadProject:
    def test_bazi_fixture(self, bazi_project):
        assert len(bazi_project.pages) == 1
        unit = bazi_project.pages[0]
        assert unit.page_path == "pages/input/input"
        assert unit.script.path == "pages/input/input.js"
        assert unit.markup is not None and unit.markup.path == "pages/input/input.wxml"
        assert unit.page_config is not None
        assert bazi_project.missing_pages == []

    def test_missing_root(self, tmp_path):
        with pytest.raises(RootNotFound):
            load_project(tmp_path / "nope")

    def test_missing_app_config(self, tmp_path):
        (tmp_path / "x.js").write_text("var a = 1;")
        with pytest.raises(AppConfigMissing):
            load_project(tmp_path)

    def test_zero_pages(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": []}')
        project = load_project(tmp_path)
        assert project.pages == []
        assert [f.kind for f in project.files] == [FileKind.CONFIG]

    def test_missing_page_recorded(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": ["pages/x/x"]}')
        project = load_project(tmp_path)
        assert project.pages == []
        assert project.missing_pages == ["pages/x/x"]

    def test_binary_file_skipped_not_fatal(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": []}')
        (tmp_path / "blob.js").write_bytes(b"\xff\xfe\x00\x01binary")
        project = load_project(tmp_path)
        assert [s.path for s in project.skipped] == ["blob.js"]
        assert "UTF-8" in project.skipped[0].reason

    def test_oversized_file_skipped(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": []}')
        (tmp_path / "big.js").write_text("x" * 64)
        project = load_project(tmp_path, max_file_bytes=32)
        assert [s.path for s in project.skipped] == ["big.js"]
        assert "oversized" in project.skipped[0].reason

    def test_idempotent_load(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": ["p/a"]}')
        (tmp_path / "p").mkdir()
        (tmp_path / "p/a.js").write_text("Page({})")
        one = json.dumps(load_project(tmp_path).to_dict(), sort_keys=True)
        two = json.dumps(load_project(tmp_path).to_dict(), sort_keys=True)
        assert one == two

    def test_deterministic_file_order(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": []}')
        for name in ("zz.js", "aa.js", "mm.wxml"):
            (tmp_path / name).write_text("x")
        project = load_project(tmp_path)
        assert [f.path for f in project.files] == ["aa.js", "app.json", "mm.wxml", "zz.js"]

    def test_escaping_page_path_recorded_as_missing(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": ["../../etc/passwd"]}')
        project = load_project(tmp_path)
        assert project.pages == []
        assert project.missing_pages == ["../../etc/passwd"]

    def test_app_script_becomes_synthetic_unit(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": ["p/a"]}')
        (tmp_path / "p").mkdir()
        (tmp_path / "p/a.js").write_text("Page({})")
        (tmp_path / "app.js").write_text("App({})")
        project = load_project(tmp_path)
        assert [u.page_path for u in project.pages] == ["p/a", "app"]

    def test_page_units_accessor(self, bazi_project):
        units = page_units(bazi_project)
        assert [u.page_path for u in units] == ["pages/input/input"]

    def test_unit_without_markup(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": ["p/a"]}')
        (tmp_path / "p").mkdir()
        (tmp_path / "p/a.js").write_text("Page({})")
        unit = load_project(tmp_path).pages[0]
        assert unit.markup is None and unit.page_config is None

    def test_project_hash_stable_and_content_sensitive(self, tmp_path):
        (tmp_path / "app.json").write_text('{"pages": []}')
        h1 = project_hash(load_project(tmp_path))
        assert h1 == project_hash(load_project(tmp_path))
        (tmp_path / "extra.js").write_text("var a = 1;")
        assert project_hash(load_project(tmp_path)) != h1


class TestPathSafety:
    @given(st.text(max_size=40))
    def test_normalize_never_escapes(self, raw):
        norm = normalize_rel(raw)
        if norm is not None:
            assert not norm.startswith("/")
            assert norm != ".."
            assert not norm.startswith("../")

    @pytest.mark.parametrize(
        "raw", ["../x", "..", "/abs/path", "a/../../x", "a\\..\\..\\x", "."]
    )
    def test_adversarial_paths_rejected(self, raw):
        assert normalize_rel(raw) is None

    @pytest.mark.parametrize("raw,expected", [("a/./b", "a/b"), ("a//b", "a/b"), ("a/b/../c", "a/c")])
    def test_normalization(self, raw, expected):
        assert normalize_rel(raw) == expected

    def test_loaded_paths_stay_under_root(self, bazi_project):
        import posixpath

        for f in bazi_project.files:
            assert not posixpath.isabs(f.path)
            assert ".." not in f.path.split("/")

    def test_line_starts_invariant(self, bazi_project):
        for f in bazi_project.files:
            assert f.line_starts[0] == 0
            assert list(f.line_starts) == sorted(set(f.line_starts))
            assert all(0 <= s <= len(f.text) for s in f.line_starts)
