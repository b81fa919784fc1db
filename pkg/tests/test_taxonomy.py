from __future__ import annotations

import random

import pytest

from minileak.extract import MemberChain, Span
from minileak.taxonomy import (
    Disposition,
    MatchContext,
    OverrideParse,
    SensitiveCategory,
    SinkKind,
    SourceKind,
    SourceSpec,
    Taxonomy,
    load_overrides,
    match_sink,
    match_source,
)


def chain(spec: str) -> MemberChain:
    segs = tuple(
        (s[:-2], True) if s.endswith("()") else (s, False) for s in spec.split(".")
    )
    return MemberChain(segs, Span(0, 1, 1))


BIRTH = MatchContext(birth_context=True)


class TestBuiltin:
    def test_xing_is_surname(self, taxonomy):
        matches = match_source("xing", taxonomy)
        assert [(m[0].kind, m[1]) for m in matches] == [
            (SourceKind.IDENT_HEURISTIC, SensitiveCategory.SURNAME)
        ]

    def test_global_openid(self, taxonomy):
        matches = match_source(chain("getApp().globalData.openid"), taxonomy)
        kinds = [(spec.kind, cat) for spec, cat in matches]
        assert (SourceKind.GLOBAL_STATE_READ, SensitiveCategory.OPENID) in kinds

    def test_unknown_lexeme(self, taxonomy):
        assert match_source("zzz", taxonomy) == []

    def test_form_read_via_lexicon(self, taxonomy):
        matches = match_source(chain("e.detail.value.email"), taxonomy)
        assert [(spec.kind, cat) for spec, cat in matches] == [
            (SourceKind.FORM_INPUT, SensitiveCategory.EMAIL),
            (SourceKind.IDENT_HEURISTIC, SensitiveCategory.EMAIL),
        ]
        form_spec = matches[0][0]
        assert form_spec.base_confidence == 0.85

    def test_global_write_sink_on_assign_target(self, taxonomy):
        sink = match_sink(chain("getApp().globalData.curUser"), taxonomy, position="assign")
        assert sink is not None
        assert sink.kind is SinkKind.GLOBAL_STATE_WRITE
        assert sink.disposition is Disposition.STORED_GLOBAL

    def test_network_sink(self, taxonomy):
        sink = match_sink(chain("wx.request"), taxonomy, position="call")
        assert sink is not None and sink.kind is SinkKind.NETWORK

    def test_sink_position_filter(self, taxonomy):
        assert match_sink(chain("wx.request"), taxonomy, position="assign") is None
        assert match_sink(chain("getApp().globalData.x"), taxonomy, position="call") is None

    def test_nickname_read_refines_generic_pattern(self, taxonomy):
        matches = match_source(chain("getApp().globalData.userInfo.nickName"), taxonomy)
        cats = {cat for _, cat in matches}
        assert cats == {SensitiveCategory.NICKNAME}

    def test_confidence_ordering(self, taxonomy):
        by_kind = {}
        for s in taxonomy.sources:
            by_kind.setdefault(s.kind, set()).add(s.base_confidence)
        assert by_kind[SourceKind.API_CALL] == {0.95}
        assert by_kind[SourceKind.GLOBAL_STATE_READ] == {0.9}
        assert by_kind[SourceKind.IDENT_HEURISTIC] == {0.6}

    def test_duplicate_sources_rejected(self):
        dup = SourceSpec(SourceKind.API_CALL, "wx.login", SensitiveCategory.OPENID, 0.9)
        with pytest.raises(ValueError):
            Taxonomy((dup, dup), ())


class TestContextGate:
    def test_bare_date_gated(self, taxonomy):
        assert match_source("date", taxonomy) == []
        matches = match_source("date", taxonomy, BIRTH)
        assert [cat for _, cat in matches] == [SensitiveCategory.BIRTHDATE]

    def test_gated_form_read(self, taxonomy):
        assert match_source(chain("e.detail.value.time"), taxonomy) == []
        matches = match_source(chain("e.detail.value.time"), taxonomy, BIRTH)
        assert {cat for _, cat in matches} == {SensitiveCategory.BIRTH_TIME}

    def test_birthday_not_gated(self, taxonomy):
        assert [cat for _, cat in match_source("birthday", taxonomy)] == [
            SensitiveCategory.BIRTHDATE
        ]


class TestOverrides:
    def test_additive_merge(self, taxonomy, tmp_path):
        f = tmp_path / "o.txt"
        f.write_text("source IDENT_HEURISTIC shouji PHONE 0.7\n")
        merged = load_overrides(f, taxonomy)
        assert [cat for _, cat in match_source("shouji", merged)] == [SensitiveCategory.PHONE]
        assert merged.version == taxonomy.version + 1

    def test_remove_source(self, taxonomy, tmp_path):
        f = tmp_path / "o.txt"
        f.write_text("remove source API_CALL wx.login\n")
        merged = load_overrides(f, taxonomy)
        assert match_source(chain("wx.login"), merged) == []
        assert match_source(chain("wx.login"), taxonomy) != []

    def test_replace_same_kind_pattern(self, taxonomy, tmp_path):
        f = tmp_path / "o.txt"
        f.write_text("source IDENT_HEURISTIC xing OTHER_PII 0.3\n")
        merged = load_overrides(f, taxonomy)
        matches = match_source("xing", merged)
        assert [(cat, spec.base_confidence) for spec, cat in matches] == [
            (SensitiveCategory.OTHER_PII, 0.3)
        ]

    def test_sink_record_and_remove(self, taxonomy, tmp_path):
        f = tmp_path / "o.txt"
        f.write_text(
            "sink NETWORK my.tracker.send TRANSMITTED\n"
            "remove sink NAV_PARAM wx.navigateTo\n"
        )
        merged = load_overrides(f, taxonomy)
        assert match_sink(chain("my.tracker.send"), merged) is not None
        assert match_sink(chain("wx.navigateTo"), merged) is None

    def test_comments_and_blank_lines(self, taxonomy, tmp_path):
        f = tmp_path / "o.txt"
        f.write_text("# a comment\n\nsource IDENT_HEURISTIC qq WECHAT_ID  # trailing\n")
        merged = load_overrides(f, taxonomy)
        assert [cat for _, cat in match_source("qq", merged)] == [SensitiveCategory.WECHAT_ID]

    @pytest.mark.parametrize(
        "line,fragment",
        [
            ("frobnicate all the things", "unknown record type"),
            ("source API_CALL wx.x NOT_A_CATEGORY", "SensitiveCategory"),
            ("source BAD_KIND p EMAIL", "SourceKind"),
            ("source IDENT_HEURISTIC x EMAIL 1.5", "out of range"),
            ("sink NETWORK wx.x", "4 fields"),
            ("remove gadget API_CALL x", "malformed remove"),
        ],
    )
    def test_malformed_records(self, taxonomy, tmp_path, line, fragment):
        f = tmp_path / "o.txt"
        f.write_text("# leading comment\n" + line + "\n")
        with pytest.raises(OverrideParse) as exc:
            load_overrides(f, taxonomy)
        assert exc.value.line_no == 2
        assert fragment in str(exc.value)

    def test_merge_associativity(self, taxonomy, tmp_path):
        """Applying files A then B matches applying their concatenation."""
        rng = random.Random(7)
        lexemes = ["alpha", "beta", "gamma", "delta"]
        cats = list(SensitiveCategory)
        for trial in range(20):
            lines_a = [
                f"source IDENT_HEURISTIC {rng.choice(lexemes)} {rng.choice(cats).value}"
                for _ in range(rng.randrange(0, 4))
            ]
            lines_b = [
                rng.choice(
                    [
                        f"source IDENT_HEURISTIC {rng.choice(lexemes)} {rng.choice(cats).value}",
                        f"remove source IDENT_HEURISTIC {rng.choice(lexemes)}",
                    ]
                )
                for _ in range(rng.randrange(0, 4))
            ]
            fa = tmp_path / f"a{trial}.txt"
            fb = tmp_path / f"b{trial}.txt"
            fab = tmp_path / f"ab{trial}.txt"
            fa.write_text("\n".join(lines_a) + "\n")
            fb.write_text("\n".join(lines_b) + "\n")
            fab.write_text("\n".join(lines_a + lines_b) + "\n")
            stepwise = load_overrides(fb, load_overrides(fa, taxonomy))
            merged = load_overrides(fab, taxonomy)
            for lex in lexemes:
                assert [
                    (s.kind, s.pattern, c) for s, c in match_source(lex, stepwise)
                ] == [(s.kind, s.pattern, c) for s, c in match_source(lex, merged)]


class TestDeterminism:
    def test_match_order_stable(self, taxonomy):
        read = chain("getApp().globalData.userInfo.nickName")
        assert match_source(read, taxonomy) == match_source(read, taxonomy)

    def test_fixture_categories_reachable_from_builtin(self, taxonomy):
        """The paper page's six reported categories need no overrides."""
        assert match_source(chain("e.detail.value.xing"), taxonomy)
        assert match_source(chain("e.detail.value.ming"), taxonomy)
        assert match_source(chain("e.detail.value.sex"), taxonomy)
        assert match_source(chain("e.detail.value.date"), taxonomy, BIRTH)
        assert match_source(chain("e.detail.value.email"), taxonomy)
        assert match_source(chain("getApp().globalData.openid"), taxonomy)
        assert match_source(chain("getApp().globalData.userInfo.nickName"), taxonomy)
