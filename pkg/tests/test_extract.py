from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minileak.extract import (
    Assign,
    Branch,
    Call,
    CallExpr,
    Concat,
    MemberChain,
    PatternSyntax,
    TokenKind,
    chain_matches,
    extract_markup_forms,
    extract_script_model,
    iter_chains,
    tokenize,
)



def roundtrip_ok(text: str) -> bool:
    """Lossless lexing: lexemes at their offsets, whitespace-only gaps."""
    pos = 0
    for tok in tokenize(text):
        gap = text[pos : tok.offset]
        if gap.strip(" \t\r\f\v"):
            return False
        if text[tok.offset : tok.offset + len(tok.lexeme)] != tok.lexeme:
            return False
        pos = tok.offset + len(tok.lexeme)
    return not text[pos:].strip(" \t\r\f\v")


class TestTokenize:
    def test_smallest_statement(self):
        kinds = [(t.kind, t.lexeme) for t in tokenize("var xing = '';")]
        assert kinds == [
            (TokenKind.KEYWORD, "var"),
            (TokenKind.IDENT, "xing"),
            (TokenKind.PUNCT, "="),
            (TokenKind.STRING, "''"),
            (TokenKind.PUNCT, ";"),
        ]

    def test_fixture_roundtrip(self, bazi_unit):
        assert roundtrip_ok(bazi_unit.script.text)

    def test_chain_with_string(self):
        toks = tokenize("wx.switchTab({url: '../my/index'})")
        strings = [t for t in toks if t.kind is TokenKind.STRING]
        assert [t.lexeme for t in strings] == ["'../my/index'"]

    def test_comments_kept(self):
        toks = tokenize("a // trailing\n/* block\nstill */ b")
        comments = [t.lexeme for t in toks if t.kind is TokenKind.COMMENT]
        assert comments == ["// trailing", "/* block\nstill */"]

    def test_unterminated_string_tolerated(self):
        assert roundtrip_ok("var a = 'oops\nvar b = 1;")

    def test_garbage_becomes_punct(self):
        toks = tokenize("@#\x01")
        assert all(t.kind is TokenKind.PUNCT and len(t.lexeme) == 1 for t in toks)

    def test_line_col_positions(self):
        toks = tokenize("a\n  bb")
        assert (toks[0].line, toks[0].col) == (1, 1)
        assert toks[1].kind is TokenKind.NEWLINE
        assert (toks[2].line, toks[2].col) == (2, 3)

    @given(st.text(max_size=300))
    def test_roundtrip_random_text(self, text):
        assert roundtrip_ok(text)

    @given(
        st.lists(
            st.sampled_from(
                ["var", "x", "'s'", '"d"', "1.5", "0x1f", "(", ")", "{", "}", "//c",
                 "/*", "*/", "+", "===", ".", "\n", "\t", " ", "`t`", "\\", "if"]
            ),
            max_size=60,
        )
    )
    def test_roundtrip_js_like_soup(self, pieces):
        assert roundtrip_ok("".join(pieces))


class TestScriptModel:
    def test_fixture_structure(self, bazi_model):
        assert [r.kind.value for r in bazi_model.registrations] == ["PAGE"]
        reg = bazi_model.registrations[0]
        assert set(reg.data_fields) >= {
            "items", "date", "time", "xing", "ming", "sex", "hiddenToast", "loadingHidden",
        }
        assert set(reg.functions) >= {
            "bindDateChange", "bindTimeChange", "xingInputEvent", "mingInputEvent",
            "formBindsubmit", "updateUser",
        }
        assert bazi_model.requires == (
            ("CurBazi", "../../utils/curBazi.js"),
            ("util", "../../utils/util.js"),
        )

    def test_fixture_has_no_gaps(self, bazi_gaps):
        assert bazi_gaps == []

    def test_empty_file(self):
        model, gaps = extract_script_model(tokenize(""), "")
        assert model.registrations == ()
        assert model.markers == ("NoRegistrationFound",)
        assert gaps == []

    def test_updateuser_call_has_nine_args(self, bazi_model):
        reg = bazi_model.registrations[0]
        calls = [
            a
            for a in _leaves(reg.functions["formBindsubmit"].actions)
            if isinstance(a, Call) and a.callee.render() == "self.updateUser"
        ]
        assert len(calls) == 1
        assert len(calls[0].args) == 9
        assert [c.render() for c in calls[0].args if isinstance(c, MemberChain)] == [
            "username", "xing", "ming", "sex", "birthday", "hour", "minute", "wechat", "email",
        ]

    def test_setdata_desugars_to_page_state_assign(self, bazi_model):
        reg = bazi_model.registrations[0]
        actions = list(_leaves(reg.functions["bindDateChange"].actions))
        assert len(actions) == 1
        assign = actions[0]
        assert isinstance(assign, Assign)
        assert assign.target.render() == "data.date"
        assert isinstance(assign.value, MemberChain)
        assert assign.value.render() == "e.detail.value"

    def test_concat_propagates_operands(self, bazi_model):
        reg = bazi_model.registrations[0]
        times = [
            a
            for a in _leaves(reg.functions["formBindsubmit"].actions)
            if isinstance(a, Assign) and a.target.render() == "times"
        ]
        assert isinstance(times[0].value, Concat)
        rendered = [p.render() for p in times[0].value.parts if isinstance(p, MemberChain)]
        assert rendered == ["e.detail.value.time"]

    def test_derived_value_keeps_receiver_chain(self, bazi_model):
        reg = bazi_model.registrations[0]
        hour = [
            a
            for a in _leaves(reg.functions["formBindsubmit"].actions)
            if isinstance(a, Assign) and a.target.render() == "hour"
        ]
        assert isinstance(hour[0].value, CallExpr)
        assert hour[0].value.callee.render() == "times.split"

    def test_determinism(self, bazi_unit):
        text = bazi_unit.script.text
        a = extract_script_model(tokenize(text), text)
        b = extract_script_model(tokenize(text), text)
        assert a == b

    def test_coverage_accounting(self, bazi_unit, bazi_model, bazi_gaps):
        """Every significant token in a body sits in an action or gap span."""
        text = bazi_unit.script.text
        toks = tokenize(text)
        for reg in bazi_model.registrations:
            for fn in reg.functions.values():
                spans = [a.span for a in fn.actions] + [g.span for g in bazi_gaps]
                for tok in toks:
                    if tok.kind in (TokenKind.COMMENT, TokenKind.NEWLINE):
                        continue
                    if not (fn.body_span.start < tok.offset and tok.end < fn.body_span.end):
                        continue
                    if tok.lexeme == ";":
                        continue
                    assert any(
                        s.start <= tok.offset and tok.end <= s.end for s in spans
                    ), f"uncovered token {tok.lexeme!r} at offset {tok.offset} in {fn.name}"

    def test_gap_recorded_for_unsupported_statement(self):
        src = "Page({ f: function () { for (var i = 0; i < 3; i++) { step(i); } done(); } })"
        model, gaps = extract_script_model(tokenize(src), src)
        assert [g.reason for g in gaps] == ["unsupported-statement:for"]
        fn = model.registrations[0].functions["f"]
        assert any(isinstance(a, Call) and a.callee.render() == "done" for a in fn.actions)

    def test_mangled_input_never_raises(self):
        rng = random.Random(1234)
        alphabet = "Page({fn:()=>x,}) var if'\"`\\/*na*/; .+={}[]()\n\t0x 12e9 &&||"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 120)))
            model, gaps = extract_script_model(tokenize(text), text)
            assert model is not None and gaps is not None

    @given(st.text(max_size=200))
    def test_arbitrary_text_never_raises(self, text):
        model, gaps = extract_script_model(tokenize(text), text)
        assert model is not None and gaps is not None


def _leaves(actions):
    for a in actions:
        if isinstance(a, Branch):
            yield from _leaves(a.then_actions)
            yield from _leaves(a.else_actions)
        else:
            yield a


class TestChainMatches:
    def _chain(self, spec: str) -> MemberChain:
        segments = []
        for seg in spec.split("."):
            if seg.endswith("()"):
                segments.append((seg[:-2], True))
            else:
                segments.append((seg, False))
        from minileak.extract import Span

        return MemberChain(tuple(segments), Span(0, 1, 1))

    def test_exact_paper_chain(self):
        chain = self._chain("getApp().globalData.userInfo.nickName")
        assert chain_matches(chain, "getApp().globalData.userInfo.nickName")

    def test_prefix_mismatch(self):
        chain = self._chain("getApp().globalData.openid")
        assert not chain_matches(chain, "getApp().globalData.userInfo.**")

    def test_star_matches_one_segment(self):
        assert chain_matches(self._chain("e.detail.value.xing"), "e.detail.value.*")
        assert not chain_matches(self._chain("e.detail.value"), "e.detail.value.*")
        assert not chain_matches(self._chain("e.detail.value.xing.length"), "e.detail.value.*")

    def test_double_star_suffix(self):
        assert chain_matches(self._chain("getApp().globalData.curUser"), "getApp().globalData.**")
        assert chain_matches(self._chain("getApp().globalData"), "getApp().globalData.**")

    def test_callness_must_match(self):
        assert not chain_matches(self._chain("getApp.globalData"), "getApp().globalData")
        assert not chain_matches(self._chain("getApp().globalData"), "getApp.globalData")

    def test_exactly_six_form_reads_in_fixture(self, bazi_model):
        hits = [c.render() for c in iter_chains(bazi_model) if chain_matches(c, "e.detail.value.*")]
        assert sorted(hits) == sorted(
            [
                "e.detail.value.xing",
                "e.detail.value.ming",
                "e.detail.value.sex",
                "e.detail.value.time",
                "e.detail.value.date",
                "e.detail.value.email",
            ]
        )

    @pytest.mark.parametrize("pattern", ["", "a..b", "**.a", "a.*()", "a-b.c", "a.**.b"])
    def test_pattern_syntax_errors(self, pattern):
        with pytest.raises(PatternSyntax):
            chain_matches(self._chain("a.b"), pattern)


class TestMarkupForms:
    def test_fixture_form(self, bazi_forms):
        assert len(bazi_forms) == 1
        form = bazi_forms[0]
        assert form.submit_handler == "formBindsubmit"
        assert form.inputs == (
            ("xing", "input"),
            ("ming", "input"),
            ("sex", "radio-group"),
            ("date", "picker"),
            ("time", "picker"),
            ("email", "input"),
        )

    def test_minimal_form(self):
        forms = extract_markup_forms('<form bindsubmit="formBindsubmit"><input name="xing"/></form>')
        assert len(forms) == 1
        assert forms[0].submit_handler == "formBindsubmit"
        assert forms[0].inputs == (("xing", "input"),)

    def test_no_forms(self):
        assert extract_markup_forms("<view><text>hello</text></view>") == []

    def test_two_sibling_forms_in_order(self):
        text = (
            '<view><form bindsubmit="a"><input name="one"/></form>'
            '<form bindsubmit="b"><input name="two"/></form></view>'
        )
        forms = extract_markup_forms(text)
        assert [(f.submit_handler, f.inputs) for f in forms] == [
            ("a", (("one", "input"),)),
            ("b", (("two", "input"),)),
        ]

    def test_unclosed_form_tolerated(self):
        forms = extract_markup_forms('<form bindsubmit="h"><input name="n">')
        assert forms[0].inputs == (("n", "input"),)

    def test_form_without_handler_skipped(self):
        assert extract_markup_forms('<form><input name="x"/></form>') == []
