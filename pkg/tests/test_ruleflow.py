from __future__ import annotations

import random

from minileak.extract import extract_markup_forms, extract_script_model, tokenize
from minileak.ingest import SourceFile, classify_file
from minileak.ruleflow import (
    Disposition,
    Evidence,
    TaintState,
    Trace,
    analyze_page,
    build_context,
    propagate,
    replay_flow,
    resolve_intra_calls,
)
from minileak.taxonomy import SensitiveCategory, builtin_taxonomy

from conftest import line_where


def as_source_file(text: str, path: str = "pages/t/t.js") -> SourceFile:
    starts = [0] + [i + 1 for i, c in enumerate(text) if c == "\n"]
    return SourceFile(path, classify_file(path), text, tuple(starts))


def parse(text: str):
    model, gaps = extract_script_model(tokenize(text), text)
    return model, gaps


def analyze(text: str, markup: str = "", taxonomy=None):
    model, _ = parse(text)
    forms = extract_markup_forms(markup) if markup else []
    return analyze_page(model, forms, taxonomy or builtin_taxonomy(), as_source_file(text))


class TestPropagate:
    def _action(self, body: str, name: str = "f", pick: int = 0):
        text = "Page({ %s: function (e, t) { %s } })" % (name, body)
        model, _ = parse(text)
        fn = model.registrations[0].functions[name]
        return fn.actions[pick], as_source_file(text)

    def test_weak_update_on_object_field(self, taxonomy):
        action, script = self._action("curUser.Xing = xing;")
        state = TaintState()
        ev = Evidence(script.path, 1, "seed")
        state.seed("xing", SensitiveCategory.SURNAME, Trace(0.85, (ev,)))
        out = propagate(state, action, taxonomy, script)
        assert SensitiveCategory.SURNAME in out.categories("curUser")
        assert SensitiveCategory.SURNAME in out.categories("xing")  # weak: source kept

    def test_empty_in_empty_out(self, taxonomy):
        action, script = self._action("a = b;")
        out = propagate(TaintState(), action, taxonomy, script)
        assert out.facts() == frozenset()

    def test_derived_value_keeps_receiver_taint(self, taxonomy):
        action, script = self._action('hour = t.split(":")[0];')
        state = TaintState()
        ev = Evidence(script.path, 1, "seed")
        state.seed("t", SensitiveCategory.BIRTH_TIME, Trace(0.85, (ev,)))
        out = propagate(state, action, taxonomy, script)
        assert out.categories("hour") == frozenset({SensitiveCategory.BIRTH_TIME})

    def test_strong_update_clears_stale_taint(self, taxonomy):
        action, script = self._action("p = 'constant';")
        state = TaintState()
        state.seed("p", SensitiveCategory.PHONE, Trace(0.9, (Evidence(script.path, 1, "x"),)))
        out = propagate(state, action, taxonomy, script)
        assert out.categories("p") == frozenset()

    def test_branch_merges_both_arms(self, taxonomy):
        action, script = self._action(
            "if (c) { w = getApp().globalData.openid; } else { w = e.detail.value.email; }"
        )
        out = propagate(TaintState(), action, taxonomy, script)
        assert out.categories("w") == frozenset(
            {SensitiveCategory.OPENID, SensitiveCategory.EMAIL}
        )

    def test_source_seeding_without_prior_facts(self, taxonomy):
        action, script = self._action("email = e.detail.value.email;")
        out = propagate(TaintState(), action, taxonomy, script)
        assert SensitiveCategory.EMAIL in out.categories("email")

    def test_monotone_on_untouched_holders(self, taxonomy):
        action, script = self._action("a = b + c;")
        state = TaintState()
        state.seed("z", SensitiveCategory.PHONE, Trace(0.9, (Evidence(script.path, 1, "x"),)))
        out = propagate(state, action, taxonomy, script)
        assert state.issubset(out)

    def test_concat_unions_operands(self, taxonomy):
        action, script = self._action("msg = e.detail.value.phone + e.detail.value.email;")
        out = propagate(TaintState(), action, taxonomy, script)
        assert out.categories("msg") == frozenset(
            {SensitiveCategory.PHONE, SensitiveCategory.EMAIL}
        )


SYNTH_PHONE = """Page({
  onSubmit: function (e) {
    var p = e.detail.value.phone;
    wx.request({url: 'https://x.example', data: p});
  },
})
"""


class TestAnalyzeSynthetic:
    def test_collected_and_transmitted_with_two_step_flow(self):
        # Brute-force oracle for this two-statement handler: the only source
        # read is the phone form field (line 3), the only sink the request
        # call (line 4), so the full (source, sink) enumeration is exactly
        # {(phone, None), (phone, request)}.
        findings = analyze(SYNTH_PHONE)
        summary = [(f.category, f.disposition, f.source.line, [e.line for e in f.flow]) for f in findings]
        assert summary == [
            (SensitiveCategory.PHONE, Disposition.COLLECTED, 3, [3]),
            (SensitiveCategory.PHONE, Disposition.TRANSMITTED, 3, [3, 4]),
        ]

    def test_no_sources_no_findings(self):
        assert analyze("Page({ f: function () { var a = 1; } })") == []

    def test_storage_sink(self):
        text = """Page({
  save: function (e) {
    var email = e.detail.value.email;
    wx.setStorageSync('m', email);
  },
})
"""
        findings = analyze(text)
        assert [(f.category, f.disposition) for f in findings] == [
            (SensitiveCategory.EMAIL, Disposition.COLLECTED),
            (SensitiveCategory.EMAIL, Disposition.STORED_LOCAL),
        ]

    def test_nav_sink_fires_only_with_tainted_args(self):
        clean = """Page({
  go: function () {
    wx.navigateTo({url: '/pages/a/a?tab=2'});
  },
})
"""
        assert analyze(clean) == []
        leaky = """Page({
  go: function (e) {
    var phone = e.detail.value.phone;
    wx.navigateTo({url: '/pages/a/a?p=' + phone});
  },
})
"""
        findings = analyze(leaky)
        assert (SensitiveCategory.PHONE, Disposition.NAV_EXPOSED) in [
            (f.category, f.disposition) for f in findings
        ]

    def test_object_literal_field_taint_reaches_sink(self):
        text = """Page({
  send: function (e) {
    var box = {};
    box.mail = e.detail.value.email;
    wx.request({url: 'https://x.example', data: box});
  },
})
"""
        findings = analyze(text)
        assert (SensitiveCategory.EMAIL, Disposition.TRANSMITTED) in [
            (f.category, f.disposition) for f in findings
        ]

    def test_determinism_including_ids(self, bazi_unit, bazi_model, bazi_forms, taxonomy):
        runs = [
            analyze_page(bazi_model, bazi_forms, taxonomy, bazi_unit.script) for _ in range(3)
        ]
        assert runs[0] == runs[1] == runs[2]
        ids = [f.id for f in runs[0]]
        assert len(ids) == len(set(ids))

    def test_evidence_integrity(self, bazi_unit, bazi_model, bazi_forms, taxonomy):
        findings = analyze_page(bazi_model, bazi_forms, taxonomy, bazi_unit.script)
        text = bazi_unit.script.text
        for f in findings:
            for ev in (f.source, *f.flow, *( [f.sink] if f.sink else [] )):
                line_slice = text.splitlines()[ev.line - 1]
                assert ev.snippet in line_slice
                assert len(ev.snippet) <= 160


class TestIntraCalls:
    def test_fixture_edge_with_nine_bindings(self, bazi_model):
        reg = bazi_model.registrations[0]
        graph = resolve_intra_calls(reg)
        edges = graph.edges["formBindsubmit"]
        assert len(edges) == 1
        edge = edges[0]
        assert (edge.caller, edge.callee) == ("formBindsubmit", "updateUser")
        assert len(edge.args) == 9
        assert edge.params == (
            "Username", "Xing", "Ming", "Sex", "Birthday", "Hour", "Minute", "Wechat", "Email",
        )

    def test_no_cross_calls(self):
        model, _ = parse("Page({ a: function () { var x = 1; }, b: function () { wx.request({}); } })")
        graph = resolve_intra_calls(model.registrations[0])
        assert graph.edges == {}

    def test_unresolved_member_call_recorded(self):
        model, _ = parse("Page({ a: function () { this.missingHelper(1); } })")
        graph = resolve_intra_calls(model.registrations[0])
        assert graph.edges == {}
        assert graph.unresolved == (("a", "this.missingHelper"),)

    def test_mutual_recursion_edges_and_termination(self):
        text = """Page({
  start: function (e) {
    var p = e.detail.value.phone;
    this.ping(p);
  },
  ping: function (a) {
    this.pong(a);
  },
  pong: function (b) {
    this.ping(b);
    getApp().globalData.box = b;
  },
})
"""
        model, _ = parse(text)
        reg = model.registrations[0]
        graph = resolve_intra_calls(reg)
        assert [(e.caller, e.callee) for e in graph.edges["ping"]] == [("ping", "pong")]
        assert [(e.caller, e.callee) for e in graph.edges["pong"]] == [("pong", "ping")]

        # Hand fixpoint, two iterations: start seeds p, hop1 binds ping.a,
        # hop2 binds pong.b and stores to global state; the third hop
        # (pong -> ping) is cut by the visited set, so analysis terminates
        # with exactly one COLLECTED and one STORED_GLOBAL finding.
        findings = analyze(text)
        assert [(f.category, f.disposition) for f in findings] == [
            (SensitiveCategory.PHONE, Disposition.COLLECTED),
            (SensitiveCategory.PHONE, Disposition.STORED_GLOBAL),
        ]
        stored = findings[1]
        assert [e.line for e in stored.flow] == [3, 4, 7, 11]

    def test_random_cyclic_graphs_terminate(self):
        rng = random.Random(99)
        for _ in range(25):
            n = rng.randrange(2, 6)
            names = [f"f{i}" for i in range(n)]
            parts = []
            for i, name in enumerate(names):
                callees = rng.sample(names, k=rng.randrange(0, n))
                body = "".join(f"this.{c}(x);" for c in callees)
                parts.append(f"{name}: function (x) {{ {body} }}")
            text = "Page({ entry: function (e) { var x = e.detail.value.phone; this.f0(x); }, %s })" % ", ".join(parts)
            findings = analyze(text)  # must terminate
            assert all(f.confidence > 0 for f in findings)

    def test_return_value_taint(self):
        text = """Page({
  pick: function (e) {
    return e.detail.value.email;
  },
  run: function (e) {
    var m = this.pick(e);
    wx.request({url: 'https://x.example', data: m});
  },
})
"""
        findings = analyze(text)
        pairs = [(f.category, f.disposition) for f in findings]
        assert (SensitiveCategory.EMAIL, Disposition.TRANSMITTED) in pairs


class TestFlowReplay:
    def test_fixture_flows_replay(self, bazi_unit, bazi_model, bazi_forms, taxonomy):
        reg = bazi_model.registrations[0]
        findings = analyze_page(bazi_model, bazi_forms, taxonomy, bazi_unit.script)
        assert findings, "fixture must produce findings"
        for f in findings:
            assert replay_flow(f, reg, bazi_unit.script, taxonomy, bazi_forms), (
                f.category,
                f.disposition,
                [e.line for e in f.flow],
            )

    def test_surname_flow_passes_through_helper(self, bazi_unit, bazi_model, bazi_forms, taxonomy):
        text = bazi_unit.script.text
        findings = analyze_page(bazi_model, bazi_forms, taxonomy, bazi_unit.script)
        stored = [
            f
            for f in findings
            if f.category is SensitiveCategory.SURNAME
            and f.disposition is Disposition.STORED_GLOBAL
        ]
        assert len(stored) == 1
        flow_lines = [e.line for e in stored[0].flow]
        assert line_where(text, "self.updateUser(username, xing") in flow_lines
        assert line_where(text, "curUser.Xing = Xing") in flow_lines
        assert flow_lines[-1] == line_where(text, "getApp().globalData.curUser = curUser")

    def test_replay_rejects_forged_flow(self, bazi_unit, bazi_model, bazi_forms, taxonomy):
        reg = bazi_model.registrations[0]
        findings = analyze_page(bazi_model, bazi_forms, taxonomy, bazi_unit.script)
        stored = next(f for f in findings if f.disposition is Disposition.STORED_GLOBAL)
        forged = type(stored)(
            id=stored.id,
            category=stored.category,
            source=stored.source,
            sink=stored.sink,
            flow=(stored.flow[0], stored.flow[-1]),  # skip the call hop
            disposition=stored.disposition,
            confidence=stored.confidence,
            detector=stored.detector,
        )
        assert not replay_flow(forged, reg, bazi_unit.script, taxonomy, bazi_forms)


class TestContextGate:
    def test_fixture_is_birth_context(self, bazi_model, bazi_forms, taxonomy):
        reg = bazi_model.registrations[0]
        assert build_context(reg, bazi_forms, taxonomy).birth_context

    def test_generic_date_picker_not_flagged(self):
        text = """Page({
  data: { date: '2020-01-01' },
  pick: function (e) {
    var date = e.detail.value.date;
    wx.request({url: 'https://x.example', data: date});
  },
})
"""
        assert analyze(text) == []

    def test_markup_names_enable_gate(self):
        script = """Page({
  submit: function (e) {
    var date = e.detail.value.date;
    wx.request({url: 'https://x.example', data: date});
  },
})
"""
        markup = '<form bindsubmit="submit"><input name="xing"/><picker name="date"/></form>'
        findings = analyze(script, markup=markup)
        assert (SensitiveCategory.BIRTHDATE, Disposition.COLLECTED) in [
            (f.category, f.disposition) for f in findings
        ]


class TestTaxonomyMonotonicity:
    def test_source_sink_removal_shrinks_findings(self, bazi_unit, bazi_model, bazi_forms):
        """T subset of T2 implies findings(T) subset of findings(T2), at
        (file, category, disposition) granularity."""
        full = builtin_taxonomy()
        reference = {
            (f.source.file, f.category, f.disposition)
            for f in analyze_page(bazi_model, bazi_forms, full, bazi_unit.script)
        }
        rng = random.Random(42)
        for _ in range(30):
            keep_sources = tuple(s for s in full.sources if rng.random() > 0.3)
            keep_sinks = tuple(s for s in full.sinks if rng.random() > 0.3)
            smaller = type(full)(keep_sources, keep_sinks, full.form_value_patterns, full.version)
            got = {
                (f.source.file, f.category, f.disposition)
                for f in analyze_page(bazi_model, bazi_forms, smaller, bazi_unit.script)
            }
            assert got <= reference
