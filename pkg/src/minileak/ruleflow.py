"""Rule-based detector: seed taint from taxonomy sources, propagate it, and
emit findings at collection points and sinks.

The engine is deliberately simple: field-insensitive object taint, branch
arms merged by union, and exactly one hop of intra-registration call
resolution (arguments bind positionally to parameters). That is enough to
follow a form submission through a helper into global state.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from .extract import (
    Action,
    Assign,
    Branch,
    Call,
    CallExpr,
    Concat,
    Expr,
    FunctionModel,
    MarkupForm,
    MemberChain,
    PageRegistration,
    Return,
    ScriptModel,
    Span,
)
from .ingest import SourceFile
from .taxonomy import (
    Disposition,
    MatchContext,
    SensitiveCategory,
    SourceKind,
    Taxonomy,
    match_sink,
    match_source,
)

__all__ = [
    "Detector",
    "Disposition",
    "Evidence",
    "Finding",
    "TaintFact",
    "TaintState",
    "Trace",
    "CallEdge",
    "CallGraph",
    "analyze_page",
    "propagate",
    "resolve_intra_calls",
    "replay_flow",
    "make_finding_id",
    "finding_sort_key",
]


class Detector(Enum):
    RULE = "RULE"
    LLM = "LLM"
    FUSED = "FUSED"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Evidence:
    file: str
    line: int  # 1-based
    snippet: str  # verbatim slice of that line, <= 160 chars


@dataclass(frozen=True)
class TaintFact:
    holder: str
    categories: frozenset
    origin: Evidence


@dataclass(frozen=True)
class Finding:
    id: str
    category: SensitiveCategory
    source: Evidence
    sink: Optional[Evidence]
    flow: tuple[Evidence, ...]
    disposition: Disposition
    confidence: float
    detector: Detector
    corroborated: bool = False
    note: Optional[str] = None


_DISPOSITION_RANK = {
    Disposition.COLLECTED: 0,
    Disposition.STORED_LOCAL: 1,
    Disposition.NAV_EXPOSED: 2,
    Disposition.STORED_GLOBAL: 3,
    Disposition.TRANSMITTED: 4,
}


def disposition_rank(d: Disposition) -> int:
    return _DISPOSITION_RANK[d]


def make_finding_id(
    file: str, category: SensitiveCategory, line: int, disposition: Disposition, detector: Detector
) -> str:
    key = f"{file}|{category.value}|{line}|{disposition.value}|{detector.value}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def finding_sort_key(f: Finding):
    return (
        f.source.file,
        f.source.line,
        f.category.value,
        f.detector.value,
        disposition_rank(f.disposition),
        f.id,
    )


def evidence_at(script: SourceFile, span: Span) -> Evidence:
    snippet = script.line_text(span.line).strip()[:160]
    return Evidence(script.path, span.line, snippet)


# ---------------------------------------------------------------------------
# Taint state


@dataclass(frozen=True)
class Trace:
    confidence: float
    path: tuple[Evidence, ...]  # starts at the origin read

    @property
    def origin(self) -> Evidence:
        return self.path[0]


def _stronger(a: Trace, b: Trace) -> Trace:
    """Deterministic pick when one holder carries a category twice."""
    if b.confidence > a.confidence:
        return b
    if b.confidence == a.confidence and b.origin.line < a.origin.line:
        return b
    return a


class TaintState:
    """Holder name -> category -> best trace. Field-insensitive for objects."""

    def __init__(self) -> None:
        self._entries: dict[str, dict[SensitiveCategory, Trace]] = {}

    def copy(self) -> "TaintState":
        new = TaintState()
        new._entries = {h: dict(cats) for h, cats in self._entries.items()}
        return new

    def seed(self, holder: str, category: SensitiveCategory, trace: Trace) -> None:
        cats = self._entries.setdefault(holder, {})
        cats[category] = _stronger(cats[category], trace) if category in cats else trace

    def clear(self, holder: str) -> None:
        self._entries.pop(holder, None)

    def at(self, holder: str) -> dict[SensitiveCategory, Trace]:
        return dict(self._entries.get(holder, {}))

    def categories(self, holder: str) -> frozenset:
        return frozenset(self._entries.get(holder, {}))

    def holders(self) -> list[str]:
        return sorted(self._entries)

    def union(self, other: "TaintState") -> "TaintState":
        new = self.copy()
        for holder, cats in other._entries.items():
            for cat, trace in cats.items():
                new.seed(holder, cat, trace)
        return new

    def facts(self) -> frozenset:
        out = []
        for holder, cats in self._entries.items():
            best = min(cats.values(), key=lambda t: (-t.confidence, t.origin.line))
            out.append(TaintFact(holder, frozenset(cats), best.origin))
        return frozenset(out)

    def __contains__(self, holder: str) -> bool:
        return holder in self._entries

    def __eq__(self, other) -> bool:
        return isinstance(other, TaintState) and self._entries == other._entries

    def issubset(self, other: "TaintState") -> bool:
        for holder, cats in self._entries.items():
            if not set(cats) <= set(other._entries.get(holder, {})):
                return False
        return True


_THIS_ALIASES = ("this", "self", "that")


def _strip_this(chain: MemberChain) -> MemberChain:
    if len(chain.segments) > 1 and chain.root in _THIS_ALIASES and not chain.segments[0][1]:
        return MemberChain(chain.segments[1:], chain.span)
    return chain


def _render_prefix(chain: MemberChain, upto: int) -> str:
    return ".".join(n + "()" if c else n for n, c in chain.segments[:upto])


def _lookup_chain(state: TaintState, chain: MemberChain) -> dict[SensitiveCategory, Trace]:
    """Taint carried by a read of `chain`: longest tainted prefix wins."""
    stripped = _strip_this(chain)
    for k in range(len(stripped.segments), 0, -1):
        holder = _render_prefix(stripped, k)
        if holder in state:
            return state.at(holder)
    return {}


def _extend(trace: Trace, ev: Evidence) -> Trace:
    if trace.path and trace.path[-1].line == ev.line and trace.path[-1].file == ev.file:
        return trace
    return Trace(trace.confidence, trace.path + (ev,))


def _merge_taint(
    into: dict[SensitiveCategory, Trace], more: dict[SensitiveCategory, Trace]
) -> None:
    for cat, trace in more.items():
        into[cat] = _stronger(into[cat], trace) if cat in into else trace


def _eval_expr(
    expr: Expr,
    state: TaintState,
    taxonomy: Taxonomy,
    script: SourceFile,
    ctx: MatchContext,
) -> dict[SensitiveCategory, Trace]:
    """Categories carried by an expression, with source seeds included."""
    out: dict[SensitiveCategory, Trace] = {}
    if isinstance(expr, MemberChain):
        ev = evidence_at(script, expr.span)
        for spec, cat in match_source(expr, taxonomy, ctx):
            # A bare local/parameter read carries only the taint it already
            # holds; name heuristics on reads need a field access to bite
            # (assignment targets are seeded separately in propagate).
            if spec.kind is SourceKind.IDENT_HEURISTIC and len(expr.segments) == 1:
                continue
            _merge_taint(out, {cat: Trace(spec.base_confidence, (ev,))})
        _merge_taint(out, _lookup_chain(state, expr))
    elif isinstance(expr, Concat):  # includes collapsed object literals
        for part in expr.parts:
            _merge_taint(out, _eval_expr(part, state, taxonomy, script, ctx))
    elif isinstance(expr, CallExpr):
        ev = evidence_at(script, expr.span)
        for spec, cat in match_source(expr.callee, taxonomy, ctx):
            if spec.kind is SourceKind.API_CALL:
                _merge_taint(out, {cat: Trace(spec.base_confidence, (ev,))})
        if len(expr.callee.segments) > 1:
            # Derived value: split()/slice()/... inherit the receiver's taint.
            receiver = MemberChain(expr.callee.segments[:-1], expr.callee.span)
            _merge_taint(out, _lookup_chain(state, receiver))
        for arg in expr.args:
            _merge_taint(out, _eval_expr(arg, state, taxonomy, script, ctx))
    return out


def propagate(
    state: TaintState,
    action: Action,
    taxonomy: Taxonomy,
    script: SourceFile,
    context: Optional[MatchContext] = None,
) -> TaintState:
    """Single-action transfer function.

    Pure and local: no interprocedural steps (analyze_page layers those on
    top). Simple variables get strong updates, object fields weak union onto
    their container, branches merge both arms.
    """
    ctx = context or MatchContext()
    new = state.copy()
    if isinstance(action, Assign):
        taint = _eval_expr(action.value, state, taxonomy, script, ctx)
        ev = evidence_at(script, action.span)
        target = _strip_this(action.target)
        if len(target.segments) == 1:
            holder = target.render()
            new.clear(holder)
            for cat, trace in taint.items():
                new.seed(holder, cat, _extend(trace, ev))
            for spec, cat in match_source(target.final, taxonomy, ctx):
                new.seed(holder, cat, Trace(spec.base_confidence, (ev,)))
        else:
            holder = _render_prefix(target, len(target.segments) - 1)
            for cat, trace in taint.items():
                new.seed(holder, cat, _extend(trace, ev))
    elif isinstance(action, Branch):
        then_state = state.copy()
        for act in action.then_actions:
            then_state = propagate(then_state, act, taxonomy, script, ctx)
        else_state = state.copy()
        for act in action.else_actions:
            else_state = propagate(else_state, act, taxonomy, script, ctx)
        new = then_state.union(else_state)
    # Call and Return leave local holders untouched.
    return new


# ---------------------------------------------------------------------------
# Intra-registration call graph


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    args: tuple[Expr, ...]
    params: tuple[str, ...]
    span: Span


@dataclass
class CallGraph:
    edges: dict[str, tuple[CallEdge, ...]] = field(default_factory=dict)
    unresolved: tuple[tuple[str, str], ...] = ()

    def edge_at(self, caller: str, span: Span) -> Optional[CallEdge]:
        for edge in self.edges.get(caller, ()):
            if edge.span == span:
                return edge
        return None


def _callee_name(chain: MemberChain, registration: PageRegistration) -> Optional[str]:
    segs = chain.segments
    if len(segs) == 2 and segs[0][0] in _THIS_ALIASES and not segs[0][1]:
        name = segs[1][0]
    elif len(segs) == 1:
        name = segs[0][0]
    else:
        return None
    return name if name in registration.functions else None


def resolve_intra_calls(registration: PageRegistration) -> CallGraph:
    """Resolve this.F(...)/self.F(...)/F(...) to same-registration functions."""
    edges: dict[str, list[CallEdge]] = {}
    unresolved: list[tuple[str, str]] = []
    for fn in registration.functions.values():
        for callee_chain, args, span in _iter_calls(fn.actions):
            name = _callee_name(callee_chain, registration)
            if name is not None:
                callee = registration.functions[name]
                edges.setdefault(fn.name, []).append(
                    CallEdge(fn.name, name, args, callee.params, span)
                )
            elif (
                len(callee_chain.segments) == 2
                and callee_chain.root in _THIS_ALIASES
                and callee_chain.final != "setData"
            ):
                unresolved.append((fn.name, callee_chain.render()))
    return CallGraph({k: tuple(v) for k, v in edges.items()}, tuple(unresolved))


def _iter_calls(
    actions: tuple[Action, ...]
) -> Iterator[tuple[MemberChain, tuple[Expr, ...], Span]]:
    for action in actions:
        if isinstance(action, Call):
            yield action.callee, action.args, action.span
            for arg in action.args:
                yield from _iter_calls_in_expr(arg)
        elif isinstance(action, Assign):
            yield from _iter_calls_in_expr(action.value)
        elif isinstance(action, Return):
            if action.value is not None:
                yield from _iter_calls_in_expr(action.value)
        elif isinstance(action, Branch):
            yield from _iter_calls(action.then_actions)
            yield from _iter_calls(action.else_actions)


def _iter_calls_in_expr(
    expr: Expr,
) -> Iterator[tuple[MemberChain, tuple[Expr, ...], Span]]:
    if isinstance(expr, CallExpr):
        yield expr.callee, expr.args, expr.span
        for arg in expr.args:
            yield from _iter_calls_in_expr(arg)
    elif isinstance(expr, Concat):
        for part in expr.parts:
            yield from _iter_calls_in_expr(part)


# ---------------------------------------------------------------------------
# Page analysis

_GATE_CATEGORIES = frozenset(
    (
        SensitiveCategory.SURNAME,
        SensitiveCategory.GIVEN_NAME,
        SensitiveCategory.FULL_NAME,
        SensitiveCategory.NICKNAME,
        SensitiveCategory.GENDER,
    )
)

_COLLECTING_KINDS = frozenset(
    (SourceKind.FORM_INPUT, SourceKind.API_CALL, SourceKind.GLOBAL_STATE_READ)
)


def _registration_names(registration: PageRegistration, forms: list[MarkupForm]) -> set[str]:
    names = set(registration.data_fields)
    for form in forms:
        names.update(name for name, _ in form.inputs)
    for fn in registration.functions.values():
        for action in _iter_leaf_actions(fn.actions):
            if isinstance(action, Assign):
                target = _strip_this(action.target)
                names.add(target.final)
                for chain in _chains_in(action.value):
                    names.add(chain.final)
    return names


def _iter_leaf_actions(actions: tuple[Action, ...]) -> Iterator[Action]:
    for action in actions:
        if isinstance(action, Branch):
            yield from _iter_leaf_actions(action.then_actions)
            yield from _iter_leaf_actions(action.else_actions)
        else:
            yield action


def _chains_in(expr: Expr) -> Iterator[MemberChain]:
    if isinstance(expr, MemberChain):
        yield expr
    elif isinstance(expr, Concat):
        for p in expr.parts:
            yield from _chains_in(p)
    elif isinstance(expr, CallExpr):
        yield expr.callee
        for a in expr.args:
            yield from _chains_in(a)


def build_context(
    registration: PageRegistration, forms: list[MarkupForm], taxonomy: Taxonomy
) -> MatchContext:
    """Gate bare date/time lexemes on the page actually handling person data."""
    ungated = MatchContext(birth_context=False)
    for name in _registration_names(registration, forms):
        for _, cat in match_source(name, taxonomy, ungated):
            if cat in _GATE_CATEGORIES:
                return MatchContext(birth_context=True)
    return MatchContext(birth_context=False)


class _Analysis:
    def __init__(
        self,
        registration: PageRegistration,
        taxonomy: Taxonomy,
        script: SourceFile,
        ctx: MatchContext,
        graph: CallGraph,
    ):
        self.reg = registration
        self.tax = taxonomy
        self.script = script
        self.ctx = ctx
        self.graph = graph
        self.findings: dict[str, Finding] = {}

    # -- findings -------------------------------------------------------------

    def _add(self, finding: Finding) -> None:
        existing = self.findings.get(finding.id)
        if existing is None or finding.confidence > existing.confidence:
            self.findings[finding.id] = finding

    def _emit_collected(self, chain: MemberChain) -> None:
        ev = evidence_at(self.script, chain.span)
        for spec, cat in match_source(chain, self.tax, self.ctx):
            if spec.kind not in _COLLECTING_KINDS:
                continue
            self._add(
                Finding(
                    id=make_finding_id(ev.file, cat, ev.line, Disposition.COLLECTED, Detector.RULE),
                    category=cat,
                    source=ev,
                    sink=None,
                    flow=(ev,),
                    disposition=Disposition.COLLECTED,
                    confidence=spec.base_confidence,
                    detector=Detector.RULE,
                )
            )

    def _emit_sink(
        self, taint: dict[SensitiveCategory, Trace], disposition: Disposition, sink_span: Span
    ) -> None:
        sink_ev = evidence_at(self.script, sink_span)
        for cat, trace in taint.items():
            flow = _extend(trace, sink_ev).path
            self._add(
                Finding(
                    id=make_finding_id(
                        sink_ev.file, cat, trace.origin.line, disposition, Detector.RULE
                    ),
                    category=cat,
                    source=trace.origin,
                    sink=sink_ev,
                    flow=flow,
                    disposition=disposition,
                    confidence=trace.confidence,
                    detector=Detector.RULE,
                )
            )

    # -- walking ---------------------------------------------------------------

    def walk_function(
        self, fn: FunctionModel, state: TaintState, visited: set[str]
    ) -> tuple[TaintState, dict[SensitiveCategory, Trace]]:
        returns: dict[SensitiveCategory, Trace] = {}
        state = self._walk_actions(fn.actions, state, visited, returns, fn.name)
        return state, returns

    def _walk_actions(
        self,
        actions: tuple[Action, ...],
        state: TaintState,
        visited: set[str],
        returns: dict[SensitiveCategory, Trace],
        caller: str,
    ) -> TaintState:
        for action in actions:
            state = self._walk_action(action, state, visited, returns, caller)
        return state

    def _walk_action(
        self,
        action: Action,
        state: TaintState,
        visited: set[str],
        returns: dict[SensitiveCategory, Trace],
        caller: str,
    ) -> TaintState:
        if isinstance(action, Branch):
            then_state = self._walk_actions(
                action.then_actions, state.copy(), visited, returns, caller
            )
            else_state = self._walk_actions(
                action.else_actions, state.copy(), visited, returns, caller
            )
            return then_state.union(else_state)

        for chain in self._reads_of(action):
            self._emit_collected(chain)

        # Sinks and intra-registration calls, before the local transfer.
        for callee_chain, args, span in self._calls_of(action):
            sink = match_sink(callee_chain, self.tax, position="call")
            if sink is not None:
                taint: dict[SensitiveCategory, Trace] = {}
                for arg in args:
                    _merge_taint(taint, _eval_expr(arg, state, self.tax, self.script, self.ctx))
                self._emit_sink(taint, sink.disposition, span)
            edge = self.graph.edge_at(caller, span)
            if edge is not None and edge.callee not in visited:
                self._enter_call(edge, state, visited | {edge.callee})

        if isinstance(action, Assign):
            target = action.target  # not stripped: global sinks keep the full chain
            sink = match_sink(target, self.tax, position="assign")
            if sink is not None:
                taint = _eval_expr(action.value, state, self.tax, self.script, self.ctx)
                self._emit_sink(taint, sink.disposition, action.span)
        elif isinstance(action, Return):
            if action.value is not None:
                taint = _eval_expr(action.value, state, self.tax, self.script, self.ctx)
                ev = evidence_at(self.script, action.span)
                _merge_taint(returns, {c: _extend(t, ev) for c, t in taint.items()})

        new_state = propagate(state, action, self.tax, self.script, self.ctx)
        # Intra-call return values feed the assignment target on top of the
        # local transfer.
        if isinstance(action, Assign):
            ret = self._call_return_taint(action.value, state, visited, caller)
            if ret:
                target = _strip_this(action.target)
                holder = (
                    target.render()
                    if len(target.segments) == 1
                    else _render_prefix(target, len(target.segments) - 1)
                )
                ev = evidence_at(self.script, action.span)
                for cat, trace in ret.items():
                    new_state.seed(holder, cat, _extend(trace, ev))
        return new_state

    def _enter_call(self, edge: CallEdge, state: TaintState, visited: set[str]) -> None:
        callee = self.reg.functions[edge.callee]
        call_ev = evidence_at(self.script, edge.span)
        child = TaintState()
        for param, arg in zip(edge.params, edge.args):
            taint = _eval_expr(arg, state, self.tax, self.script, self.ctx)
            for cat, trace in taint.items():
                child.seed(param, cat, _extend(trace, call_ev))
        self.walk_function(callee, child, visited)

    def _call_return_taint(
        self, expr: Expr, state: TaintState, visited: set[str], caller: str
    ) -> dict[SensitiveCategory, Trace]:
        out: dict[SensitiveCategory, Trace] = {}
        for callee_chain, args, span in _iter_calls_in_expr(expr):
            edge = self.graph.edge_at(caller, span)
            if edge is None or edge.callee in visited:
                continue
            callee = self.reg.functions[edge.callee]
            call_ev = evidence_at(self.script, span)
            child = TaintState()
            for param, arg in zip(edge.params, edge.args):
                taint = _eval_expr(arg, state, self.tax, self.script, self.ctx)
                for cat, trace in taint.items():
                    child.seed(param, cat, _extend(trace, call_ev))
            _, returns = self.walk_function(callee, child, visited | {edge.callee})
            _merge_taint(out, returns)
        return out

    # -- action introspection ---------------------------------------------------

    def _reads_of(self, action: Action) -> Iterator[MemberChain]:
        if isinstance(action, Assign):
            yield from _chains_in(action.value)
        elif isinstance(action, Call):
            yield action.callee
            for arg in action.args:
                yield from _chains_in(arg)
        elif isinstance(action, Return) and action.value is not None:
            yield from _chains_in(action.value)

    def _calls_of(self, action: Action) -> Iterator[tuple[MemberChain, tuple[Expr, ...], Span]]:
        if isinstance(action, Call):
            yield action.callee, action.args, action.span
            for arg in action.args:
                yield from _iter_calls_in_expr(arg)
        elif isinstance(action, Assign):
            yield from _iter_calls_in_expr(action.value)
        elif isinstance(action, Return) and action.value is not None:
            yield from _iter_calls_in_expr(action.value)


def analyze_page(
    model: ScriptModel,
    forms: list[MarkupForm],
    taxonomy: Taxonomy,
    script: SourceFile,
) -> list[Finding]:
    """Run the rule detector over one page script.

    Every form/API/global-state source match becomes a COLLECTED finding;
    tainted values reaching a sink escalate to the sink's disposition with
    the full flow path attached. Output order is canonical.
    """
    findings: dict[str, Finding] = {}
    for registration in model.registrations:
        ctx = build_context(registration, forms, taxonomy)
        graph = resolve_intra_calls(registration)
        analysis = _Analysis(registration, taxonomy, script, ctx, graph)
        for fn in registration.functions.values():
            analysis.walk_function(fn, TaintState(), {fn.name})
        for fid, finding in analysis.findings.items():
            existing = findings.get(fid)
            if existing is None or finding.confidence > existing.confidence:
                findings[fid] = finding
    return sorted(findings.values(), key=finding_sort_key)


# ---------------------------------------------------------------------------
# Flow replay (soundness checking)


def replay_flow(
    finding: Finding,
    registration: PageRegistration,
    script: SourceFile,
    taxonomy: Taxonomy,
    forms: Optional[list[MarkupForm]] = None,
) -> bool:
    """Re-derive a finding's flow step by step under `propagate`.

    Each flow evidence line is resolved back to its action; call steps bind
    arguments to parameters as synthetic assigns. True iff the category
    survives to the sink (or, for COLLECTED, is seeded at the origin).
    """
    ctx = build_context(registration, forms or [], taxonomy)
    graph = resolve_intra_calls(registration)
    by_line: dict[int, list[Action]] = {}
    for fn in registration.functions.values():
        for action in _iter_leaf_actions(fn.actions):
            by_line.setdefault(action.span.line, []).append(action)

    state = TaintState()
    category = finding.category
    for idx, ev in enumerate(finding.flow):
        actions = by_line.get(ev.line)
        if not actions:
            return False
        is_last = idx == len(finding.flow) - 1
        for action in actions:
            if is_last and finding.sink is not None:
                value = action.value if isinstance(action, Assign) else None
                if isinstance(action, Call):
                    taint: dict[SensitiveCategory, Trace] = {}
                    for arg in action.args:
                        _merge_taint(taint, _eval_expr(arg, state, taxonomy, script, ctx))
                    if category in taint:
                        return True
                elif value is not None:
                    if category in _eval_expr(value, state, taxonomy, script, ctx):
                        return True
                continue
            if isinstance(action, Call):
                state = _bind_call(action, state, registration, graph, taxonomy, script, ctx)
            else:
                state = propagate(state, action, taxonomy, script, ctx)
    if finding.sink is None:
        # COLLECTED: the origin action alone must seed the category.
        return any(
            category in state.categories(holder) for holder in state.holders()
        ) or _origin_seeds(finding, by_line, taxonomy, script, ctx)
    return False


def _origin_seeds(
    finding: Finding,
    by_line: dict[int, list[Action]],
    taxonomy: Taxonomy,
    script: SourceFile,
    ctx: MatchContext,
) -> bool:
    for action in by_line.get(finding.source.line, []):
        for chain in _chains_in_action(action):
            for spec, cat in match_source(chain, taxonomy, ctx):
                if cat == finding.category and spec.kind in _COLLECTING_KINDS:
                    return True
    return False


def _chains_in_action(action: Action) -> Iterator[MemberChain]:
    if isinstance(action, Assign):
        yield from _chains_in(action.value)
    elif isinstance(action, Call):
        yield action.callee
        for arg in action.args:
            yield from _chains_in(arg)
    elif isinstance(action, Return) and action.value is not None:
        yield from _chains_in(action.value)


def _bind_call(
    action: Call,
    state: TaintState,
    registration: PageRegistration,
    graph: CallGraph,
    taxonomy: Taxonomy,
    script: SourceFile,
    ctx: MatchContext,
) -> TaintState:
    name = _callee_name(action.callee, registration)
    if name is None:
        return state
    callee = registration.functions[name]
    ev = evidence_at(script, action.span)
    new = state.copy()
    for param, arg in zip(callee.params, action.args):
        taint = _eval_expr(arg, state, taxonomy, script, ctx)
        new.clear(param)
        for cat, trace in taint.items():
            new.seed(param, cat, _extend(trace, ev))
    return new
