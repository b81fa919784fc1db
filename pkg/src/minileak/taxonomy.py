"""Catalog of sensitive categories, taint sources, and sinks.

The builtin tables cover the platform APIs and the pinyin/English identifier
lexicon the rule engine needs out of the box; a line-oriented override file
can add, replace, or remove entries without touching code.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .extract import MemberChain, chain_matches


class SensitiveCategory(Enum):
    SURNAME = "SURNAME"
    GIVEN_NAME = "GIVEN_NAME"
    FULL_NAME = "FULL_NAME"
    NICKNAME = "NICKNAME"
    GENDER = "GENDER"
    BIRTHDATE = "BIRTHDATE"
    BIRTH_TIME = "BIRTH_TIME"
    EMAIL = "EMAIL"
    PHONE = "PHONE"
    WECHAT_ID = "WECHAT_ID"
    OPENID = "OPENID"
    LOCATION = "LOCATION"
    ADDRESS = "ADDRESS"
    PAYMENT = "PAYMENT"
    ID_NUMBER = "ID_NUMBER"
    AVATAR = "AVATAR"
    OTHER_PII = "OTHER_PII"

    def __str__(self) -> str:
        return self.value


class Disposition(Enum):
    COLLECTED = "COLLECTED"
    STORED_GLOBAL = "STORED_GLOBAL"
    STORED_LOCAL = "STORED_LOCAL"
    TRANSMITTED = "TRANSMITTED"
    NAV_EXPOSED = "NAV_EXPOSED"

    def __str__(self) -> str:
        return self.value


class SourceKind(Enum):
    API_CALL = "API_CALL"
    FORM_INPUT = "FORM_INPUT"
    GLOBAL_STATE_READ = "GLOBAL_STATE_READ"
    IDENT_HEURISTIC = "IDENT_HEURISTIC"


class SinkKind(Enum):
    NETWORK = "NETWORK"
    STORAGE = "STORAGE"
    GLOBAL_STATE_WRITE = "GLOBAL_STATE_WRITE"
    NAV_PARAM = "NAV_PARAM"


# Default confidences, ordered by evidence strength.
API_CALL_CONFIDENCE = 0.95
GLOBAL_READ_CONFIDENCE = 0.9
FORM_INPUT_CONFIDENCE = 0.85
IDENT_CONFIDENCE = 0.6


@dataclass(frozen=True)
class SourceSpec:
    kind: SourceKind
    pattern: str  # chain pattern, or a bare lexeme for IDENT_HEURISTIC
    category: SensitiveCategory
    base_confidence: float
    requires_context: bool = False  # only fires when the page looks PII-adjacent
    category_from_ident: bool = False  # refine category via the ident lexicon

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError("source pattern must be non-empty")
        if not 0.0 <= self.base_confidence <= 1.0:
            raise ValueError(f"base_confidence out of range: {self.base_confidence}")


@dataclass(frozen=True)
class SinkSpec:
    kind: SinkKind
    pattern: str
    disposition: Disposition

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError("sink pattern must be non-empty")


@dataclass(frozen=True)
class MatchContext:
    """Per-registration facts that gate the weaker heuristics."""

    birth_context: bool = False


@dataclass(frozen=True)
class Taxonomy:
    sources: tuple[SourceSpec, ...]
    sinks: tuple[SinkSpec, ...]
    form_value_patterns: tuple[str, ...] = ("*.detail.value",)
    version: int = 1

    def __post_init__(self) -> None:
        seen = set()
        for s in self.sources:
            key = (s.kind, s.pattern, s.category)
            if key in seen:
                raise ValueError(f"duplicate source entry {key}")
            seen.add(key)

    def ident_lookup(self, name: str) -> Optional[SourceSpec]:
        """Case-insensitive lexicon hit for a variable name or chain segment."""
        low = name.lower()
        for s in self.sources:
            if s.kind is SourceKind.IDENT_HEURISTIC and s.pattern.lower() == low:
                return s
        return None


_IDENT_LEXICON: tuple[tuple[str, SensitiveCategory, bool], ...] = (
    # (lexeme, category, requires_context)
    ("xing", SensitiveCategory.SURNAME, False),
    ("surname", SensitiveCategory.SURNAME, False),
    ("lastname", SensitiveCategory.SURNAME, False),
    ("ming", SensitiveCategory.GIVEN_NAME, False),
    ("firstname", SensitiveCategory.GIVEN_NAME, False),
    ("name", SensitiveCategory.FULL_NAME, False),
    ("username", SensitiveCategory.FULL_NAME, False),
    ("fullname", SensitiveCategory.FULL_NAME, False),
    ("realname", SensitiveCategory.FULL_NAME, False),
    ("nickname", SensitiveCategory.NICKNAME, False),
    ("sex", SensitiveCategory.GENDER, False),
    ("gender", SensitiveCategory.GENDER, False),
    ("birthday", SensitiveCategory.BIRTHDATE, False),
    ("birthdate", SensitiveCategory.BIRTHDATE, False),
    ("dob", SensitiveCategory.BIRTHDATE, False),
    ("date", SensitiveCategory.BIRTHDATE, True),
    ("time", SensitiveCategory.BIRTH_TIME, True),
    ("hour", SensitiveCategory.BIRTH_TIME, True),
    ("minute", SensitiveCategory.BIRTH_TIME, True),
    ("email", SensitiveCategory.EMAIL, False),
    ("phone", SensitiveCategory.PHONE, False),
    ("mobile", SensitiveCategory.PHONE, False),
    ("tel", SensitiveCategory.PHONE, False),
    ("telephone", SensitiveCategory.PHONE, False),
    ("wechat", SensitiveCategory.WECHAT_ID, False),
    ("weixin", SensitiveCategory.WECHAT_ID, False),
    ("openid", SensitiveCategory.OPENID, False),
    ("address", SensitiveCategory.ADDRESS, False),
    ("location", SensitiveCategory.LOCATION, False),
    ("idcard", SensitiveCategory.ID_NUMBER, False),
    ("idnumber", SensitiveCategory.ID_NUMBER, False),
    ("avatar", SensitiveCategory.AVATAR, False),
    ("avatarurl", SensitiveCategory.AVATAR, False),
)


def builtin_taxonomy() -> Taxonomy:
    sources: list[SourceSpec] = [
        SourceSpec(SourceKind.API_CALL, "wx.getUserInfo", SensitiveCategory.NICKNAME, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.getUserProfile", SensitiveCategory.NICKNAME, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.getLocation", SensitiveCategory.LOCATION, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.chooseLocation", SensitiveCategory.LOCATION, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.chooseAddress", SensitiveCategory.ADDRESS, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.login", SensitiveCategory.OPENID, API_CALL_CONFIDENCE),
        SourceSpec(SourceKind.API_CALL, "wx.requestPayment", SensitiveCategory.PAYMENT, API_CALL_CONFIDENCE),
        SourceSpec(
            SourceKind.GLOBAL_STATE_READ,
            "getApp().globalData.userInfo.nickName",
            SensitiveCategory.NICKNAME,
            GLOBAL_READ_CONFIDENCE,
        ),
        SourceSpec(
            SourceKind.GLOBAL_STATE_READ,
            "getApp().globalData.userInfo.avatarUrl",
            SensitiveCategory.AVATAR,
            GLOBAL_READ_CONFIDENCE,
        ),
        SourceSpec(
            SourceKind.GLOBAL_STATE_READ,
            "getApp().globalData.userInfo.**",
            SensitiveCategory.OTHER_PII,
            GLOBAL_READ_CONFIDENCE,
            category_from_ident=True,
        ),
        SourceSpec(
            SourceKind.GLOBAL_STATE_READ,
            "getApp().globalData.openid",
            SensitiveCategory.OPENID,
            GLOBAL_READ_CONFIDENCE,
        ),
    ]
    sources.extend(
        SourceSpec(SourceKind.IDENT_HEURISTIC, lexeme, category, IDENT_CONFIDENCE, requires_context=gated)
        for lexeme, category, gated in _IDENT_LEXICON
    )
    sinks = (
        SinkSpec(SinkKind.NETWORK, "wx.request", Disposition.TRANSMITTED),
        SinkSpec(SinkKind.NETWORK, "wx.uploadFile", Disposition.TRANSMITTED),
        SinkSpec(SinkKind.STORAGE, "wx.setStorage", Disposition.STORED_LOCAL),
        SinkSpec(SinkKind.STORAGE, "wx.setStorageSync", Disposition.STORED_LOCAL),
        SinkSpec(SinkKind.GLOBAL_STATE_WRITE, "getApp().globalData.**", Disposition.STORED_GLOBAL),
        SinkSpec(SinkKind.NAV_PARAM, "wx.navigateTo", Disposition.NAV_EXPOSED),
        SinkSpec(SinkKind.NAV_PARAM, "wx.redirectTo", Disposition.NAV_EXPOSED),
    )
    return Taxonomy(tuple(sources), sinks)


# ---------------------------------------------------------------------------
# Matching


def match_source(
    chain_or_ident: Union[MemberChain, str],
    taxonomy: Taxonomy,
    context: Optional[MatchContext] = None,
) -> list[tuple[SourceSpec, SensitiveCategory]]:
    """All source matches for a chain or bare identifier, taxonomy order.

    Chain-pattern sources come first, then form-input reads synthesized from
    the ident lexicon, then plain ident-lexicon hits on the final segment.
    Ident matching is case-insensitive; gated lexemes fire only when the
    context says the registration already handles person data.
    """
    ctx = context or MatchContext()
    out: list[tuple[SourceSpec, SensitiveCategory]] = []
    if isinstance(chain_or_ident, str):
        spec = _ident_hit(chain_or_ident, taxonomy, ctx)
        return [(spec, spec.category)] if spec else []

    chain = chain_or_ident
    for spec in taxonomy.sources:
        if spec.kind not in (SourceKind.API_CALL, SourceKind.GLOBAL_STATE_READ):
            continue
        if chain_matches(chain, spec.pattern):
            category = spec.category
            if spec.category_from_ident:
                refined = _ident_hit(chain.final, taxonomy, ctx)
                if refined is None:
                    # Classify generic profile reads only through the
                    # lexicon; a fixed fallback category would break
                    # taxonomy-growth monotonicity.
                    continue
                category = refined.category
            out.append((spec, category))

    if len(chain) >= 2:
        prefix = MemberChain(chain.segments[:-1], chain.span)
        for pattern in taxonomy.form_value_patterns:
            if not chain_matches(prefix, pattern):
                continue
            hit = _ident_hit(chain.final, taxonomy, ctx)
            if hit and not chain.segments[-1][1]:
                synthesized = SourceSpec(
                    SourceKind.FORM_INPUT,
                    f"{pattern}.{hit.pattern}",
                    hit.category,
                    FORM_INPUT_CONFIDENCE,
                    requires_context=hit.requires_context,
                )
                out.append((synthesized, hit.category))
            break

    ident = _ident_hit(chain.final, taxonomy, ctx)
    if ident and not chain.segments[-1][1]:
        out.append((ident, ident.category))
    return out


def _ident_hit(name: str, taxonomy: Taxonomy, ctx: MatchContext) -> Optional[SourceSpec]:
    spec = taxonomy.ident_lookup(name)
    if spec is None:
        return None
    if spec.requires_context and not ctx.birth_context:
        return None
    return spec


_CALL_SINK_KINDS = (SinkKind.NETWORK, SinkKind.STORAGE, SinkKind.NAV_PARAM)


def match_sink(
    chain: MemberChain,
    taxonomy: Taxonomy,
    position: str = "call",
) -> Optional[SinkSpec]:
    """First sink spec matching a call site ("call") or assign target ("assign")."""
    for spec in taxonomy.sinks:
        if position == "call" and spec.kind not in _CALL_SINK_KINDS:
            continue
        if position == "assign" and spec.kind is not SinkKind.GLOBAL_STATE_WRITE:
            continue
        if chain_matches(chain, spec.pattern):
            return spec
    return None


# ---------------------------------------------------------------------------
# Override files


class OverrideParse(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


def load_overrides(path: Union[str, Path], base: Taxonomy) -> Taxonomy:
    """Apply a line-oriented override file on top of `base`.

    Records, one per line:
        source <kind> <pattern> <CATEGORY> [confidence]
        sink <kind> <pattern> <DISPOSITION>
        remove source|sink <kind> <pattern>
    `#` starts a comment. Source/sink lines replace any existing entry with
    the same (kind, pattern); remove lines delete them.
    """
    sources = list(base.sources)
    sinks = list(base.sinks)
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0].lower()
        try:
            if head == "source":
                spec = _parse_source_line(parts, line_no)
                sources = [
                    s for s in sources if not (s.kind is spec.kind and s.pattern == spec.pattern)
                ]
                sources.append(spec)
            elif head == "sink":
                spec = _parse_sink_line(parts, line_no)
                sinks = [
                    s for s in sinks if not (s.kind is spec.kind and s.pattern == spec.pattern)
                ]
                sinks.append(spec)
            elif head == "remove":
                if len(parts) != 4 or parts[1].lower() not in ("source", "sink"):
                    raise OverrideParse(line_no, f"malformed remove record: {raw!r}")
                if parts[1].lower() == "source":
                    kind = _enum_value(SourceKind, parts[2], line_no)
                    sources = [
                        s for s in sources if not (s.kind is kind and s.pattern == parts[3])
                    ]
                else:
                    kind = _enum_value(SinkKind, parts[2], line_no)
                    sinks = [s for s in sinks if not (s.kind is kind and s.pattern == parts[3])]
            else:
                raise OverrideParse(line_no, f"unknown record type {parts[0]!r}")
        except OverrideParse:
            raise
        except ValueError as exc:
            raise OverrideParse(line_no, str(exc)) from exc
    return replace(base, sources=tuple(sources), sinks=tuple(sinks), version=base.version + 1)


def _parse_source_line(parts: list[str], line_no: int) -> SourceSpec:
    if len(parts) not in (4, 5):
        raise OverrideParse(line_no, "source records take 4 or 5 fields")
    kind = _enum_value(SourceKind, parts[1], line_no)
    category = _enum_value(SensitiveCategory, parts[3], line_no)
    confidence = _DEFAULT_CONFIDENCE[kind]
    if len(parts) == 5:
        try:
            confidence = float(parts[4])
        except ValueError:
            raise OverrideParse(line_no, f"bad confidence {parts[4]!r}")
        if not 0.0 <= confidence <= 1.0:
            raise OverrideParse(line_no, f"confidence out of range: {confidence}")
    return SourceSpec(kind, parts[2], category, confidence)


def _parse_sink_line(parts: list[str], line_no: int) -> SinkSpec:
    if len(parts) != 4:
        raise OverrideParse(line_no, "sink records take 4 fields")
    kind = _enum_value(SinkKind, parts[1], line_no)
    disposition = _enum_value(Disposition, parts[3], line_no)
    return SinkSpec(kind, parts[2], disposition)


def _enum_value(enum_cls, raw: str, line_no: int):
    try:
        return enum_cls[raw.upper()]
    except KeyError:
        raise OverrideParse(line_no, f"unknown {enum_cls.__name__} {raw!r}")


_DEFAULT_CONFIDENCE = {
    SourceKind.API_CALL: API_CALL_CONFIDENCE,
    SourceKind.GLOBAL_STATE_READ: GLOBAL_READ_CONFIDENCE,
    SourceKind.FORM_INPUT: FORM_INPUT_CONFIDENCE,
    SourceKind.IDENT_HEURISTIC: IDENT_CONFIDENCE,
}
