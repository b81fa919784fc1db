"""Tolerant lexer and structural extractor for the mini-app script dialect.

The goal is not to parse ECMAScript. Page scripts are mined for the handful
of shapes the taint engine consumes: ``Page({...})``/``App({...})``
registrations, ``require`` imports, data fields, handler functions, and the
statement forms inside them (var declarations, chain assignments, calls,
if/else, return). Everything else is skipped and accounted for as a
``ParseGap`` so soundness stays auditable. Lexing is lossless: every
non-whitespace character of the input lands in exactly one token's lexeme.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Union


class TokenKind(Enum):
    IDENT = "IDENT"
    STRING = "STRING"
    NUMBER = "NUMBER"
    PUNCT = "PUNCT"
    KEYWORD = "KEYWORD"
    COMMENT = "COMMENT"
    NEWLINE = "NEWLINE"


KEYWORDS = frozenset(
    """var let const function if else return for while do switch case default
    break continue new typeof delete in of instanceof try catch finally throw
    this true false null undefined void with class extends super yield async
    await""".split()
)

# Longest first so the scanner is greedy.
_PUNCT_MULTI = (
    "===", "!==", ">>>=", "**=", "<<=", ">>=", "&&=", "||=", "??=", ">>>",
    "...", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "=>", "**", "<<", ">>", "??", "?.",
)

_IDENT_RE = re.compile(r"[A-Za-z_$-\U0010ffff][A-Za-z0-9_$-\U0010ffff]*")
_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F]+|0[oO][0-7]+|0[bB][01]+"
    r"|\d+(?:\.\d*)?(?:[eE][+-]?\d+)?"
    r"|\.\d+(?:[eE][+-]?\d+)?"
)
_WHITESPACE = " \t\r\f\v"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    line: int  # 1-based
    col: int  # 1-based
    offset: int  # char offset into the source

    @property
    def end(self) -> int:
        return self.offset + len(self.lexeme)


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int  # 1-based line of `start`

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


def tokenize(text: str) -> list[Token]:
    """Lex `text` into a lossless token stream.

    Never fails: characters that fit no rule become single-char PUNCT
    tokens. Comments and newlines are kept as tokens; only spaces, tabs and
    carriage returns are skipped (the only bytes not inside some lexeme).
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def emit(kind: TokenKind, lexeme: str) -> None:
        nonlocal i, line, col
        tokens.append(Token(kind, lexeme, line, col, i))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        i += len(lexeme)

    while i < n:
        c = text[i]
        if c == "\n":
            emit(TokenKind.NEWLINE, "\n")
            continue
        if c in _WHITESPACE:
            i += 1
            col += 1
            continue
        if c == "/" and text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end < 0 else end
            emit(TokenKind.COMMENT, text[i:end])
            continue
        if c == "/" and text.startswith("/*", i):
            close = text.find("*/", i + 2)
            end = n if close < 0 else close + 2
            emit(TokenKind.COMMENT, text[i:end])
            continue
        if c in "'\"`":
            emit(TokenKind.STRING, _scan_string(text, i))
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER_RE.match(text, i)
            if m:
                emit(TokenKind.NUMBER, m.group())
                continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group()
            kind = TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENT
            emit(kind, word)
            continue
        for op in _PUNCT_MULTI:
            if text.startswith(op, i):
                emit(TokenKind.PUNCT, op)
                break
        else:
            emit(TokenKind.PUNCT, c)
    return tokens


def _scan_string(text: str, start: int) -> str:
    """Scan a quoted string starting at `start`.

    Quote/double-quote strings stop at an unescaped closing quote, end of
    line, or EOF (unterminated strings are tolerated). Backticks may span
    lines.
    """
    quote = text[start]
    i = start + 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\\" and i + 1 < n:
            i += 2
            continue
        if c == quote:
            return text[start : i + 1]
        if c == "\n" and quote != "`":
            return text[start:i]
        i += 1
    return text[start:]


# ---------------------------------------------------------------------------
# Structural model


@dataclass(frozen=True)
class MemberChain:
    """A dotted access path like getApp().globalData.userInfo.nickName.

    Each segment is (name, is_call). Callee chains produced for Call/CallExpr
    carry is_call=False on the final segment; the call itself lives in the
    surrounding node.
    """

    segments: tuple[tuple[str, bool], ...]
    span: Span

    def render(self) -> str:
        return ".".join(n + "()" if c else n for n, c in self.segments)

    @property
    def root(self) -> str:
        return self.segments[0][0]

    @property
    def final(self) -> str:
        return self.segments[-1][0]

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class StringLit:
    value: str
    span: Span


@dataclass(frozen=True)
class NumberLit:
    raw: str
    span: Span


@dataclass(frozen=True)
class Concat:
    parts: tuple["Expr", ...]
    span: Span


@dataclass(frozen=True)
class ObjectLit(Concat):
    """Object literal, collapsed to the union of its field values.

    Taint treats it exactly like a Concat of the values (field-insensitive);
    `entries` keeps the keys for the setData desugaring.
    """

    entries: tuple[tuple[str, "Expr"], ...] = ()


@dataclass(frozen=True)
class CallExpr:
    callee: MemberChain
    args: tuple["Expr", ...]
    span: Span


@dataclass(frozen=True)
class Unknown:
    span: Span


Expr = Union[MemberChain, StringLit, NumberLit, Concat, CallExpr, Unknown]


@dataclass(frozen=True)
class Assign:
    target: MemberChain
    value: Expr
    span: Span


@dataclass(frozen=True)
class Call:
    callee: MemberChain
    args: tuple[Expr, ...]
    span: Span


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]
    span: Span


@dataclass(frozen=True)
class Branch:
    then_actions: tuple["Action", ...]
    else_actions: tuple["Action", ...]
    span: Span


Action = Union[Assign, Call, Return, Branch]


class LiteralKind(Enum):
    STRING = "STRING"
    NUMBER = "NUMBER"
    BOOLEAN = "BOOLEAN"
    NULL = "NULL"
    ARRAY = "ARRAY"
    OBJECT = "OBJECT"
    OTHER = "OTHER"


@dataclass(frozen=True)
class LiteralInfo:
    kind: LiteralKind
    raw: str
    span: Span


@dataclass(frozen=True)
class FunctionModel:
    name: str
    params: tuple[str, ...]
    actions: tuple[Action, ...]
    span: Span  # whole function literal
    body_span: Span  # inside the braces


class RegistrationKind(Enum):
    PAGE = "PAGE"
    APP = "APP"


@dataclass(frozen=True)
class PageRegistration:
    kind: RegistrationKind
    data_fields: dict[str, LiteralInfo]
    functions: dict[str, FunctionModel]
    span: Span  # the Page(/App( call


@dataclass(frozen=True)
class ScriptModel:
    requires: tuple[tuple[str, str], ...]  # (local name, module path)
    registrations: tuple[PageRegistration, ...]
    markers: tuple[str, ...] = ()


NO_REGISTRATION = "NoRegistrationFound"


@dataclass(frozen=True)
class ParseGap:
    span: Span
    reason: str


class _Cursor:
    """Iterator over significant tokens (comments/newlines skipped) that can
    still answer whether a line break preceded a token."""

    def __init__(self, tokens: list[Token], text: str):
        self.text = text
        self.toks: list[Token] = []
        self.nl_before: list[bool] = []
        pending_nl = False
        for t in tokens:
            if t.kind is TokenKind.NEWLINE:
                pending_nl = True
            elif t.kind is TokenKind.COMMENT:
                pending_nl = pending_nl or "\n" in t.lexeme
            else:
                self.toks.append(t)
                self.nl_before.append(pending_nl)
                pending_nl = False
        self.i = 0

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def peek(self, k: int = 0) -> Optional[Token]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def newline_before(self, k: int = 0) -> bool:
        j = self.i + k
        return self.nl_before[j] if j < len(self.nl_before) else True

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def match_punct(self, *ops: str) -> Optional[Token]:
        t = self.peek()
        if t and t.kind is TokenKind.PUNCT and t.lexeme in ops:
            return self.advance()
        return None

    def match_keyword(self, *words: str) -> Optional[Token]:
        t = self.peek()
        if t and t.kind is TokenKind.KEYWORD and t.lexeme in words:
            return self.advance()
        return None

    def span_from(self, start_tok: Token, end_tok: Optional[Token] = None) -> Span:
        last = end_tok or (self.toks[self.i - 1] if self.i else start_tok)
        return Span(start_tok.offset, last.end, start_tok.line)


_OPEN_FOR = {"(": ")", "{": "}", "[": "]"}
_CLOSERS = {")", "}", "]"}


class _Parser:
    def __init__(self, tokens: list[Token], text: str):
        self.c = _Cursor(tokens, text)
        self.text = text
        self.gaps: list[ParseGap] = []

    # -- helpers ------------------------------------------------------------

    def _gap(self, start: Token, end: Token, reason: str) -> None:
        self.gaps.append(ParseGap(Span(start.offset, end.end, start.line), reason))

    def skip_balanced(self, stop_at_comma: bool = False) -> Span:
        """Consume tokens until the demarking close/comma at depth 0.

        Used for regions we deliberately do not model (condition expressions,
        unknown property values). The caller records the gap if one is due.
        """
        c = self.c
        start = c.peek()
        depth = 0
        last = start
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if depth == 0 and t.kind is TokenKind.PUNCT:
                if t.lexeme in _CLOSERS:
                    break
                if stop_at_comma and t.lexeme == ",":
                    break
            if t.kind is TokenKind.PUNCT:
                if t.lexeme in _OPEN_FOR:
                    depth += 1
                elif t.lexeme in _CLOSERS:
                    depth -= 1
            last = c.advance()
        if start is None or last is None:
            pos = len(self.text)
            return Span(pos, pos, 1)
        return Span(start.offset, last.end, start.line)

    def skip_group(self) -> Span:
        """Consume a bracketed group starting at the current open token."""
        c = self.c
        open_tok = c.advance()
        closer = _OPEN_FOR[open_tok.lexeme]
        depth = 1
        last = open_tok
        while not c.at_end():
            t = c.advance()
            last = t
            if t.kind is TokenKind.PUNCT:
                if t.lexeme in _OPEN_FOR:
                    depth += 1
                elif t.lexeme in _CLOSERS:
                    depth -= 1
                    if depth == 0 and t.lexeme == closer:
                        break
        return Span(open_tok.offset, last.end, open_tok.line)

    # -- expressions ---------------------------------------------------------

    def parse_chain(self) -> Optional[MemberChain]:
        c = self.c
        head = c.peek()
        if head is None:
            return None
        if not (
            head.kind is TokenKind.IDENT
            or (head.kind is TokenKind.KEYWORD and head.lexeme in ("this",))
        ):
            return None
        c.advance()
        segments: list[tuple[str, bool]] = [(head.lexeme, False)]
        last = head
        while True:
            t = c.peek()
            if t is None or t.kind is not TokenKind.PUNCT:
                break
            if t.lexeme == "(" and not c.newline_before():
                # Call parens belong to the chain *segment* only when more
                # chain follows; a trailing call is the caller's business.
                nxt = self._peek_after_group()
                if nxt is not None and nxt.kind is TokenKind.PUNCT and nxt.lexeme == ".":
                    span = self.skip_group()
                    name, _ = segments[-1]
                    segments[-1] = (name, True)
                    last = c.toks[c.i - 1]
                    continue
                break
            if t.lexeme == "." and c.peek(1) is not None and c.peek(1).kind in (
                TokenKind.IDENT,
                TokenKind.KEYWORD,
            ):
                c.advance()
                seg = c.advance()
                segments.append((seg.lexeme, False))
                last = seg
                continue
            break
        return MemberChain(tuple(segments), Span(head.offset, last.end, head.line))

    def _peek_after_group(self) -> Optional[Token]:
        """Token right after the balanced group opening at the cursor."""
        c = self.c
        depth = 0
        j = c.i
        while j < len(c.toks):
            t = c.toks[j]
            if t.kind is TokenKind.PUNCT:
                if t.lexeme in _OPEN_FOR:
                    depth += 1
                elif t.lexeme in _CLOSERS:
                    depth -= 1
                    if depth == 0:
                        return c.toks[j + 1] if j + 1 < len(c.toks) else None
            j += 1
        return None

    def parse_args(self) -> tuple[tuple[Expr, ...], Span]:
        c = self.c
        open_tok = c.advance()  # '('
        args: list[Expr] = []
        last = open_tok
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if t.kind is TokenKind.PUNCT and t.lexeme == ")":
                last = c.advance()
                break
            expr = self.parse_expr(stop_at_comma=True)
            args.append(expr)
            if c.match_punct(","):
                continue
            t = c.peek()
            if t is not None and t.kind is TokenKind.PUNCT and t.lexeme == ")":
                last = c.advance()
                break
            # Unbalanced junk inside the arg list: bail to the close paren.
            span = self.skip_balanced()
            args.append(Unknown(span))
            closing = c.match_punct(")")
            last = closing or (c.toks[c.i - 1] if c.i else open_tok)
            break
        return tuple(args), Span(open_tok.offset, last.end, open_tok.line)

    def parse_object_literal(self) -> ObjectLit:
        c = self.c
        open_tok = c.advance()  # '{'
        entries: list[tuple[str, Expr]] = []
        last = open_tok
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if t.kind is TokenKind.PUNCT and t.lexeme == "}":
                last = c.advance()
                break
            if c.match_punct(","):
                continue
            key_tok = c.peek()
            colon = c.peek(1)
            if (
                key_tok is not None
                and key_tok.kind in (TokenKind.IDENT, TokenKind.STRING, TokenKind.NUMBER, TokenKind.KEYWORD)
                and colon is not None
                and colon.kind is TokenKind.PUNCT
                and colon.lexeme == ":"
            ):
                c.advance()
                c.advance()
                key = key_tok.lexeme
                if key_tok.kind is TokenKind.STRING:
                    key = _string_value(key)
                value = self.parse_expr(stop_at_comma=True)
                entries.append((key, value))
                last = c.toks[c.i - 1]
                continue
            # Shorthand property, spread, or junk: consume up to , or }
            before = c.i
            span = self.skip_balanced(stop_at_comma=True)
            if c.i == before:  # stuck on a stray closer
                stray = c.advance()
                span = Span(stray.offset, stray.end, stray.line)
            entries.append(("", Unknown(span)))
            last = c.toks[c.i - 1] if c.i else open_tok
        span = Span(open_tok.offset, last.end, open_tok.line)
        return ObjectLit(tuple(e for _, e in entries), span, tuple(entries))

    def parse_primary(self, stop_at_comma: bool) -> Expr:
        c = self.c
        t = c.peek()
        assert t is not None
        if t.kind is TokenKind.STRING:
            c.advance()
            return StringLit(_string_value(t.lexeme), Span(t.offset, t.end, t.line))
        if t.kind is TokenKind.NUMBER:
            c.advance()
            return NumberLit(t.lexeme, Span(t.offset, t.end, t.line))
        if t.kind is TokenKind.PUNCT and t.lexeme == "{":
            return self.parse_object_literal()
        if t.kind is TokenKind.PUNCT and t.lexeme == "[":
            span = self.skip_group()
            return Unknown(span)
        if t.kind is TokenKind.PUNCT and t.lexeme == "(":
            span = self.skip_group()
            return Unknown(span)
        if t.kind is TokenKind.KEYWORD and t.lexeme == "function":
            span = self._skip_function_literal()
            self.gaps.append(ParseGap(span, "function-expression"))
            return Unknown(span)
        if t.kind is TokenKind.KEYWORD and t.lexeme == "new":
            c.advance()
            inner = self.parse_primary(stop_at_comma)
            return inner
        if t.kind is TokenKind.KEYWORD and t.lexeme in ("true", "false", "null", "undefined"):
            c.advance()
            return Unknown(Span(t.offset, t.end, t.line))
        if t.kind is TokenKind.PUNCT and t.lexeme in ("!", "-", "+", "~"):
            c.advance()
            operand = self.parse_primary(stop_at_comma)
            return Unknown(Span(t.offset, _expr_span(operand).end, t.line))
        if t.kind is TokenKind.KEYWORD and t.lexeme == "typeof":
            c.advance()
            operand = self.parse_primary(stop_at_comma)
            return Unknown(Span(t.offset, _expr_span(operand).end, t.line))
        chain = self.parse_chain()
        if chain is not None:
            return self._parse_postfix(chain)
        # Nothing recognizable: swallow one token.
        c.advance()
        return Unknown(Span(t.offset, t.end, t.line))

    def _parse_postfix(self, chain: MemberChain) -> Expr:
        c = self.c
        expr: Expr = chain
        while True:
            t = c.peek()
            if t is None or t.kind is not TokenKind.PUNCT:
                break
            if t.lexeme == "(" and not c.newline_before() and isinstance(expr, MemberChain):
                args, args_span = self.parse_args()
                expr = CallExpr(expr, args, Span(expr.span.start, args_span.end, expr.span.line))
                continue
            if t.lexeme == "[" and not c.newline_before():
                idx_span = self.skip_group()
                # A literal index is a pure view of the receiver; the result
                # keeps the receiver's taint unchanged.
                expr = _respan(expr, Span(_expr_span(expr).start, idx_span.end, _expr_span(expr).line))
                continue
            if t.lexeme == "." and isinstance(expr, CallExpr):
                # Method chain off a call result, e.g. f(x).trim(): model as
                # a derived value of the call.
                c.advance()
                if c.peek() is not None and c.peek().kind in (TokenKind.IDENT, TokenKind.KEYWORD):
                    c.advance()
                continue
            break
        return expr

    _BINOPS = frozenset(
        ("-", "*", "/", "%", "==", "===", "!=", "!==", "<", ">", "<=", ">=",
         "&&", "||", "??", "&", "|", "^", "<<", ">>", ">>>")
    )

    def parse_expr(self, stop_at_comma: bool = False) -> Expr:
        left = self.parse_primary(stop_at_comma)
        parts = [left]
        degraded = False
        while True:
            t = self.c.peek()
            if t is None:
                break
            if t.kind is TokenKind.PUNCT and t.lexeme == "+" and not self.c.newline_before():
                self.c.advance()
                parts.append(self.parse_primary(stop_at_comma))
                continue
            if t.kind is TokenKind.PUNCT and t.lexeme in self._BINOPS and not self.c.newline_before():
                self.c.advance()
                parts.append(self.parse_primary(stop_at_comma))
                degraded = True
                continue
            if t.kind is TokenKind.KEYWORD and t.lexeme in ("in", "instanceof") and not self.c.newline_before():
                self.c.advance()
                parts.append(self.parse_primary(stop_at_comma))
                degraded = True
                continue
            if t.kind is TokenKind.PUNCT and t.lexeme == "?" and not self.c.newline_before():
                self.c.advance()
                parts.append(self.parse_expr(stop_at_comma=False))
                if self.c.match_punct(":"):
                    parts.append(self.parse_expr(stop_at_comma=stop_at_comma))
                degraded = True
                continue
            break
        if len(parts) == 1:
            return left
        span = Span(_expr_span(parts[0]).start, _expr_span(parts[-1]).end, _expr_span(parts[0]).line)
        if degraded:
            return Unknown(span)
        flat: list[Expr] = []
        for p in parts:
            if isinstance(p, Concat) and not isinstance(p, ObjectLit):
                flat.extend(p.parts)
            else:
                flat.append(p)
        return Concat(tuple(flat), span)

    def _skip_function_literal(self) -> Span:
        c = self.c
        start = c.advance()  # 'function'
        if c.peek() is not None and c.peek().kind is TokenKind.IDENT:
            c.advance()
        last_span = Span(start.offset, start.end, start.line)
        if c.peek() is not None and c.peek().kind is TokenKind.PUNCT and c.peek().lexeme == "(":
            last_span = self.skip_group()
        if c.peek() is not None and c.peek().kind is TokenKind.PUNCT and c.peek().lexeme == "{":
            last_span = self.skip_group()
        return Span(start.offset, last_span.end, start.line)

    # -- statements ----------------------------------------------------------

    def parse_block_actions(self) -> tuple[tuple[Action, ...], Span]:
        """Parse `{ ... }` starting at the open brace."""
        c = self.c
        open_tok = c.advance()
        actions: list[Action] = []
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if t.kind is TokenKind.PUNCT and t.lexeme == "}":
                close = c.advance()
                return tuple(actions), Span(open_tok.offset, close.end, open_tok.line)
            before = c.i
            stmt = self.parse_statement()
            if stmt is not None:
                actions.append(stmt)
            if c.i == before:  # stuck on a stray closer
                stray = c.advance()
                self._gap(stray, stray, "stray-token")
        end = c.toks[-1].end if c.toks else open_tok.end
        return tuple(actions), Span(open_tok.offset, end, open_tok.line)

    def parse_statement(self) -> Optional[Action]:
        c = self.c
        t = c.peek()
        assert t is not None
        if t.kind is TokenKind.PUNCT and t.lexeme == ";":
            c.advance()
            return None
        if t.kind is TokenKind.KEYWORD:
            if t.lexeme in ("var", "let", "const"):
                return self.parse_var_statement()
            if t.lexeme == "if":
                return self.parse_if_statement()
            if t.lexeme == "return":
                return self.parse_return_statement()
            if t.lexeme in ("for", "while", "do", "switch", "try", "throw", "with"):
                self.recover_statement(f"unsupported-statement:{t.lexeme}")
                return None
            if t.lexeme == "this":
                return self.parse_chain_statement()
            self.recover_statement(f"unsupported-statement:{t.lexeme}")
            return None
        if t.kind is TokenKind.IDENT:
            return self.parse_chain_statement()
        self.recover_statement("unrecognized-statement")
        return None

    def parse_var_statement(self) -> Optional[Action]:
        c = self.c
        kw = c.advance()
        assigns: list[Assign] = []
        while True:
            name_tok = c.peek()
            if name_tok is None or name_tok.kind is not TokenKind.IDENT:
                self.recover_statement("malformed-var")
                break
            c.advance()
            target = MemberChain(
                ((name_tok.lexeme, False),), Span(name_tok.offset, name_tok.end, name_tok.line)
            )
            if c.match_punct("="):
                value = self.parse_expr(stop_at_comma=True)
            else:
                value = Unknown(Span(name_tok.offset, name_tok.end, name_tok.line))
            end = c.toks[c.i - 1] if c.i else name_tok
            assigns.append(Assign(target, value, Span(kw.offset, end.end, kw.line)))
            if c.match_punct(","):
                continue
            break
        c.match_punct(";")
        if not assigns:
            return None
        if len(assigns) == 1:
            return assigns[0]
        # Multiple declarators fold into a Branch-free sequence; model the
        # rare multi-declarator line as nested single assigns via Branch with
        # an empty else (keeps Action a closed union).
        span = Span(assigns[0].span.start, assigns[-1].span.end, assigns[0].span.line)
        return Branch(tuple(assigns), (), span)

    def parse_if_statement(self) -> Action:
        c = self.c
        kw = c.advance()
        if c.peek() is not None and c.peek().kind is TokenKind.PUNCT and c.peek().lexeme == "(":
            self.skip_group()  # condition abstracted away
        then_actions: tuple[Action, ...] = ()
        if c.peek() is not None and c.peek().kind is TokenKind.PUNCT and c.peek().lexeme == "{":
            then_actions, _ = self.parse_block_actions()
        else:
            stmt = self.parse_statement() if not c.at_end() else None
            then_actions = (stmt,) if stmt is not None else ()
        else_actions: tuple[Action, ...] = ()
        if c.match_keyword("else"):
            nxt = c.peek()
            if nxt is not None and nxt.kind is TokenKind.KEYWORD and nxt.lexeme == "if":
                nested = self.parse_if_statement()
                else_actions = (nested,)
            elif nxt is not None and nxt.kind is TokenKind.PUNCT and nxt.lexeme == "{":
                else_actions, _ = self.parse_block_actions()
            else:
                stmt = self.parse_statement() if not c.at_end() else None
                else_actions = (stmt,) if stmt is not None else ()
        end = c.toks[c.i - 1] if c.i else kw
        return Branch(then_actions, else_actions, Span(kw.offset, end.end, kw.line))

    def parse_return_statement(self) -> Action:
        c = self.c
        kw = c.advance()
        nxt = c.peek()
        value: Optional[Expr] = None
        if (
            nxt is not None
            and not c.newline_before()
            and not (nxt.kind is TokenKind.PUNCT and nxt.lexeme in (";", "}"))
        ):
            value = self.parse_expr()
        c.match_punct(";")
        end = c.toks[c.i - 1] if c.i else kw
        return Return(value, Span(kw.offset, end.end, kw.line))

    def parse_chain_statement(self) -> Optional[Action]:
        c = self.c
        start = c.peek()
        assert start is not None
        chain = self.parse_chain()
        if chain is None:
            self.recover_statement("unrecognized-statement")
            return None
        t = c.peek()
        if t is not None and t.kind is TokenKind.PUNCT and t.lexeme == "=":
            c.advance()
            value = self.parse_expr()
            c.match_punct(";")
            end = c.toks[c.i - 1]
            return Assign(chain, value, Span(start.offset, end.end, start.line))
        if t is not None and t.kind is TokenKind.PUNCT and t.lexeme == "+=":
            c.advance()
            value = self.parse_expr()
            c.match_punct(";")
            end = c.toks[c.i - 1]
            concat = Concat((chain, value), Span(start.offset, end.end, start.line))
            return Assign(chain, concat, Span(start.offset, end.end, start.line))
        if t is not None and t.kind is TokenKind.PUNCT and t.lexeme == "(" and not c.newline_before():
            args, args_span = self.parse_args()
            # Swallow any postfix continuation (.then(...), [0], ...).
            tail: Expr = CallExpr(chain, args, Span(start.offset, args_span.end, start.line))
            tail = self._parse_postfix_continue(tail)
            c.match_punct(";")
            end = c.toks[c.i - 1]
            span = Span(start.offset, end.end, start.line)
            setdata = self._desugar_set_data(chain, args, span)
            if setdata is not None:
                return setdata
            return Call(chain, args, span)
        self.recover_statement("expression-statement", from_tok=start)
        return None

    def _parse_postfix_continue(self, expr: Expr) -> Expr:
        c = self.c
        while True:
            t = c.peek()
            if t is None or t.kind is not TokenKind.PUNCT:
                break
            if t.lexeme == "." and c.peek(1) is not None:
                c.advance()
                if c.peek() is not None and c.peek().kind in (TokenKind.IDENT, TokenKind.KEYWORD):
                    c.advance()
                if c.peek() is not None and c.peek().kind is TokenKind.PUNCT and c.peek().lexeme == "(":
                    self.skip_group()
                continue
            if t.lexeme == "[" and not c.newline_before():
                self.skip_group()
                continue
            break
        return expr

    def _desugar_set_data(
        self, chain: MemberChain, args: tuple[Expr, ...], span: Span
    ) -> Optional[Action]:
        """this.setData({k: v, ...}) becomes one page-state assign per key."""
        if len(chain.segments) != 2 or chain.final != "setData":
            return None
        if chain.root not in ("this", "self", "that"):
            return None
        if len(args) != 1 or not isinstance(args[0], ObjectLit):
            return None
        entries = [(k, v) for k, v in args[0].entries if k]
        if not entries:
            return None
        assigns = tuple(
            Assign(
                MemberChain((("data", False), (key, False)), span),
                value,
                span,
            )
            for key, value in entries
        )
        if len(assigns) == 1:
            return assigns[0]
        return Branch(assigns, (), span)

    def recover_statement(self, reason: str, from_tok: Optional[Token] = None) -> None:
        """Skip to a plausible statement boundary and record the gap.

        Leaves a closing bracket at depth 0 for the enclosing construct to
        consume; callers' loops force progress on stray closers themselves.
        """
        c = self.c
        start = from_tok or c.peek()
        if start is None:
            return
        depth = 0
        last = None
        first = True
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if not first and depth == 0:
                if t.kind is TokenKind.PUNCT and t.lexeme == "}":
                    break
                if c.newline_before() and t.kind is TokenKind.KEYWORD and t.lexeme in (
                    "var", "let", "const", "if", "return", "function",
                ):
                    break
            first = False
            closed_block = False
            if t.kind is TokenKind.PUNCT:
                if t.lexeme in _OPEN_FOR:
                    depth += 1
                elif t.lexeme in _CLOSERS:
                    if depth == 0:
                        break
                    depth -= 1
                    closed_block = depth == 0 and t.lexeme == "}"
            last = c.advance()
            if t.kind is TokenKind.PUNCT and t.lexeme == ";" and depth == 0:
                break
            if closed_block:  # a `{...}` block at statement level ends the gap
                break
        if last is None and from_tok is None:
            return  # nothing consumed and nothing to attribute
        self._gap(start, last or start, reason)

    # -- top level -----------------------------------------------------------

    def parse_module(self) -> ScriptModel:
        c = self.c
        requires: list[tuple[str, str]] = []
        registrations: list[PageRegistration] = []
        while not c.at_end():
            t = c.peek()
            assert t is not None
            before = c.i
            if t.kind is TokenKind.PUNCT and t.lexeme == ";":
                c.advance()
                continue
            if t.kind is TokenKind.KEYWORD and t.lexeme in ("var", "let", "const"):
                req = self.parse_top_level_var()
                if req is not None:
                    requires.append(req)
            elif (
                t.kind is TokenKind.IDENT
                and t.lexeme in ("Page", "App")
                and c.peek(1) is not None
                and c.peek(1).kind is TokenKind.PUNCT
                and c.peek(1).lexeme == "("
            ):
                reg = self.parse_registration()
                if reg is not None:
                    registrations.append(reg)
            else:
                self.recover_statement("top-level-statement")
            if c.i == before:  # stray closer at module level
                stray = c.advance()
                self._gap(stray, stray, "stray-token")
        markers = () if registrations else (NO_REGISTRATION,)
        return ScriptModel(tuple(requires), tuple(registrations), markers)

    def parse_top_level_var(self) -> Optional[tuple[str, str]]:
        c = self.c
        kw = c.advance()
        name_tok = c.peek()
        if name_tok is None or name_tok.kind is not TokenKind.IDENT:
            self.recover_statement("malformed-var", from_tok=kw)
            return None
        c.advance()
        if not c.match_punct("="):
            c.match_punct(";")
            return None
        value = self.parse_expr()
        c.match_punct(";")
        if (
            isinstance(value, CallExpr)
            and value.callee.render() == "require"
            and len(value.args) == 1
            and isinstance(value.args[0], StringLit)
        ):
            return (name_tok.lexeme, value.args[0].value)
        end = c.toks[c.i - 1] if c.i else kw
        self._gap(kw, end, "top-level-var")
        return None

    def parse_registration(self) -> Optional[PageRegistration]:
        c = self.c
        name_tok = c.advance()  # Page / App
        kind = RegistrationKind.PAGE if name_tok.lexeme == "Page" else RegistrationKind.APP
        c.advance()  # '('
        t = c.peek()
        if t is None or not (t.kind is TokenKind.PUNCT and t.lexeme == "{"):
            span = self.skip_balanced()
            c.match_punct(")")
            self.gaps.append(ParseGap(span, "registration-argument"))
            end = c.toks[c.i - 1] if c.i else name_tok
            return PageRegistration(kind, {}, {}, Span(name_tok.offset, end.end, name_tok.line))
        c.advance()  # '{'
        data_fields: dict[str, LiteralInfo] = {}
        functions: dict[str, FunctionModel] = {}
        while not c.at_end():
            t = c.peek()
            assert t is not None
            if t.kind is TokenKind.PUNCT and t.lexeme == "}":
                c.advance()
                break
            if c.match_punct(","):
                continue
            before = c.i
            self.parse_registration_property(data_fields, functions)
            if c.i == before:  # stuck on a stray closer
                stray = c.advance()
                self._gap(stray, stray, "stray-token")
        c.match_punct(")")
        c.match_punct(";")
        end = c.toks[c.i - 1] if c.i else name_tok
        return PageRegistration(kind, data_fields, functions, Span(name_tok.offset, end.end, name_tok.line))

    def parse_registration_property(
        self,
        data_fields: dict[str, LiteralInfo],
        functions: dict[str, FunctionModel],
    ) -> None:
        c = self.c
        key_tok = c.peek()
        assert key_tok is not None
        if key_tok.kind not in (TokenKind.IDENT, TokenKind.STRING, TokenKind.KEYWORD):
            self.recover_statement("registration-junk")
            return
        key = key_tok.lexeme if key_tok.kind is not TokenKind.STRING else _string_value(key_tok.lexeme)
        after = c.peek(1)
        # Shorthand method: name(params) { ... }
        if after is not None and after.kind is TokenKind.PUNCT and after.lexeme == "(":
            c.advance()
            fn = self.parse_function_tail(key, key_tok)
            if fn is not None:
                self._add_function(functions, fn, key_tok)
            return
        if after is None or not (after.kind is TokenKind.PUNCT and after.lexeme == ":"):
            self.recover_statement("registration-junk")
            return
        c.advance()
        c.advance()
        value_tok = c.peek()
        if value_tok is None:
            return
        if value_tok.kind is TokenKind.KEYWORD and value_tok.lexeme == "function":
            c.advance()
            if c.peek() is not None and c.peek().kind is TokenKind.IDENT:
                c.advance()  # optional function name, property key wins
            fn = self.parse_function_tail(key, key_tok)
            if fn is not None:
                self._add_function(functions, fn, key_tok)
            return
        if key == "data" and value_tok.kind is TokenKind.PUNCT and value_tok.lexeme == "{":
            obj = self.parse_object_literal()
            for field_name, expr in obj.entries:
                if not field_name:
                    continue
                data_fields[field_name] = self._literal_info(expr)
            return
        # Arrow function properties: (a, b) => {...} or a => {...}
        if self._try_arrow(key, key_tok, functions):
            return
        # Any other property value: scan it off and account for it.
        span = self.skip_balanced(stop_at_comma=True)
        self.gaps.append(ParseGap(Span(key_tok.offset, span.end, key_tok.line), "registration-property"))

    def _try_arrow(
        self, key: str, key_tok: Token, functions: dict[str, FunctionModel]
    ) -> bool:
        c = self.c
        t = c.peek()
        if t is None:
            return False
        params: list[str] = []
        if t.kind is TokenKind.IDENT and c.peek(1) is not None and c.peek(1).lexeme == "=>":
            params = [t.lexeme]
            c.advance()
            c.advance()
        elif t.kind is TokenKind.PUNCT and t.lexeme == "(":
            after = self._peek_after_group()
            if after is None or after.lexeme != "=>":
                return False
            c.advance()
            while not c.at_end():
                p = c.peek()
                assert p is not None
                if p.kind is TokenKind.PUNCT and p.lexeme == ")":
                    c.advance()
                    break
                if p.kind is TokenKind.IDENT:
                    params.append(p.lexeme)
                c.advance()
            c.advance()  # '=>'
        else:
            return False
        body_tok = c.peek()
        if body_tok is None or not (body_tok.kind is TokenKind.PUNCT and body_tok.lexeme == "{"):
            span = self.skip_balanced(stop_at_comma=True)
            self.gaps.append(ParseGap(span, "arrow-expression-body"))
            return True
        actions, body_span = self.parse_block_actions()
        span = Span(key_tok.offset, body_span.end, key_tok.line)
        functions[key] = FunctionModel(key, tuple(params), actions, span, body_span)
        return True

    def parse_function_tail(self, name: str, key_tok: Token) -> Optional[FunctionModel]:
        """Parse `(params) { body }` with the cursor at the open paren."""
        c = self.c
        t = c.peek()
        if t is None or not (t.kind is TokenKind.PUNCT and t.lexeme == "("):
            self.recover_statement("malformed-function")
            return None
        c.advance()
        params: list[str] = []
        while not c.at_end():
            p = c.peek()
            assert p is not None
            if p.kind is TokenKind.PUNCT and p.lexeme == ")":
                c.advance()
                break
            if p.kind is TokenKind.IDENT:
                params.append(p.lexeme)
            c.advance()
        body_tok = c.peek()
        if body_tok is None or not (body_tok.kind is TokenKind.PUNCT and body_tok.lexeme == "{"):
            self.recover_statement("malformed-function")
            return None
        actions, body_span = self.parse_block_actions()
        span = Span(key_tok.offset, body_span.end, key_tok.line)
        return FunctionModel(name, tuple(params), actions, span, body_span)

    def _add_function(
        self, functions: dict[str, FunctionModel], fn: FunctionModel, key_tok: Token
    ) -> None:
        if fn.name in functions:
            self._gap(key_tok, key_tok, "duplicate-function")
            return
        functions[fn.name] = fn

    def _literal_info(self, expr: Expr) -> LiteralInfo:
        span = _expr_span(expr)
        raw = self.text[span.start : span.end]
        if isinstance(expr, StringLit):
            kind = LiteralKind.STRING
        elif isinstance(expr, NumberLit):
            kind = LiteralKind.NUMBER
        elif isinstance(expr, ObjectLit):
            kind = LiteralKind.OBJECT
        elif isinstance(expr, Unknown):
            stripped = raw.strip()
            if stripped.startswith("["):
                kind = LiteralKind.ARRAY
            elif stripped in ("true", "false"):
                kind = LiteralKind.BOOLEAN
            elif stripped == "null":
                kind = LiteralKind.NULL
            else:
                kind = LiteralKind.OTHER
        else:
            kind = LiteralKind.OTHER
        return LiteralInfo(kind, raw, span)


def _string_value(lexeme: str) -> str:
    if len(lexeme) >= 2 and lexeme[0] in "'\"`" and lexeme[-1] == lexeme[0]:
        return lexeme[1:-1]
    return lexeme[1:] if lexeme and lexeme[0] in "'\"`" else lexeme


def _expr_span(expr: Expr) -> Span:
    return expr.span


def _respan(expr: Expr, span: Span) -> Expr:
    import dataclasses

    return dataclasses.replace(expr, span=span)


def extract_script_model(tokens: list[Token], text: str) -> tuple[ScriptModel, list[ParseGap]]:
    """Recover the structural model from a token stream.

    Total: any region the dialect subset cannot express is skipped and
    recorded as a ParseGap, never silently dropped.
    """
    parser = _Parser(tokens, text)
    model = parser.parse_module()
    return model, parser.gaps


def iter_chains(model: ScriptModel) -> Iterator[MemberChain]:
    """All member chains reachable from the model's actions, source order."""
    for reg in model.registrations:
        for fn in reg.functions.values():
            yield from _chains_in_actions(fn.actions)


def _chains_in_actions(actions: tuple[Action, ...]) -> Iterator[MemberChain]:
    for action in actions:
        if isinstance(action, Assign):
            yield from _chains_in_expr(action.value)
        elif isinstance(action, Call):
            for arg in action.args:
                yield from _chains_in_expr(arg)
        elif isinstance(action, Return):
            if action.value is not None:
                yield from _chains_in_expr(action.value)
        elif isinstance(action, Branch):
            yield from _chains_in_actions(action.then_actions)
            yield from _chains_in_actions(action.else_actions)


def _chains_in_expr(expr: Expr) -> Iterator[MemberChain]:
    if isinstance(expr, MemberChain):
        yield expr
    elif isinstance(expr, Concat):
        for p in expr.parts:
            yield from _chains_in_expr(p)
    elif isinstance(expr, CallExpr):
        yield expr.callee
        for a in expr.args:
            yield from _chains_in_expr(a)


# ---------------------------------------------------------------------------
# Chain patterns


class PatternSyntax(ValueError):
    """Raised for malformed chain patterns."""


_SEGMENT_RE = re.compile(r"^(?:\*\*|\*|[A-Za-z_$][A-Za-z0-9_$]*(\(\))?)$")


def _parse_pattern(pattern: str) -> list[tuple[str, Optional[bool]]]:
    if not pattern:
        raise PatternSyntax("empty pattern")
    segs: list[tuple[str, Optional[bool]]] = []
    raw_segments = pattern.split(".")
    for idx, raw in enumerate(raw_segments):
        if not _SEGMENT_RE.match(raw):
            raise PatternSyntax(f"bad segment {raw!r} in {pattern!r}")
        if raw == "**":
            if idx != len(raw_segments) - 1:
                raise PatternSyntax(f"'**' must be the final segment in {pattern!r}")
            segs.append(("**", None))
        elif raw == "*":
            segs.append(("*", None))
        elif raw.endswith("()"):
            segs.append((raw[:-2], True))
        else:
            segs.append((raw, False))
    return segs


def chain_matches(chain: MemberChain, pattern: str) -> bool:
    """Match a chain against a dotted pattern.

    `*` matches exactly one segment (any name, any call-ness); a trailing
    `**` matches any suffix, including the empty one. Named segments must
    agree on call-ness: `getApp()` only matches a called segment.
    """
    pats = _parse_pattern(pattern)
    segs = chain.segments
    open_suffix = bool(pats) and pats[-1][0] == "**"
    if open_suffix:
        pats = pats[:-1]
        if len(segs) < len(pats):
            return False
    elif len(segs) != len(pats):
        return False
    for (name, is_call), (pname, pcall) in zip(segs, pats):
        if pname == "*":
            continue
        if pname != name:
            return False
        if pcall is not None and pcall != is_call:
            return False
    return True


# ---------------------------------------------------------------------------
# Markup


@dataclass(frozen=True)
class MarkupForm:
    submit_handler: str
    inputs: tuple[tuple[str, str], ...]  # (field name, widget kind)
    span: Span


_FORM_OPEN_RE = re.compile(r"<form\b[^>]*>", re.IGNORECASE | re.DOTALL)
_WIDGET_RE = re.compile(
    r"<(input|picker|radio-group|checkbox-group|switch|slider|textarea)\b[^>]*>",
    re.IGNORECASE | re.DOTALL,
)
_ATTR_RES: dict[str, re.Pattern[str]] = {}


def _attr(tag: str, name: str) -> Optional[str]:
    pat = _ATTR_RES.get(name)
    if pat is None:
        pat = re.compile(name + r"""\s*=\s*(?:"([^"]*)"|'([^']*)')""", re.IGNORECASE)
        _ATTR_RES[name] = pat
    m = pat.search(tag)
    if not m:
        return None
    return m.group(1) if m.group(1) is not None else m.group(2)


def extract_markup_forms(text: str) -> list[MarkupForm]:
    """Scan markup for forms with a bound submit handler and their fields.

    Tag soup tolerant: unclosed forms run to end of document, malformed tags
    are simply not matched.
    """
    forms: list[MarkupForm] = []
    for m in _FORM_OPEN_RE.finditer(text):
        handler = _attr(m.group(), "bindsubmit")
        if not handler:
            continue
        end = _find_form_end(text, m.end())
        region = text[m.end() : end]
        inputs = []
        for w in _WIDGET_RE.finditer(region):
            name = _attr(w.group(), "name")
            if name:
                inputs.append((name, w.group(1).lower()))
        line = text.count("\n", 0, m.start()) + 1
        forms.append(MarkupForm(handler, tuple(inputs), Span(m.start(), end, line)))
    return forms


def _find_form_end(text: str, start: int) -> int:
    depth = 1
    i = start
    while i < len(text):
        open_m = _FORM_OPEN_RE.search(text, i)
        close_i = text.find("</form", i)
        if close_i < 0:
            return len(text)
        if open_m is not None and open_m.start() < close_i:
            depth += 1
            i = open_m.end()
            continue
        depth -= 1
        if depth == 0:
            gt = text.find(">", close_i)
            return (gt + 1) if gt >= 0 else len(text)
        i = close_i + 6
    return len(text)
