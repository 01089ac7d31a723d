"""Concrete syntax: types, terms, and `.hom` problem files.

Grammar (whitespace-insensitive, `#` starts a comment):

    Type   := "o" | Type "->" Type (right assoc) | "(" Type ")"
    Term   := ident | "\\" binder+ "." Term | Term Term (left assoc)
            | "(" Term ")"
    binder := ident ":" Type

Problem files carry `base o`, one `const name : Type` line per constant,
`var x : Type`, then one `eq`/`neq` line per item.  Each argument term on
an item line must be an atom (identifier or parenthesised); the right
term after `=` / `!=` extends to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .terms import (
    BASE,
    Abs,
    App,
    Const,
    SimpleType,
    Term,
    Var,
    app,
    arrow,
    term_str,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        loc = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(msg + loc)
        self.line = line
        self.col = col


_TOKEN = re.compile(r"\s*(->|!=|[()\\.:=]|[A-Za-z0-9_#']+)")


def _tokenize(text: str, line: int = 1) -> list[tuple[str, int, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"bad character {text[pos]!r}", line, pos + 1)
            break
        out.append((m.group(1), line, m.start(1) + 1))
        pos = m.end()
    return out


class _Tokens:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self):
        if self.i >= len(self.toks):
            raise ParseError("unexpected end of input")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, want: str):
        tok, line, col = self.next()
        if tok != want:
            raise ParseError(f"expected {want!r}, got {tok!r}", line, col)

    def done(self) -> bool:
        return self.i >= len(self.toks)


_IDENT = re.compile(r"[A-Za-z0-9_#'][A-Za-z0-9_#']*$")


def _is_ident(tok: str) -> bool:
    return bool(_IDENT.match(tok)) and tok not in ("->",)


def _parse_type(ts: _Tokens) -> SimpleType:
    def atom() -> SimpleType:
        tok, line, col = ts.next()
        if tok == "o":
            return BASE
        if tok == "(":
            ty = _parse_type(ts)
            ts.expect(")")
            return ty
        raise ParseError(f"expected type, got {tok!r}", line, col)

    left = atom()
    if ts.peek() == "->":
        ts.next()
        rest = _parse_type(ts)
        return arrow([left], rest)
    return left


def parse_type(text: str) -> SimpleType:
    ts = _Tokens(_tokenize(text))
    ty = _parse_type(ts)
    if not ts.done():
        tok, line, col = ts.next()
        raise ParseError(f"trailing input {tok!r}", line, col)
    return ty


def _parse_term(ts: _Tokens, consts: dict[str, SimpleType]) -> Term:
    def atom() -> Term | None:
        tok = ts.peek()
        if tok is None or tok in (")", ".", "=", "!="):
            return None
        if tok == "(":
            ts.next()
            t = _parse_term(ts, consts)
            ts.expect(")")
            return t
        if tok == "\\":
            ts.next()
            binders = []
            while ts.peek() != ".":
                name, line, col = ts.next()
                if not _is_ident(name):
                    raise ParseError(f"expected binder, got {name!r}", line, col)
                ts.expect(":")
                binders.append((name, _parse_type(ts)))
            ts.expect(".")
            body = _parse_term(ts, consts)
            return Abs(tuple(binders), body)
        name, line, col = ts.next()
        if not _is_ident(name):
            raise ParseError(f"expected term, got {name!r}", line, col)
        if name in consts:
            return Const(name, consts[name])
        return Var(name)

    head = atom()
    if head is None:
        tok, line, col = ts.next()
        raise ParseError(f"expected term, got {tok!r}", line, col)
    args = []
    while True:
        nxt = atom()
        if nxt is None:
            break
        args.append(nxt)
    return app(head, args)


def parse_term(text: str, consts: dict[str, SimpleType] | None = None) -> Term:
    """Parse a term; names in `consts` become constants, others variables."""
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    toks = []
    for i, ln in enumerate(lines, start=1):
        toks.extend(_tokenize(ln, i))
    ts = _Tokens(toks)
    t = _parse_term(ts, dict(consts or {}))
    if not ts.done():
        tok, line, col = ts.next()
        raise ParseError(f"trailing input {tok!r}", line, col)
    return t


def print_term(t: Term) -> str:
    """Reparseable rendering (annotated binders)."""
    return term_str(t, annotate=True)


# ---------------------------------------------------------------------------
# problem files


@dataclass
class RawItem:
    args: list[Term]
    is_eq: bool
    rhs: Term
    line: int


@dataclass
class RawProblem:
    var_name: str
    var_type: SimpleType
    consts: dict[str, SimpleType]
    items: list[RawItem]


def parse_problem_text(text: str) -> RawProblem:
    consts: dict[str, SimpleType] = {}
    var_name = None
    var_type = None
    items: list[RawItem] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = _Tokens(_tokenize(line, lineno))
        kw, _, _ = toks.next()
        if kw == "base":
            name, ln, col = toks.next()
            if name != "o":
                raise ParseError("only base type 'o' is supported", ln, col)
        elif kw == "const":
            name, ln, col = toks.next()
            if name.startswith("#"):
                raise ParseError("names starting with '#' are reserved", ln, col)
            toks.expect(":")
            consts[name] = _parse_type(toks)
        elif kw == "var":
            name, ln, col = toks.next()
            if name.startswith("#"):
                raise ParseError("names starting with '#' are reserved", ln, col)
            toks.expect(":")
            var_name = name
            var_type = _parse_type(toks)
        elif kw in ("eq", "neq"):
            args = []
            while toks.peek() not in ("=", "!="):
                if toks.peek() is None:
                    raise ParseError("missing '=' or '!=' on item line", lineno, 1)
                # each argument is an atom: ident or parenthesised term
                tok = toks.peek()
                if tok == "(":
                    toks.next()
                    t = _parse_term(toks, consts)
                    toks.expect(")")
                    args.append(t)
                else:
                    name, ln, col = toks.next()
                    if not _is_ident(name):
                        raise ParseError(f"expected argument, got {name!r}", ln, col)
                    args.append(Const(name, consts[name]) if name in consts else Var(name))
            rel, ln, col = toks.next()
            if kw == "eq" and rel != "=":
                raise ParseError("eq item needs '='", ln, col)
            if kw == "neq" and rel != "!=":
                raise ParseError("neq item needs '!='", ln, col)
            rhs = _parse_term(toks, consts)
            if not toks.done():
                tok, ln, col = toks.next()
                raise ParseError(f"trailing input {tok!r}", ln, col)
            items.append(RawItem(args, kw == "eq", rhs, lineno))
        else:
            raise ParseError(f"unknown directive {kw!r}", lineno, 1)

    if var_name is None or var_type is None:
        raise ParseError("problem file needs a 'var' line")
    return RawProblem(var_name, var_type, consts, items)


def parse_problem_file(path: str) -> RawProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem_text(fh.read())


def parse_term_file(path: str, consts: dict[str, SimpleType]) -> Term:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_term(fh.read(), consts)
