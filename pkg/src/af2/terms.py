"""Untyped lambda terms: locally nameless representation, parsing, printing.

Bound variables are de Bruijn indices, free variables carry names, so
structural equality of terms is alpha-equivalence. Abstractions keep a
printing hint that is excluded from comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union


class ParseError(ValueError):
    """Raised on malformed surface syntax; carries line/column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Var:
    """Bound variable as a de Bruijn index."""

    index: int


@dataclass(frozen=True)
class Free:
    """Free variable with a surface name."""

    name: str


@dataclass(frozen=True)
class Abs:
    body: "Term"
    hint: str = field(default="x", compare=False)


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


Term = Union[Var, Free, Abs, App]

DELTA = Abs(App(Var(0), Var(0)), hint="x")  # \x. x x
IDENT = Abs(Var(0), hint="x")  # \x. x


def term_size(t: Term) -> int:
    if isinstance(t, (Var, Free)):
        return 1
    if isinstance(t, Abs):
        return 1 + term_size(t.body)
    return 1 + term_size(t.fn) + term_size(t.arg)


def free_vars(t: Term) -> set[str]:
    out: set[str] = set()

    def go(u: Term) -> None:
        if isinstance(u, Free):
            out.add(u.name)
        elif isinstance(u, Abs):
            go(u.body)
        elif isinstance(u, App):
            go(u.fn)
            go(u.arg)

    go(t)
    return out


def is_closed(t: Term) -> bool:
    return not free_vars(t)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Abs):
        yield from subterms(t.body)
    elif isinstance(t, App):
        yield from subterms(t.fn)
        yield from subterms(t.arg)


def substitute(t: Term, name: str, u: Term) -> Term:
    """Capture-avoiding substitution of u for the free variable `name`.

    Capture is impossible by construction: u's binders are indices and its
    free variables are names, which no binder in t can capture.
    """
    if isinstance(t, Free):
        return u if t.name == name else t
    if isinstance(t, Var):
        return t
    if isinstance(t, Abs):
        return Abs(substitute(t.body, name, u), hint=t.hint)
    return App(substitute(t.fn, name, u), substitute(t.arg, name, u))


def shift_indices(t: Term, by: int, cutoff: int = 0) -> Term:
    """Shift indices pointing above `cutoff` by `by` (for moving a term under
    binders)."""
    if isinstance(t, Var):
        return Var(t.index + by) if t.index >= cutoff else t
    if isinstance(t, Free):
        return t
    if isinstance(t, Abs):
        return Abs(shift_indices(t.body, by, cutoff + 1), hint=t.hint)
    return App(shift_indices(t.fn, by, cutoff), shift_indices(t.arg, by, cutoff))


def open_term(body: Term, arg: Term, depth: int = 0) -> Term:
    """Replace index `depth` in body by arg (shifted under the crossed
    binders), shifting deeper indices down."""
    if isinstance(body, Var):
        if body.index == depth:
            return shift_indices(arg, depth) if depth else arg
        if body.index > depth:
            return Var(body.index - 1)
        return body
    if isinstance(body, Free):
        return body
    if isinstance(body, Abs):
        return Abs(open_term(body.body, arg, depth + 1), hint=body.hint)
    return App(open_term(body.fn, arg, depth), open_term(body.arg, arg, depth))


def close_term(t: Term, name: str, depth: int = 0) -> Term:
    """Abstract the free variable `name` to index `depth` (inverse of open)."""
    if isinstance(t, Free):
        return Var(depth) if t.name == name else t
    if isinstance(t, Var):
        return Var(t.index + 1) if t.index >= depth else t
    if isinstance(t, Abs):
        return Abs(close_term(t.body, name, depth + 1), hint=t.hint)
    return App(close_term(t.fn, name, depth), close_term(t.arg, name, depth))


def lam(name: str, body: Term) -> Term:
    """Build an abstraction from a named body."""
    return Abs(close_term(body, name), hint=name)


def apply_spine(fn: Term, *args: Term) -> Term:
    out = fn
    for a in args:
        out = App(out, a)
    return out


def uses_index(t: Term, depth: int = 0) -> bool:
    if isinstance(t, Var):
        return t.index == depth
    if isinstance(t, Free):
        return False
    if isinstance(t, Abs):
        return uses_index(t.body, depth + 1)
    return uses_index(t.fn, depth) or uses_index(t.arg, depth)


def drop_index(t: Term, depth: int = 0) -> Term:
    """Shift indices above `depth` down by one; requires index unused."""
    if isinstance(t, Var):
        if t.index == depth:
            raise ValueError("dangling index")
        return Var(t.index - 1) if t.index > depth else t
    if isinstance(t, Free):
        return t
    if isinstance(t, Abs):
        return Abs(drop_index(t.body, depth + 1), hint=t.hint)
    return App(drop_index(t.fn, depth), drop_index(t.arg, depth))


def fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


# --- printing ---------------------------------------------------------------


def format_term(t: Term) -> str:
    """Canonical surface syntax: `\\x. t`, juxtaposition left-associative."""

    def go(u: Term, env: list[str], taken: set[str]) -> str:
        if isinstance(u, Var):
            return env[-1 - u.index]
        if isinstance(u, Free):
            return u.name
        if isinstance(u, Abs):
            name = fresh_name(u.hint or "x", taken)
            body = go(u.body, env + [name], taken | {name})
            return f"\\{name}. {body}"
        fn = go(u.fn, env, taken)
        if isinstance(u.fn, Abs):
            fn = f"({fn})"
        arg = go(u.arg, env, taken)
        if isinstance(u.arg, (App, Abs)):
            arg = f"({arg})"
        return f"{fn} {arg}"

    return go(t, [], set(free_vars(t)))


# --- parsing ----------------------------------------------------------------


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.col)

    def _advance(self, n: int) -> None:
        for ch in self.text[self.pos : self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self._advance(1)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self._advance(1)

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_'"
        ):
            self._advance(1)
        if self.pos == start:
            raise self.error("expected identifier")
        return self.text[start : self.pos]

    def done(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def parse_term(text: str) -> Term:
    """Parse `\\x. t` / juxtaposition surface syntax into a term."""
    sc = _Scanner(text)
    t = _parse_term(sc)
    if not sc.done():
        raise sc.error("trailing input")
    return t


def _parse_term(sc: _Scanner) -> Term:
    if sc.peek() == "\\":
        sc.eat("\\")
        names = [sc.ident()]
        while sc.peek() != ".":
            names.append(sc.ident())
        sc.eat(".")
        body = _parse_term(sc)
        for name in reversed(names):
            body = lam(name, body)
        return body
    out = _parse_atom(sc)
    while True:
        ch = sc.peek()
        if ch == "(" or ch == "\\" or (ch and (ch.isalnum() or ch in "_'")):
            if ch == "\\":
                return App(out, _parse_term(sc))
            out = App(out, _parse_atom(sc))
        else:
            return out


def _parse_atom(sc: _Scanner) -> Term:
    ch = sc.peek()
    if ch == "(":
        sc.eat("(")
        t = _parse_term(sc)
        sc.eat(")")
        return t
    if ch == "\\":
        return _parse_term(sc)
    name = sc.ident()
    if not name:
        raise sc.error("expected term")
    return Free(name)
