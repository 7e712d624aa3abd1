"""Recursive-descent parser for polynomial expressions.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('+' | '-') factor | power
    power  := atom (('^' | '**') ['+' | '-'] INTEGER)?
    atom   := NUMBER | NAME | '(' expr ')'

NUMBER is an integer or decimal literal (``12``, ``0.5``, ``.25``, ``1e-3``);
decimals are converted exactly.  Division is only allowed by a non-zero
constant, so ``3/4*x`` and ``(x+y)/2`` parse while ``1/x`` does not.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Sequence

from .polyring import Polynomial


class PolySyntaxError(ValueError):
    """Malformed expression; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.message = message
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class UnknownIdentifierError(PolySyntaxError):
    def __init__(self, name: str, pos: int, text: str = ""):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", pos, text)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<pow>\*\*|\^)
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PolySyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.index = {name: k for k, name in enumerate(names)}
        self.n = len(names)

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, pos: int | None = None):
        if pos is None:
            pos = self.peek()[2]
        raise PolySyntaxError(message, pos, self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "eof":
            self.error("empty expression")
        p = self.expr()
        kind, value, pos = self.peek()
        if kind != "eof":
            self.error(f"unexpected {value!r}", pos)
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op, pos = self.take()[1], self.peek()[2]
            q = self.factor()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    self.error("division by a non-constant or zero expression", pos)
                p = p.scale(1 / q.constant_term())
        return p

    def factor(self) -> Polynomial:
        kind, value, _ = self.peek()
        if kind == "op" and value in ("+", "-"):
            self.take()
            p = self.factor()
            return -p if value == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] != "pow":
            return base
        self.take()
        sign = 1
        kind, value, pos = self.peek()
        if kind == "op" and value in ("+", "-"):
            self.take()
            sign = -1 if value == "-" else 1
            kind, value, _ = self.peek()
        if kind != "num" or not value.isdigit():
            self.error("exponent must be a non-negative integer literal")
        self.take()
        if sign < 0 and int(value) != 0:
            self.error("negative exponent", pos)
        return base ** int(value)

    def atom(self) -> Polynomial:
        kind, value, pos = self.take()
        if kind == "num":
            return Polynomial.constant(Fraction(value), self.n)
        if kind == "name":
            if value not in self.index:
                raise UnknownIdentifierError(value, pos, self.text)
            return Polynomial.variable(self.index[value], self.n)
        if kind == "op" and value == "(":
            p = self.expr()
            k2, v2, p2 = self.take()
            if v2 != ")":
                self.error("expected ')'", p2)
            return p
        if kind == "eof":
            self.error("unexpected end of expression", pos)
        self.error(f"unexpected {value!r}", pos)


def parse_poly(text: str, vars: Sequence[str]) -> Polynomial:
    """Parse ``text`` into a polynomial over the variables ``vars`` (in order)."""
    vars = list(vars)
    if not vars:
        raise ValueError("at least one variable is required")
    if len(set(vars)) != len(vars):
        raise ValueError(f"duplicate variable names in {vars}")
    return _Parser(text, vars).parse()
