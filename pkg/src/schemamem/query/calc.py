"""Sandboxed arithmetic evaluator for answer composition.

Supported: numeric literals, + - * /, unary minus, parentheses, one
optional comparison (= == != <> < <= > >=), and named references bound by
the caller (typically cells from an earlier result table). No names are
resolved beyond the provided environment; there is no attribute access,
no calls, no exponent operator. IEEE-754 float semantics throughout.
"""

from __future__ import annotations

import re
from typing import Mapping

from ..errors import DivideByZero, QuerySyntaxError, UnboundReference

_CALC_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>==|!=|<>|<=|>=|≤|≥|≠|[-+*/()<>=])
    """,
    re.VERBOSE,
)

_CMP_ALIASES = {"==": "=", "<>": "!=", "≠": "!=", "≤": "<=", "≥": ">="}
_CMP_OPS = {"=", "!=", "<", "<=", ">", ">="}

Number = int | float


class _Lexer:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _CALC_TOKEN.match(text, pos)
            if m is None:
                raise QuerySyntaxError(pos, "a number, name or operator")
            kind = m.lastgroup or ""
            if kind != "ws":
                word = m.group()
                if kind == "op":
                    word = _CMP_ALIASES.get(word, word)
                self.tokens.append((kind, word, pos))
            pos = m.end()
        self.tokens.append(("eof", "", len(text)))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok


def _to_number(text: str) -> Number:
    if re.fullmatch(r"\d+", text):
        return int(text)
    return float(text)


class _Calc:
    def __init__(self, text: str, env: Mapping[str, Number]):
        self.lx = _Lexer(text)
        self.env = env

    def run(self) -> Number | bool:
        value = self._comparison()
        kind, _, pos = self.lx.peek()
        if kind != "eof":
            raise QuerySyntaxError(pos, "end of expression")
        return value

    def _comparison(self) -> Number | bool:
        left = self._additive()
        kind, word, pos = self.lx.peek()
        if kind == "op" and word in _CMP_OPS:
            self.lx.next()
            right = self._additive()
            if word == "=":
                return left == right
            if word == "!=":
                return left != right
            if word == "<":
                return left < right
            if word == "<=":
                return left <= right
            if word == ">":
                return left > right
            return left >= right
        return left

    def _additive(self) -> Number:
        value = self._multiplicative()
        while True:
            kind, word, _ = self.lx.peek()
            if kind == "op" and word in ("+", "-"):
                self.lx.next()
                rhs = self._multiplicative()
                value = value + rhs if word == "+" else value - rhs
            else:
                return value

    def _multiplicative(self) -> Number:
        value = self._unary()
        while True:
            kind, word, pos = self.lx.peek()
            if kind == "op" and word in ("*", "/"):
                self.lx.next()
                rhs = self._unary()
                if word == "*":
                    value = value * rhs
                else:
                    if rhs == 0:
                        raise DivideByZero("division by zero")
                    value = value / rhs
            else:
                return value

    def _unary(self) -> Number:
        kind, word, _ = self.lx.peek()
        if kind == "op" and word == "-":
            self.lx.next()
            return -self._unary()
        return self._primary()

    def _primary(self) -> Number:
        kind, word, pos = self.lx.next()
        if kind == "number":
            return _to_number(word)
        if kind == "ident":
            if word not in self.env:
                raise UnboundReference(f"unbound name {word!r}", name=word)
            value = self.env[word]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise UnboundReference(f"name {word!r} is not numeric", name=word)
            return value
        if kind == "op" and word == "(":
            value = self._comparison()
            kind, word, pos = self.lx.next()
            if not (kind == "op" and word == ")"):
                raise QuerySyntaxError(pos, ")")
            return value  # a parenthesized comparison yields bool, which is numeric here
        raise QuerySyntaxError(pos, "a number, name or (")


def calculate(expression: str, env: Mapping[str, Number] | None = None) -> Number | bool:
    """Evaluate one calculator expression.

    Raises:
        QuerySyntaxError: malformed expression.
        DivideByZero: zero divisor.
        UnboundReference: name missing from env or not numeric.
    """
    if not isinstance(expression, str):
        raise QuerySyntaxError(0, "an expression")
    return _Calc(expression, env or {}).run()
