"""Hand-rolled tokenizer and recursive-descent parser for the query text
form. Every failure raises QuerySyntaxError with the byte position and the
expected token; no input may crash the parser."""

from __future__ import annotations

import json
import re

from ..errors import QuerySyntaxError
from ..values import parse_timestamp
from .model import AGG_FUNCS, KEYWORDS, Predicate, SelectItem, StructuredQuery

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<timestamp>\d{4}-\d{2}-\d{2}(?:[Tt]\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:[Zz]|[+-]\d{2}:\d{2})?)?)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op><=|>=|!=|<>|≤|≥|≠|=|<|>)
  | (?P<comma>,)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<star>\*)
    """,
    re.VERBOSE,
)

_OP_ALIASES = {"<>": "!=", "≠": "!=", "≤": "<=", "≥": ">="}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind
        self.text = text
        self.pos = pos


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    length = len(text)
    while pos < length:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(pos, "a valid token")
        kind = m.lastgroup or ""
        if kind != "ws":
            word = m.group()
            if kind == "ident" and word.upper() in KEYWORDS:
                kind = "keyword"
                word = word.upper()
            elif kind == "op":
                word = _OP_ALIASES.get(word, word)
            tokens.append(_Token(kind, word, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", length))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.cur
        self.i += 1
        return tok

    def _expect_keyword(self, word: str) -> None:
        if self.cur.kind == "keyword" and self.cur.text == word:
            self._advance()
            return
        raise QuerySyntaxError(self.cur.pos, word)

    def _at_keyword(self, word: str) -> bool:
        return self.cur.kind == "keyword" and self.cur.text == word

    def _unquote(self, token: _Token) -> str:
        try:
            return json.loads(token.text)
        except ValueError:
            raise QuerySyntaxError(token.pos, "a closed string literal") from None

    # -- grammar --

    def parse(self) -> StructuredQuery:
        self._expect_keyword("FROM")
        bucket = self._bucket_ref()
        meta = element = None
        predicates: tuple[Predicate, ...] = ()
        group_by: tuple[str, ...] = ()
        if self._at_keyword("SCHEMA"):
            self._advance()
            meta = self._pattern()
        if self._at_keyword("ELEMENT"):
            self._advance()
            element = self._pattern()
        if self._at_keyword("WHERE"):
            self._advance()
            predicates = self._predicates()
        if self._at_keyword("GROUP"):
            self._advance()
            self._expect_keyword("BY")
            group_by = self._key_list()
        self._expect_keyword("SELECT")
        select = self._select_items()
        include_inactive = False
        if self._at_keyword("INCLUDE"):
            self._advance()
            self._expect_keyword("INACTIVE")
            include_inactive = True
        if self.cur.kind != "eof":
            raise QuerySyntaxError(self.cur.pos, "end of query")
        return StructuredQuery(
            bucket=bucket,
            meta_filter=meta,
            element_filter=element,
            predicates=predicates,
            group_by=group_by,
            select=select,
            include_inactive=include_inactive,
        )

    def _bucket_ref(self) -> str:
        tok = self.cur
        if tok.kind == "ident":
            self._advance()
            return tok.text
        if tok.kind == "string":
            self._advance()
            return self._unquote(tok)
        raise QuerySyntaxError(tok.pos, "a bucket name")

    def _pattern(self) -> str:
        tok = self.cur
        if tok.kind == "string":
            self._advance()
            return self._unquote(tok)
        if tok.kind == "ident":
            self._advance()
            return tok.text
        raise QuerySyntaxError(tok.pos, "a glob pattern")

    def _key(self) -> str:
        tok = self.cur
        if tok.kind != "ident":
            raise QuerySyntaxError(tok.pos, "a key name")
        self._advance()
        return tok.text

    def _key_list(self) -> tuple[str, ...]:
        keys = [self._key()]
        while self.cur.kind == "comma":
            self._advance()
            keys.append(self._key())
        return tuple(keys)

    def _literal(self):
        tok = self.cur
        if tok.kind == "string":
            self._advance()
            return self._unquote(tok)
        if tok.kind == "timestamp":
            self._advance()
            try:
                return parse_timestamp(tok.text)
            except ValueError:
                raise QuerySyntaxError(tok.pos, "a valid timestamp") from None
        if tok.kind == "number":
            self._advance()
            text = tok.text
            if "." in text or "e" in text or "E" in text:
                return float(text)
            return int(text)
        if tok.kind == "keyword" and tok.text in ("TRUE", "FALSE"):
            self._advance()
            return tok.text == "TRUE"
        raise QuerySyntaxError(tok.pos, "a literal")

    def _predicates(self) -> tuple[Predicate, ...]:
        preds = [self._predicate()]
        while self._at_keyword("AND"):
            self._advance()
            preds.append(self._predicate())
        return tuple(preds)

    def _predicate(self) -> Predicate:
        key = self._key()
        tok = self.cur
        if tok.kind == "op":
            self._advance()
            return Predicate(key=key, op=tok.text, value=self._literal())
        if self._at_keyword("BETWEEN"):
            self._advance()
            low = self._literal()
            self._expect_keyword("AND")
            high = self._literal()
            return Predicate(key=key, op="between", low=low, high=high)
        if self._at_keyword("CONTAINS"):
            self._advance()
            return Predicate(key=key, op="contains", value=self._literal())
        raise QuerySyntaxError(tok.pos, "a comparison operator")

    def _select_items(self) -> tuple[SelectItem, ...]:
        items = [self._select_item()]
        while self.cur.kind == "comma":
            self._advance()
            items.append(self._select_item())
        return tuple(items)

    def _select_item(self) -> SelectItem:
        tok = self.cur
        if tok.kind == "ident" and tok.text.lower() in AGG_FUNCS:
            nxt = self.tokens[self.i + 1]
            if nxt.kind == "lparen":
                fn = tok.text.lower()
                self._advance()
                self._advance()
                if self.cur.kind == "star":
                    if fn != "count":
                        raise QuerySyntaxError(self.cur.pos, "a key name")
                    self._advance()
                    key = "*"
                else:
                    key = self._key()
                if self.cur.kind != "rparen":
                    raise QuerySyntaxError(self.cur.pos, ")")
                self._advance()
                return SelectItem(key=key, fn=fn)
        return SelectItem(key=self._key())


def parse(text: str) -> StructuredQuery:
    """Parse query text into a StructuredQuery.

    Raises:
        QuerySyntaxError: with the offending position and the expected token.
    """
    if not isinstance(text, str):
        raise QuerySyntaxError(0, "query text")
    return _Parser(text).parse()
