"""Lexical similarity primitives: lowercase tokenization, term-frequency
vectors, cosine. Shared by the reference cognition provider and retrieval."""

from __future__ import annotations

import math
import re
from collections import Counter

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def tf_vector(text: str) -> Counter:
    return Counter(tokenize(text))


def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        # degenerate vectors: equal-and-empty counts as identical
        return 1.0 if a == b else 0.0
    dot = sum(count * b[tok] for tok, count in a.items() if tok in b)
    if dot == 0:
        return 0.0
    # sqrt of the integer product: exact for perfect squares, so identical
    # vectors score exactly 1.0
    norm = math.sqrt(sum(c * c for c in a.values()) * sum(c * c for c in b.values()))
    score = dot / norm
    # float noise must not push the score outside [0, 1]
    return min(1.0, max(0.0, score))


def text_cosine(a: str, b: str) -> float:
    return cosine(tf_vector(a), tf_vector(b))
