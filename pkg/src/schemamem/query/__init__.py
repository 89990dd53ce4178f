"""Structured query language: parse, print, evaluate, calculate."""

from .calc import calculate
from .evaluator import evaluate
from .model import (
    AGG_FUNCS,
    Predicate,
    ResultTable,
    SelectItem,
    StructuredQuery,
    print_query,
)
from .parser import parse

__all__ = [
    "AGG_FUNCS",
    "Predicate",
    "ResultTable",
    "SelectItem",
    "StructuredQuery",
    "calculate",
    "evaluate",
    "parse",
    "print_query",
]
