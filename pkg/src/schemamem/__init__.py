"""Structured agent memory: schema-organized storage with adaptive ingestion,
conflict resolution, and hybrid retrieval."""

from .adaptation import AdaptationConfig, AdaptationReport, adapt, sweep_theta
from .config import Settings, load_settings
from .engine import MemoryEngine
from .errors import MemoryError_
from .goals import GoalSpec, initialize, load_goal_spec, validate
from .provider import ConflictPolicy, ExtractionRules, LexicalProvider, Segment
from .query import ResultTable, StructuredQuery, calculate, evaluate, parse, print_query
from .retrieval import Answer, RetrievalOrchestrator, ToolStep, classify
from .store import MemoryStore

__version__ = "0.1.0"

__all__ = [
    "AdaptationConfig",
    "AdaptationReport",
    "Answer",
    "ConflictPolicy",
    "ExtractionRules",
    "GoalSpec",
    "LexicalProvider",
    "MemoryEngine",
    "MemoryError_",
    "MemoryStore",
    "ResultTable",
    "RetrievalOrchestrator",
    "Segment",
    "Settings",
    "StructuredQuery",
    "ToolStep",
    "adapt",
    "calculate",
    "classify",
    "evaluate",
    "initialize",
    "load_goal_spec",
    "load_settings",
    "parse",
    "print_query",
    "sweep_theta",
    "validate",
    "__version__",
]
