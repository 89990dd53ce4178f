"""Typed client for the memory service HTTP API."""

from .client import ENDPOINTS, ClientConfig, MemoryClient
from .errors import ApiError, ServiceUnreachable
from .models import (
    Answer,
    BucketInfo,
    BucketSchemas,
    ElementSummary,
    GoalBucket,
    GoalSummary,
    Health,
    IngestReport,
    RecordDetail,
    ResultTable,
    SchemaSummary,
    SegmentReport,
    ToolStep,
)

__version__ = "0.1.0"

__all__ = [
    "ENDPOINTS",
    "ClientConfig",
    "MemoryClient",
    "ApiError",
    "ServiceUnreachable",
    "Answer",
    "BucketInfo",
    "BucketSchemas",
    "ElementSummary",
    "GoalBucket",
    "GoalSummary",
    "Health",
    "IngestReport",
    "RecordDetail",
    "ResultTable",
    "SchemaSummary",
    "SegmentReport",
    "ToolStep",
    "__version__",
]
