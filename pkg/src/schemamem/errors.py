"""Exception taxonomy shared across the engine.

Every error carries a stable ``code`` string so the HTTP layer and the CLI
can map failures to machine-readable envelopes without isinstance ladders.
"""

from __future__ import annotations


class MemoryError_(Exception):
    """Base class for all engine errors."""

    code = "internal"

    def __init__(self, message: str = "", **detail):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


# ---- store ----------------------------------------------------------------

class EmptyKeySet(MemoryError_):
    code = "empty_key_set"


class DuplicateKeyName(MemoryError_):
    code = "duplicate_key_name"


class MissingCanonicalKey(MemoryError_):
    code = "missing_canonical_key"


class UnknownTarget(MemoryError_):
    code = "unknown_target"


class EmptyExperience(MemoryError_):
    code = "empty_experience"


class CorruptSnapshot(MemoryError_):
    code = "corrupt_snapshot"


class CorruptLog(MemoryError_):
    code = "corrupt_log"


# ---- provider / adaptation -------------------------------------------------

class ProviderFailure(MemoryError_):
    code = "provider_failure"


class NoBuckets(MemoryError_):
    code = "no_buckets"


class InvalidTheta(MemoryError_):
    code = "invalid_theta"


# ---- conflict resolution ---------------------------------------------------

class NegativeAge(MemoryError_):
    code = "negative_age"


class BadWeights(MemoryError_):
    code = "bad_weights"


# ---- query language ---------------------------------------------------------

class QuerySyntaxError(MemoryError_):
    """Raised by the parser; pins the byte offset and the expected token."""

    code = "syntax_error"

    def __init__(self, position: int, expected: str):
        super().__init__(
            f"syntax error at position {position}: expected {expected}",
            position=position,
            expected=expected,
        )
        self.position = position
        self.expected = expected


class UnknownBucket(MemoryError_):
    code = "unknown_bucket"


class UnknownKey(MemoryError_):
    code = "unknown_key"


class TypeMismatch(MemoryError_):
    code = "type_mismatch"


class InvalidQuery(MemoryError_):
    code = "invalid_query"


class DivideByZero(MemoryError_):
    code = "divide_by_zero"


class UnboundReference(MemoryError_):
    code = "unbound_reference"


# ---- retrieval ---------------------------------------------------------------

class EmptyQuestion(MemoryError_):
    code = "empty_question"


class EmptyStore(MemoryError_):
    code = "empty_store"


# ---- initialization / config -------------------------------------------------

class EmptySpec(MemoryError_):
    code = "empty_spec"


class DuplicateBucketName(MemoryError_):
    code = "duplicate_bucket_name"


class NonEmptyStore(MemoryError_):
    code = "non_empty_store"


class ConfigInvalid(MemoryError_):
    code = "config_invalid"


# ---- eval harness --------------------------------------------------------------

class EngineUnreachable(MemoryError_):
    code = "engine_unreachable"
