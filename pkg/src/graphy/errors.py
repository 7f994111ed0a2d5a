"""Exception hierarchy shared by all modules.

Every error carries a stable ``code`` string; the REST layer serializes
errors as ``{"code": ..., "message": ...}`` using these codes.
"""

from __future__ import annotations


class GraphyError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "internal"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# graph core

class SchemaViolation(GraphyError):
    code = "schema_violation"


class UnknownNode(GraphyError):
    code = "unknown_node"


class UnknownOwner(GraphyError):
    code = "unknown_owner"


class KindViolation(GraphyError):
    code = "kind_violation"


class UnknownLabel(GraphyError):
    code = "unknown_label"


class IoFailure(GraphyError):
    code = "io_failure"


# ingest

class UnsupportedKind(GraphyError):
    code = "unsupported_kind"


class CorruptDocument(GraphyError):
    code = "corrupt_document"


class InvalidParams(GraphyError):
    code = "invalid_params"


class EmbedderFailure(GraphyError):
    code = "embedder_failure"


class EmptyIndex(GraphyError):
    code = "empty_index"


# providers

class NoProvider(GraphyError):
    code = "no_provider"


class ProviderFailure(GraphyError):
    code = "provider_failure"


class ParseFailure(GraphyError):
    code = "parse_failure"


class DuplicatePrefix(GraphyError):
    code = "duplicate_prefix"


# inspection workflow

class MalformedConfig(GraphyError):
    code = "malformed_config"


class DuplicateNodeName(GraphyError):
    code = "duplicate_node_name"


class UnknownEdgeEndpoint(GraphyError):
    code = "unknown_edge_endpoint"


class CycleDetected(GraphyError):
    code = "cycle_detected"


class DocumentUnreadable(GraphyError):
    code = "document_unreadable"


class RuleNoMatch(GraphyError):
    code = "rule_no_match"


class MissingRequired(GraphyError):
    code = "missing_required"


class TypeMismatch(GraphyError):
    code = "type_mismatch"


# navigation

class EmptyTitle(GraphyError):
    code = "empty_title"


class RepositoryUnavailable(GraphyError):
    code = "repository_unavailable"


# exploration

class UnknownAttribute(GraphyError):
    code = "unknown_attribute"


class StaleBucket(GraphyError):
    code = "stale_bucket"


class EmptySelection(GraphyError):
    code = "empty_selection"


class NotInFuture(GraphyError):
    code = "not_in_future"


class InvalidIR(GraphyError):
    code = "invalid_ir"


class UnknownSession(GraphyError):
    code = "unknown_session"


# generation

class NoUsableIntent(GraphyError):
    code = "no_usable_intent"


class UnknownFact(GraphyError):
    code = "unknown_fact"


class UnsupportedFormat(GraphyError):
    code = "unsupported_format"


class StageError(GraphyError):
    code = "stage_error"


# shell

class ConfigError(GraphyError):
    code = "config_error"


class BindFailure(GraphyError):
    code = "bind_failure"
