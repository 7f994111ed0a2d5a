"""Typed property-graph store for fact and dimension nodes."""

from graphy.graph.store import GraphStore
from graphy.graph.types import (
    BOOLEAN,
    EDGE_KINDS,
    HAS_DIMENSION,
    INTEGER,
    NAVIGATES_TO,
    REAL,
    TEXT,
    TEXT_LIST,
    DimensionNode,
    Edge,
    FactNode,
    GraphSchema,
    PropertySpec,
    canonical_id,
    canonical_json,
    node_hash,
    normalize_title,
)

__all__ = [
    "GraphStore",
    "GraphSchema",
    "PropertySpec",
    "FactNode",
    "DimensionNode",
    "Edge",
    "TEXT",
    "INTEGER",
    "REAL",
    "BOOLEAN",
    "TEXT_LIST",
    "HAS_DIMENSION",
    "NAVIGATES_TO",
    "EDGE_KINDS",
    "node_hash",
    "canonical_json",
    "canonical_id",
    "normalize_title",
]
