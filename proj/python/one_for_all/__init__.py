"""Python bindings for the One For All ranking and evaluation core."""

import json

from ._core import (
    DimensionMismatch,
    EmbeddingBackend,
    EvaluationTask,
    FrequencyTable,
    NoResolvableTokens,
    NotFound,
    OfaError,
    OovPolicy,
    ParseError,
    ProtocolError,
    RankedCandidates,
    RankedEntry,
    RemoteEmbeddingBackend,
    SifBackend,
    SifConfig,
    TransportError,
    UndesirablePatternSet,
    ValidationError,
    WordVectorTable,
    embed_sif,
    euclidean_distance,
    is_undesirable,
    load_dataset,
    load_frequencies,
    load_patterns,
    load_word_vectors,
    majority_vote,
    prefilter,
    rank,
    sif_weight,
    tokenize,
)
from . import _core


def evaluate(tasks, policies, backends=None, patterns=None, prefilter=True, quality="rating"):
    """Score policies ("human_gold", "fixed:<agent>", "ofa:<backend>") and return the report as a dict."""
    if patterns is None:
        patterns = UndesirablePatternSet.defaults()
    report = _core._evaluate_json(tasks, list(policies), dict(backends or {}), patterns, prefilter, quality)
    return json.loads(report)


__all__ = [name for name in dir() if not name.startswith("_")]
