"""matchkit: human-in-the-loop schema matching.

Generates ranked attribute-match candidates between a source table and a
hierarchical target schema with an ensemble of matchers, auto-accepts
high-confidence easy matches, learns matcher weights from accept/reject
decisions, and explains candidates with an agent backed by persistent
memory. Exposed as a library, an HTTP API, and a CLI.
"""

__version__ = "0.1.0"

from .config import DEFAULT_CONFIG, EngineConfig
from .core import (
    SourceAttribute,
    SourceDataset,
    TargetAttribute,
    TargetSchema,
    ValueProfile,
    ValueType,
    ingest_source,
    normalize_name,
    parse_target_schema,
    profile_attribute,
)
from .ensemble import (
    Candidate,
    CandidateStatus,
    GroundTruth,
    MatchSession,
    MatcherWeights,
    generate_candidates,
    precision_at_k,
)
from .matchers import (
    MatcherDescriptor,
    MatcherRegistry,
    MatchScore,
    default_registry,
    detect_easy_matches,
    name_fuzzy_score,
    ngram_embedding_score,
    token_jaccard_score,
    value_jaccard_score,
)
from .semantics import cluster_sources, compare_distributions, embed_attribute, map_values

__all__ = [
    "DEFAULT_CONFIG",
    "EngineConfig",
    "SourceAttribute",
    "SourceDataset",
    "TargetAttribute",
    "TargetSchema",
    "ValueProfile",
    "ValueType",
    "ingest_source",
    "normalize_name",
    "parse_target_schema",
    "profile_attribute",
    "Candidate",
    "CandidateStatus",
    "GroundTruth",
    "MatchSession",
    "MatcherWeights",
    "generate_candidates",
    "precision_at_k",
    "MatcherDescriptor",
    "MatcherRegistry",
    "MatchScore",
    "default_registry",
    "detect_easy_matches",
    "name_fuzzy_score",
    "ngram_embedding_score",
    "token_jaccard_score",
    "value_jaccard_score",
    "cluster_sources",
    "compare_distributions",
    "embed_attribute",
    "map_values",
]
