"""Engine configuration: every tunable parameter with its default."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping


@dataclass(frozen=True)
class EngineConfig:
    # Easy-match thresholds (name similarity and aggregate value similarity).
    theta_name: float = 0.9
    theta_value: float = 0.9
    # Online weight learning.
    alpha: float = 0.1
    beta: float = 0.1
    w_min: float = 0.0
    w_max: float = 2.0
    initial_weight: float = 1.0
    # Candidates kept per source attribute.
    top_k: int = 10
    # Source clustering.
    n_neighbors: int = 5
    cluster_tau: float = 0.6
    embedding_dim: int = 512
    # Value mapping floor: pairs scoring below are left unmapped.
    value_map_floor: float = 0.5
    # Sampling bounds that keep pairwise value scans affordable.
    easy_value_sample: int = 200
    ngram_value_sample: int = 20
    # Profiling.
    numeric_bins: int = 10
    categorical_bins: int = 20
    numeric_parse_threshold: float = 0.9
    # Agent.
    agent_timeout: float = 30.0
    agent_memory_hits: int = 5
    agent_inflight: int = 4
    # Service guardrails.
    max_upload_bytes: int = 50 * 1024 * 1024
    max_attributes: int = 10_000
    page_size: int = 50

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def merged(self, overrides: Mapping[str, Any] | None) -> "EngineConfig":
        """Return a copy with the given overrides applied.

        Unknown keys raise ValueError so typos in config files do not pass
        silently.
        """
        if not overrides:
            return self
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **dict(overrides))


DEFAULT_CONFIG = EngineConfig()
