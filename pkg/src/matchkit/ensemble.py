"""Ranked candidate generation, online matcher-weight learning, and the
session state machine that ties matching, provenance, and agent memory
together.

Mutations follow a single-writer contract: one at a time per session,
each recorded on the timeline with an inverse payload that reverts it
exactly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .agent import Feedback, MemoryStore
from .config import DEFAULT_CONFIG, EngineConfig
from .core import (
    SourceAttribute,
    SourceDataset,
    TargetAttribute,
    TargetSchema,
    normalize_name,
)
from .errors import (
    BadRequest,
    DuplicateMatcherId,
    EmptyGroundTruth,
    InvalidTransition,
    InvalidWeight,
    NoMatchersRegistered,
    PluginFailed,
    UnknownCandidate,
    UnknownKey,
)
from .matchers import (
    Matcher,
    MatcherRegistry,
    MatchScore,
    SubprocessMatcher,
    MatcherDescriptor,
    MatcherKind,
    default_registry,
    detect_easy_matches,
)
from .provenance import EventKind, ProvenanceEvent, Timeline
from .semantics import ClusterAssignment, cluster_sources, embed_sources


class CandidateStatus(str, Enum):
    SUGGESTED = "suggested"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EASY_ACCEPTED = "easy_accepted"
    SHADOWED = "shadowed"


_ACCEPT_FROM = {CandidateStatus.SUGGESTED, CandidateStatus.SHADOWED}
_REJECT_FROM = {CandidateStatus.SUGGESTED, CandidateStatus.SHADOWED, CandidateStatus.EASY_ACCEPTED}
DECIDED = {CandidateStatus.ACCEPTED, CandidateStatus.REJECTED}


@dataclass
class Candidate:
    """One (source, target) proposal with its per-matcher evidence.

    `support` holds the matchers whose own per-source top-k ranking contains
    this target; those are the matchers rewarded or penalized when the user
    decides. Easy matches carry no per-matcher scores and keep score 1.0.
    """

    source: str
    target: str
    per_matcher: dict[str, float]
    support: frozenset[str]
    ensemble_score: float
    rank: int
    status: CandidateStatus

    def match_scores(self) -> list[MatchScore]:
        return [MatchScore(mid, s) for mid, s in sorted(self.per_matcher.items())]

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "per_matcher": {k: self.per_matcher[k] for k in sorted(self.per_matcher)},
            "support": sorted(self.support),
            "ensemble_score": self.ensemble_score,
            "rank": self.rank,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Candidate":
        return cls(
            source=d["source"],
            target=d["target"],
            per_matcher={k: float(v) for k, v in d["per_matcher"].items()},
            support=frozenset(d["support"]),
            ensemble_score=float(d["ensemble_score"]),
            rank=int(d["rank"]),
            status=CandidateStatus(d["status"]),
        )


@dataclass
class MatcherWeights:
    """Live ensemble weight vector, clamped to [w_min, w_max]."""

    weights: dict[str, float]
    alpha: float = 0.1
    beta: float = 0.1
    w_min: float = 0.0
    w_max: float = 2.0

    def clamp(self, value: float) -> float:
        return min(max(value, self.w_min), self.w_max)

    def mean(self) -> float:
        if not self.weights:
            return 1.0
        return sum(self.weights.values()) / len(self.weights)

    def snapshot(self) -> dict[str, float]:
        return dict(self.weights)


def ensemble_score(per_matcher: Mapping[str, float], weights: MatcherWeights) -> float:
    """Weighted mean of matcher scores, renormalized by the weight sum.

    With an all-zero weight denominator the plain mean is used instead; the
    result is clamped into [min score, max score] so convexity survives
    floating-point rounding.
    """
    if not per_matcher:
        raise ValueError("no matcher scores to combine")
    num = 0.0
    den = 0.0
    for mid, score in per_matcher.items():
        w = weights.weights.get(mid, 0.0)
        num += w * score
        den += w
    value = num / den if den > 0.0 else sum(per_matcher.values()) / len(per_matcher)
    lo = min(per_matcher.values())
    hi = max(per_matcher.values())
    return min(max(value, lo), hi)


def rank_candidates(candidates: list[Candidate], weights: MatcherWeights) -> None:
    """Recompute ensemble scores and reassign ranks 1..n, in place.

    Candidates without matcher scores (easy matches, manual decisions) keep
    their current score. Ties break by target name ascending.
    """
    for c in candidates:
        if c.per_matcher:
            c.ensemble_score = ensemble_score(c.per_matcher, weights)
    candidates.sort(key=lambda c: (-c.ensemble_score, c.target))
    for i, c in enumerate(candidates, start=1):
        c.rank = i


def score_pair(
    registry: MatcherRegistry, source: SourceAttribute, target: TargetAttribute
) -> dict[str, float]:
    """Score one pair with every active matcher; failed plugins are skipped."""
    out: dict[str, float] = {}
    for matcher in registry.active():
        try:
            out[matcher.id] = matcher.score_pairs([(source, target)])[0]
        except PluginFailed:
            registry.mark_failed(matcher.id)
    return out


def generate_candidates(
    source: SourceDataset,
    target: TargetSchema,
    registry: MatcherRegistry,
    weights: MatcherWeights,
    k: int,
    easy_pairs: Sequence[tuple[str, str]] = (),
) -> dict[str, list[Candidate]]:
    """Per-source ranked candidate lists.

    Source attributes covered by an easy match get exactly their easy pairs
    (score fixed at 1.0): singletons arrive already easy_accepted, ambiguous
    ones arrive suggested for the user to disambiguate. Every other source
    attribute gets its top-k targets by ensemble score.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    matchers = registry.active()
    if not matchers:
        raise NoMatchersRegistered("no active matchers")

    easy_by_source: dict[str, list[str]] = {}
    for s, t in easy_pairs:
        easy_by_source.setdefault(s, []).append(t)

    non_easy = [a for a in source.attributes if a.name not in easy_by_source]
    targets = list(target.attributes)
    pairs = [(s, t) for s in non_easy for t in targets]

    # matcher id -> flat score list aligned with `pairs`
    score_table: dict[str, list[float]] = {}
    for matcher in matchers:
        try:
            score_table[matcher.id] = matcher.score_pairs(pairs)
        except PluginFailed:
            registry.mark_failed(matcher.id)

    if not score_table:
        raise NoMatchersRegistered("every matcher failed")

    result: dict[str, list[Candidate]] = {}
    offset = 0
    n_targets = len(targets)
    by_source_scores: dict[str, dict[str, dict[str, float]]] = {}
    for s_attr in non_easy:
        per_target: dict[str, dict[str, float]] = {
            t.name: {} for t in targets
        }
        for mid, flat in score_table.items():
            row = flat[offset : offset + n_targets]
            for t_attr, score in zip(targets, row):
                per_target[t_attr.name][mid] = score
        by_source_scores[s_attr.name] = per_target
        offset += n_targets

    for s_attr in source.attributes:
        name = s_attr.name
        if name in easy_by_source:
            targets_for_easy = sorted(easy_by_source[name])
            status = (
                CandidateStatus.EASY_ACCEPTED
                if len(targets_for_easy) == 1
                else CandidateStatus.SUGGESTED
            )
            lst = [
                Candidate(
                    source=name,
                    target=t,
                    per_matcher={},
                    support=frozenset(),
                    ensemble_score=1.0,
                    rank=i + 1,
                    status=status,
                )
                for i, t in enumerate(targets_for_easy)
            ]
            result[name] = lst
            continue

        per_target = by_source_scores[name]
        # Each matcher's own top-k target set defines candidate support.
        support_sets: dict[str, set[str]] = {}
        for mid in score_table:
            ranked = sorted(
                per_target.items(), key=lambda kv: (-kv[1].get(mid, 0.0), kv[0])
            )
            support_sets[mid] = {t for t, _ in ranked[:k]}

        scored = [
            (ensemble_score(scores, weights), t_name, scores)
            for t_name, scores in per_target.items()
        ]
        scored.sort(key=lambda row: (-row[0], row[1]))
        lst = []
        for i, (score, t_name, scores) in enumerate(scored[:k], start=1):
            support = frozenset(mid for mid, names in support_sets.items() if t_name in names)
            lst.append(
                Candidate(
                    source=name,
                    target=t_name,
                    per_matcher=dict(scores),
                    support=support,
                    ensemble_score=score,
                    rank=i,
                    status=CandidateStatus.SUGGESTED,
                )
            )
        result[name] = lst
    return result


@dataclass(frozen=True)
class GroundTruth:
    """Known-correct (source, target) pairs, compared on normalized names."""

    pairs: frozenset[tuple[str, str]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GroundTruth":
        return cls(frozenset((normalize_name(s), normalize_name(t)) for s, t in pairs))

    def __len__(self) -> int:
        return len(self.pairs)


def ranking_view(candidates: Mapping[str, Sequence[Candidate]]) -> dict[str, list[str]]:
    """source name -> target names in rank order."""
    return {
        s: [c.target for c in sorted(lst, key=lambda c: c.rank)]
        for s, lst in candidates.items()
    }


def rank_by_matcher(
    candidates: Mapping[str, Sequence[Candidate]], matcher_id: str
) -> dict[str, list[str]]:
    """Re-rank each source's candidates by a single matcher's scores."""
    out = {}
    for s, lst in candidates.items():
        ranked = sorted(lst, key=lambda c: (-c.per_matcher.get(matcher_id, 0.0), c.target))
        out[s] = [c.target for c in ranked]
    return out


def precision_at_k(
    rankings: Mapping[str, Sequence[str]], truth: GroundTruth, k: int
) -> float:
    """Fraction of ground-truth pairs found in each source's top-k list,
    averaged over the source attributes that appear in the ground truth."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not truth.pairs:
        raise EmptyGroundTruth("ground truth has no pairs")
    truth_by_source: dict[str, set[str]] = {}
    for s, t in truth.pairs:
        truth_by_source.setdefault(s, set()).add(t)

    normalized_rankings = {
        normalize_name(s): [normalize_name(t) for t in targets]
        for s, targets in rankings.items()
    }
    total = 0.0
    for s, expected in truth_by_source.items():
        top = set(normalized_rankings.get(s, [])[:k])
        total += len(expected & top) / len(expected)
    return total / len(truth_by_source)


class MatchSession:
    """One curation task: datasets, weights, candidates, timeline, memory.

    All mutating methods record a provenance event and are meant to be
    called by one writer at a time; reads are safe against the resulting
    snapshots.
    """

    def __init__(
        self,
        source: SourceDataset,
        target: TargetSchema,
        config: EngineConfig = DEFAULT_CONFIG,
        registry: MatcherRegistry | None = None,
        memory: MemoryStore | None = None,
    ) -> None:
        self.source = source
        self.target = target
        self.config = config
        self.initial_config = config
        self.registry = registry if registry is not None else default_registry(config.ngram_value_sample)
        ids = self.registry.ids()
        if not ids:
            raise NoMatchersRegistered("session needs at least one matcher")
        self.weights = MatcherWeights(
            weights={mid: config.initial_weight for mid in ids},
            alpha=config.alpha,
            beta=config.beta,
            w_min=config.w_min,
            w_max=config.w_max,
        )
        self.memory = memory if memory is not None else MemoryStore()
        self.timeline = Timeline()
        self.warnings: list[str] = []
        self.value_map_overrides: dict[tuple[str, str], tuple[tuple[str, str], ...]] = {}
        self._matcher_objects: dict[str, Matcher] = {}
        self.easy_pairs = detect_easy_matches(
            source, target, config.theta_name, config.theta_value, config.easy_value_sample
        )
        self.candidates = generate_candidates(
            source, target, self.registry, self.weights, config.top_k, self.easy_pairs
        )
        self.warnings.extend(self.registry.drain_warnings())
        self._clusters: ClusterAssignment | None = None

    # ---- queries -------------------------------------------------------

    def candidates_for(self, source_name: str) -> list[Candidate]:
        lst = self.candidates.get(source_name)
        if lst is None:
            key = normalize_name(source_name)
            for name, values in self.candidates.items():
                if normalize_name(name) == key:
                    return values
            raise UnknownCandidate(f"unknown source attribute {source_name!r}")
        return lst

    def candidate(self, source_name: str, target_name: str) -> Candidate:
        lst = self.candidates_for(source_name)
        for c in lst:
            if c.target == target_name:
                return c
        key = normalize_name(target_name)
        for c in lst:
            if normalize_name(c.target) == key:
                return c
        raise UnknownCandidate(f"no candidate ({source_name!r}, {target_name!r})")

    def all_candidates(self) -> list[Candidate]:
        return [c for lst in self.candidates.values() for c in lst]

    def status_counts(self) -> dict[str, int]:
        counts = Counter(c.status.value for c in self.all_candidates())
        return {status.value: counts.get(status.value, 0) for status in CandidateStatus}

    def clusters(self) -> ClusterAssignment:
        if self._clusters is None:
            embeddings = embed_sources(
                list(self.source.attributes),
                dim=self.config.embedding_dim,
                value_sample=self.config.ngram_value_sample,
            )
            self._clusters = cluster_sources(
                embeddings, n_neighbors=self.config.n_neighbors, tau=self.config.cluster_tau
            )
        return self._clusters

    def summary(self) -> dict[str, Any]:
        return {
            "source": self.source.name,
            "target": self.target.name,
            "source_attributes": len(self.source.attributes),
            "target_attributes": len(self.target.attributes),
            "counts": self.status_counts(),
            "easy_pairs": len(self.easy_pairs),
            "weights": {k: self.weights.weights[k] for k in sorted(self.weights.weights)},
            "thresholds": {
                "theta_name": self.config.theta_name,
                "theta_value": self.config.theta_value,
            },
            "matchers": [
                {
                    "id": m.descriptor.id,
                    "display_name": m.descriptor.display_name,
                    "kind": m.descriptor.kind.value,
                    "failed": m.id in self.registry.failed,
                }
                for m in self.registry.matchers.values()
            ],
            "timeline": {"events": len(self.timeline.events), "cursor": self.timeline.cursor},
            "warnings": list(self.warnings),
        }

    def state_snapshot(self) -> dict[str, Any]:
        """Mutation-relevant state, used for undo/replay equality checks."""
        return {
            "matchers": sorted(self.registry.matchers),
            "weights": {k: self.weights.weights[k] for k in sorted(self.weights.weights)},
            "statuses": sorted(
                (c.source, c.target, c.status.value) for c in self.all_candidates()
            ),
            "thresholds": (self.config.theta_name, self.config.theta_value),
            "feedback": dict(sorted(self.memory.feedback_map().items())),
            "value_mappings": sorted(
                (s, t, list(pairs)) for (s, t), pairs in self.value_map_overrides.items()
            ),
        }

    # ---- mutations ------------------------------------------------------

    def accept(self, source: str, target: str, timestamp: str | None = None) -> ProvenanceEvent:
        return self._mutate(EventKind.ACCEPT, {"source": source, "target": target}, timestamp)

    def reject(self, source: str, target: str, timestamp: str | None = None) -> ProvenanceEvent:
        return self._mutate(EventKind.REJECT, {"source": source, "target": target}, timestamp)

    def set_weights(self, updates: Mapping[str, float], timestamp: str | None = None) -> ProvenanceEvent:
        payload = {"set": {k: float(v) for k, v in updates.items()}}
        return self._mutate(EventKind.WEIGHT_ADJUSTED, payload, timestamp)

    def set_thresholds(
        self,
        theta_name: float | None = None,
        theta_value: float | None = None,
        timestamp: str | None = None,
    ) -> ProvenanceEvent:
        payload = {
            "theta_name": self.config.theta_name if theta_name is None else float(theta_name),
            "theta_value": self.config.theta_value if theta_value is None else float(theta_value),
        }
        return self._mutate(EventKind.THRESHOLD_CHANGED, payload, timestamp)

    def record_feedback(self, key: str, feedback: str | Feedback, timestamp: str | None = None) -> ProvenanceEvent:
        value = feedback.value if isinstance(feedback, Feedback) else str(feedback)
        return self._mutate(EventKind.FEEDBACK_RECORDED, {"key": key, "feedback": value}, timestamp)

    def set_value_mapping(
        self,
        source: str,
        target: str,
        pairs: Sequence[tuple[str, str]],
        timestamp: str | None = None,
    ) -> ProvenanceEvent:
        payload = {
            "source": source,
            "target": target,
            "pairs": [[s, t] for s, t in pairs],
        }
        return self._mutate(EventKind.VALUE_MAPPING_EDITED, payload, timestamp)

    def register_matcher(self, matcher: Matcher, timestamp: str | None = None) -> ProvenanceEvent:
        self._matcher_objects[matcher.id] = matcher
        payload = {
            "id": matcher.id,
            "display_name": matcher.descriptor.display_name,
            "kind": matcher.descriptor.kind.value,
            "command": list(matcher.command) if isinstance(matcher, SubprocessMatcher) else None,
        }
        return self._mutate(EventKind.MATCHER_REGISTERED, payload, timestamp)

    def undo(self) -> ProvenanceEvent:
        event = self.timeline.step_back()
        self._revert(event)
        return event

    def redo(self) -> ProvenanceEvent:
        event = self.timeline.step_forward()
        self._apply(event.kind, event.payload)
        return event

    def jump_to(self, seq: int) -> None:
        """Equivalent to the undo/redo sequence reaching cursor == seq."""
        self.timeline.check_seq(seq)
        while self.timeline.cursor > seq:
            self.undo()
        while self.timeline.cursor < seq:
            self.redo()

    # ---- mutation machinery ---------------------------------------------

    def _mutate(self, kind: EventKind, payload: dict[str, Any], timestamp: str | None) -> ProvenanceEvent:
        self._check(kind, payload)
        inverse = self._snapshot_for(kind, payload)
        self._apply(kind, payload)
        return self.timeline.record(kind, payload, inverse, timestamp)

    def _check(self, kind: EventKind, payload: dict[str, Any]) -> None:
        if kind in (EventKind.ACCEPT, EventKind.REJECT):
            c = self.candidate(payload["source"], payload["target"])
            allowed = _ACCEPT_FROM if kind is EventKind.ACCEPT else _REJECT_FROM
            if c.status not in allowed:
                raise InvalidTransition(
                    f"cannot {kind.value} candidate in status {c.status.value!r}"
                )
        elif kind is EventKind.WEIGHT_ADJUSTED:
            updates = payload["set"]
            merged = dict(self.weights.weights)
            for mid, value in updates.items():
                if mid not in merged:
                    raise InvalidWeight(f"unknown matcher id {mid!r}")
                if not self.weights.w_min <= value <= self.weights.w_max:
                    raise InvalidWeight(
                        f"weight {value} for {mid!r} outside [{self.weights.w_min}, {self.weights.w_max}]"
                    )
                merged[mid] = value
            if not any(v > 0 for v in merged.values()):
                raise InvalidWeight("at least one weight must be positive")
        elif kind is EventKind.THRESHOLD_CHANGED:
            for key in ("theta_name", "theta_value"):
                if not 0.0 <= payload[key] <= 1.0:
                    raise BadRequest(f"{key} must lie in [0, 1]")
        elif kind is EventKind.FEEDBACK_RECORDED:
            if payload["feedback"] not in (Feedback.CONFIRMED.value, Feedback.CORRECTED.value):
                raise BadRequest(f"invalid feedback {payload['feedback']!r}")
            if self.memory.get(payload["key"]) is None:
                raise UnknownKey(f"no memory entry for key {payload['key']!r}")
        elif kind is EventKind.VALUE_MAPPING_EDITED:
            self.candidate(payload["source"], payload["target"])
            pairs = payload["pairs"]
            sources = [p[0] for p in pairs]
            targets = [p[1] for p in pairs]
            if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
                raise BadRequest("value mapping must be one-to-one")
        elif kind is EventKind.MATCHER_REGISTERED:
            if payload["id"] in self.registry.matchers:
                raise DuplicateMatcherId(f"matcher id {payload['id']!r} already registered")

    def _snapshot_for(self, kind: EventKind, payload: dict[str, Any]) -> dict[str, Any]:
        if kind in (EventKind.ACCEPT, EventKind.REJECT):
            lst = self.candidates_for(payload["source"])
            return {
                "weights": self.weights.snapshot(),
                "statuses": [[c.source, c.target, c.status.value] for c in lst],
            }
        if kind is EventKind.WEIGHT_ADJUSTED:
            return {"weights": self.weights.snapshot()}
        if kind in (EventKind.THRESHOLD_CHANGED, EventKind.MATCHER_REGISTERED):
            return {
                "weights": self.weights.snapshot(),
                "theta_name": self.config.theta_name,
                "theta_value": self.config.theta_value,
                "easy": [[s, t] for s, t in self.easy_pairs],
                "lists": self._serialize_lists(),
            }
        if kind is EventKind.FEEDBACK_RECORDED:
            entry = self.memory.get(payload["key"])
            prior = entry.user_feedback.value if entry and entry.user_feedback else None
            return {"key": payload["key"], "feedback": prior}
        if kind is EventKind.VALUE_MAPPING_EDITED:
            key = (payload["source"], payload["target"])
            prior = self.value_map_overrides.get(key)
            return {
                "source": payload["source"],
                "target": payload["target"],
                "pairs": [[s, t] for s, t in prior] if prior is not None else None,
            }
        raise ValueError(f"unhandled event kind {kind}")

    def _apply(self, kind: EventKind, payload: dict[str, Any]) -> None:
        if kind is EventKind.ACCEPT:
            c = self.candidate(payload["source"], payload["target"])
            s_i, r_i = c.ensemble_score, c.rank
            payload["score"], payload["rank"] = s_i, r_i
            c.status = CandidateStatus.ACCEPTED
            for sibling in self.candidates_for(payload["source"]):
                if sibling is not c and sibling.status in (
                    CandidateStatus.SUGGESTED,
                    CandidateStatus.ACCEPTED,
                    CandidateStatus.EASY_ACCEPTED,
                ):
                    sibling.status = CandidateStatus.SHADOWED
            for mid in c.support:
                w = self.weights.weights.get(mid)
                if w is not None:
                    self.weights.weights[mid] = self.weights.clamp(
                        w + self.weights.alpha * s_i / r_i
                    )
            self._recompute()
        elif kind is EventKind.REJECT:
            c = self.candidate(payload["source"], payload["target"])
            s_i, r_i = c.ensemble_score, c.rank
            payload["score"], payload["rank"] = s_i, r_i
            was_easy = c.status is CandidateStatus.EASY_ACCEPTED
            c.status = CandidateStatus.REJECTED
            if not was_easy:
                # Easy matches bypass the matchers, so rejecting one leaves
                # the weights untouched (their support set is empty anyway).
                for mid in c.support:
                    w = self.weights.weights.get(mid)
                    if w is not None:
                        self.weights.weights[mid] = self.weights.clamp(
                            w - self.weights.beta * s_i / r_i
                        )
            self._recompute()
        elif kind is EventKind.WEIGHT_ADJUSTED:
            for mid, value in payload["set"].items():
                self.weights.weights[mid] = float(value)
            self._recompute()
        elif kind is EventKind.THRESHOLD_CHANGED:
            self.config = self.config.merged(
                {"theta_name": payload["theta_name"], "theta_value": payload["theta_value"]}
            )
            self._regenerate()
        elif kind is EventKind.MATCHER_REGISTERED:
            matcher = self._matcher_objects.get(payload["id"])
            if matcher is None:
                if payload.get("command"):
                    matcher = SubprocessMatcher(
                        MatcherDescriptor(
                            payload["id"], payload["display_name"], MatcherKind(payload["kind"])
                        ),
                        payload["command"],
                    )
                    self._matcher_objects[payload["id"]] = matcher
                else:
                    raise BadRequest(
                        f"matcher {payload['id']!r} has no registered implementation"
                    )
            mean = self.weights.mean()
            self.registry.register(matcher)
            self.weights.weights[matcher.id] = self.weights.clamp(mean)
            self._regenerate()
        elif kind is EventKind.FEEDBACK_RECORDED:
            self.memory.set_feedback(payload["key"], Feedback(payload["feedback"]))
        elif kind is EventKind.VALUE_MAPPING_EDITED:
            key = (payload["source"], payload["target"])
            self.value_map_overrides[key] = tuple((s, t) for s, t in payload["pairs"])
        else:
            raise ValueError(f"unhandled event kind {kind}")

    def _revert(self, event: ProvenanceEvent) -> None:
        kind, inverse = event.kind, event.inverse_payload
        if kind in (EventKind.ACCEPT, EventKind.REJECT):
            self.weights.weights = dict(inverse["weights"])
            for source, target, status in inverse["statuses"]:
                self.candidate(source, target).status = CandidateStatus(status)
            self._recompute()
        elif kind is EventKind.WEIGHT_ADJUSTED:
            self.weights.weights = dict(inverse["weights"])
            self._recompute()
        elif kind in (EventKind.THRESHOLD_CHANGED, EventKind.MATCHER_REGISTERED):
            if kind is EventKind.MATCHER_REGISTERED:
                self.registry.unregister(event.payload["id"])
            self.weights.weights = dict(inverse["weights"])
            self.config = self.config.merged(
                {"theta_name": inverse["theta_name"], "theta_value": inverse["theta_value"]}
            )
            self.easy_pairs = [(s, t) for s, t in inverse["easy"]]
            self.candidates = self._restore_lists(inverse["lists"])
        elif kind is EventKind.FEEDBACK_RECORDED:
            prior = inverse["feedback"]
            self.memory.set_feedback(inverse["key"], Feedback(prior) if prior else None)
        elif kind is EventKind.VALUE_MAPPING_EDITED:
            key = (inverse["source"], inverse["target"])
            if inverse["pairs"] is None:
                self.value_map_overrides.pop(key, None)
            else:
                self.value_map_overrides[key] = tuple((s, t) for s, t in inverse["pairs"])
        else:
            raise ValueError(f"unhandled event kind {kind}")

    def _recompute(self) -> None:
        for lst in self.candidates.values():
            rank_candidates(lst, self.weights)

    def _serialize_lists(self) -> list[list[Any]]:
        return [
            [source, [c.to_dict() for c in lst]] for source, lst in self.candidates.items()
        ]

    def _restore_lists(self, data: list[list[Any]]) -> dict[str, list[Candidate]]:
        return {source: [Candidate.from_dict(d) for d in dicts] for source, dicts in data}

    def _regenerate(self) -> None:
        """Re-run easy detection and candidate generation, carrying over the
        user's accept/reject decisions."""
        decided = {
            (c.source, c.target): c.status
            for c in self.all_candidates()
            if c.status in DECIDED
        }
        self.easy_pairs = detect_easy_matches(
            self.source,
            self.target,
            self.config.theta_name,
            self.config.theta_value,
            self.config.easy_value_sample,
        )
        self.candidates = generate_candidates(
            self.source,
            self.target,
            self.registry,
            self.weights,
            self.config.top_k,
            self.easy_pairs,
        )
        self.warnings.extend(self.registry.drain_warnings())
        for (s, t), status in decided.items():
            lst = self.candidates.get(s)
            if lst is None:
                continue
            existing = next((c for c in lst if c.target == t), None)
            if existing is not None:
                existing.status = status
            else:
                s_attr = self.source.attribute(s)
                t_attr = self.target.attribute(t)
                per = (
                    score_pair(self.registry, s_attr, t_attr)
                    if s_attr is not None and t_attr is not None
                    else {}
                )
                lst.append(
                    Candidate(
                        source=s,
                        target=t,
                        per_matcher=per,
                        support=frozenset(),
                        ensemble_score=1.0 if not per else 0.0,
                        rank=len(lst) + 1,
                        status=status,
                    )
                )
        for lst in self.candidates.values():
            if any(c.status is CandidateStatus.ACCEPTED for c in lst):
                for c in lst:
                    if c.status in (CandidateStatus.SUGGESTED, CandidateStatus.EASY_ACCEPTED):
                        c.status = CandidateStatus.SHADOWED
        self._recompute()
