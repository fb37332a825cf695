"""Similarity scorers, the matcher registry, and the easy-match heuristic.

All built-in matchers are pure and return scores in [0, 1]. The registry
also accepts user plugins, either as an in-process callable or as an
external command speaking a line-oriented JSON protocol.
"""

from __future__ import annotations

import json
import subprocess
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import sqrt
from typing import Callable, Iterable, Sequence

from .core import (
    SourceAttribute,
    SourceDataset,
    TargetAttribute,
    TargetSchema,
    ValueProfile,
    normalize_name,
    values_of,
)
from .errors import DuplicateMatcherId, PluginFailed


def levenshtein(a: str, b: str) -> int:
    """Edit distance, two-row dynamic programming."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@lru_cache(maxsize=1 << 16)
def _lev_cached(a: str, b: str) -> int:
    return levenshtein(a, b)


def _lev(a: str, b: str) -> int:
    # Symmetric, so cache one orientation only.
    return _lev_cached(a, b) if a <= b else _lev_cached(b, a)


def name_fuzzy_score(a: str, b: str) -> float:
    """Normalized Levenshtein similarity on normalized names.

    1.0 exactly when the normalized forms are equal; 0.0 when one side
    normalizes to empty and the other does not.
    """
    na, nb = normalize_name(a), normalize_name(b)
    if na == nb:
        return 1.0
    if not na or not nb:
        return 0.0
    return 1.0 - _lev(na, nb) / max(len(na), len(nb))


def partial_fuzzy_score(a: str, b: str) -> float:
    """Fuzzy similarity that also credits substring containment.

    The best of the whole-string normalized Levenshtein similarity and the
    best window of the longer string matched against the shorter one, so
    "IA" scores 1.0 against "Stage IA". Used for value-level alignment.
    """
    na, nb = normalize_name(a), normalize_name(b)
    if na == nb:
        return 1.0
    if not na or not nb:
        return 0.0
    short, long = (na, nb) if len(na) <= len(nb) else (nb, na)
    best = 1.0 - _lev(short, long) / len(long)
    w = len(short)
    for i in range(len(long) - w + 1):
        window = long[i : i + w]
        sim = 1.0 - _lev(short, window) / w
        if sim > best:
            best = sim
            if best == 1.0:
                break
    return best


def _token_set(name: str) -> frozenset[str]:
    return frozenset(t for t in normalize_name(name).split("_") if t)


def token_jaccard_score(a: str, b: str) -> float:
    ta, tb = _token_set(a), _token_set(b)
    if not ta and not tb:
        return 0.0
    union = ta | tb
    return len(ta & tb) / len(union)


def _normalized_value_set(values: Iterable[str]) -> frozenset[str]:
    return frozenset(v for v in (normalize_name(x) for x in values) if v)


def value_jaccard_score(
    s: ValueProfile | SourceAttribute | Iterable[str],
    t: ValueProfile | TargetAttribute | Iterable[str],
) -> float:
    """Set overlap of normalized unique values; 0.0 when either side is empty."""
    vs = _normalized_value_set(values_of(s))
    vt = _normalized_value_set(values_of(t))
    if not vs or not vt:
        return 0.0
    return len(vs & vt) / len(vs | vt)


def char_trigrams(text: str) -> Counter:
    """Character 3-gram counts; strings shorter than 3 count as one gram."""
    grams: Counter = Counter()
    if not text:
        return grams
    if len(text) < 3:
        grams[text] += 1
        return grams
    for i in range(len(text) - 2):
        grams[text[i : i + 3]] += 1
    return grams


def attribute_trigrams(
    attr: SourceAttribute | TargetAttribute, value_sample: int = 20
) -> Counter:
    """Combined 3-gram profile of name, description, and sampled values.

    Values are sorted before sampling so the profile does not depend on the
    row order of the original table.
    """
    grams = char_trigrams(normalize_name(attr.name))
    if isinstance(attr, TargetAttribute) and attr.description:
        grams += char_trigrams(attr.description.lower())
    for value in sorted(values_of(attr))[:value_sample]:
        grams += char_trigrams(value.lower())
    return grams


def _counter_norm(c: Counter) -> float:
    return sqrt(sum(v * v for v in c.values()))


def _counter_cosine(a: Counter, b: Counter, norm_a: float, norm_b: float) -> float:
    if a == b:
        # Identical profiles (including both-empty) score exactly 1.0.
        return 1.0
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(count * b[g] for g, count in a.items() if g in b)
    return dot / (norm_a * norm_b)


def ngram_embedding_score(
    s: SourceAttribute, t: TargetAttribute, value_sample: int = 20
) -> float:
    """Cosine of character-3-gram profiles, rescaled from [-1, 1] to [0, 1]."""
    ga, gb = attribute_trigrams(s, value_sample), attribute_trigrams(t, value_sample)
    cos = _counter_cosine(ga, gb, _counter_norm(ga), _counter_norm(gb))
    return (cos + 1.0) / 2.0


class MatcherKind(str, Enum):
    BUILTIN = "builtin"
    PLUGIN = "plugin"


@dataclass(frozen=True)
class MatcherDescriptor:
    id: str
    display_name: str
    kind: MatcherKind


@dataclass(frozen=True)
class MatchScore:
    matcher_id: str
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


Pair = tuple[SourceAttribute, TargetAttribute]


class Matcher:
    """One scoring method. Subclasses must fill in descriptor and scoring."""

    descriptor: MatcherDescriptor

    def __init__(self) -> None:
        self.warnings: list[str] = []

    @property
    def id(self) -> str:
        return self.descriptor.id

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        raise NotImplementedError


class NameFuzzyMatcher(Matcher):
    descriptor = MatcherDescriptor("name_fuzzy", "Name similarity", MatcherKind.BUILTIN)

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        return [name_fuzzy_score(s.name, t.name) for s, t in pairs]


class TokenJaccardMatcher(Matcher):
    descriptor = MatcherDescriptor("token_jaccard", "Token overlap", MatcherKind.BUILTIN)

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        tokens: dict[int, frozenset[str]] = {}

        def get(attr) -> frozenset[str]:
            key = id(attr)
            if key not in tokens:
                tokens[key] = _token_set(attr.name)
            return tokens[key]

        out = []
        for s, t in pairs:
            ta, tb = get(s), get(t)
            union = ta | tb
            out.append(len(ta & tb) / len(union) if union else 0.0)
        return out


class ValueJaccardMatcher(Matcher):
    descriptor = MatcherDescriptor("value_jaccard", "Value overlap", MatcherKind.BUILTIN)

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        sets: dict[int, frozenset[str]] = {}

        def get(attr) -> frozenset[str]:
            key = id(attr)
            if key not in sets:
                sets[key] = _normalized_value_set(values_of(attr))
            return sets[key]

        out = []
        for s, t in pairs:
            vs, vt = get(s), get(t)
            out.append(len(vs & vt) / len(vs | vt) if vs and vt else 0.0)
        return out


class NgramEmbeddingMatcher(Matcher):
    descriptor = MatcherDescriptor("ngram_embedding", "Character profile", MatcherKind.BUILTIN)

    def __init__(self, value_sample: int = 20) -> None:
        super().__init__()
        self.value_sample = value_sample

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        grams: dict[int, tuple[Counter, float]] = {}

        def get(attr) -> tuple[Counter, float]:
            key = id(attr)
            if key not in grams:
                g = attribute_trigrams(attr, self.value_sample)
                grams[key] = (g, _counter_norm(g))
            return grams[key]

        out = []
        for s, t in pairs:
            ga, na = get(s)
            gb, nb = get(t)
            out.append((_counter_cosine(ga, gb, na, nb) + 1.0) / 2.0)
        return out


class CallableMatcher(Matcher):
    """Plugin backed by an in-process callable (attr, attr) -> score.

    Out-of-range scores are clamped to [0, 1] and a warning is recorded.
    """

    def __init__(self, descriptor: MatcherDescriptor, scorer: Callable[..., float]) -> None:
        super().__init__()
        self.descriptor = descriptor
        self._scorer = scorer

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        out = []
        for s, t in pairs:
            try:
                raw = float(self._scorer(s, t))
            except Exception as exc:
                raise PluginFailed(f"matcher {self.id!r} raised: {exc}") from exc
            out.append(self._clamp(raw, s, t))
        return out

    def _clamp(self, raw: float, s: SourceAttribute, t: TargetAttribute) -> float:
        if 0.0 <= raw <= 1.0:
            return raw
        clamped = min(max(raw, 0.0), 1.0)
        self.warnings.append(
            f"matcher {self.id!r} returned {raw} for ({s.name}, {t.name}); clamped to {clamped}"
        )
        return clamped


def _pair_record(s: SourceAttribute, t: TargetAttribute, value_sample: int = 20) -> dict:
    return {
        "source": {
            "name": s.name,
            "type": s.profile.inferred_type.value,
            "values": list(s.profile.unique_values[:value_sample]),
        },
        "target": {
            "name": t.name,
            "type": t.value_type.value,
            "description": t.description,
            "values": list(t.known_values()[:value_sample]),
        },
    }


class SubprocessMatcher(Matcher):
    """Plugin run as an external command.

    One JSON record pair per input line, one real score per output line.
    A nonzero exit or unparsable output marks the plugin failed by raising
    PluginFailed; the caller decides what to do with the session.
    """

    def __init__(self, descriptor: MatcherDescriptor, command: Sequence[str], timeout: float = 120.0) -> None:
        super().__init__()
        self.descriptor = descriptor
        self.command = list(command)
        self.timeout = timeout

    def score_pairs(self, pairs: Sequence[Pair]) -> list[float]:
        stdin = "".join(json.dumps(_pair_record(s, t)) + "\n" for s, t in pairs)
        try:
            proc = subprocess.run(
                self.command,
                input=stdin,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PluginFailed(f"matcher {self.id!r}: {exc}") from exc
        if proc.returncode != 0:
            raise PluginFailed(f"matcher {self.id!r} exited {proc.returncode}: {proc.stderr.strip()[:200]}")
        lines = proc.stdout.splitlines()
        if len(lines) != len(pairs):
            raise PluginFailed(f"matcher {self.id!r} returned {len(lines)} scores for {len(pairs)} pairs")
        out = []
        for (s, t), line in zip(pairs, lines):
            try:
                raw = float(line.strip())
            except ValueError as exc:
                raise PluginFailed(f"matcher {self.id!r}: unparsable score {line.strip()!r}") from exc
            if 0.0 <= raw <= 1.0:
                out.append(raw)
            else:
                clamped = min(max(raw, 0.0), 1.0)
                self.warnings.append(
                    f"matcher {self.id!r} returned {raw} for ({s.name}, {t.name}); clamped to {clamped}"
                )
                out.append(clamped)
        return out


@dataclass
class MatcherRegistry:
    """Ordered collection of matchers; ids are unique within a session."""

    matchers: dict[str, Matcher] = field(default_factory=dict)
    failed: set[str] = field(default_factory=set)

    def register(self, matcher: Matcher) -> None:
        if matcher.id in self.matchers:
            raise DuplicateMatcherId(f"matcher id {matcher.id!r} already registered")
        self.matchers[matcher.id] = matcher

    def unregister(self, matcher_id: str) -> None:
        self.matchers.pop(matcher_id, None)
        self.failed.discard(matcher_id)

    def mark_failed(self, matcher_id: str) -> None:
        self.failed.add(matcher_id)

    def active(self) -> list[Matcher]:
        return [m for mid, m in self.matchers.items() if mid not in self.failed]

    def ids(self) -> list[str]:
        return [m.id for m in self.active()]

    def get(self, matcher_id: str) -> Matcher | None:
        return self.matchers.get(matcher_id)

    def drain_warnings(self) -> list[str]:
        out: list[str] = []
        for m in self.matchers.values():
            out.extend(m.warnings)
            m.warnings.clear()
        return out


def default_registry(value_sample: int = 20) -> MatcherRegistry:
    reg = MatcherRegistry()
    reg.register(NameFuzzyMatcher())
    reg.register(TokenJaccardMatcher())
    reg.register(ValueJaccardMatcher())
    reg.register(NgramEmbeddingMatcher(value_sample=value_sample))
    return reg


def aggregate_value_similarity(
    source_values: Sequence[str],
    target_values: Sequence[str],
    sample: int = 200,
) -> float:
    """Average over source values of the best fuzzy match in the target.

    Both sides are capped at `sample` unique values, taken in sorted order so
    the result does not depend on row order. Returns 0.0 when either side has
    no values.
    """
    svals = sorted(set(source_values))[:sample]
    tvals = sorted(set(target_values))[:sample]
    if not svals or not tvals:
        return 0.0
    t_normalized = {normalize_name(t) for t in tvals}
    total = 0.0
    for s in svals:
        if normalize_name(s) in t_normalized:
            total += 1.0
            continue
        best = 0.0
        for t in tvals:
            sim = name_fuzzy_score(s, t)
            if sim > best:
                best = sim
                if best == 1.0:
                    break
        total += best
    return total / len(svals)


def detect_easy_matches(
    source: SourceDataset,
    target: TargetSchema,
    theta_name: float,
    theta_value: float,
    value_sample: int = 200,
) -> list[tuple[str, str]]:
    """Pairs whose name similarity and value similarity both exceed thresholds.

    Result is a set of (source name, target name) pairs, returned sorted, and
    is invariant under the row order of the source table and the attribute
    order of the target schema. The name gate is checked first since the
    conjunction lets us skip the expensive value scan for most pairs.
    """
    if not 0.0 <= theta_name <= 1.0 or not 0.0 <= theta_value <= 1.0:
        raise ValueError("thresholds must lie in [0, 1]")
    out = []
    for s in source.attributes:
        for t in target.attributes:
            if name_fuzzy_score(s.name, t.name) <= theta_name:
                continue
            v = aggregate_value_similarity(
                s.profile.unique_values, t.known_values(), sample=value_sample
            )
            if v > theta_value:
                out.append((s.name, t.name))
    out.sort()
    return out
