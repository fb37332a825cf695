"""Source-attribute clustering, value mapping, and distribution comparison.

The embedding is a deterministic character-3-gram TF-IDF vector hashed to a
fixed dimension; a different provider can be swapped in without touching the
clustering code.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from math import log
from typing import Iterable, Protocol, Sequence

import numpy as np

from .core import SourceAttribute, ValueProfile
from .matchers import attribute_trigrams, partial_fuzzy_score


def _bucket(gram: str, dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


@dataclass(frozen=True)
class AttributeEmbedding:
    name: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"embedding for {self.name!r} is not unit length (norm {norm})")


class EmbeddingProvider(Protocol):
    def embed(self, attr: SourceAttribute) -> AttributeEmbedding: ...


class NgramEmbeddingProvider:
    """Hashed character-3-gram TF-IDF embeddings.

    IDF statistics come from the corpus handed to the constructor; with no
    corpus every gram gets weight ln(1) + 1 = 1 and the vector degrades to
    plain TF.
    """

    def __init__(
        self,
        corpus: Iterable[SourceAttribute] = (),
        dim: int = 512,
        value_sample: int = 20,
    ) -> None:
        self.dim = dim
        self.value_sample = value_sample
        df: Counter = Counter()
        n_docs = 0
        for attr in corpus:
            n_docs += 1
            df.update(set(self._grams(attr)))
        self._idf = {g: log((1 + n_docs) / (1 + count)) + 1.0 for g, count in df.items()}
        self._default_idf = log(1 + n_docs) + 1.0

    def _grams(self, attr: SourceAttribute) -> Counter:
        return attribute_trigrams(attr, value_sample=self.value_sample)

    def embed(self, attr: SourceAttribute) -> AttributeEmbedding:
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram, tf in self._grams(attr).items():
            vec[_bucket(gram, self.dim)] += tf * self._idf.get(gram, self._default_idf)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0  # all-zero input maps to a fixed basis vector
        else:
            vec /= norm
        return AttributeEmbedding(name=attr.name, vector=vec)


def embed_attribute(
    attr: SourceAttribute, provider: EmbeddingProvider | None = None
) -> AttributeEmbedding:
    if provider is None:
        provider = NgramEmbeddingProvider()
    return provider.embed(attr)


def embed_sources(
    attributes: Sequence[SourceAttribute], dim: int = 512, value_sample: int = 20
) -> list[AttributeEmbedding]:
    provider = NgramEmbeddingProvider(attributes, dim=dim, value_sample=value_sample)
    return [provider.embed(a) for a in attributes]


@dataclass(frozen=True)
class ClusterAssignment:
    clusters: tuple[tuple[str, ...], ...]

    def cluster_of(self, name: str) -> int | None:
        for i, members in enumerate(self.clusters):
            if name in members:
                return i
        return None


def cluster_sources(
    embeddings: Sequence[AttributeEmbedding], n_neighbors: int = 5, tau: float = 0.6
) -> ClusterAssignment:
    """Connected components of the cosine k-nearest-neighbor graph.

    An edge joins a and b when b is among a's n_neighbors by cosine AND the
    cosine is at least tau. Processing is name-sorted so the partition does
    not depend on input order.
    """
    if n_neighbors < 1:
        raise ValueError("n_neighbors must be >= 1")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    ordered = sorted(embeddings, key=lambda e: e.name)
    n = len(ordered)
    if n == 0:
        return ClusterAssignment(clusters=())
    matrix = np.stack([e.vector for e in ordered])
    cosines = matrix @ matrix.T

    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(n):
        others = [(float(cosines[i, j]), j) for j in range(n) if j != i]
        others.sort(key=lambda cj: (-cj[0], ordered[cj[1]].name))
        for cos, j in others[:n_neighbors]:
            if cos >= tau:
                union(i, j)

    groups: dict[int, list[str]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(ordered[i].name)
    clusters = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda c: c[0])
    return ClusterAssignment(clusters=tuple(clusters))


@dataclass(frozen=True)
class ValueMapping:
    """One-to-one alignment between unique source and target values."""

    pairs: tuple[tuple[str, str, float], ...]
    unmapped_source: tuple[str, ...]
    unmapped_target: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "pairs": [[s, t, score] for s, t, score in self.pairs],
            "unmapped_source": list(self.unmapped_source),
            "unmapped_target": list(self.unmapped_target),
        }


def _unique_in_order(values: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def map_values(
    src_values: Iterable[str], tgt_values: Iterable[str], floor: float = 0.5
) -> ValueMapping:
    """Greedy one-to-one assignment by descending fuzzy similarity.

    Candidate pairs below the floor are never assigned; ties are broken by
    source then target value, ascending, so the result is deterministic.
    """
    src = _unique_in_order(src_values)
    tgt = _unique_in_order(tgt_values)
    scored = []
    for s in src:
        for t in tgt:
            score = partial_fuzzy_score(s, t)
            if score >= floor:
                scored.append((s, t, score))
    scored.sort(key=lambda p: (-p[2], p[0], p[1]))

    used_s: set[str] = set()
    used_t: set[str] = set()
    pairs = []
    for s, t, score in scored:
        if s in used_s or t in used_t:
            continue
        used_s.add(s)
        used_t.add(t)
        pairs.append((s, t, score))
    return ValueMapping(
        pairs=tuple(pairs),
        unmapped_source=tuple(s for s in src if s not in used_s),
        unmapped_target=tuple(t for t in tgt if t not in used_t),
    )


@dataclass(frozen=True)
class DistributionComparison:
    aligned_bins: tuple[tuple[str, int, int], ...]
    overlap: float

    def to_dict(self) -> dict:
        return {
            "aligned_bins": [[label, s, t] for label, s, t in self.aligned_bins],
            "overlap": self.overlap,
        }


def _numeric_weighted(profile: ValueProfile) -> list[tuple[float, int]]:
    out = []
    for value, count in profile.value_counts.items():
        try:
            x = float(value)
        except ValueError:
            continue
        out.append((x, count))
    return out


def compare_distributions(
    s: ValueProfile, t: ValueProfile, bins: int = 10, top: int = 20
) -> DistributionComparison:
    """Align two profiles on shared bins and measure frequency overlap.

    Overlap is the sum over bins of min(p_s, p_t) on normalized frequencies:
    1.0 for identical distributions, 0.0 for disjoint ones. Numeric profiles
    are re-binned on shared equal-width bins over the combined range;
    everything else is compared per distinct value.
    """
    numeric = s.numeric_stats is not None and t.numeric_stats is not None
    if numeric:
        return _compare_numeric(s, t, bins)
    return _compare_categorical(s, t, top)


def _compare_categorical(s: ValueProfile, t: ValueProfile, top: int) -> DistributionComparison:
    total_s = sum(s.value_counts.values())
    total_t = sum(t.value_counts.values())
    overlap = 0.0
    if total_s and total_t:
        for value in set(s.value_counts) | set(t.value_counts):
            ps = s.value_counts.get(value, 0) / total_s
            pt = t.value_counts.get(value, 0) / total_t
            overlap += min(ps, pt)
    top_s = {v for v, _ in sorted(s.value_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]}
    top_t = {v for v, _ in sorted(t.value_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]}
    shown = sorted(
        top_s | top_t,
        key=lambda v: (-(s.value_counts.get(v, 0) + t.value_counts.get(v, 0)), v),
    )
    aligned = tuple((v, s.value_counts.get(v, 0), t.value_counts.get(v, 0)) for v in shown)
    return DistributionComparison(aligned_bins=aligned, overlap=overlap)


def _compare_numeric(s: ValueProfile, t: ValueProfile, bins: int) -> DistributionComparison:
    vs = _numeric_weighted(s)
    vt = _numeric_weighted(t)
    if not vs or not vt:
        return DistributionComparison(aligned_bins=(), overlap=0.0)
    all_x = [x for x, _ in vs] + [x for x, _ in vt]
    lo, hi = min(all_x), max(all_x)
    if lo == hi:
        total_s = sum(c for _, c in vs)
        total_t = sum(c for _, c in vt)
        label = f"[{lo:g}, {hi:g}]"
        return DistributionComparison(aligned_bins=((label, total_s, total_t),), overlap=1.0)
    width = (hi - lo) / bins
    counts_s = [0] * bins
    counts_t = [0] * bins
    for values, counts in ((vs, counts_s), (vt, counts_t)):
        for x, c in values:
            idx = min(int((x - lo) / width), bins - 1)
            counts[idx] += c
    total_s = sum(counts_s)
    total_t = sum(counts_t)
    overlap = sum(
        min(cs / total_s, ct / total_t) for cs, ct in zip(counts_s, counts_t)
    )
    aligned = []
    for i in range(bins):
        left = lo + i * width
        right = lo + (i + 1) * width
        closer = "]" if i == bins - 1 else ")"
        aligned.append((f"[{left:g}, {right:g}{closer}", counts_s[i], counts_t[i]))
    return DistributionComparison(aligned_bins=tuple(aligned), overlap=overlap)


def profile_from_values(values: Sequence[str]) -> ValueProfile:
    """Uniform profile built from a bare value list (e.g. schema enums)."""
    from .core import profile_attribute

    return profile_attribute(list(values))
