"""Candidate validation: structured explanations, keyed memory, and a
deterministic fallback so the system stays usable with no model configured.

The model transport is a small provider interface (prompt text in, response
text out); tests use a recorded-transcript provider instead of the network.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping, Protocol, Sequence

from .core import TargetAttribute, ValueProfile
from .errors import (
    AgentTimeout,
    MalformedModelResponse,
    ModelUnavailable,
    UnknownKey,
)

KEY_SEPARATOR = "::"

CATEGORY_NAMES = ("semantic", "name", "token", "value", "pattern", "history", "knowledge", "other")


class ExplanationCategory(str, Enum):
    SEMANTIC = "semantic"
    NAME = "name"
    TOKEN = "token"
    VALUE = "value"
    PATTERN = "pattern"
    HISTORY = "history"
    KNOWLEDGE = "knowledge"
    OTHER = "other"


class Feedback(str, Enum):
    CONFIRMED = "confirmed"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class Explanation:
    is_match: bool
    category: ExplanationCategory
    reasoning: str
    references: tuple[str, ...]
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "is_match": self.is_match,
            "category": self.category.value,
            "reasoning": self.reasoning,
            "references": list(self.references),
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class AgentVerdict:
    explanations: tuple[Explanation, ...]
    final_decision: bool
    model_id: str
    from_fallback: bool

    def __post_init__(self) -> None:
        if not 1 <= len(self.explanations) <= 4:
            raise ValueError("a verdict carries between 1 and 4 explanations")

    def to_dict(self) -> dict[str, Any]:
        return {
            "explanations": [e.to_dict() for e in self.explanations],
            "final_decision": self.final_decision,
            "model_id": self.model_id,
            "from_fallback": self.from_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgentVerdict":
        return cls(
            explanations=tuple(
                Explanation(
                    is_match=bool(e["is_match"]),
                    category=ExplanationCategory(e["category"]),
                    reasoning=str(e["reasoning"]),
                    references=tuple(e.get("references") or ()),
                    confidence=float(e["confidence"]),
                )
                for e in d["explanations"]
            ),
            final_decision=bool(d["final_decision"]),
            model_id=str(d["model_id"]),
            from_fallback=bool(d["from_fallback"]),
        )


def memory_key(source: str, target: str) -> str:
    return f"{source}{KEY_SEPARATOR}{target}"


@dataclass
class MemoryEntry:
    key: str
    verdict: AgentVerdict
    user_feedback: Feedback | None
    timestamp: str
    seq: int = 0

    @property
    def source(self) -> str:
        return self.key.split(KEY_SEPARATOR, 1)[0]

    @property
    def target(self) -> str:
        parts = self.key.split(KEY_SEPARATOR, 1)
        return parts[1] if len(parts) > 1 else ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "verdict": self.verdict.to_dict(),
            "user_feedback": self.user_feedback.value if self.user_feedback else None,
            "timestamp": self.timestamp,
        }


_FEEDBACK_RANK = {Feedback.CONFIRMED: 0, None: 1, Feedback.CORRECTED: 2}


class MemoryStore:
    """Keyed store of prior verdicts and feedback.

    Append-dominant: verdicts are only overwritten (never deleted) and
    re-explaining a key preserves its feedback. An optional append-only log
    file records verdict writes so memory survives a restart; feedback is the
    session journal's to persist.
    """

    def __init__(self) -> None:
        self._entries: dict[str, MemoryEntry] = {}
        self._seq = 0
        self._lock = threading.Lock()
        self._log_path: Path | None = None

    def attach_log(self, path: str | Path, replay: bool = True) -> None:
        self._log_path = Path(path)
        if replay and self._log_path.exists():
            for line in self._log_path.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                self._put(
                    record["key"],
                    AgentVerdict.from_dict(record["verdict"]),
                    record["timestamp"],
                    log=False,
                )

    def _append_log(self, entry: MemoryEntry) -> None:
        if self._log_path is None:
            return
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"key": entry.key, "verdict": entry.verdict.to_dict(), "timestamp": entry.timestamp}) + "\n")

    def _put(self, key: str, verdict: AgentVerdict, timestamp: str, log: bool) -> MemoryEntry:
        self._seq += 1
        prior = self._entries.get(key)
        entry = MemoryEntry(
            key=key,
            verdict=verdict,
            user_feedback=prior.user_feedback if prior else None,
            timestamp=timestamp,
            seq=self._seq,
        )
        self._entries[key] = entry
        if log:
            self._append_log(entry)
        return entry

    def put_verdict(self, key: str, verdict: AgentVerdict, timestamp: str | None = None) -> MemoryEntry:
        with self._lock:
            return self._put(key, verdict, timestamp or _now(), log=True)

    def set_feedback(self, key: str, feedback: Feedback | None) -> Feedback | None:
        """Set (or clear) feedback; returns the prior value. UnknownKey if absent."""
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                raise UnknownKey(f"no memory entry for key {key!r}")
            prior = entry.user_feedback
            entry.user_feedback = feedback
            return prior

    def get(self, key: str) -> MemoryEntry | None:
        return self._entries.get(key)

    def feedback_map(self) -> dict[str, str]:
        return {
            k: e.user_feedback.value
            for k, e in self._entries.items()
            if e.user_feedback is not None
        }

    def retrieve(self, source: str, target: str, limit: int = 5) -> list[MemoryEntry]:
        """Exact-key hit first, then same-source or same-target entries,
        ranked confirmed > no feedback > corrected, most recent first."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            exact_key = memory_key(source, target)
            out: list[MemoryEntry] = []
            exact = self._entries.get(exact_key)
            if exact is not None:
                out.append(exact)
            related = [
                e
                for k, e in self._entries.items()
                if k != exact_key and (e.source == source or e.target == target)
            ]
            related.sort(key=lambda e: (_FEEDBACK_RANK[e.user_feedback], -e.seq))
            out.extend(related)
            return out[:limit]

    def __len__(self) -> int:
        return len(self._entries)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class ModelProvider(Protocol):
    model_id: str

    def complete(self, prompt: str, timeout: float) -> str: ...


class TranscriptProvider:
    """Replays recorded responses in order; used by tests."""

    def __init__(self, responses: Sequence[str], model_id: str = "recorded-transcript") -> None:
        self.model_id = model_id
        self._responses: Iterator[str] = iter(list(responses))
        self.prompts: list[str] = []

    def complete(self, prompt: str, timeout: float) -> str:
        self.prompts.append(prompt)
        try:
            return next(self._responses)
        except StopIteration:
            raise ModelUnavailable("transcript exhausted") from None


class HttpProvider:
    """Chat-completions style HTTP endpoint configured via environment."""

    def __init__(self, endpoint: str, model_id: str, api_key: str | None = None) -> None:
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key = api_key

    def complete(self, prompt: str, timeout: float) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model_id, "messages": [{"role": "user", "content": prompt}]}
        try:
            resp = httpx.post(self.endpoint, json=body, headers=headers, timeout=timeout)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except httpx.TimeoutException as exc:
            raise AgentTimeout(f"model call exceeded {timeout}s") from exc
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ModelUnavailable(f"model endpoint failed: {exc}") from exc


ENV_ENDPOINT = "MATCHKIT_LLM_ENDPOINT"
ENV_MODEL = "MATCHKIT_LLM_MODEL"
ENV_API_KEY = "MATCHKIT_LLM_API_KEY"


def provider_from_env(env: Mapping[str, str] | None = None) -> HttpProvider | None:
    env = env if env is not None else os.environ
    endpoint = env.get(ENV_ENDPOINT)
    model = env.get(ENV_MODEL)
    if not endpoint or not model:
        return None
    return HttpProvider(endpoint=endpoint, model_id=model, api_key=env.get(ENV_API_KEY))


@dataclass(frozen=True)
class AgentContext:
    """Everything the agent sees about one candidate pair."""

    source_name: str
    target_name: str
    source_profile: ValueProfile | None = None
    target: TargetAttribute | None = None
    matcher_scores: Mapping[str, float] = field(default_factory=dict)
    value_mapping_preview: tuple[tuple[str, str], ...] = ()


_SCHEMA_BLOCK = (
    "Respond with a single JSON object and nothing else:\n"
    "{\n"
    '  "explanations": [  // 1 to 4 entries\n'
    "    {\n"
    '      "is_match": true|false,\n'
    '      "category": one of ' + json.dumps(list(CATEGORY_NAMES)) + ",\n"
    '      "reasoning": "...",\n'
    '      "references": ["..."],\n'
    '      "confidence": 0.0 to 1.0\n'
    "    }\n"
    "  ],\n"
    '  "final_decision": true|false\n'
    "}"
)


def build_prompt(ctx: AgentContext, memory_hits: Sequence[MemoryEntry] = (), max_hits: int = 5) -> str:
    """Deterministic prompt: same inputs always yield the same bytes."""
    lines = [
        "You validate one candidate correspondence between a source table column",
        "and a target schema attribute. Decide whether they refer to the same concept.",
        "",
        f"Candidate: source attribute {ctx.source_name!r} -> target attribute {ctx.target_name!r}",
    ]
    if ctx.source_profile is not None:
        p = ctx.source_profile
        sample = ", ".join(p.unique_values[:8])
        lines.append(
            f"Source profile: type={p.inferred_type.value}, {len(p.unique_values)} unique values,"
            f" {p.null_count} nulls; examples: {sample}"
        )
    if ctx.target is not None:
        t = ctx.target
        lines.append(
            f"Target attribute: {t.name} [{t.supercategory} / {t.category}] type={t.value_type.value}"
        )
        if t.description:
            lines.append(f"Target description: {t.description}")
        if t.enum_values:
            lines.append("Target permitted values: " + ", ".join(t.enum_values[:12]))
    if ctx.matcher_scores:
        scores = ", ".join(f"{k}={ctx.matcher_scores[k]:.4f}" for k in sorted(ctx.matcher_scores))
        lines.append(f"Matcher scores: {scores}")
    if ctx.value_mapping_preview:
        preview = "; ".join(f"{s} -> {t}" for s, t in ctx.value_mapping_preview[:10])
        lines.append(f"Value mapping preview: {preview}")
    lines.append("")
    if memory_hits:
        lines.append("Prior decisions on related attributes:")
        for hit in memory_hits[:max_hits]:
            fb = hit.user_feedback.value if hit.user_feedback else "no feedback"
            lines.append(
                f"- {hit.key}: decided {'match' if hit.verdict.final_decision else 'non-match'} ({fb})"
            )
    else:
        lines.append("Prior decisions: no prior decisions recorded.")
    lines.append("")
    lines.append(_SCHEMA_BLOCK)
    return "\n".join(lines)


def _extract_object(text: str) -> dict[str, Any]:
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise MalformedModelResponse("no JSON object found in model output")
    try:
        doc = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise MalformedModelResponse(f"invalid JSON in model output: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise MalformedModelResponse("model output is not a JSON object")
    return doc


def parse_verdict(text: str, model_id: str) -> AgentVerdict:
    """Validate a model response; any structural defect raises, so a verdict
    is never partially constructed."""
    doc = _extract_object(text)
    raw = doc.get("explanations")
    if not isinstance(raw, list) or not 1 <= len(raw) <= 4:
        count = len(raw) if isinstance(raw, list) else "no"
        raise MalformedModelResponse(f"expected 1-4 explanations, got {count}")
    explanations = []
    for i, e in enumerate(raw):
        if not isinstance(e, dict):
            raise MalformedModelResponse(f"explanation #{i} is not an object")
        if not isinstance(e.get("is_match"), bool):
            raise MalformedModelResponse(f"explanation #{i}: missing boolean is_match")
        category = e.get("category")
        if category not in CATEGORY_NAMES:
            raise MalformedModelResponse(f"explanation #{i}: invalid category {category!r}")
        reasoning = e.get("reasoning")
        if not isinstance(reasoning, str):
            raise MalformedModelResponse(f"explanation #{i}: missing reasoning")
        confidence = e.get("confidence")
        if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
            raise MalformedModelResponse(f"explanation #{i}: missing numeric confidence")
        if not 0.0 <= float(confidence) <= 1.0:
            raise MalformedModelResponse(f"explanation #{i}: confidence {confidence} out of range")
        references = e.get("references", [])
        if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
            raise MalformedModelResponse(f"explanation #{i}: references must be strings")
        explanations.append(
            Explanation(
                is_match=e["is_match"],
                category=ExplanationCategory(category),
                reasoning=reasoning,
                references=tuple(references),
                confidence=float(confidence),
            )
        )
    final = doc.get("final_decision")
    if final is None:
        # Synthesize: confidence-weighted majority, ties resolve to False.
        true_mass = sum(e.confidence for e in explanations if e.is_match)
        false_mass = sum(e.confidence for e in explanations if not e.is_match)
        final = true_mass > false_mass
    elif not isinstance(final, bool):
        raise MalformedModelResponse("final_decision must be a boolean")
    return AgentVerdict(
        explanations=tuple(explanations),
        final_decision=final,
        model_id=model_id,
        from_fallback=False,
    )


FALLBACK_MODEL_ID = "offline-fallback"
_NAME_MATCH_FLOOR = 0.85
_TOKEN_MATCH_FLOOR = 0.5
_VALUE_MATCH_FLOOR = 0.5
_MIN_RULE_CONFIDENCE = 0.1
_HISTORY_CONFIDENCE = 0.9


def fallback_explain(
    scores: Mapping[str, float], memory_hits: Sequence[MemoryEntry] = ()
) -> AgentVerdict:
    """Deterministic rule-table surrogate used when no model is configured.

    Rules fire in the fixed order name, token, value, history; rules whose
    confidence falls below 0.1 are dropped. The final decision is the
    majority of emitted flags, ties resolving to False.
    """
    explanations: list[Explanation] = []

    name_score = float(scores.get("name_fuzzy", 0.0))
    if name_score >= _MIN_RULE_CONFIDENCE:
        matched = name_score >= _NAME_MATCH_FLOOR
        explanations.append(
            Explanation(
                is_match=matched,
                category=ExplanationCategory.NAME,
                reasoning=(
                    f"Attribute names are {'nearly identical' if matched else 'only partially similar'}"
                    f" (fuzzy similarity {name_score:.2f})."
                ),
                references=(),
                confidence=name_score,
            )
        )
    token_score = float(scores.get("token_jaccard", 0.0))
    if token_score >= _MIN_RULE_CONFIDENCE:
        matched = token_score >= _TOKEN_MATCH_FLOOR
        explanations.append(
            Explanation(
                is_match=matched,
                category=ExplanationCategory.TOKEN,
                reasoning=f"Names share {'most' if matched else 'few'} tokens (overlap {token_score:.2f}).",
                references=(),
                confidence=token_score,
            )
        )
    value_score = float(scores.get("value_jaccard", 0.0))
    if value_score >= _MIN_RULE_CONFIDENCE:
        matched = value_score >= _VALUE_MATCH_FLOOR
        explanations.append(
            Explanation(
                is_match=matched,
                category=ExplanationCategory.VALUE,
                reasoning=f"Observed values overlap {'strongly' if matched else 'weakly'} (Jaccard {value_score:.2f}).",
                references=(),
                confidence=value_score,
            )
        )
    confirmed = next(
        (h for h in memory_hits if h.user_feedback is Feedback.CONFIRMED), None
    )
    if confirmed is not None and len(explanations) < 4:
        explanations.append(
            Explanation(
                is_match=confirmed.verdict.final_decision,
                category=ExplanationCategory.HISTORY,
                reasoning=(
                    f"A user-confirmed prior decision on {confirmed.key} marked it a "
                    f"{'match' if confirmed.verdict.final_decision else 'non-match'}."
                ),
                references=(confirmed.key,),
                confidence=_HISTORY_CONFIDENCE,
            )
        )

    if not explanations:
        explanations.append(
            Explanation(
                is_match=False,
                category=ExplanationCategory.OTHER,
                reasoning="No rule produced measurable evidence for this pair.",
                references=(),
                confidence=0.5,
            )
        )
    positive = sum(1 for e in explanations if e.is_match)
    final = positive > len(explanations) - positive
    return AgentVerdict(
        explanations=tuple(explanations),
        final_decision=final,
        model_id=FALLBACK_MODEL_ID,
        from_fallback=True,
    )


class Agent:
    """Explains candidates through a model provider or the offline fallback.

    Explain calls for distinct candidates may run concurrently up to the
    in-flight limit; all memory writes are serialized by the store.
    """

    def __init__(
        self,
        provider: ModelProvider | None,
        memory: MemoryStore,
        timeout: float = 30.0,
        memory_hits: int = 5,
        inflight: int = 4,
        fallback_enabled: bool = True,
    ) -> None:
        self.provider = provider
        self.memory = memory
        self.timeout = timeout
        self.memory_hits = memory_hits
        self.fallback_enabled = fallback_enabled
        self._gate = threading.Semaphore(inflight)

    def cached_verdict(self, source: str, target: str) -> AgentVerdict | None:
        entry = self.memory.get(memory_key(source, target))
        return entry.verdict if entry else None

    def explain(self, ctx: AgentContext) -> AgentVerdict:
        key = memory_key(ctx.source_name, ctx.target_name)
        hits = self.memory.retrieve(ctx.source_name, ctx.target_name, limit=self.memory_hits)
        if self.provider is None:
            if not self.fallback_enabled:
                raise ModelUnavailable("no model configured and fallback disabled")
            verdict = fallback_explain(ctx.matcher_scores, hits)
        else:
            prompt = build_prompt(ctx, hits, max_hits=self.memory_hits)
            with self._gate:
                text = self.provider.complete(prompt, self.timeout)
                try:
                    verdict = parse_verdict(text, self.provider.model_id)
                except MalformedModelResponse:
                    text = self.provider.complete(prompt, self.timeout)
                    verdict = parse_verdict(text, self.provider.model_id)
        self.memory.put_verdict(key, verdict)
        return verdict

    def record_feedback(self, key: str, feedback: Feedback) -> Feedback | None:
        return self.memory.set_feedback(key, feedback)

    def retrieve_memory(self, source: str, target: str, limit: int = 5) -> list[MemoryEntry]:
        return self.memory.retrieve(source, target, limit)
