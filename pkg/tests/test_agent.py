import json

import pytest

from matchkit.agent import (
    Agent,
    AgentContext,
    AgentVerdict,
    CATEGORY_NAMES,
    Explanation,
    ExplanationCategory,
    Feedback,
    MemoryStore,
    TranscriptProvider,
    build_prompt,
    fallback_explain,
    memory_key,
    parse_verdict,
    provider_from_env,
)
from matchkit.core import TargetAttribute, ValueType, profile_attribute
from matchkit.errors import MalformedModelResponse, ModelUnavailable, UnknownKey


def ctx(scores=None, source="age", target="age_at_index"):
    return AgentContext(
        source_name=source,
        target_name=target,
        source_profile=profile_attribute(["34", "40"]),
        target=TargetAttribute(
            target if target != "age_at_index" else "age_at_index",
            supercategory="clinical",
            category="demographic",
            description="Age at the index date.",
            value_type=ValueType.INTEGER,
        ),
        matcher_scores=scores or {},
        value_mapping_preview=(("34", "34"),),
    )


def good_response(n=2, final=True):
    return json.dumps(
        {
            "explanations": [
                {
                    "is_match": True,
                    "category": "name",
                    "reasoning": f"reason {i}",
                    "references": ["ref"],
                    "confidence": 0.9,
                }
                for i in range(n)
            ],
            "final_decision": final,
        }
    )


class TestBuildPrompt:
    def test_contains_no_prior_decisions_marker(self):
        prompt = build_prompt(ctx())
        assert "no prior decisions" in prompt

    def test_deterministic(self):
        assert build_prompt(ctx()) == build_prompt(ctx())

    def test_all_categories_verbatim(self):
        prompt = build_prompt(ctx())
        for cat in CATEGORY_NAMES:
            assert f'"{cat}"' in prompt

    def test_memory_hits_listed(self):
        memory = MemoryStore()
        memory.put_verdict("age::age_at_index", fallback_explain({"name_fuzzy": 1.0}))
        hits = memory.retrieve("age", "age_at_index")
        prompt = build_prompt(ctx(), hits)
        assert "age::age_at_index" in prompt
        assert "no prior decisions" not in prompt


class TestParseVerdict:
    def test_parses_clean_response(self):
        v = parse_verdict(good_response(), "m1")
        assert v.final_decision is True
        assert len(v.explanations) == 2
        assert v.model_id == "m1"
        assert v.from_fallback is False

    def test_tolerates_surrounding_prose(self):
        v = parse_verdict("Sure! Here you go:\n" + good_response() + "\nHope that helps.", "m")
        assert len(v.explanations) == 2

    def test_five_explanations_malformed(self):
        with pytest.raises(MalformedModelResponse):
            parse_verdict(good_response(n=5), "m")

    def test_zero_explanations_malformed(self):
        with pytest.raises(MalformedModelResponse):
            parse_verdict('{"explanations": [], "final_decision": true}', "m")

    @pytest.mark.parametrize("missing", ["is_match", "category", "reasoning", "confidence"])
    def test_missing_fields_malformed(self, missing):
        doc = json.loads(good_response(n=1))
        del doc["explanations"][0][missing]
        with pytest.raises(MalformedModelResponse):
            parse_verdict(json.dumps(doc), "m")

    def test_out_of_range_confidence_malformed(self):
        doc = json.loads(good_response(n=1))
        doc["explanations"][0]["confidence"] = 1.3
        with pytest.raises(MalformedModelResponse):
            parse_verdict(json.dumps(doc), "m")

    def test_invalid_category_malformed(self):
        doc = json.loads(good_response(n=1))
        doc["explanations"][0]["category"] = "vibes"
        with pytest.raises(MalformedModelResponse):
            parse_verdict(json.dumps(doc), "m")

    def test_no_object_malformed(self):
        with pytest.raises(MalformedModelResponse):
            parse_verdict("I would say they match.", "m")

    def test_missing_final_decision_synthesized(self):
        doc = {
            "explanations": [
                {"is_match": True, "category": "name", "reasoning": "r", "confidence": 0.9},
                {"is_match": False, "category": "value", "reasoning": "r", "confidence": 0.2},
            ]
        }
        assert parse_verdict(json.dumps(doc), "m").final_decision is True
        doc["explanations"][1]["confidence"] = 0.9  # tie -> False
        assert parse_verdict(json.dumps(doc), "m").final_decision is False


class TestFallback:
    def test_all_high_scores(self):
        v = fallback_explain({"name_fuzzy": 1.0, "token_jaccard": 1.0, "value_jaccard": 1.0})
        assert len(v.explanations) == 3
        assert v.final_decision is True
        cats = {e.category for e in v.explanations}
        assert {ExplanationCategory.NAME, ExplanationCategory.VALUE} <= cats
        assert v.from_fallback is True

    def test_all_zero_scores(self):
        v = fallback_explain({"name_fuzzy": 0.0, "token_jaccard": 0.0, "value_jaccard": 0.0})
        assert len(v.explanations) == 1
        assert v.explanations[0].category is ExplanationCategory.OTHER
        assert v.explanations[0].confidence == 0.5
        assert v.final_decision is False

    def test_tie_resolves_false(self):
        v = fallback_explain({"name_fuzzy": 0.9, "token_jaccard": 0.3})
        flags = [e.is_match for e in v.explanations]
        assert flags.count(True) == 1 and flags.count(False) == 1
        assert v.final_decision is False

    def test_history_rule_requires_confirmed(self):
        memory = MemoryStore()
        memory.put_verdict("a::b", fallback_explain({"name_fuzzy": 1.0}))
        hits = memory.retrieve("a", "b")
        v = fallback_explain({}, hits)
        assert all(e.category is not ExplanationCategory.HISTORY for e in v.explanations)

        memory.set_feedback("a::b", Feedback.CONFIRMED)
        hits = memory.retrieve("a", "b")
        v = fallback_explain({}, hits)
        assert any(e.category is ExplanationCategory.HISTORY for e in v.explanations)

        memory.set_feedback("a::b", Feedback.CORRECTED)
        hits = memory.retrieve("a", "b")
        v = fallback_explain({}, hits)
        assert all(e.category is not ExplanationCategory.HISTORY for e in v.explanations)

    def test_pure_function(self):
        scores = {"name_fuzzy": 0.7, "token_jaccard": 0.4, "value_jaccard": 0.9}
        first = fallback_explain(scores)
        for _ in range(20):
            assert fallback_explain(scores) == first


class TestAgentExplain:
    def test_no_provider_uses_fallback(self):
        agent = Agent(None, MemoryStore())
        v = agent.explain(ctx({"name_fuzzy": 1.0, "value_jaccard": 1.0}))
        assert v.from_fallback is True
        assert v.final_decision is True
        cats = {e.category for e in v.explanations}
        assert {ExplanationCategory.NAME, ExplanationCategory.VALUE} <= cats

    def test_transcript_replay_matches_fixture_parse(self):
        response = good_response()
        agent = Agent(TranscriptProvider([response]), MemoryStore())
        v = agent.explain(ctx())
        assert v == parse_verdict(response, "recorded-transcript")

    def test_malformed_then_good_retries_once(self):
        agent = Agent(TranscriptProvider(["garbage", good_response()]), MemoryStore())
        v = agent.explain(ctx())
        assert v.final_decision is True

    def test_malformed_twice_raises_and_stores_nothing(self):
        memory = MemoryStore()
        agent = Agent(TranscriptProvider(["garbage", "more garbage"]), memory)
        with pytest.raises(MalformedModelResponse):
            agent.explain(ctx())
        assert memory.get(memory_key("age", "age_at_index")) is None

    def test_explain_stores_memory(self):
        memory = MemoryStore()
        agent = Agent(None, memory)
        agent.explain(ctx({"name_fuzzy": 1.0}))
        assert memory.get("age::age_at_index") is not None

    def test_exhausted_transcript_is_model_unavailable(self):
        agent = Agent(TranscriptProvider([]), MemoryStore())
        with pytest.raises(ModelUnavailable):
            agent.explain(ctx())


class TestMemory:
    def test_empty_retrieve(self):
        assert MemoryStore().retrieve("a", "b") == []

    def test_exact_key_first(self):
        memory = MemoryStore()
        memory.put_verdict("a::b", fallback_explain({"name_fuzzy": 1.0}))
        memory.put_verdict("a::c", fallback_explain({"name_fuzzy": 1.0}))
        hits = memory.retrieve("a", "b")
        assert hits[0].key == "a::b"

    def test_ranking_matches_exhaustive_comparator(self):
        memory = MemoryStore()
        verdict = fallback_explain({"name_fuzzy": 1.0})
        memory.put_verdict("s::t1", verdict)
        memory.put_verdict("s::t2", verdict)
        memory.put_verdict("s::t3", verdict)
        memory.set_feedback("s::t1", Feedback.CORRECTED)
        memory.set_feedback("s::t3", Feedback.CONFIRMED)
        hits = memory.retrieve("s", "zzz", limit=5)
        entries = [memory.get(k) for k in ("s::t1", "s::t2", "s::t3")]
        rank = {Feedback.CONFIRMED: 0, None: 1, Feedback.CORRECTED: 2}
        expected = sorted(entries, key=lambda e: (rank[e.user_feedback], -e.seq))
        assert [h.key for h in hits] == [e.key for e in expected]
        assert [h.key for h in hits] == ["s::t3", "s::t2", "s::t1"]

    def test_feedback_unknown_key(self):
        with pytest.raises(UnknownKey):
            MemoryStore().set_feedback("missing::key", Feedback.CONFIRMED)

    def test_reexplain_preserves_feedback(self):
        memory = MemoryStore()
        memory.put_verdict("a::b", fallback_explain({"name_fuzzy": 1.0}))
        memory.set_feedback("a::b", Feedback.CONFIRMED)
        memory.put_verdict("a::b", fallback_explain({"name_fuzzy": 0.2}))
        assert memory.get("a::b").user_feedback is Feedback.CONFIRMED

    def test_log_replay(self, tmp_path):
        log = tmp_path / "memory.jsonl"
        memory = MemoryStore()
        memory.attach_log(log, replay=False)
        memory.put_verdict("a::b", fallback_explain({"name_fuzzy": 1.0}))
        memory.put_verdict("c::d", fallback_explain({"name_fuzzy": 0.0}))

        restored = MemoryStore()
        restored.attach_log(log, replay=True)
        assert len(restored) == 2
        assert restored.get("a::b").verdict == memory.get("a::b").verdict

    def test_verdict_cardinality_enforced(self):
        with pytest.raises(ValueError):
            AgentVerdict(explanations=(), final_decision=False, model_id="x", from_fallback=True)
        with pytest.raises(ValueError):
            Explanation(
                is_match=True,
                category=ExplanationCategory.NAME,
                reasoning="r",
                references=(),
                confidence=1.5,
            )


class TestProviderFromEnv:
    def test_absent_env_gives_none(self):
        assert provider_from_env({}) is None

    def test_configured_env(self):
        provider = provider_from_env(
            {
                "MATCHKIT_LLM_ENDPOINT": "http://localhost:9/v1/chat",
                "MATCHKIT_LLM_MODEL": "test-model",
                "MATCHKIT_LLM_API_KEY": "k",
            }
        )
        assert provider is not None
        assert provider.model_id == "test-model"
