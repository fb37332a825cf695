import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchkit.core import SourceAttribute, TargetAttribute, ValueType, profile_attribute
from matchkit.errors import DuplicateMatcherId, PluginFailed
from matchkit.matchers import (
    CallableMatcher,
    MatcherDescriptor,
    MatcherKind,
    SubprocessMatcher,
    aggregate_value_similarity,
    default_registry,
    detect_easy_matches,
    levenshtein,
    name_fuzzy_score,
    ngram_embedding_score,
    partial_fuzzy_score,
    token_jaccard_score,
    value_jaccard_score,
)

import oracles
from fixtures import make_dataset, make_schema

names = st.text(alphabet="abcdef_ XY-", max_size=12)


def attr(name, values=()):
    return SourceAttribute(name, profile_attribute(list(values)))


def tattr(name, values=None, description=""):
    return TargetAttribute(
        name,
        description=description,
        value_type=ValueType.ENUMERATION if values else ValueType.UNKNOWN,
        enum_values=tuple(values) if values else None,
    )


class TestNameFuzzy:
    def test_identity(self):
        assert name_fuzzy_score("age", "age") == 1.0

    def test_empty_vs_nonempty(self):
        assert name_fuzzy_score("", "x") == 0.0
        assert name_fuzzy_score("x", "") == 0.0

    def test_normalized_equality_is_one(self):
        assert name_fuzzy_score("FIGO_stage", "figo stage") == 1.0

    def test_derived_example(self):
        # Oracle (full-matrix DP) computed before the build:
        # lev("age_at_diagnosis", "age_at_index") = 7, max length 16.
        assert oracles.lev_full_matrix("age_at_diagnosis", "age_at_index") == 7
        expected = 1 - 7 / 16
        assert expected == 0.5625
        assert name_fuzzy_score("age_at_diagnosis", "age_at_index") == expected

    @given(names, names)
    @settings(max_examples=120, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        s = name_fuzzy_score(a, b)
        assert s == name_fuzzy_score(b, a)
        assert 0.0 <= s <= 1.0

    @given(names, names)
    @settings(max_examples=60, deadline=None)
    def test_matches_oracle(self, a, b):
        assert name_fuzzy_score(a, b) == pytest.approx(oracles.fuzzy(a, b), abs=1e-12)

    @given(names)
    @settings(max_examples=40, deadline=None)
    def test_self_match(self, a):
        assert name_fuzzy_score(a, a) == 1.0


class TestLevenshtein:
    @given(st.text(max_size=10), st.text(max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_matches_full_matrix(self, a, b):
        assert levenshtein(a, b) == oracles.lev_full_matrix(a, b)


class TestTokenJaccard:
    def test_half_overlap(self):
        assert token_jaccard_score("tumor_stage", "stage") == 0.5

    def test_identity(self):
        assert token_jaccard_score("a_b", "a_b") == 1.0

    def test_disjoint(self):
        assert token_jaccard_score("x", "y") == 0.0

    def test_both_empty(self):
        assert token_jaccard_score("", "--") == 0.0

    @given(names, names)
    @settings(max_examples=80, deadline=None)
    def test_symmetric(self, a, b):
        assert token_jaccard_score(a, b) == token_jaccard_score(b, a)


class TestValueJaccard:
    def test_one_third(self):
        assert value_jaccard_score(["a", "b"], ["b", "c"]) == pytest.approx(1 / 3)

    def test_identical(self):
        assert value_jaccard_score(["IA", "IB"], ["IA", "IB"]) == 1.0

    def test_empty_side(self):
        assert value_jaccard_score([], ["x"]) == 0.0
        assert value_jaccard_score(["x"], []) == 0.0

    def test_accepts_profiles_and_targets(self):
        profile = profile_attribute(["IA", "IB"])
        target = tattr("stage", ["IA", "IB"])
        assert value_jaccard_score(profile, target) == 1.0

    def test_normalization_applies(self):
        assert value_jaccard_score(["Stage IA"], ["stage_ia"]) == 1.0

    @given(
        st.lists(st.text(alphabet="abIV 12", max_size=5), max_size=8),
        st.lists(st.text(alphabet="abIV 12", max_size=5), max_size=8),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounded(self, a, b):
        assert 0.0 <= value_jaccard_score(a, b) <= 1.0


class TestPartialFuzzy:
    def test_substring_scores_full(self):
        assert partial_fuzzy_score("IA", "Stage IA") == 1.0

    def test_plain_distance_otherwise(self):
        assert partial_fuzzy_score("IA", "IB") == 0.5

    def test_empty(self):
        assert partial_fuzzy_score("", "x") == 0.0


class TestNgramEmbedding:
    def test_identical_attributes(self):
        a = attr("figo_stage", ["IA", "IB"])
        b = tattr("figo_stage", ["IA", "IB"])
        assert ngram_embedding_score(a, b) == 1.0

    def test_disjoint_grams_rescaled_to_half(self):
        a = attr("aaaa")
        b = tattr("zzzz")
        assert ngram_embedding_score(a, b) == 0.5

    def test_case_insensitive_equality(self):
        a = attr("figo_stage", ["IA", "IB"])
        b = tattr("FIGO_stage", ["IA", "IB"])
        assert ngram_embedding_score(a, b) == 1.0

    @given(names, st.lists(st.sampled_from(["IA", "IB", "7", "x"]), max_size=4))
    @settings(max_examples=40, deadline=None)
    def test_bounded_and_self_match(self, name, values):
        a = attr(name or "n", values)
        b = tattr("other_name", ["zz"])
        assert 0.0 <= ngram_embedding_score(a, b) <= 1.0
        twin = attr(a.name, values)
        assert ngram_embedding_score(twin, tattr(a.name, list(values) or None)) <= 1.0

    def test_derived_cosine_cross_check(self):
        a = attr("figo_stage", ["IA", "IB", "IIIA"])
        b = tattr("figo stage", ["IA", "IIB"])
        # Independent dense-vector oracle over the same text parts.
        ga = oracles.trigrams("figo_stage")
        for v in sorted(["IA", "IB", "IIIA"])[:20]:
            ga += oracles.trigrams(v.lower())
        gb = oracles.trigrams("figo_stage")
        for v in sorted(["IA", "IIB"])[:20]:
            gb += oracles.trigrams(v.lower())
        expected = (oracles.dense_cosine(ga, gb) + 1) / 2
        assert ngram_embedding_score(a, b) == pytest.approx(expected, abs=1e-12)


class TestEasyMatches:
    def test_exact_duplicate_included(self):
        src = make_dataset({"figo_stage": ["IA", "IB"]})
        tgt = make_schema(
            [{"name": "figo_stage", "value_type": "enumeration", "enum_values": ["IA", "IB"]}]
        )
        assert detect_easy_matches(src, tgt, 0.9, 0.9) == [("figo_stage", "figo_stage")]

    def test_name_below_threshold_excluded(self):
        src = make_dataset({"age": ["20", "30"]})
        tgt = make_schema(
            [{"name": "bmi", "value_type": "enumeration", "enum_values": ["18", "25"]}]
        )
        assert detect_easy_matches(src, tgt, 0.9, 0.9) == []

    def test_duplicate_fixture_matches_exhaustive_oracle(self):
        # 10 source attributes, 4 exact duplicates of target columns.
        src = make_dataset(
            {
                "figo_stage": ["IA", "IB", "IIA"],
                "gender": ["M", "F", "M"],
                "vital_status": ["Alive", "Dead", "Alive"],
                "race": ["white", "asian", "white"],
                "age": ["20", "30", "40"],
                "bmi_val": ["18", "25", "30"],
                "site_code": ["C50", "C34", "C18"],
                "notes": ["aa", "bb", "cc"],
                "days_to_x": ["1", "2", "3"],
                "grade_roman": ["I", "II", "III"],
            }
        )
        tgt = make_schema(
            [
                {"name": "figo_stage", "value_type": "enumeration", "enum_values": ["IA", "IB", "IIA"]},
                {"name": "gender", "value_type": "enumeration", "enum_values": ["M", "F"]},
                {"name": "vital_status", "value_type": "enumeration", "enum_values": ["Alive", "Dead"]},
                {"name": "race", "value_type": "enumeration", "enum_values": ["white", "asian"]},
                {"name": "tumor_grade", "value_type": "enumeration", "enum_values": ["G1", "G2"]},
                {"name": "laterality", "value_type": "enumeration", "enum_values": ["Left", "Right"]},
            ]
        )
        got = set(detect_easy_matches(src, tgt, 0.9, 0.9))
        expected = oracles.easy_pairs_exhaustive(src, tgt, 0.9, 0.9)
        assert got == expected
        assert got == {
            ("figo_stage", "figo_stage"),
            ("gender", "gender"),
            ("vital_status", "vital_status"),
            ("race", "race"),
        }

    def test_invariant_under_row_and_attribute_order(self):
        cols = {"stage": ["IB", "IA", "IIA"], "sex": ["F", "M", "M"]}
        reversed_cols = {k: list(reversed(v)) for k, v in cols.items()}
        tgt_attrs = [
            {"name": "sex", "value_type": "enumeration", "enum_values": ["M", "F"]},
            {"name": "stage", "value_type": "enumeration", "enum_values": ["IA", "IB", "IIA"]},
        ]
        a = detect_easy_matches(make_dataset(cols), make_schema(tgt_attrs), 0.9, 0.9)
        b = detect_easy_matches(
            make_dataset(reversed_cols), make_schema(list(reversed(tgt_attrs))), 0.9, 0.9
        )
        assert a == b

    def test_threshold_validation(self):
        src = make_dataset({"a": ["1"]})
        tgt = make_schema([{"name": "a"}])
        with pytest.raises(ValueError):
            detect_easy_matches(src, tgt, 1.5, 0.5)

    @given(
        st.lists(st.sampled_from(["IA", "IB", "II", "x", "yz"]), min_size=1, max_size=6),
        st.lists(st.sampled_from(["IA", "IB", "II", "x", "yz"]), min_size=1, max_size=6),
        st.sampled_from(["IIIA", "w", "IA"]),
    )
    @settings(max_examples=60, deadline=None)
    def test_value_similarity_monotone_in_target(self, svals, tvals, extra):
        v1 = aggregate_value_similarity(svals, tvals)
        v2 = aggregate_value_similarity(svals, tvals + [extra])
        assert v2 >= v1 - 1e-12


class TestRegistryAndPlugins:
    def test_default_registry_ids(self):
        assert default_registry().ids() == [
            "name_fuzzy",
            "token_jaccard",
            "value_jaccard",
            "ngram_embedding",
        ]

    def test_duplicate_id_rejected(self):
        reg = default_registry()
        matcher = CallableMatcher(
            MatcherDescriptor("custom1", "Custom", MatcherKind.PLUGIN), lambda s, t: 1.0
        )
        reg.register(matcher)
        with pytest.raises(DuplicateMatcherId):
            reg.register(
                CallableMatcher(
                    MatcherDescriptor("custom1", "Custom", MatcherKind.PLUGIN), lambda s, t: 0.0
                )
            )

    def test_out_of_range_score_clamped_with_warning(self):
        matcher = CallableMatcher(
            MatcherDescriptor("wild", "Wild", MatcherKind.PLUGIN), lambda s, t: 1.3
        )
        scores = matcher.score_pairs([(attr("a"), tattr("b"))])
        assert scores == [1.0]
        assert matcher.warnings and "clamped" in matcher.warnings[0]

    def test_subprocess_matcher_roundtrip(self):
        script = (
            "import sys, json\n"
            "for line in sys.stdin:\n"
            "    rec = json.loads(line)\n"
            "    print(1.0 if rec['source']['name'] == rec['target']['name'] else 0.25)\n"
        )
        matcher = SubprocessMatcher(
            MatcherDescriptor("ext", "External", MatcherKind.PLUGIN), [sys.executable, "-c", script]
        )
        pairs = [(attr("x", ["1"]), tattr("x")), (attr("x", ["1"]), tattr("y"))]
        assert matcher.score_pairs(pairs) == [1.0, 0.25]

    def test_subprocess_matcher_nonzero_exit_fails(self):
        matcher = SubprocessMatcher(
            MatcherDescriptor("bad", "Bad", MatcherKind.PLUGIN),
            [sys.executable, "-c", "import sys; sys.exit(3)"],
        )
        with pytest.raises(PluginFailed):
            matcher.score_pairs([(attr("x"), tattr("y"))])

    def test_subprocess_matcher_garbage_output_fails(self):
        matcher = SubprocessMatcher(
            MatcherDescriptor("garbled", "Garbled", MatcherKind.PLUGIN),
            [sys.executable, "-c", "print('not a number')"],
        )
        with pytest.raises(PluginFailed):
            matcher.score_pairs([(attr("x"), tattr("y"))])

    def test_mark_failed_excluded_from_active(self):
        reg = default_registry()
        reg.mark_failed("name_fuzzy")
        assert "name_fuzzy" not in reg.ids()
