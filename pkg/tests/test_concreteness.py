"""Concreteness scoring and route selection."""

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmground import (
    ConcretenessLexicon,
    RouteKind,
    load_lexicon,
    normalize_phrase,
    phrase_concreteness,
    route,
)
from conftest import FIXTURE_RATINGS, make_routing_fixture


class TestLexicon:
    def test_load_with_header(self):
        text = "Word\tConc.M\nboat\t5.0\nrelax\t2.5\n"
        lex = load_lexicon(io.StringIO(text))
        assert len(lex) == 2
        assert lex.lookup("boat") == 5.0

    def test_load_without_header(self):
        lex = load_lexicon(io.StringIO("boat\t5.0\n"))
        assert "boat" in lex

    def test_bad_rating_line_raises(self):
        with pytest.raises(ValueError, match="line 2"):
            load_lexicon(io.StringIO("boat\t5.0\nbad\tnotanumber\n"))

    def test_rating_range_enforced(self):
        with pytest.raises(ValueError):
            ConcretenessLexicon({"boat": 5.5})
        with pytest.raises(ValueError):
            ConcretenessLexicon({"boat": 0.5})

    def test_keys_single_words(self):
        with pytest.raises(ValueError):
            ConcretenessLexicon({"two words": 3.0})

    def test_lemma_fallbacks(self, lexicon):
        assert lexicon.lookup("boats") == 5.0      # -s
        assert lexicon.lookup("relaxes") == 2.5    # -es
        assert lexicon.lookup("relaxing") == 2.5   # -ing
        assert lexicon.lookup("relaxed") == 2.5    # -ed
        assert lexicon.lookup("unknownword") is None


class TestPhraseConcreteness:
    def test_two_token_mean(self, lexicon):
        # (5.0 + 2.5) / 2 = 3.75, computed by hand from the fixture table.
        p = normalize_phrase("boat relax")
        assert phrase_concreteness(p, lexicon) == pytest.approx(3.75)

    def test_single_token(self, lexicon):
        assert phrase_concreteness(normalize_phrase("boat"), lexicon) == pytest.approx(5.0)

    def test_no_rated_tokens_absent(self, lexicon):
        assert phrase_concreteness(normalize_phrase("blorf quix"), lexicon) is None

    def test_stopwords_excluded(self, lexicon):
        p = normalize_phrase("relax in the boat")
        assert phrase_concreteness(p, lexicon) == pytest.approx(3.75)

    def test_placeholder_excluded(self, lexicon):
        p = normalize_phrase("PersonX holds the boat")
        assert phrase_concreteness(p, lexicon) == pytest.approx(5.0)

    def test_within_token_rating_bounds(self, lexicon):
        for text in ["dog boat", "relax dream idea", "boat happy walk"]:
            p = normalize_phrase(text)
            ratings = [FIXTURE_RATINGS[t] for t in p.tokens if t in FIXTURE_RATINGS]
            score = phrase_concreteness(p, lexicon)
            assert min(ratings) <= score <= max(ratings)


class TestRoute:
    def test_below_threshold_goes_web(self, lexicon):
        r = route(normalize_phrase("boat relax"), lexicon)  # 3.75
        assert r.kind is RouteKind.WEB_SEARCH
        assert r.phrase_score == pytest.approx(3.75)

    def test_boundary_exactly_threshold_goes_embedding(self, lexicon):
        # party 3.8, grass 4.2 -> mean exactly 4.0
        r = route(normalize_phrase("party grass"), lexicon)
        assert r.phrase_score == pytest.approx(4.0)
        assert r.kind is RouteKind.EMBEDDING_MATCH

    def test_absent_score_goes_web(self, lexicon):
        r = route(normalize_phrase("blorf"), lexicon)
        assert r.kind is RouteKind.WEB_SEARCH
        assert r.phrase_score is None

    def test_threshold_validated(self, lexicon):
        with pytest.raises(ValueError):
            route(normalize_phrase("boat"), lexicon, threshold=0.5)

    def test_route_invariant_enforced(self):
        from mmground import Route

        with pytest.raises(ValueError):
            Route(RouteKind.EMBEDDING_MATCH, None)

    @given(
        tokens=st.lists(st.sampled_from(sorted(FIXTURE_RATINGS)), min_size=1, max_size=4),
        lo=st.sampled_from([3.0, 3.5, 4.0]),
        hi=st.sampled_from([4.0, 4.5, 5.0]),
    )
    @settings(max_examples=200)
    def test_monotone_in_threshold(self, lexicon, tokens, lo, hi):
        if lo > hi:
            lo, hi = hi, lo
        p = normalize_phrase(" ".join(tokens))
        low_route = route(p, lexicon, threshold=lo)
        high_route = route(p, lexicon, threshold=hi)
        # Raising the threshold never moves a phrase web -> embedding.
        if low_route.kind is RouteKind.WEB_SEARCH:
            assert high_route.kind is RouteKind.WEB_SEARCH


class TestRoutingFixture:
    def test_router_agrees_with_hand_labels(self, lexicon):
        cases = make_routing_fixture()
        assert len(cases) == 200
        for case in cases:
            p = normalize_phrase(case.phrase_text)
            score = phrase_concreteness(p, lexicon)
            if case.expected_mean is None:
                assert score is None
            else:
                assert score == pytest.approx(case.expected_mean)
            r = route(p, lexicon, threshold=4.0)
            assert (r.kind is RouteKind.WEB_SEARCH) == case.expected_web

    def test_seventy_two_percent_web(self, lexicon):
        cases = make_routing_fixture()
        web = sum(
            1
            for case in cases
            if route(normalize_phrase(case.phrase_text), lexicon).kind is RouteKind.WEB_SEARCH
        )
        assert web / len(cases) == pytest.approx(0.72)
