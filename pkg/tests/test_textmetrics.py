from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqag.textmetrics import abstractiveness, lcs_length, rouge1_f1, rougeL_precision, tokenize


def brute_lcs(a, b):
    """Enumerate every subsequence of a, keep the longest also in b."""
    best = 0
    for r in range(len(a), 0, -1):
        for combo in itertools.combinations(range(len(a)), r):
            sub = [a[i] for i in combo]
            it = iter(b)
            if all(tok in it for tok in sub):
                return r
    return best


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_strips_punctuation(self):
        assert tokenize("A G4S security van.") == ["a", "g4s", "security", "van"]

    def test_inner_punctuation_kept(self):
        assert tokenize("it's 21:45, ok?") == ["it's", "21:45", "ok"]

    def test_whitespace_only(self):
        assert tokenize(" \t\n ") == []

    @given(st.text(max_size=80))
    def test_idempotent(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


class TestRouge1:
    def test_identical(self):
        assert rouge1_f1(["a", "b"], ["a", "b"]) == 1.0

    def test_two_of_three(self):
        assert rouge1_f1(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(2 / 3)

    def test_disjoint(self):
        assert rouge1_f1(["a", "b"], ["c", "d"]) == 0.0

    def test_both_empty(self):
        assert rouge1_f1([], []) == 0.0

    def test_clipped_counts(self):
        # repeated candidate token only matches as often as it occurs in
        # the reference
        assert rouge1_f1(["a", "a", "a"], ["a", "b", "c"]) == pytest.approx(1 / 3)

    @given(
        st.lists(st.sampled_from("abcde"), max_size=10),
        st.lists(st.sampled_from("abcde"), max_size=10),
    )
    def test_symmetric_and_bounded(self, xs, ys):
        v = rouge1_f1(xs, ys)
        assert 0.0 <= v <= 1.0
        assert v == rouge1_f1(ys, xs)


class TestRougeLPrecision:
    def test_candidate_subsequence(self):
        assert rougeL_precision(["a", "b", "c"], ["a", "x", "b", "y", "c"]) == 1.0

    def test_reversed(self):
        assert rougeL_precision(["a", "b", "c"], ["c", "b", "a"]) == pytest.approx(1 / 3)

    def test_identical(self):
        assert rougeL_precision(["a", "b", "c"], ["a", "b", "c"]) == 1.0

    def test_empty_candidate(self):
        with pytest.raises(ValueError, match="empty"):
            rougeL_precision([], ["a"])

    def test_asymmetric(self):
        a = ["a", "b"]
        b = ["a", "b", "c", "d"]
        assert rougeL_precision(a, b) == 1.0
        assert rougeL_precision(b, a) == 0.5


class TestLCS:
    def test_matches_brute_force_random(self):
        rng = random.Random(5)
        for _ in range(300):
            a = [rng.choice("abc") for _ in range(rng.randrange(0, 9))]
            b = [rng.choice("abc") for _ in range(rng.randrange(0, 9))]
            assert lcs_length(a, b) == brute_lcs(a, b), (a, b)

    def test_empty_sides(self):
        assert lcs_length([], ["a"]) == 0
        assert lcs_length(["a"], []) == 0

    def test_repeats(self):
        assert lcs_length(["a", "a", "b", "a"], ["a", "b", "a", "a"]) == 3


class TestAbstractiveness:
    def test_verbatim_copy_is_zero(self):
        src = "The quick brown fox jumps over the lazy dog."
        assert abstractiveness("quick brown fox", src) == 0.0

    def test_disjoint_is_one(self):
        assert abstractiveness("entirely novel words", "source text here") == 1.0

    def test_reversed_tokens(self):
        assert abstractiveness("a b c", "c b a") == pytest.approx(2 / 3)

    def test_empty_summary(self):
        with pytest.raises(ValueError, match="no tokens"):
            abstractiveness("...", "source")

    @given(st.text(min_size=1, max_size=60), st.text(max_size=60))
    def test_bounded(self, summary, source):
        if not tokenize(summary):
            return
        assert 0.0 <= abstractiveness(summary, source) <= 1.0
