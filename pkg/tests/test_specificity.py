import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_scores
from artifact.specificity import (
    SpecificityDomainError, band, log_pmf, log_tails, specificity_score, specificity_table, top_specific,
)


def test_hand_examples():
    assert specificity_score(4, 4, 5, 10) == pytest.approx(-math.log10(6 / 252), abs=1e-12)
    assert specificity_score(0, 4, 5, 10) == pytest.approx(math.log10(6 / 252), abs=1e-12)
    assert specificity_score(4, 4, 5, 10) == pytest.approx(1.6232492903979, abs=1e-9)


def test_whole_corpus_part_scores_zero():
    for F in (1, 5, 10):
        assert specificity_score(F, F, 10, 10) == 0.0


@pytest.mark.parametrize("args", [(-1, 3, 3, 10), (4, 3, 5, 10), (1, 0, 3, 10), (1, 3, 11, 10), (0, 8, 5, 10)])
def test_domain_errors(args):
    with pytest.raises(SpecificityDomainError):
        specificity_score(*args)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 2000).flatmap(lambda T: st.tuples(st.just(T), st.integers(1, T), st.integers(1, T))),
       st.floats(0, 1))
def test_matches_oracle_up_to_2000(TFt, u):
    T, F, t = TFt
    lo, hi = max(0, t - (T - F)), min(F, t)
    k = lo + int(u * (hi - lo))
    assert specificity_score(k, F, t, T) == pytest.approx(exact_scores(F, t, T)[k], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 300).flatmap(lambda T: st.tuples(st.just(T), st.integers(1, T), st.integers(1, T))))
def test_monotone_in_k(TFt):
    T, F, t = TFt
    ks = range(max(0, t - (T - F)), min(F, t) + 1)
    scores = [specificity_score(k, F, t, T) for k in ks]
    assert all(b >= a for a, b in zip(scores, scores[1:]))


def test_sign_matches_expectation():
    T, F, t = 200, 30, 50
    for k in range(0, 31):
        s = specificity_score(k, F, t, T)
        if s > 0:
            assert k > F * t / T
        elif s < 0:
            assert k < F * t / T


def test_log_tails_sum_with_pmf():
    up, low = log_tails(7, 20, 30, 100)
    assert math.exp(up) + math.exp(low) - math.exp(log_pmf(7, 20, 30, 100)) == pytest.approx(1.0, abs=1e-12)


def test_huge_counts_match_reference():
    # Reference frozen from scipy.stats.hypergeom.logsf.
    s = specificity_score(60_000, 100_000, 10_000_000, 20_000_000)
    assert s == pytest.approx(880.951825682519, abs=1e-6)
    assert specificity_score(50_000, 100_000, 10_000_000, 20_000_000) == 0.0


def test_band():
    assert band(1.9) == ""
    assert band(-2.5) == "specific"
    assert band(3.4) == "highly specific"


def _toy():
    # 5 forms over 4 rows; rows 0-1 are part A, rows 2-3 part B.
    counts = np.array([[3, 0, 1, 0, 2],
                       [2, 1, 0, 0, 1],
                       [0, 2, 1, 4, 1],
                       [0, 1, 2, 3, 1]])
    return specificity_table(sp.csr_matrix(counts), ["A", "A", "B", "B"], ["e", "d", "c", "b", "a"])


def test_toy_table_against_oracle():
    table = _toy()
    assert table.T == 25 and table.t.tolist() == [10, 15]
    for e in table.entries():
        assert e.score == pytest.approx(exact_scores(e.F, e.t, e.T)[e.k], abs=1e-12)
    assert table.entry("e", "A").k == 5 and table.entry("b", "B").k == 7


def test_complement_sign_two_parts():
    table = _toy()
    a, b = table.scores[:, 0], table.scores[:, 1]
    assert np.all((np.sign(a) == -np.sign(b)) | ((a == 0) & (b == 0)))


def test_only_in_one_part():
    table = _toy()
    assert table.entry("b", "B").score > 0 and table.entry("b", "A").score < 0


def test_identical_parts_near_zero():
    counts = sp.csr_matrix(np.array([[3, 1, 4], [3, 1, 4]]))
    table = specificity_table(counts, ["x", "y"], ["a", "b", "c"])
    assert np.all(np.abs(table.scores) < 0.35)


def test_single_part_error():
    with pytest.raises(ValueError):
        specificity_table(sp.csr_matrix(np.ones((2, 2))), ["x", "x"], ["a", "b"])


def test_top_specific_ranking():
    table = _toy()
    over = top_specific(table, "A", 5, "over")
    expected = sorted((e for e in table.entries() if e.part == "A" and e.score > 0),
                      key=lambda e: (-abs(e.score), e.form))
    assert over == expected
    assert [e.form for e in top_specific(table, "B", 1, "over")] == ["b"]
    assert top_specific(table, "A", 0) == []
    with pytest.raises(KeyError):
        top_specific(table, "Z", 3)


def test_all_zero_scores_give_empty_lists():
    counts = sp.csr_matrix(np.array([[2, 2], [2, 2]]))
    table = specificity_table(counts, ["x", "y"], ["a", "b"])
    assert top_specific(table, "x", 5, "over") == [] and top_specific(table, "x", 5, "under") == []


def test_csv_banner_per_part():
    text = _toy().to_csv(banner=2)
    lines = text.strip().split("\n")
    assert lines[0] == "form,part,k,F,t,T,score"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["A", "A", "B", "B"]


@pytest.mark.parametrize("k,F,t,T", [(1, 1, 3, 6), (2, 5, 3, 6), (0, 1, 5, 10), (3, 4, 3, 4)])
def test_exact_half_tail_scores_zero(k, F, t, T):
    # One tail is exactly 1/2 here; rounding must not push it below.
    assert exact_scores(F, t, T)[k] == 0.0
    assert specificity_score(k, F, t, T) == 0.0


def test_exact_half_beyond_integer_limit():
    # Symmetric law (2F = T), k at the half-integer centre + 1/2.
    assert specificity_score(1, 1, 10_000_000, 20_000_000) == 0.0
    assert specificity_score(0, 1, 10_000_000, 20_000_000) == 0.0
