from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from clickstats.errors import TruncationError, ValidationError
from clickstats.response import (
    coherent_outcome_probs,
    custom_response,
    onoff_response,
    photoelectric_response,
    thinning_matrix,
)


def normal_ordered_element(n: int, k: int, y: Fraction) -> Fraction:
    """<n| :(y n)^k / k! exp(-y n): |n> by expanding the exponential; <n|:n^m:|n> = (n)_m."""
    total = Fraction(0)
    for j in range(n - k + 1):
        total += (-1) ** j * y ** (k + j) * math.perm(n, k + j) / (math.factorial(k) * math.factorial(j))
    return total


def test_vacuum_never_clicks():
    r = photoelectric_response(0.7, 3, 4, 6)
    assert r.p[0, 0] == 1 and np.all(r.p[1:, 0] == 0)


def test_photoelectric_examples():
    assert photoelectric_response(1.0, 2, 3, 4).p[1, 2] == pytest.approx(0.5, abs=1e-15)
    assert photoelectric_response(1.0, 1, 3, 4).p[3, 3] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("eta,N,K", [(1, 2, 3), (Fraction(4, 5), 2, 7), (Fraction(1, 2), 3, 2), (Fraction(9, 10), 4, 5)])
def test_photoelectric_matches_normal_ordered_expansion(eta, N, K):
    n_max = 9
    y = Fraction(eta) / N
    r = photoelectric_response(float(eta), N, K, n_max)
    for n in range(n_max + 1):
        col = [normal_ordered_element(n, k, y) for k in range(K)]
        for k in range(K):
            assert abs(r.p[k, n] - float(col[k])) < 1e-14
        assert abs(r.p[K, n] - float(1 - sum(col))) < 1e-14


def test_onoff_examples():
    assert onoff_response(0.3, 2, 4).p[0, 0] == 1
    r = onoff_response(1.0, 2, 4)
    assert r.p[0, 1] == pytest.approx(0.5) and r.p[1, 1] == pytest.approx(0.5)
    assert onoff_response(0.5, 2, 4).p[0, 2] == pytest.approx(0.5625, abs=1e-15)
    assert onoff_response(0.5, 2, 4).K == 1


@given(st.floats(0, 1), st.integers(1, 6), st.integers(1, 10), st.integers(0, 25))
def test_completeness(eta, N, K, n_max):
    for r in (photoelectric_response(eta, N, K, n_max), onoff_response(eta, N, n_max)):
        assert np.all(np.abs(r.p.sum(axis=0) - 1) < 1e-12)
        assert np.all(r.p >= 0) and np.all(r.p <= 1)
        assert r.y == pytest.approx(eta / N)


def test_top_bin_untriggered_below_K():
    r = photoelectric_response(0.8, 2, 7, 7)
    assert np.all(r.p[7, :7] == 0)
    np.testing.assert_allclose(r.p[:, 7], stats.binom.pmf(np.arange(8), 7, 0.4), atol=1e-15)


def test_custom_identity_and_errors(tmp_path):
    K, n_max = 3, 6
    ident = np.zeros((K + 1, n_max + 1))
    for n in range(n_max + 1):
        ident[min(n, K), n] = 1
    r = custom_response(ident)
    assert r.family == "custom" and r.y is None
    bad = ident.copy()
    bad[0, 0] = 0.98
    with pytest.raises(ValidationError):
        custom_response(bad)
    neg = ident.copy()
    neg[0, 1], neg[1, 1] = -0.1, 1.1
    with pytest.raises(ValidationError):
        custom_response(neg)


def test_custom_csv_roundtrip(tmp_path):
    r = photoelectric_response(0.8, 1, 7, 30)
    path = tmp_path / "resp.csv"
    r.to_csv(path)
    back = custom_response(path)
    assert back.K == 7 and back.n_max == 30
    np.testing.assert_allclose(back.detector, r.detector, atol=1e-15)


def test_custom_lift_matches_photoelectric():
    # detector-level binomial response lifted by 1/N equals the closed form in y = eta/N
    base = photoelectric_response(0.8, 1, 5, 12)
    lifted = custom_response(base.detector, N=3)
    closed = photoelectric_response(0.8, 3, 5, 12)
    np.testing.assert_allclose(lifted.p, closed.p, atol=1e-13)


def test_thinning_rows_sum_to_one():
    B = thinning_matrix(10, 0.3)
    np.testing.assert_allclose(B.sum(axis=1), 1, atol=1e-14)


def test_coherent_examples():
    r = photoelectric_response(1.0, 1, 5, 20)
    np.testing.assert_array_equal(coherent_outcome_probs(r, 0.0), np.eye(6)[0])
    assert coherent_outcome_probs(r, 1.0)[0] == pytest.approx(math.exp(-1), abs=1e-15)
    assert coherent_outcome_probs(onoff_response(1.0, 2, 20), 2.0)[0] == pytest.approx(math.exp(-1), abs=1e-14)


@given(st.floats(0, 10), st.floats(0.05, 1), st.integers(1, 4), st.integers(1, 9))
def test_coherent_photoelectric_is_topbinned_poisson(w, eta, N, K):
    r = photoelectric_response(eta, N, K, 5)
    got = coherent_outcome_probs(r, w)
    mu = eta * w / N
    expect = np.append(stats.poisson.pmf(np.arange(K), mu), stats.poisson.sf(K - 1, mu))
    np.testing.assert_allclose(got, expect, atol=1e-12, rtol=0)


def test_coherent_custom_truncation():
    r = custom_response(photoelectric_response(1.0, 1, 3, 5).detector)
    with pytest.raises(TruncationError):
        coherent_outcome_probs(r, 4.0)


def test_with_n_max():
    r = photoelectric_response(0.5, 2, 3, 5)
    assert r.with_n_max(12).n_max == 12
    c = custom_response(r.detector)
    assert c.with_n_max(3).n_max == 3
    with pytest.raises(TruncationError):
        c.with_n_max(9)


def test_parameter_checks():
    with pytest.raises(ValidationError):
        photoelectric_response(1.2, 2, 3, 4)
    with pytest.raises(ValidationError):
        photoelectric_response(0.5, 0, 3, 4)
    with pytest.raises(ValidationError):
        photoelectric_response(0.5, 2, 0, 4)
