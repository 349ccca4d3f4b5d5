from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from clickstats.engine import (
    ClickDistribution,
    CountsTable,
    MultiplexConfig,
    click_distribution,
    enumerate_occupations,
    sample_clicks,
)
from clickstats.errors import ValidationError
from clickstats.moments import (
    MomentMatrix2,
    covariance_matrix,
    factorial_moment,
    factorial_moment_table,
    higher_moment_matrix,
    moment_indices,
    normal_moment,
    raw_moments,
)
from clickstats.response import onoff_response, photoelectric_response
from clickstats.states import ClassicalMixture, fock_distribution, thermal_distribution

from .strategies import counts_tables


def _fock1_onoff():
    return click_distribution(fock_distribution(1, 1), onoff_response(1.0, 2, 1), MultiplexConfig(2, 1))


def test_first_factorial_moment_is_mean():
    d = click_distribution(thermal_distribution(1.0), photoelectric_response(0.7, 3, 2, 60), MultiplexConfig(3, 2))
    first, _ = raw_moments(d)
    for k in range(3):
        e = [0, 0, 0]
        e[k] = 1
        assert factorial_moment(d, e) == pytest.approx(first[k], abs=1e-14)
        assert normal_moment(d, e) == pytest.approx(first[k] / 3, abs=1e-14)


def test_point_mass_examples():
    d = _fock1_onoff()
    assert factorial_moment(d, (1, 1)) == 1
    assert factorial_moment(d, (2, 0)) == 0
    assert normal_moment(d, (0, 0)) == 1


def test_second_normal_moment_formula():
    d = click_distribution(ClassicalMixture.coherent(1.5), photoelectric_response(0.8, 2, 3, 30), MultiplexConfig(2, 3))
    first, second = raw_moments(d)
    for k in range(4):
        m = [0] * 4
        m[k] = 2
        assert normal_moment(d, m) == pytest.approx((second[k, k] - first[k]) / 2, abs=1e-14)


def test_order_violation():
    d = _fock1_onoff()
    with pytest.raises(ValidationError):
        factorial_moment(d, (2, 1))
    with pytest.raises(ValidationError):
        factorial_moment(d, (1,))


def test_table_zero_index():
    tab = factorial_moment_table(_fock1_onoff())
    assert tab[(0, 0)] == 1


def _exact_rational(dist: ClickDistribution) -> ClickDistribution:
    probs = {o: Fraction(p) for o, p in dist.probs.items()}
    total = sum(probs.values())
    return ClickDistribution(dist.config, {o: p / total for o, p in probs.items()})


@pytest.mark.parametrize("N,K", [(2, 1), (2, 2), (3, 1), (3, 2)])
def test_generating_function_derivatives_exact(N, K):
    cfg = MultiplexConfig(N, K)
    resp = photoelectric_response(0.8, N, K, 6)
    dist = _exact_rational(click_distribution(thermal_distribution(0.9, n_max=6, tol=1.0), resp, cfg))
    t = sp.symbols(f"t0:{K + 1}")
    G = sum(sp.Rational(p.numerator, p.denominator) * sp.Mul(*[ti**n for ti, n in zip(t, occ)])
            for occ, p in dist.probs.items())
    at_one = {ti: 1 for ti in t}
    for order in range(N + 1):
        for m in enumerate_occupations(MultiplexConfig(order, K)) if order else [(0,) * (K + 1)]:
            deriv = G
            for ti, mk in zip(t, m):
                if mk:
                    deriv = sp.diff(deriv, ti, mk)
            expect = deriv.subs(at_one)
            got = factorial_moment(dist, m)
            assert isinstance(got, Fraction)
            assert sp.Rational(got.numerator, got.denominator) == expect


def test_fock1_covariance():
    M = covariance_matrix(_fock1_onoff())
    np.testing.assert_allclose(M.entries, [[-0.25, 0.25], [0.25, -0.25]], atol=1e-15)
    S = covariance_matrix(_fock1_onoff(), "scaled")
    np.testing.assert_allclose(S.entries, 4 * M.entries, atol=1e-15)
    np.testing.assert_allclose(S.raw, M.entries, atol=1e-15)


def test_coherent_covariance_singular_psd():
    d = click_distribution(ClassicalMixture.coherent(1.0), photoelectric_response(0.8, 2, 7, 30), MultiplexConfig(2, 7))
    w = np.linalg.eigvalsh(covariance_matrix(d).entries)
    assert abs(w[0]) < 1e-10
    assert w.min() > -1e-10


def test_higher_matrix_shapes():
    d = click_distribution(ClassicalMixture.coherent(1.0), photoelectric_response(0.8, 2, 3, 30), MultiplexConfig(2, 3))
    H = higher_moment_matrix(d)
    assert len(H.indices) == 1 + 4 and H.entries[0, 0] == pytest.approx(1)
    assert moment_indices(4, 1) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_higher_matrix_classical_psd():
    d = click_distribution(ClassicalMixture(((0.5, 0.3), (0.5, 2.0))), photoelectric_response(0.9, 4, 2, 30),
                           MultiplexConfig(4, 2))
    H = higher_moment_matrix(d)
    np.testing.assert_allclose(H.entries, H.entries.T, atol=1e-15)
    assert np.linalg.eigvalsh(H.entries).min() > -1e-10


def test_higher_matrix_entries_are_normal_moments():
    d = click_distribution(fock_distribution(3), photoelectric_response(0.9, 4, 2, 3), MultiplexConfig(4, 2))
    H = higher_moment_matrix(d)
    for i, mi in enumerate(H.indices):
        for j, mj in enumerate(H.indices):
            s = tuple(a + b for a, b in zip(mi, mj))
            assert H.entries[i, j] == pytest.approx(normal_moment(d, s), abs=1e-14)


@given(counts_tables())
def test_kernel_invariant(table):
    M = covariance_matrix(table)
    assert np.max(np.abs(M.entries.sum(axis=1))) < 1e-12
    np.testing.assert_allclose(M.entries, M.entries.T, atol=1e-14)
    assert np.linalg.eigvalsh(M.entries).min() <= 1e-12


def test_empty_and_small_N():
    with pytest.raises(ValidationError):
        covariance_matrix(CountsTable(MultiplexConfig(2, 1), {}))
    with pytest.raises(ValidationError):
        covariance_matrix(CountsTable(MultiplexConfig(1, 1), {(0, 1): 3}))


def test_json_roundtrip():
    M = covariance_matrix(_fock1_onoff(), "scaled")
    back = MomentMatrix2.from_json(M.to_json())
    assert back.scale == "scaled" and back.K == 1
    np.testing.assert_array_equal(back.entries, M.entries)


def test_integer_accumulation_large_counts():
    # huge counts would lose digits in naive float sums; integer sums are exact
    cfg = MultiplexConfig(2, 1)
    big = CountsTable(cfg, {(2, 0): 3 * 10**12 + 1, (1, 1): 10**12, (0, 2): 1})
    first, second = raw_moments(big)
    shots = 4 * 10**12 + 2
    assert first[0] == pytest.approx((2 * (3 * 10**12 + 1) + 10**12) / shots, rel=1e-15)


def test_estimator_convergence():
    cfg = MultiplexConfig(2, 3)
    dist = thermal_distribution(1.2)
    resp = photoelectric_response(0.8, 2, 3, dist.n_max)
    exact = covariance_matrix(click_distribution(dist, resp, cfg)).entries
    rng = np.random.default_rng(0)
    errors = []
    for shots in (10**4, 10**5, 10**6):
        table = sample_clicks(dist, resp, cfg, shots, seed=shots)
        keys = list(table.counts)
        p = np.array([table.counts[k] for k in keys], dtype=float) / shots
        boot = []
        for row in rng.multinomial(shots, p, size=200):
            t = CountsTable(cfg, {k: int(c) for k, c in zip(keys, row) if c})
            boot.append(covariance_matrix(t).entries)
        se = np.std(boot, axis=0, ddof=1)
        err = np.abs(covariance_matrix(table).entries - exact)
        assert np.all(err <= 4 * se + 1e-15)
        errors.append(float(np.mean(se)))
    # standard errors shrink like 1/sqrt(shots)
    for a, b in zip(errors, errors[1:]):
        assert 2.0 < a / b < 5.0
