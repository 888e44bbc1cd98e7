"""Log-space binomials and the expert-diversity inequality."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from moelab import DomainError, diversity_gain, effective_nonlinear_budget, \
    log_binomial
from moelab.expressivity import EXACT_BINOMIAL_LIMIT, log_binomial_gamma


def test_boundary_values():
    for n in (0, 1, 7, 60, 61, 5000):
        assert log_binomial(n, 0) == 0.0
        assert log_binomial(n, n) == 0.0


def test_exact_small_values():
    assert log_binomial(8, 2) == pytest.approx(math.log(28), rel=1e-15)
    assert round(log_binomial(8, 2), 4) == 3.3322
    assert log_binomial(16, 4) == pytest.approx(math.log(1820), rel=1e-15)
    assert round(log_binomial(16, 4), 4) == 7.5066


def test_exact_path_agrees_with_gamma_path():
    for n in range(0, EXACT_BINOMIAL_LIMIT + 1):
        for k in range(0, n + 1):
            exact = math.log(math.comb(n, k)) if math.comb(n, k) > 0 else 0.0
            gamma = log_binomial_gamma(n, k)
            assert gamma == pytest.approx(exact, rel=1e-10, abs=1e-10)
            assert log_binomial(n, k) == exact


def test_large_counts_stay_finite():
    val = log_binomial(100_000, 50_000)
    assert math.isfinite(val)
    # Stirling-scale magnitude: ln C(2n, n) ~ 2n ln 2
    assert val == pytest.approx(100_000 * math.log(2), rel=1e-3)


@given(st.integers(0, 200), st.data())
def test_symmetry(n, data):
    k = data.draw(st.integers(0, n))
    assert log_binomial(n, k) == pytest.approx(log_binomial(n, n - k),
                                               rel=1e-12, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        log_binomial(3, 4)
    with pytest.raises(DomainError):
        log_binomial(3, -1)
    with pytest.raises(DomainError):
        diversity_gain(4, 5, 2)
    with pytest.raises(DomainError):
        diversity_gain(4, 2, 0)


def test_diversity_gain_alpha_one_is_zero():
    assert diversity_gain(17, 5, 1).log_gain == 0.0


def test_diversity_gain_spot_value():
    report = diversity_gain(8, 2, 2)
    # C(16, 4) = 1820, C(8, 2)^2 = 784
    assert report.log_binom_base == pytest.approx(math.log(28), rel=1e-12)
    assert report.log_binom_scaled == pytest.approx(math.log(1820), rel=1e-12)
    assert report.log_gain == pytest.approx(math.log(1820.0 / 784.0), abs=1e-9)
    assert report.log_gain == pytest.approx(0.842, abs=1e-3)


def test_diversity_gain_k_equals_n():
    for alpha in (1, 2, 5):
        assert diversity_gain(6, 6, alpha).log_gain == 0.0


def test_inequality_thousand_draws():
    gen = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(gen.integers(1, 201))
        k = int(gen.integers(1, n + 1))
        alpha = int(gen.integers(1, 9))
        assert diversity_gain(n, k, alpha).log_gain >= -1e-9


@given(st.integers(1, 2000), st.integers(1, 16), st.data())
def test_inequality_property(n, alpha, data):
    k = data.draw(st.integers(1, n))
    assert diversity_gain(n, k, alpha).log_gain >= -1e-9


def test_u_eff_reporting():
    report = diversity_gain(8, 2, 4, m=100)
    assert report.u_eff == 200
    assert diversity_gain(8, 2, 4).u_eff is None


def test_effective_nonlinear_budget():
    assert effective_nonlinear_budget(6, 2688) == 16128
    assert effective_nonlinear_budget(1, 1) == 1
    # acc variant scales the budget by exactly alpha
    k, alpha, m = 6, 4, 1408
    assert effective_nonlinear_budget(alpha * k, m) \
        == alpha * effective_nonlinear_budget(k, m)
    with pytest.raises(DomainError):
        effective_nonlinear_budget(0, 5)
