import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from holrecon.errors import ConditioningError, ConfigurationError
from holrecon.sgdiff import SGConfig, sg_derivative_at, sg_fir_weights, sg_noise_gain, sg_weights

X = np.linspace(-2, 2, 64)
CFG = SGConfig(51, 4, 2)


def test_config_validation():
    for bad in [dict(window=50), dict(window=5, degree=5), dict(degree=1, deriv_order=2), dict(window=-1)]:
        with pytest.raises(ConfigurationError):
            SGConfig(**{**dict(window=51, degree=4, deriv_order=2), **bad})
    with pytest.raises(ConfigurationError):
        sg_derivative_at(X[:20], X[:20], 0.0, CFG)


def test_constant_and_quadratic():
    assert abs(sg_derivative_at(X, np.full(64, 3.0), 0.0, CFG)) <= 1e-12
    assert sg_derivative_at(X, 3 * X**2 + X, 0.0, CFG) == pytest.approx(6.0, rel=1e-8)


def test_degenerate_window():
    with pytest.raises(ConditioningError):
        sg_derivative_at(np.zeros(5), np.ones(5), 0.0, SGConfig(5, 2, 2))


def test_exp_matches_exact_least_squares():
    cfg = CFG
    idx, _ = sg_weights(X, 0.0, cfg)
    mpmath.mp.dps = 40
    t = [mpmath.mpf(float(x)) for x in X[idx]]
    V = mpmath.matrix([[ti**k for k in range(5)] for ti in t])
    y = mpmath.matrix([mpmath.e**ti for ti in t])
    beta = mpmath.lu_solve(V.T * V, V.T * y)
    oracle = float(2 * beta[2])
    got = sg_derivative_at(X, np.exp(X), 0.0, cfg)
    assert got == pytest.approx(oracle, rel=1e-10)
    assert abs(got - 1) < 0.05  # truncation bias of a quartic fit over half-width ~1.6


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(-0.5, 0.5))
def test_polynomial_exactness(coefs, x0):
    y = np.polynomial.polynomial.polyval(X, coefs)
    d2 = np.polynomial.polynomial.polyval(x0, np.polynomial.polynomial.polyder(coefs, 2))
    got = sg_derivative_at(X, y, x0, CFG)
    assert got == pytest.approx(d2, rel=1e-8, abs=1e-8 * (1 + np.abs(coefs).max()))


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_linearity_and_conjugation(a, b, seed):
    r = np.random.default_rng(seed)
    y1 = r.standard_normal(64) + 1j * r.standard_normal(64)
    y2 = r.standard_normal(64) + 1j * r.standard_normal(64)
    s1, s2 = sg_derivative_at(X, y1, 0.0, CFG), sg_derivative_at(X, y2, 0.0, CFG)
    comb = sg_derivative_at(X, a * y1 + b * y2, 0.0, CFG)
    assert abs(comb - (a * s1 + b * s2)) <= 1e-12 * (abs(a * s1) + abs(b * s2) + 1e-12) * 100
    assert sg_derivative_at(X, np.conj(y1), 0.0, CFG) == pytest.approx(np.conj(s1), rel=1e-12)


def test_fir_matches_least_squares():
    grid = np.linspace(-2, 2, 65)  # contains 0, window centered on a node
    y = np.sin(grid) + 0.3 * np.cos(3 * grid)
    w = sg_fir_weights(CFG, float(grid[1] - grid[0]))
    fir = w @ y[32 - 25 : 32 + 26]
    assert fir == pytest.approx(sg_derivative_at(grid, y, 0.0, CFG), rel=1e-10)


def test_noise_gain():
    m = 7
    assert sg_noise_gain(SGConfig(2 * m + 1, 0, 0), 0.1) == pytest.approx(1 / math.sqrt(2 * m + 1), rel=1e-12)
    assert sg_noise_gain(CFG, 0.05) == pytest.approx(4 * sg_noise_gain(CFG, 0.1), rel=1e-8)
    with pytest.raises(ConfigurationError):
        sg_noise_gain(CFG, 0.0)


def test_noise_gain_monte_carlo():
    h = 4 / 63
    gain = sg_noise_gain(CFG, h)
    w = sg_fir_weights(CFG, h)
    r = np.random.default_rng(7)
    est = r.standard_normal((10_000, 51)) @ w
    assert np.std(est) == pytest.approx(gain, rel=0.05)


def test_acceptance_polynomial():
    y = 5 * X**4 - 3 * X**2 + 2 * X
    assert sg_derivative_at(X, y, 0.0, CFG) == pytest.approx(-6.0, rel=1e-8)
