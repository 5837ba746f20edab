import numpy as np
import pytest
from hypothesis import given, strategies as st

from holrecon.errors import StabilityBoundError
from holrecon.harmonics import CalderonPair, cancellation_margin, make_frequency_point, margin_ok

xis = st.tuples(st.floats(-7, 7), st.floats(-7, 7))
points = np.random.default_rng(0).uniform(-0.7, 0.7, (50, 2))


def test_rotation_examples():
    assert make_frequency_point((2, 0)).zeta == (0.0, 2.0)
    assert make_frequency_point((3, 4)).zeta == (-4.0, 3.0)
    fp0 = make_frequency_point((0, 0))
    pair = CalderonPair(fp0)
    assert np.allclose(pair.v1(points), 0.5) and np.allclose(pair.v2(points), 0.5)


def test_product_at_point():
    pair = CalderonPair(make_frequency_point((3, 4)))
    x = np.array([[0.1, 0.2]])
    assert pair.v1(x)[0] * pair.v2(x)[0] == pytest.approx(0.25 * np.exp(-1j * 1.1), rel=1e-14)


def test_stability_bound():
    make_frequency_point((6, 8))
    with pytest.raises(StabilityBoundError):
        make_frequency_point((6, 8.01))


def test_margin():
    assert cancellation_margin(make_frequency_point((0, 0))) == 4
    assert cancellation_margin(make_frequency_point((5, 0))) == pytest.approx(4 * np.exp(-10))
    assert cancellation_margin(make_frequency_point((5, 0))) > 2.22e-16
    from holrecon.harmonics import FrequencyPoint
    fp = FrequencyPoint((18.7, 0.0), (0.0, 18.7))
    assert cancellation_margin(fp) == pytest.approx(2.2e-16, rel=0.05)
    assert not margin_ok(FrequencyPoint((19.0, 0.0), (0.0, 19.0)))


@given(xis)
def test_frequency_invariants(xi):
    fp = make_frequency_point(xi)
    x, z = fp.xi_vec, fp.zeta_vec
    n2 = x @ x
    assert abs(x @ z) <= 1e-12 * max(n2, 1e-300)
    assert abs(np.hypot(*z) - np.hypot(*x)) <= 1e-12 * np.hypot(*x)


@given(xis)
def test_pair_identities(xi):
    fp = make_frequency_point(xi)
    pair = CalderonPair(fp)
    v1, v2 = pair.v1(points), pair.v2(points)
    target = 0.25 * np.exp(-1j * points @ fp.xi_vec)
    assert np.allclose(v1 * v2, target, rtol=1e-12, atol=0)
    lhs = pair.f_plus(points) ** 2 - pair.f_minus(points) ** 2
    assert np.allclose(lhs, 4 * v1 * v2, rtol=1e-12, atol=1e-12 * np.abs(v1 * v2).max())
    # v1 + v2 = e^{-iξ·x/2} cosh(ζ·x/2)
    s = points @ fp.zeta_vec / 2
    assert np.allclose(pair.f_plus(points), np.exp(-0.5j * points @ fp.xi_vec) * np.cosh(s), rtol=1e-12)
    for a in pair.exponents():
        assert abs(a @ a) <= 1e-12 * max(n2 := fp.xi_vec @ fp.xi_vec, 1e-300)


@given(xis, st.floats(0, 2 * np.pi))
def test_rotation_consistency(xi, phi):
    R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    a = make_frequency_point(xi)
    b = make_frequency_point(R @ a.xi_vec)
    assert np.allclose(R @ a.zeta_vec, b.zeta_vec, atol=1e-12 * (1 + np.hypot(*a.xi)))


@given(xis)
def test_zeta_orientation_irrelevant_for_product(xi):
    p1 = CalderonPair(make_frequency_point(xi, +1))
    p2 = CalderonPair(make_frequency_point(xi, -1))
    assert np.allclose(p1.v1(points) * p1.v2(points), p2.v1(points) * p2.v2(points), rtol=1e-12)
