import math

import mpmath
import numpy as np
import pytest

from sosvolume.moments import (
    Box,
    LpBall,
    MomentVector,
    box_moments,
    gamma,
    log_gamma,
    lp_ball_moments,
    moments_of,
    riesz,
)
from sosvolume.oracle import mc_moments
from sosvolume.poly import Polynomial, enumerate_monomials

from conftest import random_poly


@pytest.mark.parametrize("x", [0.25, 0.5, 1.0, 1.5, 2.0, 3.3, 7.25, 40.0, 120.5])
def test_gamma_against_mpmath(x):
    ref = float(mpmath.gamma(mpmath.mpf(x)))
    assert gamma(x) == pytest.approx(ref, rel=1e-13)
    assert log_gamma(x) == pytest.approx(float(mpmath.loggamma(x)), rel=1e-13, abs=1e-14)


def test_gamma_examples():
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(2.0) == pytest.approx(1.0, rel=1e-15)
    assert gamma(0.25) == pytest.approx(3.6256099082219083, rel=1e-13)
    for bad in (0.0, -1.5):
        with pytest.raises(ValueError):
            log_gamma(bad)


def test_box_moment_examples():
    y = box_moments(Box((-1, -1), (1, 1)), 2)
    assert y[(2, 0)] == pytest.approx(4 / 3)
    assert y[(1, 0)] == 0.0
    assert box_moments(Box((0,), (1,)), 3)[(3,)] == pytest.approx(0.25)


def test_box_rejects_degenerate():
    with pytest.raises(ValueError):
        Box((0, 1), (1, 1))


def test_lp_ball_examples():
    assert lp_ball_moments(2, 2, 0)[(0, 0)] == pytest.approx(math.pi, rel=1e-14)
    assert lp_ball_moments(2, 4, 0)[(0, 0)] == pytest.approx(gamma(0.25) ** 2 / (2 * math.sqrt(math.pi)), rel=1e-14)
    assert lp_ball_moments(2, 2, 1)[(1, 0)] == 0.0
    assert lp_ball_moments(3, 2, 0)[(0, 0, 0)] == pytest.approx(4 * math.pi / 3, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8])
def test_mass_matches_ball_volume(n):
    assert lp_ball_moments(n, 2, 0).mass == pytest.approx(math.pi ** (n / 2) / gamma(1 + n / 2), rel=1e-13)


def test_high_degree_does_not_overflow():
    y = lp_ball_moments(3, 10, 40)
    assert np.all(np.isfinite(y.values))
    assert np.all(y.values >= 0)


@pytest.mark.parametrize("n,p", [(2, 2), (2, 4), (3, 2), (3, 6)])
def test_odd_moments_are_exact_zeros(n, p):
    y = lp_ball_moments(n, p, 7)
    for k, v in zip(y.basis, y.values):
        if any(e % 2 for e in k):
            assert v == 0.0
        else:
            assert v > 0.0


def test_riesz_examples():
    y = lp_ball_moments(2, 2, 2)
    assert riesz(y, Polynomial.constant(2, 1.0)) == pytest.approx(math.pi)
    x1, x2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    assert riesz(y, x1**2 + x2**2) == pytest.approx(math.pi / 2)
    assert riesz(y, Polynomial.zero(2)) == 0.0
    with pytest.raises(ValueError):
        riesz(y, x1**3)


def test_riesz_linearity(rng):
    y = lp_ball_moments(3, 4, 6)
    for _ in range(100):
        p, q = random_poly(rng, 3, 6), random_poly(rng, 3, 6)
        a, b = rng.normal(size=2)
        lhs = riesz(y, a * p + b * q)
        rhs = a * riesz(y, p) + b * riesz(y, q)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_moment_vector_truncate():
    y = lp_ball_moments(2, 2, 6)
    t = y.truncate(2)
    assert len(t.basis) == 6
    np.testing.assert_array_equal(t.values, y.values[:6])
    with pytest.raises(ValueError):
        y.truncate(8)
    with pytest.raises(ValueError):
        MomentVector(enumerate_monomials(2, 1), np.zeros(2))


def test_moments_of_dispatch():
    assert moments_of(LpBall(2, 4), 2).mass == pytest.approx(lp_ball_moments(2, 4, 0).mass)
    assert moments_of(Box((0, 0), (2, 3)), 0).mass == pytest.approx(6.0)


@pytest.mark.slow
@pytest.mark.parametrize("n,p", [(2, 2), (2, 4), (3, 2), (3, 4)])
def test_closed_form_vs_monte_carlo(n, p):
    exact = lp_ball_moments(n, p, 4)
    est, se = mc_moments(LpBall(n, p), 4, 10**6, seed=11)
    z = np.abs(est.values - exact.values) / np.where(se > 0, se, 1.0)
    assert np.all(z <= 4.0), z.max()
