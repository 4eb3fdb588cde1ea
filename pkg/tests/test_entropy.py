import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxdg.entropy import EntropyDomainError, LegendreEntropy, dilog, get_entropy

KINDS = ["shannon", "softplus"]


def test_grad_conj_examples():
    sh, spl = LegendreEntropy("shannon"), LegendreEntropy("softplus")
    assert sh.grad_conj(0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert spl.grad_conj(0.0, 0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert sh.grad_conj(-2.0, math.log(3.0)) == pytest.approx(1.0, abs=1e-14)


def test_hess_conj_examples():
    assert LegendreEntropy("shannon").hess_conj(0.0, 0.0) == pytest.approx(1.0)
    assert LegendreEntropy("softplus").hess_conj(0.0, 0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("kind", KINDS)
def test_hess_matches_finite_difference(kind):
    ent = get_entropy(kind)
    eps = 1e-5
    fd = (ent.grad_conj(0.3, 0.7 + eps) - ent.grad_conj(0.3, 0.7 - eps)) / (2 * eps)
    assert abs(fd - ent.hess_conj(0.3, 0.7)) <= 1e-6


def test_grad_examples():
    assert LegendreEntropy("shannon").grad(0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert LegendreEntropy("softplus").grad(0.0, math.log(2.0)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_inverse_identity(kind):
    ent = get_entropy(kind)
    psi = np.linspace(-30, 30, 601)
    np.testing.assert_allclose(ent.grad(0.0, ent.grad_conj(0.0, psi)), psi, atol=1e-10, rtol=0)
    # with phi != 0 the tiny gap exp(psi) is lost to rounding in phi + gap, so
    # stay where the gap is resolvable
    psi = np.linspace(-10, 30, 401)
    phi = np.linspace(-2, 2, 401)
    np.testing.assert_allclose(ent.grad(phi, ent.grad_conj(phi, psi)), psi, atol=1e-10, rtol=0)


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip_observable(kind):
    ent = get_entropy(kind)
    y = np.geomspace(1e-6, 1e3, 400)
    phi = 0.25
    u = phi + y
    back = ent.grad_conj(phi, ent.grad(phi, u))
    np.testing.assert_allclose(back, u, rtol=1e-13, atol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_grad_domain_error(kind):
    ent = get_entropy(kind)
    with pytest.raises(EntropyDomainError):
        ent.grad(1.0, 1.0)
    with pytest.raises(EntropyDomainError):
        ent.grad(1.0, 0.5)
    with pytest.raises(EntropyDomainError):
        ent.bregman(0.0, 1.0, 0.0)
    with pytest.raises(EntropyDomainError):
        ent.bregman(0.0, -1.0, 1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_bound_and_overflow_safety(kind):
    ent = get_entropy(kind)
    psi = np.linspace(-700, 700, 2001)
    phi = -0.5
    with np.errstate(all="raise"):
        o = ent.grad_conj(phi, psi)
        h = ent.hess_conj(phi, psi)
    assert np.all(np.isfinite(o)) and np.all(np.isfinite(h))
    assert np.all(ent.gap(psi) > 0) and np.all(h > 0)
    assert np.all(np.diff(o) >= 0)


def test_softplus_large_argument_is_linear():
    ent = LegendreEntropy("softplus")
    assert ent.gap(600.0) == 600.0
    assert ent.gap(-40.0) == pytest.approx(math.exp(-40.0), rel=1e-12)


def test_bregman_examples():
    sh = LegendreEntropy("shannon")
    assert sh.bregman(0.0, 1.0, 1.0) == 0.0
    assert LegendreEntropy("softplus").bregman(0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert sh.bregman(0.0, 2.0, 1.0) == pytest.approx(2 * math.log(2) - 1, abs=1e-15)
    # a on the obstacle is allowed for Shannon
    assert sh.bregman(0.0, 0.0, 2.0) == pytest.approx(2.0)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(KINDS), phi=st.floats(-3, 3),
       ya=st.floats(1e-3, 20), yb=st.floats(1e-3, 20), yc=st.floats(1e-3, 20))
def test_three_point_identity(kind, phi, ya, yb, yc):
    ent = get_entropy(kind)
    a, b, c = phi + ya, phi + yb, phi + yc
    lhs = ent.bregman(phi, a, b) - ent.bregman(phi, a, c) + ent.bregman(phi, b, c)
    rhs = (ent.grad(phi, b) - ent.grad(phi, c)) * (b - a)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(KINDS), phi=st.floats(-3, 3), ya=st.floats(0, 30), yb=st.floats(1e-4, 30))
def test_bregman_nonnegative(kind, phi, ya, yb):
    ent = get_entropy(kind)
    assert ent.bregman(phi, phi + ya, phi + yb) >= -1e-12


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(KINDS), p1=st.floats(-50, 50), p2=st.floats(-50, 50))
def test_monotone(kind, p1, p2):
    ent = get_entropy(kind)
    if abs(p1 - p2) < 1e-6:
        return
    assert (ent.grad_conj(0.0, p1) - ent.grad_conj(0.0, p2)) * (p1 - p2) > 0


@pytest.mark.parametrize("kind", KINDS)
def test_conj_derivative_and_fenchel(kind):
    ent = get_entropy(kind)
    phi, eps = 0.4, 1e-5
    for psi in (-3.0, -0.2, 0.0, 1.3, 4.0):
        fd = (ent.conj(phi, psi + eps) - ent.conj(phi, psi - eps)) / (2 * eps)
        assert fd == pytest.approx(ent.grad_conj(phi, psi), abs=1e-7)
        u = ent.grad_conj(phi, psi)
        # Fenchel equality R(u) + R*(psi) = u psi at conjugate points
        assert ent.value(phi, u) + ent.conj(phi, psi) == pytest.approx(u * psi, abs=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_value_zero_on_obstacle_and_gradient(kind):
    ent = get_entropy(kind)
    assert ent.value(1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    eps = 1e-6
    for y in (0.1, 1.0, 5.0):
        fd = (ent.value(0.0, y + eps) - ent.value(0.0, y - eps)) / (2 * eps)
        assert fd == pytest.approx(ent.grad(0.0, y), abs=1e-7)


def test_dilog_identities():
    assert dilog(1.0) == pytest.approx(math.pi ** 2 / 6, abs=1e-14)
    assert dilog(-1.0) == pytest.approx(-math.pi ** 2 / 12, abs=1e-14)
    assert dilog(0.5) == pytest.approx(math.pi ** 2 / 12 - math.log(2) ** 2 / 2, abs=1e-14)
    assert dilog(0.0) == 0.0
    # inversion: Li2(-x) + Li2(-1/x) = -pi^2/6 - ln(x)^2 / 2
    for x in (0.3, 2.0, 17.0, 1e4):
        assert dilog(-x) + dilog(-1.0 / x) == pytest.approx(-math.pi ** 2 / 6 - math.log(x) ** 2 / 2, abs=1e-8)
    # power series for small |z|
    z = 0.2
    series = sum(z ** k / k ** 2 for k in range(1, 60))
    assert dilog(z) == pytest.approx(series, abs=1e-15)
    with pytest.raises(EntropyDomainError):
        dilog(1.5)


def test_unknown_entropy():
    with pytest.raises(ValueError):
        LegendreEntropy("fermi")
