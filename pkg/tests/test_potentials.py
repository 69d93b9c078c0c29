import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from metricda.errors import OutOfDomainError
from metricda.potentials import (
    ExponentialPotential,
    RhoNormPotential,
    f_phi_eval,
    parse_potential,
    phi_eval,
    phi_inverse,
)

EXP = ExponentialPotential()
POTENTIALS = [EXP, RhoNormPotential(1.05), RhoNormPotential(1.5), RhoNormPotential(1.75), RhoNormPotential(2.0)]


def test_exponential_values():
    assert phi_eval(EXP, 1.0) == 1.0
    assert phi_eval(EXP, 0.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert phi_inverse(EXP, 1.0) == 1.0
    assert phi_inverse(EXP, math.e) == pytest.approx(2.0, rel=1e-15)
    assert f_phi_eval(EXP, 1.0) == 0.0
    assert f_phi_eval(EXP, math.e) == pytest.approx(math.e, rel=1e-15)
    assert f_phi_eval(EXP, 0.0) == 0.0


def test_exponential_f_phi_matches_quadrature_of_inverse():
    # oracle: integrate 1 + log z from 1 to e numerically
    val, _ = integrate.quad(lambda z: 1 + math.log(z), 1.0, math.e)
    assert f_phi_eval(EXP, math.e) == pytest.approx(val, rel=1e-12)


def test_rho_norm_values():
    p = RhoNormPotential(1.5)
    assert phi_eval(p, 4.0) == pytest.approx(16.0, rel=1e-15)
    assert phi_inverse(p, 16.0) == pytest.approx(4.0, rel=1e-15)
    assert phi_eval(p, -3.0) == 0.0
    assert f_phi_eval(RhoNormPotential(2.0), 3.0) == pytest.approx(4.0, rel=1e-15)


def test_rho_norm_closed_form_matches_numeric_fallback():
    p = RhoNormPotential(1.5)
    x = np.array([0.0, 0.3, 1.0, 2.5, 7.0])
    numeric = super(RhoNormPotential, p)._f_phi(x)
    np.testing.assert_allclose(p.f_phi(x), numeric, atol=1e-10)


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_f_phi_vanishes_at_one(p):
    assert float(p.f_phi(1.0)) == 0.0


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_phi_at_zero_at_most_one(p):
    assert float(p.phi(0.0)) <= 1.0


def test_domain_errors():
    with pytest.raises(OutOfDomainError):
        EXP.phi_inverse(0.0)
    with pytest.raises(OutOfDomainError):
        EXP.phi_inverse(-1.0)
    with pytest.raises(OutOfDomainError):
        EXP.f_phi(-0.1)
    with pytest.raises(OutOfDomainError):
        RhoNormPotential(1.5).phi_inverse(-1e-3)
    with pytest.raises(ValueError):
        RhoNormPotential(1.0)


def test_parse_potential():
    assert isinstance(parse_potential("exp"), ExponentialPotential)
    assert parse_potential("rho:1.75") == RhoNormPotential(1.75)
    with pytest.raises(ValueError):
        parse_potential("tsallis")


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_round_trip_on_sample(p):
    rng = np.random.default_rng(0)
    z = rng.uniform(0.05, 6.0, size=1000)
    np.testing.assert_allclose(p.phi_inverse(p.phi(z)), z, atol=1e-10, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(y=st.floats(1e-6, 1e6), idx=st.integers(0, len(POTENTIALS) - 1))
def test_phi_inverts_phi_inverse(y, idx):
    p = POTENTIALS[idx]
    assert float(p.phi(p.phi_inverse(y))) == pytest.approx(y, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(z1=st.floats(-20, 20), z2=st.floats(-20, 20), idx=st.integers(0, len(POTENTIALS) - 1))
def test_phi_monotone(z1, z2, idx):
    p = POTENTIALS[idx]
    lo, hi = sorted((z1, z2))
    assert float(p.phi(lo)) <= float(p.phi(hi))


@settings(max_examples=50, deadline=None)
@given(
    x1=st.floats(0, 50), x2=st.floats(0, 50), lam=st.floats(0, 1), idx=st.integers(0, len(POTENTIALS) - 1)
)
def test_f_phi_convex(x1, x2, lam, idx):
    p = POTENTIALS[idx]
    mid = float(p.f_phi(lam * x1 + (1 - lam) * x2))
    chord = lam * float(p.f_phi(x1)) + (1 - lam) * float(p.f_phi(x2))
    assert mid <= chord + 1e-12 * max(1.0, abs(chord))


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_f_phi_derivative_is_phi_inverse(p):
    x = np.linspace(0.1, 10, 200)
    h = 1e-5
    fd = (p.f_phi(x + h) - p.f_phi(x - h)) / (2 * h)
    np.testing.assert_allclose(fd, p.phi_inverse(x), atol=1e-6)


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_growth_certificate(p):
    x = np.logspace(0, 6, 400)
    assert np.all(p.f_phi(x) <= p.c_phi * x ** (1 + p.kappa) * (1 + 1e-12))


def test_moduli():
    assert EXP.modulus == 1.0
    assert float(EXP.gamma(2.0)) == 2.0
    assert float(EXP.gamma_tilde_inverse(0.25)) == 0.5
    assert RhoNormPotential(2.0).modulus == 1.0
    with pytest.raises(ValueError):
        RhoNormPotential(3.0).modulus
