import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from fairminmax.divergence import (
    DivergenceKind,
    DomainError,
    bernoulli_divergence,
    bernoulli_divergence_grad,
    conjugate_derivative,
    conjugate_value,
    f_value,
)

KINDS = list(DivergenceKind)
KL, CHI2, SH = DivergenceKind.KL, DivergenceKind.PearsonChiSquared, DivergenceKind.SquaredHellinger


def two_atom_sum(kind, p, q):
    """Direct sum over the two atoms, written out per generator."""
    if kind is KL:
        return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))
    if kind is CHI2:
        return (p - q) ** 2 / q + (p - q) ** 2 / (1 - q)
    return (math.sqrt(p) - math.sqrt(q)) ** 2 + (math.sqrt(1 - p) - math.sqrt(1 - q)) ** 2


def grid_sup(kind, t, x=np.linspace(0.0, 60.0, 600_001)):
    return float(np.max(x * t - f_value(kind, x)))


@pytest.mark.parametrize("kind", KINDS)
def test_f_vanishes_at_one(kind):
    assert f_value(kind, 1.0) == 0.0


def test_f_examples():
    assert f_value(KL, 1) == 0
    assert f_value(CHI2, 2) == 1
    assert f_value(SH, 4) == pytest.approx(1.0, abs=1e-15)
    assert f_value(KL, 0.0) == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_f_rejects_negative(kind):
    with pytest.raises(DomainError):
        f_value(kind, -0.1)


def test_conjugate_examples():
    assert conjugate_value(CHI2, 0.0) == 0.0
    assert conjugate_value(KL, 1.0) == pytest.approx(1.0)
    assert conjugate_value(SH, 0.5) == pytest.approx(1.0)
    assert grid_sup(KL, 1.0) == pytest.approx(1.0, abs=1e-6)
    assert grid_sup(SH, 0.5) == pytest.approx(1.0, abs=1e-6)


def test_sh_conjugate_domain():
    with pytest.raises(DomainError):
        conjugate_value(SH, 1.0)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("t", [-3.0, -2.0, -0.7, 0.0, 0.3, 0.8])
def test_conjugate_matches_grid_sup(kind, t):
    assert conjugate_value(kind, t) == pytest.approx(grid_sup(kind, t), abs=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_conjugate_derivative_finite_difference(kind):
    h = 1e-6
    for t in (-2.5, -1.0, 0.0, 0.4, 0.9):
        fd = (conjugate_value(kind, t + h) - conjugate_value(kind, t - h)) / (2 * h)
        assert conjugate_derivative(kind, t) == pytest.approx(fd, rel=1e-5, abs=1e-7)


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=200, deadline=None)
@given(x=st.floats(0.01, 50), y=st.floats(0.01, 50))
def test_f_midpoint_convex(kind, x, y):
    assert f_value(kind, 0.5 * x + 0.5 * y) <= 0.5 * f_value(kind, x) + 0.5 * f_value(kind, y) + 1e-12


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=200, deadline=None)
@given(x=st.floats(0.0, 50), t=st.floats(-5, 0.99))
def test_fenchel_inequality(kind, x, t):
    assert conjugate_value(kind, t) >= x * t - f_value(kind, x) - 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_biconjugate_on_grid(kind):
    # grids cover f'(x) for x in [0.05, 20]
    lo, hi = {KL: (-3.0, 5.0), CHI2: (-3.0, 40.0), SH: (-4.0, 0.8)}[kind]
    t = np.linspace(lo, hi, 2_000_001)
    fstar = conjugate_value(kind, t)
    for x in (0.05, 0.3, 1.0, 2.5, 7.0, 20.0):
        assert np.max(t * x - fstar) == pytest.approx(f_value(kind, x), abs=1e-4)


def test_bernoulli_examples():
    assert bernoulli_divergence(KL, 0.3, 0.3) == 0.0
    assert bernoulli_divergence(KL, 0.5, 0.25) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), rel=1e-12)
    assert bernoulli_divergence(KL, 0.5, 0.25) == pytest.approx(0.14384, abs=5e-6)
    assert bernoulli_divergence(CHI2, 0.5, 0.25) == pytest.approx(1 / 3, rel=1e-12)
    assert bernoulli_divergence(SH, 0.5, 0.25) == pytest.approx(0.06815, abs=5e-6)
    assert bernoulli_divergence(KL, 0.7, 0.3) == pytest.approx(0.33892, abs=5e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_bernoulli_matches_two_atom_sum(kind, rng):
    for p, q in rng.uniform(0.01, 0.99, size=(100, 2)):
        assert bernoulli_divergence(kind, p, q) == pytest.approx(two_atom_sum(kind, p, q), rel=1e-12, abs=1e-15)


def test_bernoulli_degenerate_inputs_stay_finite():
    for kind in KINDS:
        assert np.isfinite(bernoulli_divergence(kind, 0.5, 0.0))
        assert np.isfinite(bernoulli_divergence(kind, 1.0, 1.0))
        assert bernoulli_divergence(kind, 0.0, 0.0) == pytest.approx(0.0, abs=1e-9)


def test_bernoulli_rejects_non_probability():
    with pytest.raises(DomainError):
        bernoulli_divergence(KL, 1.2, 0.5)
    with pytest.raises(DomainError):
        bernoulli_divergence(KL, 0.5, -0.1)


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=200, deadline=None)
@given(p=st.floats(0, 1), q=st.floats(0.001, 0.999))
def test_bernoulli_nonnegative(kind, p, q):
    d = bernoulli_divergence(kind, p, q)
    assert d >= -1e-15
    if p == q:
        assert d == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_bernoulli_gradient_finite_difference(kind, rng):
    h = 1e-6
    for p, q in rng.uniform(0.05, 0.95, size=(20, 2)):
        dp, dq = bernoulli_divergence_grad(kind, p, q)
        fdp = (bernoulli_divergence(kind, p + h, q) - bernoulli_divergence(kind, p - h, q)) / (2 * h)
        fdq = (bernoulli_divergence(kind, p, q + h) - bernoulli_divergence(kind, p, q - h)) / (2 * h)
        assert dp == pytest.approx(fdp, rel=1e-5, abs=1e-8)
        assert dq == pytest.approx(fdq, rel=1e-5, abs=1e-8)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("p,q", [(0.7, 0.3), (0.5, 0.25), (0.2, 0.6)])
def test_variational_form_on_two_points(kind, p, q):
    """sup over (T(0), T(1)) of E_P[T] - E_Q[f*(T)] equals the closed form."""

    def neg(v):
        t = np.asarray(v)
        if kind is SH:
            t = -np.expm1(-t)  # keep t < 1
        ep = (1 - p) * t[0] + p * t[1]
        eq = (1 - q) * conjugate_value(kind, t[0]) + q * conjugate_value(kind, t[1])
        return -(ep - eq)

    res = minimize(neg, x0=[0.1, 0.1], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    assert -res.fun == pytest.approx(bernoulli_divergence(kind, p, q), abs=1e-6)


def test_parse_names():
    assert DivergenceKind.parse("kl") is KL
    assert DivergenceKind.parse("CHI2") is CHI2
    assert DivergenceKind.parse("sh") is SH
    with pytest.raises(ValueError):
        DivergenceKind.parse("tv")
