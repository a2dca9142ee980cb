from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifurcate.field_models import (FamilyKind, GeneratingFamily, ParameterPoint, PhasePoint, eval_f, eval_field,
                                    eval_jacobian, parse_family, polar_field)

from oracle_values import HESSIAN_CUSP_ORIGIN, HESSIAN_FOLD_1_5, POLAR_X0_RHO1_PI6, POTENTIAL_CUSP_1_1

FOLD = GeneratingFamily(FamilyKind.FOLD)
CUSP = GeneratingFamily(FamilyKind.CUSP)
ELLIPTIC = GeneratingFamily(FamilyKind.ELLIPTIC)
PERTURBED = GeneratingFamily(FamilyKind.PERTURBED)

coord = st.floats(-3.0, 3.0, allow_nan=False)
angle = st.floats(0.0, 2 * math.pi, allow_nan=False)


def test_potential_values():
    assert eval_f(CUSP, (1.0, 1.0)) == POTENTIAL_CUSP_1_1
    assert eval_f(ELLIPTIC, PhasePoint(0.0, 0.0)) == 0.0
    assert eval_f(FOLD, (3.0, 2.0)) == pytest.approx(9.0 + 2.0)


def test_field_values():
    assert eval_field(FOLD, (1.0, 0.0), (2.0, 3.0)) == (3.0, 3.0)
    assert eval_field(ELLIPTIC, (0.0, 0.0), (1.0, 1.0)) == (0.0, -2.0)
    assert eval_field(PERTURBED, ParameterPoint(0.0, 0.0), (-1.0, 0.0)) == (0.0, 0.0)


def test_jacobian_values():
    assert eval_jacobian(FOLD, (7.0, -2.0), (1.0, 5.0)).tolist() == HESSIAN_FOLD_1_5
    assert eval_jacobian(ELLIPTIC, None, (0.0, 0.0)).tolist() == [[0.0, 0.0], [0.0, 0.0]]
    assert eval_jacobian(CUSP, (0.3, 0.1), (0.0, 0.0)).tolist() == HESSIAN_CUSP_ORIGIN


@pytest.mark.parametrize("family", [FOLD, CUSP, ELLIPTIC, PERTURBED], ids=lambda f: f.name)
def test_gradient_and_hessian_match_finite_differences(family):
    rng = np.random.default_rng(3)
    h = 1e-6
    for y in rng.uniform(-2, 2, size=(20, 2)):
        g = family.gradient(*y)
        fd = [(eval_f(family, y + e) - eval_f(family, y - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))]
        assert np.allclose(g, fd, atol=1e-6)
        H = eval_jacobian(family, None, y)
        for k, e in enumerate((np.array([h, 0]), np.array([0, h]))):
            col = (np.array(family.gradient(*(y + e))) - np.array(family.gradient(*(y - e)))) / (2 * h)
            assert np.allclose(H[:, k], col, atol=1e-6)


def test_vectorised_evaluation_matches_scalar():
    ys = np.random.default_rng(0).uniform(-2, 2, size=(50, 2))
    fam = GeneratingFamily.bumped(FamilyKind.ELLIPTIC, (0.1, -0.2), 0.5, 0.05)
    g1, g2 = fam.gradient(ys[:, 0], ys[:, 1])
    h11, h12, h22 = fam.hessian(ys[:, 0], ys[:, 1])
    for k, (a, b) in enumerate(ys):
        s = fam.gradient(float(a), float(b))
        hs = fam.hessian(float(a), float(b))
        assert s[0] == pytest.approx(g1[k], abs=1e-14) and s[1] == pytest.approx(g2[k], abs=1e-14)
        assert np.allclose(hs, (h11[k], h12[k], h22[k]), atol=1e-13)


def test_polar_examples():
    assert polar_field((0.7, 0.0), (1.3, 0.0))[1] == 0.0
    rdot, tdot = polar_field((0.0, 0.0), (1.0, math.pi / 6))
    assert rdot == pytest.approx(POLAR_X0_RHO1_PI6[0], abs=1e-15)
    assert tdot == pytest.approx(POLAR_X0_RHO1_PI6[1], abs=1e-15)
    with pytest.raises(ValueError):
        polar_field((1.0, 0.0), (0.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(coord, coord, st.floats(0.05, 3.0), angle)
def test_polar_round_trip(x1, x2, rho, theta):
    c, s = math.cos(theta), math.sin(theta)
    v1, v2 = eval_field(ELLIPTIC, (x1, x2), (rho * c, rho * s))
    rdot, tdot = polar_field((x1, x2), (rho, theta))
    assert rdot * c - rho * tdot * s == pytest.approx(v1, abs=1e-11)
    assert rdot * s + rho * tdot * c == pytest.approx(v2, abs=1e-11)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord, st.floats(0.2, 5.0))
def test_elliptic_scaling_covariance(x1, x2, y1, y2, lam):
    a = eval_field(ELLIPTIC, (x1 / lam**2, x2 / lam**2), (y1 / lam, y2 / lam))
    b = eval_field(ELLIPTIC, (x1, x2), (y1, y2))
    assert a[0] == pytest.approx(b[0] / lam**2, abs=1e-12, rel=1e-12)
    assert a[1] == pytest.approx(b[1] / lam**2, abs=1e-12, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(coord, coord, st.floats(0.05, 3.0), angle)
def test_elliptic_antipodal_equivariance(x1, x2, rho, theta):
    # y -> -y maps the flow onto its time reversal: the pushforward -F(x, -y) equals -F(x, y)
    y = (rho * math.cos(theta), rho * math.sin(theta))
    push = tuple(-v for v in eval_field(ELLIPTIC, (x1, x2), (-y[0], -y[1])))
    assert push == tuple(-v for v in eval_field(ELLIPTIC, (x1, x2), y))
    a = polar_field((x1, x2), (rho, theta + math.pi))
    b = polar_field((x1, x2), (rho, theta))
    assert a[0] == pytest.approx(-b[0], abs=1e-12)
    assert a[1] == pytest.approx(-b[1], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(coord, coord, st.floats(0.05, 0.5), st.floats(-0.05, 0.05))
def test_bump_has_compact_support(y1, y2, sigma, eps):
    c = (0.3, -0.4)
    fam = GeneratingFamily.bumped(FamilyKind.ELLIPTIC, c, sigma, eps)
    if math.hypot(y1 - c[0], y2 - c[1]) >= sigma:
        assert eval_f(fam, (y1, y2)) == eval_f(ELLIPTIC, (y1, y2))
        assert eval_field(fam, (0.2, 0.1), (y1, y2)) == eval_field(ELLIPTIC, (0.2, 0.1), (y1, y2))


def test_bump_changes_field_inside_support():
    fam = GeneratingFamily.bumped(FamilyKind.ELLIPTIC, (0.0, 0.0), 0.5, 0.05)
    assert eval_field(fam, (0, 0), (0.1, 0.05)) != eval_field(ELLIPTIC, (0, 0), (0.1, 0.05))


def test_parameter_point_polar():
    p = ParameterPoint.polar(2.0, 3 * math.pi / 4)
    assert p.r == pytest.approx(2.0)
    assert p.alpha == pytest.approx(3 * math.pi / 4)


def test_parse_family():
    assert parse_family({"family": "cusp"}).kind is FamilyKind.CUSP
    fam = parse_family({"family": "bump", "bump.base": "perturbed", "bump.center": "0.1, 0.2",
                        "bump.sigma": "0.3", "bump.eps": "0.02"})
    assert fam.core is FamilyKind.PERTURBED
    assert fam.bump.center == (0.1, 0.2)
    with pytest.raises(ValueError, match="family"):
        parse_family({"family": "swallowtail"})
    with pytest.raises(ValueError, match="sigma"):
        parse_family({"family": "bump", "bump.sigma": "0"})
