import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grushin.errors import DomainError, PreconditionError
from grushin.fields import (balpha_residual, balpha_residual_scaled, bessel3, catalog,
                            check_identities, dilated, exp_gauge, fundamental_solution, gaussian,
                            homogeneous_poly, moser_rescale, partials_mismatch, poly_constant,
                            poly_constant_literal, power_gauge, rescaled_residual, weighted,
                            zero_field)
from grushin.functionals import kappa_normalize
from grushin.geometry import GrushinParams, dilate, gauge

TRIPLES = [(m, k, al) for m in (1, 2, 3) for k in (1, 2, 3) for al in (0.5, 1.0, 2.0)]


def fd_operator(P, fn, r, s, h=1e-4):
    """Independent central-difference evaluation of B_alpha in (r, s)."""
    f0 = fn(r, s)
    fr = (fn(r + h, s) - fn(r - h, s)) / (2 * h)
    frr = (fn(r + h, s) - 2 * f0 + fn(r - h, s)) / h**2
    fs = (fn(r, s + h) - fn(r, s - h)) / (2 * h)
    fss = (fn(r, s + h) - 2 * f0 + fn(r, s - h)) / h**2
    return frr + (P.m - 1) * fr / r + r ** (2 * P.alpha) / 4 * (fss + (P.k - 1) * fs / s)


def points(seed, n=2000, lo=0.05, hi=3.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, n), rng.uniform(lo, hi, n)


@pytest.mark.parametrize("P", [GrushinParams(2, 1, 0.0), GrushinParams(2, 1, 1.0),
                               GrushinParams(1, 3, 0.5), GrushinParams(3, 2, 2.0)])
def test_catalog_partials_cross_check(P):
    r, s = points(1)
    for name, f in catalog(P).items():
        assert partials_mismatch(f, r, s) <= 1e-9, name


def test_literal_constant_residual_is_twelve():
    P = GrushinParams(2, 1, 1.0)
    assert poly_constant(P) == 4 * poly_constant_literal(P) == 32.0
    lit = homogeneous_poly(P, poly_constant_literal(P))
    assert balpha_residual(lit, 1.0, 1.0) == pytest.approx(12.0, abs=1e-12)
    # independent route: finite differences of the bare polynomial
    fd = fd_operator(P, lambda r, s: r**4 - 8.0 * s * s, 1.0, 1.0)
    assert fd == pytest.approx(12.0, abs=1e-5)


@pytest.mark.parametrize("m,k,alpha", TRIPLES)
def test_harmonicity(m, k, alpha):
    P = GrushinParams(m, k, alpha)
    r, s = points(2, lo=1e-3)
    assert np.max(balpha_residual_scaled(fundamental_solution(P), r, s)) <= 1e-8
    assert np.max(balpha_residual_scaled(homogeneous_poly(P), r, s)) <= 1e-12


def test_fundamental_solution_by_differences():
    P = GrushinParams(2, 2, 1.0)
    q = P.q
    fn = lambda r, s: gauge(P, r, s) ** (2 - q)
    for r, s in ((0.7, 0.4), (1.3, 1.1), (2.0, 0.3)):
        val = fd_operator(P, fn, r, s)
        assert abs(val) <= 1e-5 * abs(fn(r, s))


def test_bessel3_solves_helmholtz():
    P = GrushinParams(2, 1, 0.0)
    r, s = points(3)
    for kappa in (1.0, 2.5):
        f = bessel3(P, kappa)
        assert np.max(balpha_residual_scaled(f, r, s)) <= 1e-12
    with pytest.raises(PreconditionError):
        bessel3(GrushinParams(2, 1, 1.0))


def test_kappa_normalize_analytic():
    P = GrushinParams(2, 1, 0.0)
    f = bessel3(P, 2.0)
    g = kappa_normalize(f, 2.0)
    r, s = points(4)
    assert np.max(np.abs(balpha_residual(g, r, s, kappa=1.0))) <= 1e-9
    np.testing.assert_allclose(g.value(r, s), f.value(r / 2, s / 2), rtol=1e-13)
    assert kappa_normalize(f, 1.0) is f
    with pytest.raises(ValueError):
        kappa_normalize(f, 0.0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 7.0])
def test_homogeneity_metadata(lam):
    P = GrushinParams(2, 1, 1.0)
    r, s = points(5, n=200)
    for f in catalog(P).values():
        if f.homogeneity is None:
            continue
        d = dilate(P, lam, r, s)
        np.testing.assert_allclose(f.value(d.r, d.s), lam**f.homogeneity * f.value(r, s),
                                   rtol=1e-10, atol=1e-300, err_msg=f.name)


@pytest.mark.parametrize("m,k,alpha", TRIPLES[::3])
def test_identities(m, k, alpha):
    P = GrushinParams(m, k, alpha)
    r, s = points(6)
    for f in (gaussian(P), exp_gauge(P), homogeneous_poly(P)):
        res = check_identities(f, r, s, ell=1.5, lam=3.0, euler_degree=-1.0)
        for key in ("eikonal", "pairing", "euler", "weighted", "divergence", "dilation"):
            assert res[key] <= 1e-9, (f.name, key)
        assert res["tangential_slack_min"] >= -1e-12
        if "euler_field" in res:
            assert res["euler_field"] <= 1e-9


def test_radial_fields_have_no_tangential_part():
    P = GrushinParams(2, 1, 1.0)
    r, s = points(7)
    res = check_identities(exp_gauge(P), r, s)
    assert abs(res["tangential_slack_min"]) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.2, 5.0), st.floats(-2.0, 3.0))
def test_weighted_and_dilated(r, s, lam, ell):
    P = GrushinParams(1, 2, 0.5)
    f = gaussian(P)
    assert weighted(f, ell).value(r, s) == pytest.approx(gauge(P, r, s) ** ell * f.value(r, s), rel=1e-12)
    d = dilate(P, lam, r, s)
    assert dilated(f, lam).value(r, s) == pytest.approx(f.value(d.r, d.s), rel=1e-12, abs=1e-300)


def test_axis_limits():
    P = GrushinParams(3, 2, 1.0)
    f = homogeneous_poly(P)
    assert balpha_residual(f, np.array([0.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        balpha_residual(power_gauge(P, 2.0), 0.0, 1.0)


def test_zero_field():
    P = GrushinParams(1, 1, 0.0)
    assert np.all(balpha_residual(zero_field(P), [0.5, 1.0], [0.5, 2.0]) == 0)


def test_moser_rescale():
    P = GrushinParams(2, 1, 0.0)
    f = bessel3(P)
    assert moser_rescale(f, 1.0).value(1.2, 0.4) == pytest.approx(f.value(1.2, 0.4), rel=1e-15)
    Q = GrushinParams(2, 1, 1.0)
    g = fundamental_solution(Q)
    ft = moser_rescale(g, 3.0)
    r, s = points(8, n=300, lo=0.2)
    assert np.max(np.abs(rescaled_residual(ft, r, s, kappa=0.0)) / np.abs(ft.value(r, s))) <= 1e-10
    with pytest.raises(PreconditionError):
        moser_rescale(g, 1.0, R0=1.0)
    assert math.isclose(ft.sigma_scale, 3.0**-2)
