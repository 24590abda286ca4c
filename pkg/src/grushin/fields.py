"""Analytic reference fields with exact partials, and pointwise identity checks.

Every field is cylindrically symmetric, ``f(z, sigma) = g(|z|, |sigma|)``, and
carries hand-coded partials up to order two in ``(r, s)``. The same field also
exposes a plain expression that accepts :class:`~grushin.dual.DualScalar`
arguments, so the hand-coded partials can be cross-checked by forward mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import dual
from .errors import DomainError, PreconditionError
from .geometry import GrushinParams, gauge, psi


@dataclass(frozen=True)
class Jet:
    """Value and partials ``(v, g_r, g_s, g_rr, g_ss, g_rs)`` at a point set."""

    v: np.ndarray
    r: np.ndarray
    s: np.ndarray
    rr: np.ndarray
    ss: np.ndarray
    rs: np.ndarray

    def as_tuple(self):
        return (self.v, self.r, self.s, self.rr, self.ss, self.rs)


def _zeros_like(r, s):
    return np.zeros(np.broadcast(np.asarray(r), np.asarray(s)).shape)


def jet_product(A: Jet, B: Jet) -> Jet:
    return Jet(
        A.v * B.v,
        A.r * B.v + A.v * B.r,
        A.s * B.v + A.v * B.s,
        A.rr * B.v + 2 * A.r * B.r + A.v * B.rr,
        A.ss * B.v + 2 * A.s * B.s + A.v * B.ss,
        A.rs * B.v + A.r * B.s + A.s * B.r + A.v * B.rs,
    )


def gauge_jet(params: GrushinParams, r, s) -> Jet:
    a = params.a
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = gauge(params, r, s)
    p1 = rho ** (1 - 2 * a)
    p2 = rho ** (1 - 4 * a)
    return Jet(
        rho,
        r ** (2 * a - 1) * p1,
        4 * a * s * p1,
        (2 * a - 1) * r ** (2 * a - 2) * 4 * a * a * s * s * p2,
        4 * a * p1 * (1 - (2 * a - 1) * 4 * a * s * s * rho ** (-2 * a)),
        -(2 * a - 1) * 4 * a * s * r ** (2 * a - 1) * p2,
    )


def radial_jet(params, r, s, F0, F1, F2) -> Jet:
    """Jet of ``F(rho)`` given callables for ``F, F', F''``."""
    g = gauge_jet(params, r, s)
    t = g.v
    f1, f2 = F1(t), F2(t)
    return Jet(
        F0(t),
        f1 * g.r,
        f1 * g.s,
        f2 * g.r**2 + f1 * g.rr,
        f2 * g.s**2 + f1 * g.ss,
        f2 * g.r * g.s + f1 * g.rs,
    )


def gauge_expr(params, r, s):
    a = params.a
    return (r ** (2 * a) + 4 * a * a * s * s) ** (1.0 / (2 * a))


@dataclass(frozen=True)
class AnalyticField:
    """A cylindrically symmetric field with exact derivatives.

    ``kappa`` is the Helmholtz frequency the field solves (0 for harmonic
    fields, ``None`` when it is not a solution). ``homogeneity`` is the degree
    under the anisotropic dilations when the field is homogeneous.
    """

    name: str
    params: GrushinParams
    jet_fn: Callable[..., Jet] = dc_field(repr=False)
    expr: Callable = dc_field(repr=False)
    kappa: Optional[float] = None
    homogeneity: Optional[float] = None
    domain: str = "r > 0, s >= 0"
    axis_limits: bool = True
    # multiplies the sigma part of the operator this field is meant to solve
    sigma_scale: float = 1.0

    def value(self, r, s):
        return self.jet_fn(r, s).v

    def jet(self, r, s) -> Jet:
        return self.jet_fn(np.asarray(r, dtype=float), np.asarray(s, dtype=float))


# ----------------------------------------------------------------------------
# catalog


def constant_field(params, c=1.0) -> AnalyticField:
    def jet(r, s):
        z = _zeros_like(r, s)
        return Jet(z + c, z, z, z, z, z)

    return AnalyticField("constant", params, jet, lambda r, s: c + 0 * r, kappa=0.0,
                         homogeneity=0.0 if c != 0 else None, domain="everywhere")


def zero_field(params) -> AnalyticField:
    f = constant_field(params, 0.0)
    return AnalyticField("zero", params, f.jet_fn, f.expr, kappa=0.0, homogeneity=None,
                         domain="everywhere")


def power_gauge(params, ell) -> AnalyticField:
    """``rho**ell``."""
    ell = float(ell)
    jet = lambda r, s: radial_jet(  # noqa: E731
        params, r, s,
        lambda t: t**ell,
        lambda t: ell * t ** (ell - 1),
        lambda t: ell * (ell - 1) * t ** (ell - 2),
    )
    return AnalyticField(f"power_gauge[{ell:g}]", params, jet,
                         lambda r, s: gauge_expr(params, r, s) ** ell,
                         kappa=None, homogeneity=ell, domain="rho > 0", axis_limits=False)


def fundamental_solution(params) -> AnalyticField:
    """``rho**(2-Q)`` (the normalization constant is omitted)."""
    base = power_gauge(params, 2 - params.q)
    return AnalyticField("fundamental_solution", params, base.jet_fn, base.expr, kappa=0.0,
                         homogeneity=2 - params.q, domain="rho > 0", axis_limits=False)


def exp_gauge(params) -> AnalyticField:
    """``exp(-rho)``; radial in the gauge."""
    jet = lambda r, s: radial_jet(  # noqa: E731
        params, r, s, lambda t: np.exp(-t), lambda t: -np.exp(-t), lambda t: np.exp(-t))
    return AnalyticField("exp_gauge", params, jet,
                         lambda r, s: dual.exp(-gauge_expr(params, r, s)),
                         domain="rho > 0", axis_limits=False)


def poly_constant(params) -> float:
    """``4 (alpha+1)(2 alpha+m)/k``: makes ``r**(2a) - A s**2`` harmonic."""
    return 4 * params.a * (2 * params.alpha + params.m) / params.k


def poly_constant_literal(params) -> float:
    """``(alpha+1)(2 alpha+m)/k``, the constant without the factor 4."""
    return params.a * (2 * params.alpha + params.m) / params.k


def homogeneous_poly(params, A=None) -> AnalyticField:
    """``r**(2(alpha+1)) - A s**2``; harmonic only for ``A = poly_constant``."""
    a = params.a
    harmonic = A is None
    A = poly_constant(params) if A is None else float(A)

    def jet(r, s):
        z = _zeros_like(r, s)
        return Jet(
            r ** (2 * a) - A * s * s,
            2 * a * r ** (2 * a - 1) + z,
            -2 * A * s + z,
            2 * a * (2 * a - 1) * r ** (2 * a - 2) + z,
            z - 2 * A,
            z,
        )

    return AnalyticField("homogeneous_poly" if harmonic else f"homogeneous_poly[A={A:g}]",
                         params, jet, lambda r, s: r ** (2 * a) - A * s * s,
                         kappa=0.0 if harmonic else None, homogeneity=2 * a, domain="everywhere",
                         axis_limits=float(2 * a).is_integer())


def _sinc_derivs(kappa):
    def F0(t):
        x = kappa * t
        return np.sin(x) / x

    def F1(t):
        x = kappa * t
        return kappa * (x * np.cos(x) - np.sin(x)) / x**2

    def F2(t):
        x = kappa * t
        j0 = np.sin(x) / x
        j0p = (x * np.cos(x) - np.sin(x)) / x**2
        return kappa**2 * (-j0 - 2 * j0p / x)

    return F0, F1, F2


def bessel3(params, kappa=1.0) -> AnalyticField:
    """``sin(kappa rho)/(kappa rho)`` for ``m = 2, k = 1, alpha = 0``.

    With ``alpha = 0`` the operator is the Laplacian in ``(z, 2 sigma)`` and the
    gauge is the Euclidean norm there, so this is the radial 3D Helmholtz
    solution ``J_{1/2}``-profile.
    """
    if (params.m, params.k, params.alpha) != (2, 1, 0.0):
        raise PreconditionError("bessel3 requires m = 2, k = 1, alpha = 0")
    kappa = float(kappa)
    F0, F1, F2 = _sinc_derivs(kappa)

    def expr(r, s):
        x = kappa * gauge_expr(params, r, s)
        return dual.sin(x) / x

    return AnalyticField("bessel3", params, lambda r, s: radial_jet(params, r, s, F0, F1, F2),
                         expr, kappa=kappa, domain="rho > 0")


def gaussian(params) -> AnalyticField:
    """``exp(-(r**2 + s**2)/2)``."""

    def jet(r, s):
        e = np.exp(-(r * r + s * s) / 2)
        return Jet(e, -r * e, -s * e, (r * r - 1) * e, (s * s - 1) * e, r * s * e)

    return AnalyticField("gaussian", params, jet,
                         lambda r, s: dual.exp(-(r * r + s * s) / 2), domain="everywhere")


def weighted(f: AnalyticField, ell) -> AnalyticField:
    """``rho**ell * f``."""
    ell = float(ell)
    p = power_gauge(f.params, ell)
    hom = None if f.homogeneity is None else f.homogeneity + ell
    return AnalyticField(f"weighted[{f.name},{ell:g}]", f.params,
                         lambda r, s: jet_product(p.jet_fn(r, s), f.jet_fn(r, s)),
                         lambda r, s: p.expr(r, s) * f.expr(r, s),
                         kappa=None, homogeneity=hom, domain="rho > 0", axis_limits=False)


def dilated(f: AnalyticField, lam) -> AnalyticField:
    """``f o delta_lam``."""
    a = f.params.a
    lam = float(lam)
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    la = lam**a

    def jet(r, s):
        j = f.jet_fn(lam * r, la * s)
        return Jet(j.v, lam * j.r, la * j.s, lam**2 * j.rr, la**2 * j.ss, lam * la * j.rs)

    return AnalyticField(f"dilated[{f.name},{lam:g}]", f.params, jet,
                         lambda r, s: f.expr(lam * r, la * s),
                         kappa=None if f.kappa is None else f.kappa * lam,
                         homogeneity=f.homogeneity, domain=f.domain, axis_limits=f.axis_limits)


def catalog(params: GrushinParams, kappa=1.0, ell=2.0) -> dict:
    """Reference fields available for ``params``, keyed by name."""
    out = {
        "zero": zero_field(params),
        "constant": constant_field(params, 1.0),
        "fundamental_solution": fundamental_solution(params),
        "power_gauge": power_gauge(params, ell),
        "homogeneous_poly": homogeneous_poly(params),
        "homogeneous_poly_literal": homogeneous_poly(params, poly_constant_literal(params)),
        "gaussian": gaussian(params),
        "exp_gauge": exp_gauge(params),
        "weighted_gaussian": weighted(gaussian(params), ell),
    }
    if (params.m, params.k, params.alpha) == (2, 1, 0.0):
        out["bessel3"] = bessel3(params, kappa)
    return out


def dual_partials(f: AnalyticField, r, s):
    """Partials of ``f`` by forward-mode differentiation of its expression."""
    return dual.partials(f.expr, r, s)


def partials_mismatch(f: AnalyticField, r, s) -> float:
    """Worst relative disagreement between hand-coded and forward-mode partials."""
    hand = f.jet(r, s).as_tuple()
    auto = dual_partials(f, r, s)
    # judge each component against the largest component at that point, so
    # identically-zero partials are not compared with themselves
    scale = np.maximum(np.max(np.abs(np.stack(np.broadcast_arrays(*hand))), axis=0), 1e-300)
    worst = 0.0
    for h, d in zip(hand, auto):
        worst = max(worst, float(np.max(np.abs(h - d) / scale)))
    return worst


# ----------------------------------------------------------------------------
# operator and identities


def _balpha_terms(params, j: Jet, r, s, sigma_scale=1.0):
    """Split ``B_alpha g`` into its four additive terms, with axis limits."""
    m, k, al = params.m, params.k, params.alpha
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tr = np.where(r == 0, (m - 1) * j.rr, (m - 1) * j.r / r)
        ts = np.where(s == 0, (k - 1) * j.ss, (k - 1) * j.s / s)
    c = sigma_scale * r ** (2 * al) / 4
    return j.rr, tr, c * j.ss, c * ts


def balpha(params, j: Jet, r, s, sigma_scale=1.0):
    return sum(_balpha_terms(params, j, r, s, sigma_scale))


def _check_axes(f, r, s):
    if not f.axis_limits and (np.any(np.asarray(r) == 0) or np.any(np.asarray(s) == 0)):
        raise DomainError(f"{f.name} has no axis limit data; evaluate off r = 0 and s = 0")


def balpha_residual(f: AnalyticField, r, s, kappa=None):
    """``B_alpha f + kappa**2 f`` using the exact partials (``kappa`` defaults to ``f.kappa``)."""
    _check_axes(f, r, s)
    kappa = (f.kappa or 0.0) if kappa is None else kappa
    j = f.jet(r, s)
    return balpha(f.params, j, r, s, f.sigma_scale) + kappa**2 * j.v


def balpha_residual_scaled(f: AnalyticField, r, s, kappa=None):
    """Residual divided by the sum of magnitudes of its terms."""
    _check_axes(f, r, s)
    kappa = (f.kappa or 0.0) if kappa is None else kappa
    j = f.jet(r, s)
    terms = _balpha_terms(f.params, j, r, s, f.sigma_scale) + (kappa**2 * j.v,)
    scale = sum(np.abs(t) for t in terms)
    return np.abs(sum(terms)) / np.maximum(scale, 1e-300)


def dilation_generator(params, j: Jet, r, s):
    """``Z g = r g_r + (alpha+1) s g_s``."""
    return r * j.r + params.a * s * j.s


def alpha_grad_sq(params, j: Jet, r):
    return j.r**2 + r ** (2 * params.alpha) / 4 * j.s**2


def _rel(lhs, rhs, scale):
    return float(np.max(np.abs(lhs - rhs) / np.maximum(scale, 1e-300)))


def check_identities(f: AnalyticField, r, s, ell=2.0, lam=2.0, euler_degree=2.0) -> dict:
    """Pointwise checks of the gauge identities on ``f`` at the points ``(r, s)``.

    Returns the maximum scaled residual of each identity, plus the minimum
    relative slack of the tangential inequality (which must be >= 0 up to
    rounding). Failures are reported, not raised.
    """
    P = f.params
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    rho_j = gauge_jet(P, r, s)
    rho = rho_j.v
    ps = psi(P, r, s)
    w = r ** (2 * P.alpha) / 4

    out = {}

    # eikonal, with the gauge differentiated by forward mode
    _, g_r, g_s, *_ = dual.partials(lambda x, y: gauge_expr(P, x, y), r, s)
    eik = g_r**2 + w * g_s**2
    out["eikonal"] = _rel(eik, ps, g_r**2 + w * g_s**2 + ps)

    j = f.jet(r, s)
    Zf = dilation_generator(P, j, r, s)
    pair_terms = (j.r * rho_j.r, w * j.s * rho_j.s)
    out["pairing"] = _rel(sum(pair_terms), Zf / rho * ps,
                          np.abs(pair_terms[0]) + np.abs(pair_terms[1]) + np.abs(Zf / rho * ps))

    grad2 = alpha_grad_sq(P, j, r)
    normal2 = (Zf / rho) ** 2 * ps
    slack = (grad2 - normal2) / np.maximum(grad2, 1e-300)
    out["tangential_slack_min"] = float(np.min(slack))

    pk = power_gauge(P, euler_degree).jet(r, s)
    out["euler"] = _rel(dilation_generator(P, pk, r, s), euler_degree * pk.v,
                        np.abs(r * pk.r) + np.abs(P.a * s * pk.s) + np.abs(euler_degree * pk.v))
    if f.homogeneity is not None:
        out["euler_field"] = _rel(Zf, f.homogeneity * j.v,
                                  np.abs(r * j.r) + np.abs(P.a * s * j.s) + np.abs(f.homogeneity * j.v))

    u = weighted(f, ell).jet(r, s)
    Zu = dilation_generator(P, u, r, s)
    lhs = (Zu / rho) ** 2 * ps - alpha_grad_sq(P, u, r)
    rhs = rho ** (2 * ell) * (normal2 - grad2)
    out["weighted"] = _rel(lhs, rhs, (Zu / rho) ** 2 * ps + alpha_grad_sq(P, u, r))

    pq = power_gauge(P, -P.q).jet(r, s)
    out["divergence"] = _rel(dilation_generator(P, pq, r, s), -P.q * pq.v,
                             np.abs(r * pq.r) + np.abs(P.a * s * pq.s) + np.abs(P.q * pq.v))

    g = dilated(f, lam)
    lhs_terms = _balpha_terms(P, g.jet(r, s), r, s)
    rd, sd = lam * r, lam**P.a * s
    rhs_terms = _balpha_terms(P, f.jet(rd, sd), rd, sd)
    out["dilation"] = _rel(sum(lhs_terms), lam**2 * sum(rhs_terms),
                           sum(np.abs(x) for x in lhs_terms) + lam**2 * sum(np.abs(x) for x in rhs_terms))
    return out


# ----------------------------------------------------------------------------
# rescaling used in the sup-versus-L^p bound


def moser_rescale(f: AnalyticField, z0_r, s0=0.0, R0=None) -> AnalyticField:
    """``f~(r, s) = f(r, s0 + z0_r**alpha * s)``.

    ``s`` is the (signed) sigma coordinate when ``k = 1``; for ``k > 1`` only
    ``s0 = 0`` keeps the result cylindrically symmetric. Solves the rescaled
    equation checked by :func:`rescaled_residual` whenever ``f`` solves the
    ``kappa = 1`` equation.
    """
    P = f.params
    if R0 is not None and z0_r < 2 * R0:
        raise PreconditionError("rescaling needs |z0| >= 2 R0")
    if z0_r <= 0:
        raise ValueError("|z0| must be positive")
    if s0 != 0 and P.k != 1:
        raise PreconditionError("a sigma translation breaks cylindrical symmetry unless k = 1")
    c = float(z0_r) ** P.alpha

    def jet(r, s):
        j = f.jet_fn(r, s0 + c * s)
        return Jet(j.v, j.r, c * j.s, j.rr, c * c * j.ss, c * j.rs)

    return AnalyticField(f"rescaled[{f.name}]", P, jet, lambda r, s: f.expr(r, s0 + c * s),
                         kappa=f.kappa, homogeneity=None, domain=f.domain,
                         axis_limits=f.axis_limits, sigma_scale=float(z0_r) ** (-2 * P.alpha))


def rescaled_residual(ft: AnalyticField, r, s, kappa=1.0):
    """``Delta_z f~ + r**(2 alpha)/(4 |z0|**(2 alpha)) Delta_sigma f~ + kappa**2 f~``."""
    j = ft.jet(r, s)
    return balpha(ft.params, j, r, s, sigma_scale=ft.sigma_scale) + kappa**2 * j.v
