"""Independent reference computations used to cross-check the main routes.

* Thin-shell oracle: sphere functionals recovered from 2D ``(r, s)`` quadrature
  over a thin ring, with every derivative taken in ``(r, s)``. It shares no
  code with the gauge-polar sphere rule or the grid difference quotients.
* Radial oracles for ``sin(kappa rho)/(kappa rho)`` at ``(m, k, alpha) = (2, 1, 0)``,
  where every sphere integral reduces to a 1D expression.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.interpolate import RectBivariateSpline

from .fields import AnalyticField
from .geometry import HALF_PI, GrushinParams, annulus_quadrature_2d, gauge
from .grid import GridField


def _rs_partials_analytic(f: AnalyticField):
    def ev(r, s):
        j = f.jet(r, s)
        return j.v, j.r, j.s
    return ev


def _rs_partials_grid(field: GridField):
    """Bicubic spline in ``(t, phi)`` mapped to ``(f, f_r, f_s)`` by the chain rule."""
    g = field.grid
    P = g.params
    a = P.a
    phi = g.phi_nodes
    c = g.phi_complement
    # two reflected ghost columns on each side keep the spline even at the edges
    x = np.concatenate([-phi[1::-1], phi, HALF_PI + c[:-3:-1]])
    v = np.concatenate([field.values[:, 1::-1], field.values, field.values[:, :-3:-1]], axis=1)
    spl = RectBivariateSpline(g.t_nodes, x, v, kx=3, ky=3)

    def ev(r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        t = gauge(P, r, s)
        X = r**a
        Y = 2 * a * s
        ph = np.arctan2(Y, X)
        val = spl.ev(t, ph)
        ft = spl.ev(t, ph, dx=1)
        fp = spl.ev(t, ph, dy=1)
        t2a = t ** (2 * a)
        t_r = (r / t) ** (2 * a - 1)
        t_s = 4 * a * s / t ** (2 * a - 1)
        p_r = -Y * a * r ** (a - 1) / t2a
        p_s = 2 * a * X / t2a
        return val, ft * t_r + fp * p_r, ft * t_s + fp * p_s

    return ev


def _partials(field):
    if isinstance(field, GridField):
        return _rs_partials_grid(field)
    return _rs_partials_analytic(field)


def _F_density(params: GrushinParams, ev, ell):
    a = params.a
    q = params.q
    al = params.alpha

    def h(r, s):
        f, fr, fs = ev(r, s)
        rho = gauge(params, r, s)
        # partials of rho from its definition
        rho_r = r ** (2 * a - 1) / rho ** (2 * a - 1)
        rho_s = 4 * a * s / rho ** (2 * a - 1)
        psi = (r / rho) ** (2 * al) if al > 0 else np.ones_like(rho)
        w2 = r ** (2 * al) / 4
        Zf = r * fr + a * s * fs
        u = rho**ell * f
        Zu = ell * u + rho**ell * Zf
        pair = fr * rho_r + w2 * fs * rho_s
        grad_f = fr**2 + w2 * fs**2
        grad_u = (rho ** (2 * ell) * grad_f + 2 * ell * rho ** (2 * ell - 1) * f * pair
                  + ell**2 * rho ** (2 * ell - 2) * f**2 * psi)
        return (2 * (Zu / rho) ** 2 * psi - grad_u + u**2 - u**2 * psi / rho
                + ell * (ell - q + 2) * u**2 * psi / rho**2)

    return h


def thin_shell_F(field, ell, t, delta=None, epsrel=1e-9) -> float:
    """``F(ell, t)`` as a shell average ``(1/2d) int_{t-d < rho < t+d}``, extrapolated in ``d``.

    Two shell widths ``d`` and ``d/2`` remove the ``O(d**2)`` bias.
    """
    P = field.params
    ev = _partials(field)
    h = _F_density(P, ev, ell)
    d = 0.05 * t if delta is None else delta

    def shell(dd):
        return annulus_quadrature_2d(P, t - dd, t + dd, h, epsrel=epsrel) / (2 * dd)

    A1 = shell(d)
    A2 = shell(d / 2)
    return (4 * A2 - A1) / 3


# ----------------------------------------------------------------------------
# radial oracles for sin(rho)/rho, kappa = 1, Q = 3


def _sphere_area(t):
    return 2 * math.pi * t * t


def bessel3_F(ell, t) -> float:
    u = t ** (ell - 1) * math.sin(t)
    du = (ell - 1) * t ** (ell - 2) * math.sin(t) + t ** (ell - 1) * math.cos(t)
    return _sphere_area(t) * (du**2 + u**2 - u**2 / t + ell * (ell - 1) * u**2 / t**2)


def bessel3_G(t) -> float:
    return _sphere_area(t)


def bessel3_surface(t) -> float:
    return _sphere_area(t) * (math.sin(t) / t) ** 2


def bessel3_flux(t) -> float:
    # w = sin t, Z(w**2) = 2 t sin t cos t
    return _sphere_area(t) * 2 * t * math.sin(t) * math.cos(t)


def bessel3_ring_mass(R) -> float:
    """``int_R^{2R} 2 pi sin(t)**2 dt`` in closed form."""
    def prim(t):
        return t / 2 - math.sin(2 * t) / 4
    return 2 * math.pi * (prim(2 * R) - prim(R))


def _quad_by_periods(fn, lo, hi):
    """Adaptive quadrature split at multiples of pi so each piece is smooth."""
    cuts = [k * math.pi for k in range(math.floor(lo / math.pi) + 1, math.ceil(hi / math.pi))]
    pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(fn, a, b, epsrel=1e-12, limit=200)
        total += val
    return total


def bessel3_energy_ratio(R) -> float:
    def grad2(t):
        d = math.cos(t) / t - math.sin(t) / t**2
        return _sphere_area(t) * d * d
    return _quad_by_periods(grad2, 1.25 * R, 1.75 * R) / bessel3_ring_mass(R)


def bessel3_lp_increment(p, R) -> float:
    """``int_{R < rho < 2R} |sin(rho)/rho|**p``."""
    return _quad_by_periods(lambda t: _sphere_area(t) * abs(math.sin(t) / t) ** p, R, 2 * R)


def lp3_increment_limit() -> float:
    """Large-``R`` limit of the ``p = 3`` increment: ``2 pi (4/(3 pi)) ln 2``."""
    mean_abs_sin3, _ = integrate.quad(lambda x: abs(math.sin(x)) ** 3, 0, math.pi, epsrel=1e-14)
    mean_abs_sin3 /= math.pi
    return 2 * math.pi * mean_abs_sin3 * math.log(2)
