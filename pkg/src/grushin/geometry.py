"""Anisotropic gauge geometry in the cylindrical reduction.

All points are represented by ``(r, s) = (|z|, |sigma|)``. Functions accept
scalars or numpy arrays and broadcast.

The gauge-polar chart used throughout is

    r = t cos(phi)**(1/(alpha+1)),   s = t**(alpha+1) sin(phi) / (2 (alpha+1)),

with ``t`` the gauge radius and ``phi`` in ``[0, pi/2]``. Its Jacobian has the
closed form ``t**(alpha+1) cos(phi)**(1/(alpha+1) - 1) / (2 (alpha+1))``,
which is checked numerically once per parameter triple before first use.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import DomainError, PreconditionError

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class GrushinParams:
    """Dimensions ``m = dim z``, ``k = dim sigma`` and the anisotropy ``alpha``."""

    m: int
    k: int
    alpha: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def q(self) -> float:
        """Homogeneous dimension ``m + (alpha+1) k``."""
        return self.m + (self.alpha + 1.0) * self.k

    @property
    def a(self) -> float:
        return self.alpha + 1.0

    @property
    def beta(self) -> float:
        return 1.0 / (self.alpha + 1.0)

    def require_q3(self, what="this operation"):
        if self.q < 3:
            raise PreconditionError(f"Q < 3 (Q = {self.q:g}); {what} requires Q >= 3")

    def as_dict(self):
        return {"m": self.m, "k": self.k, "alpha": self.alpha, "Q": self.q}


class CylPoint(NamedTuple):
    r: float
    s: float


class GaugeCoords(NamedTuple):
    t: float
    phi: float


@dataclass(frozen=True)
class GaugeAnnulus:
    t_inner: float
    t_outer: float

    def __post_init__(self):
        if not 0 < self.t_inner < self.t_outer:
            raise ValueError(
                f"need 0 < t_inner < t_outer, got ({self.t_inner}, {self.t_outer})"
            )


@dataclass(frozen=True)
class SphereRule:
    """Quadrature for ``integral over S_t of h dsigma/|grad rho|``.

    ``cos_phi``/``sin_phi`` are stored separately from ``nodes`` because the
    weight is singular at ``phi = pi/2`` and ``cos(nodes)`` loses relative
    precision there.
    """

    params: GrushinParams
    t: float
    nodes: np.ndarray
    weights: np.ndarray
    cos_phi: np.ndarray
    sin_phi: np.ndarray

    @property
    def r(self):
        return self.t * self.cos_phi ** self.params.beta

    @property
    def s(self):
        a = self.params.a
        return self.t**a * self.sin_phi / (2.0 * a)

    @property
    def psi(self):
        return self.cos_phi ** (2.0 * (1.0 - self.params.beta))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def gauge(params: GrushinParams, r, s):
    """Gauge ``(r**(2a) + 4 a**2 s**2)**(1/(2a))`` with ``a = alpha+1``."""
    a = params.a
    r = np.abs(np.asarray(r, dtype=float))
    # both terms homogeneous of degree one; rescale by the larger to avoid underflow
    v = (2 * a * np.abs(np.asarray(s, dtype=float))) ** (1.0 / a)
    big = np.maximum(r, v)
    safe = np.where(big > 0, big, 1.0)
    return big * ((r / safe) ** (2 * a) + (v / safe) ** (2 * a)) ** (1.0 / (2 * a))


def psi(params: GrushinParams, r, s):
    """Degeneracy weight ``|grad_alpha rho|**2 = r**(2 alpha) / rho**(2 alpha)``."""
    r = np.abs(np.asarray(r, dtype=float))
    s = np.asarray(s, dtype=float)
    rho = gauge(params, r, s)
    if np.any(rho == 0):
        raise DomainError("psi is undefined at the origin")
    if params.alpha == 0:
        return np.ones_like(rho)
    return (r / rho) ** (2 * params.alpha)


def dilate(params: GrushinParams, lam, r, s) -> CylPoint:
    """Anisotropic dilation ``(r, s) -> (lam r, lam**(alpha+1) s)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("dilation factor must be positive")
    return CylPoint(lam * np.asarray(r, dtype=float), lam**params.a * np.asarray(s, dtype=float))


def from_gauge_coords(params: GrushinParams, t, phi) -> CylPoint:
    t = np.asarray(t, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(t <= 0):
        raise DomainError("gauge radius must be positive")
    a = params.a
    c = np.clip(np.sin(HALF_PI - phi), 0.0, None)
    return CylPoint(t * c**params.beta, t**a * np.sin(phi) / (2 * a))


def to_gauge_coords(params: GrushinParams, r, s) -> GaugeCoords:
    r = np.abs(np.asarray(r, dtype=float))
    s = np.abs(np.asarray(s, dtype=float))
    t = gauge(params, r, s)
    if np.any(t == 0):
        raise DomainError("gauge-polar coordinates are undefined at the origin")
    a = params.a
    return GaugeCoords(t, np.arctan2(2 * a * s, r**a))


def jacobian(params: GrushinParams, t, cos_phi):
    """Closed-form ``|d(r,s)/d(t,phi)|`` written in terms of ``cos(phi)``."""
    a = params.a
    return np.asarray(t, dtype=float) ** a * np.asarray(cos_phi, dtype=float) ** (params.beta - 1) / (2 * a)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in ``R**d`` (2 for ``d = 1``)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _measure_constant(params):
    return sphere_area(params.m) * sphere_area(params.k)


def annulus_quadrature_2d(params, t_inner, t_outer, h, n_s=64, epsrel=1e-11):
    """Integrate ``h(r, s)`` over ``{t_inner < rho < t_outer}`` directly in ``(r, s)``.

    Adaptive in ``r``, fixed Gauss-Legendre in ``s`` between the two level
    curves. Independent of the gauge-polar chart; used as an oracle.
    ``t_inner = 0`` gives the full ball.
    """
    a = params.a
    m, k = params.m, params.k
    const = _measure_constant(params)
    x, wx = np.polynomial.legendre.leggauss(n_s)

    def s_level(t, r):
        return math.sqrt(max(t ** (2 * a) - r ** (2 * a), 0.0)) / (2 * a)

    def outer(r):
        lo = s_level(t_inner, r) if t_inner > 0 and r < t_inner else 0.0
        hi = s_level(t_outer, r)
        if hi <= lo:
            return 0.0
        s = 0.5 * (hi - lo) * (x + 1) + lo
        vals = np.asarray(h(np.full_like(s, r), s), dtype=float) * s ** (k - 1)
        return 0.5 * (hi - lo) * float(np.dot(wx, vals)) * r ** (m - 1)

    pieces = [(0.0, t_inner), (t_inner, t_outer)] if t_inner > 0 else [(0.0, t_outer)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(outer, lo, hi, epsabs=0.0, epsrel=epsrel, limit=400)
        total += val
    return const * total


@functools.lru_cache(maxsize=None)
def unit_ball_volume(params: GrushinParams) -> float:
    """Volume of ``{rho < 1}`` by adaptive 2D quadrature in ``(r, s)``."""
    return annulus_quadrature_2d(params, 0.0, 1.0, lambda r, s: np.ones_like(s))


@functools.lru_cache(maxsize=None)
def validate_jacobian(params: GrushinParams) -> float:
    """Check the closed-form Jacobian against a finite-difference determinant.

    Returns the worst relative mismatch; raises ``RuntimeError`` above 1e-6.
    """
    worst = 0.0
    h = 1e-6
    for t in (0.7, 1.0, 2.5):
        for phi in (0.1, 0.6, 1.2, 1.5):
            p_tp = from_gauge_coords(params, t + h, phi)
            p_tm = from_gauge_coords(params, t - h, phi)
            p_pp = from_gauge_coords(params, t, phi + h)
            p_pm = from_gauge_coords(params, t, phi - h)
            r_t = (p_tp.r - p_tm.r) / (2 * h)
            s_t = (p_tp.s - p_tm.s) / (2 * h)
            r_p = (p_pp.r - p_pm.r) / (2 * h)
            s_p = (p_pp.s - p_pm.s) / (2 * h)
            det = abs(r_t * s_p - r_p * s_t)
            closed = jacobian(params, t, math.cos(phi))
            worst = max(worst, abs(det - closed) / closed)
    if worst > 1e-6:
        raise RuntimeError(
            f"closed-form gauge-polar Jacobian disagrees with finite differences "
            f"(relative mismatch {worst:.3e}) for {params}"
        )
    return worst


@functools.lru_cache(maxsize=256)
def _reference_rule(params: GrushinParams, n_phi: int):
    eta, gw = np.polynomial.legendre.leggauss(n_phi)
    eta = 0.5 * (eta + 1.0)
    gw = 0.5 * gw
    beta = params.beta
    one_minus = 1.0 - eta
    # phi = pi/2 - eps with eps = (pi/2)(1-eta)**(1/beta); makes the weight smooth at pi/2
    eps = HALF_PI * one_minus ** (1.0 / beta)
    dphi = HALF_PI / beta * one_minus ** (1.0 / beta - 1.0)
    cos_phi = np.sin(eps)
    sin_phi = np.cos(eps)
    return HALF_PI - eps, gw * dphi, cos_phi, sin_phi


def sphere_rule(params: GrushinParams, t: float, n_phi: int = 48) -> SphereRule:
    """Quadrature nodes and weights on the gauge sphere ``S_t``.

    Weights realize ``omega_{m-1} omega_{k-1} r**(m-1) s**(k-1) J(t, phi) dphi``.
    """
    if not t > 0:
        raise ValueError("sphere radius must be positive")
    if n_phi < 4:
        raise ValueError("n_phi must be at least 4")
    validate_jacobian(params)
    nodes, base, cos_phi, sin_phi = _reference_rule(params, int(n_phi))
    r = t * cos_phi**params.beta
    s = t**params.a * sin_phi / (2 * params.a)
    mu = _measure_constant(params) * r ** (params.m - 1) * s ** (params.k - 1) * jacobian(params, t, cos_phi)
    return SphereRule(params, float(t), nodes, base * mu, cos_phi, sin_phi)


def _simpson_weights(n):
    """Composite Simpson weights on ``n + 1`` equispaced points (unit spacing)."""
    if n < 2:
        raise ValueError("need at least two intervals")
    w = np.ones(n + 1)
    if n % 2 == 0:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w / 3.0
    # odd count: Simpson on the first n-3 intervals, 3/8 rule on the last three
    w[:] = 0.0
    if n > 3:
        w[: n - 2] = _simpson_weights(n - 3)
    w[n - 3 : n + 1] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def t_quadrature(t_inner, t_outer, n_t):
    """Composite Simpson nodes and weights on ``[t_inner, t_outer]``."""
    nodes = np.linspace(t_inner, t_outer, n_t + 1)
    return nodes, _simpson_weights(n_t) * (t_outer - t_inner) / n_t


def ring_integral(params, annulus: GaugeAnnulus, h: Callable, n_t=64, n_phi=48) -> float:
    """``integral over {t_inner < rho < t_outer} of h`` via the coarea decomposition."""
    t_nodes, t_w = t_quadrature(annulus.t_inner, annulus.t_outer, n_t)
    total = 0.0
    for t, wt in zip(t_nodes, t_w):
        rule = sphere_rule(params, t, n_phi)
        total += wt * rule.integrate(h(rule.r, rule.s))
    return float(total)
