"""Sphere functionals, the Rellich identity and ring estimates.

Every quantity here is built from integrals over gauge spheres ``S_t`` with
the measure ``dsigma/|grad rho|``. On a sphere the three pointwise ingredients
are

* ``f`` itself,
* ``f_t = Z f / rho`` (the dilation derivative, ``d/dt`` in gauge-polar form),
* ``tau2 = |grad_alpha f|**2 - psi f_t**2``, the tangential part of the
  gradient, which is nonnegative.

Both analytic fields and grid fields reduce to these arrays, so the formulas
below are written once. Ring integrals are ``t``-integrals of sphere integrals
(coarea).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, PreconditionError
from .fields import AnalyticField, alpha_grad_sq, dilated, dilation_generator
from .geometry import GaugeAnnulus, GrushinParams, sphere_rule, t_quadrature
from .grid import Grid2D, GridField

Field = Union[AnalyticField, GridField]

ANALYTIC_N_PHI = 64


@dataclass(frozen=True)
class SphereData:
    """Samples of ``f``, ``f_t`` and ``tau2`` on ``S_t`` with quadrature weights."""

    t: float
    weights: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    ft: np.ndarray
    tau2: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @property
    def grad_sq(self):
        return self.psi * self.ft**2 + self.tau2


def sphere_data(field: Field, t: float, n_phi: int = ANALYTIC_N_PHI) -> SphereData:
    """Reduce ``field`` to its sphere samples at gauge radius ``t``.

    Grid fields must be evaluated on one of their ``t`` circles; ``n_phi`` is
    ignored for them.
    """
    if isinstance(field, GridField):
        g = field.grid
        i = g.row_index(t)
        cache = field.meta.setdefault("_derivs", {})
        if "d_t" not in cache:
            cache["d_t"] = field.d_t()
            cache["d_phi"] = field.d_phi()
        t = float(g.t_nodes[i])
        psi = g.psi
        tau2 = field.params.a**2 * psi * cache["d_phi"][i] ** 2 / t**2
        return SphereData(t, g.sphere_weights(t), psi, field.values[i], cache["d_t"][i], tau2)
    if t <= 0:
        raise DomainError("sphere radius must be positive")
    rule = sphere_rule(field.params, t, n_phi)
    r, s = rule.r, rule.s
    j = field.jet(r, s)
    ft = dilation_generator(field.params, j, r, s) / t
    psi = rule.psi
    tau2 = alpha_grad_sq(field.params, j, r) - psi * ft**2
    return SphereData(float(t), rule.weights, psi, j.v, ft, tau2)


def _weighted(sd: SphereData, ell):
    """``u = t**ell f`` and ``u_t`` on the sphere."""
    t = sd.t
    u = t**ell * sd.f
    ut = ell * t ** (ell - 1) * sd.f + t**ell * sd.ft
    return u, ut


def _field_domain(field: Field):
    if isinstance(field, GridField):
        return float(field.grid.t_nodes[0]), float(field.grid.t_nodes[-1])
    return 0.0, math.inf


def _check_interval(field: Field, lo, hi):
    a, b = _field_domain(field)
    tol = 1e-10 * max(1.0, abs(b) if math.isfinite(b) else 1.0)
    if lo < a - tol or hi > b + tol or not lo < hi:
        raise DomainError(f"interval ({lo}, {hi}) is outside the field domain ({a}, {b})")


def _auto_nt(lo, hi):
    n = max(64, int(math.ceil(12 * (hi - lo))))
    return n + n % 2


def t_integral(field: Field, lo, hi, per_sphere: Callable[[SphereData], float],
               n_t: Optional[int] = None, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_lo^hi per_sphere(S_t) dt``; ``per_sphere`` may return a vector.

    Analytic fields use composite Simpson in ``t``; grid fields integrate a
    cubic spline through the per-circle values.
    """
    _check_interval(field, lo, hi)
    if isinstance(field, GridField):
        t = field.grid.t_nodes
        vals = np.array([per_sphere(sphere_data(field, ti)) for ti in t])
        out = CubicSpline(t, vals).integrate(lo, hi)
    else:
        nodes, w = t_quadrature(lo, hi, n_t or _auto_nt(lo, hi))
        out = sum(wi * np.asarray(per_sphere(sphere_data(field, ti, n_phi)))
                  for ti, wi in zip(nodes, w))
    return out if np.ndim(out) else float(out)


# ----------------------------------------------------------------------------
# sphere functionals


def _F_scaled(sd: SphereData, ell, q) -> float:
    """``F(ell, t) / t**(2 ell)``; every term of ``F`` carries that factor."""
    t, f, psi = sd.t, sd.f, sd.psi
    # 2 psi u_t**2 - |grad u|**2 collapses to psi u_t**2 - t**(2 ell) tau2
    integrand = (psi * (ell * f / t + sd.ft) ** 2 - sd.tau2 + f**2 - f**2 * psi / t
                 + ell * (ell - q + 2) * f**2 * psi / t**2)
    return sd.integrate(integrand)


def F_functional(field: Field, ell, t, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``F(ell, t)`` for ``u = rho**ell f``."""
    sd = sphere_data(field, t, n_phi)
    return sd.t ** (2 * ell) * _F_scaled(sd, ell, field.params.q)


def G_functional(field: Field, t, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``G(w, t)`` for ``w = rho**((Q-1)/2) f``; needs ``Q >= 3``."""
    P = field.params
    P.require_q3("G(w, t)")
    sd = sphere_data(field, t, n_phi)
    q = P.q
    ell = (q - 1) / 2
    w, wt = _weighted(sd, ell)
    t = sd.t
    integrand = (sd.psi * wt**2 - t ** (2 * ell) * sd.tau2 + w**2
                 - (q - 1) * (q - 3) / 4 * w**2 * sd.psi / t**2)
    return sd.integrate(integrand)


def flux_Zw2(field: Field, t, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_{S_t} Z(w**2) psi`` with ``w = rho**((Q-1)/2) f``."""
    sd = sphere_data(field, t, n_phi)
    ell = (field.params.q - 1) / 2
    w, wt = _weighted(sd, ell)
    return sd.integrate(2 * w * sd.t * wt * sd.psi)


def surface_positivity(field: Field, t, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_{S_t} f**2 psi``."""
    sd = sphere_data(field, t, n_phi)
    return sd.integrate(sd.f**2 * sd.psi)


def C_threshold(field: Field, r0, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``r0**2 [int |grad_alpha f|**2 - int (Zf/rho)**2 psi] / int f**2 psi + r0`` on ``S_r0``."""
    sd = sphere_data(field, r0, n_phi)
    den = sd.integrate(sd.f**2 * sd.psi)
    scale = sd.integrate(sd.f**2)
    if not den > 1e-14 * max(scale, 1e-300):
        raise PreconditionError(
            f"int f^2 psi vanishes on S_{r0}; pick a positivity radius where it is > 0")
    return sd.t**2 * sd.integrate(sd.tau2) / den + sd.t


def fg_flux_consistency(field: Field, ell0, t, n_reading: Optional[float] = None,
                        n_phi: int = ANALYTIC_N_PHI) -> dict:
    """Compare ``F(ell0, t)`` with its expansion through ``G``, the flux and ``int f**2 psi``.

    ``n_reading`` is the value used for the dimension in ``ell0 (ell0 - n + 2)``;
    the default is ``Q``. Returns the residual, a scale and each term.
    """
    P = field.params
    P.require_q3("the F/G/flux expansion")
    q = P.q
    n = q if n_reading is None else float(n_reading)
    ell1 = (2 * ell0 - q + 1) / 2
    F = F_functional(field, ell0, t, n_phi)
    G = G_functional(field, t, n_phi)
    flux = flux_Zw2(field, t, n_phi)
    mass = surface_positivity(field, t, n_phi)
    c = ell0 * (ell0 - n + 2) + ell1**2 + (q - 1) * (q - 3) / 4
    terms = {
        "F": F,
        "G_term": t ** (2 * ell1) * G,
        "flux_term": ell1 * t ** (2 * (ell1 - 1)) * flux,
        "mass_term": -(t ** (2 * ell0 - 1)) * (1 - c / t) * mass,
    }
    residual = F - (terms["G_term"] + terms["flux_term"] + terms["mass_term"])
    scale = sum(abs(v) for v in terms.values())
    return {"residual": residual, "scale": scale, "relative": abs(residual) / max(scale, 1e-300),
            "terms": terms, "n": n}


# ----------------------------------------------------------------------------
# traces and monotonicity


@dataclass
class FunctionalTrace:
    kind: str
    params: GrushinParams
    t: np.ndarray
    values: np.ndarray
    ell_or_p: Optional[float] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trace t values must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace has non-finite values")

    def to_csv(self) -> str:
        lab = "" if self.ell_or_p is None else repr(float(self.ell_or_p))
        lines = ["kind,t,value,ell_or_p"]
        lines += [f"{self.kind},{t!r},{v!r},{lab}" for t, v in zip(self.t.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


def trace(field: Field, kind: str, ts: Sequence[float], ell=None, n_phi: int = ANALYTIC_N_PHI):
    """Sample ``F``, ``G``, ``flux`` or ``surface`` along ``ts``."""
    fns = {
        "F": lambda t: F_functional(field, ell, t, n_phi),
        "G": lambda t: G_functional(field, t, n_phi),
        "flux": lambda t: flux_Zw2(field, t, n_phi),
        "surface": lambda t: surface_positivity(field, t, n_phi),
    }
    if kind not in fns:
        raise ValueError(f"unknown trace kind {kind!r}")
    if kind == "F" and ell is None:
        raise ValueError("F trace needs ell")
    ts = np.asarray(ts, dtype=float)
    return FunctionalTrace(kind, field.params, ts, [fns[kind](t) for t in ts], ell)


@dataclass(frozen=True)
class MonotonicityVerdict:
    passed: bool
    worst: float
    at: Optional[float]
    eps: float

    def as_dict(self):
        return {"passed": self.passed, "worst": self.worst, "at": self.at, "eps": self.eps}


def monotonicity_check(tr: FunctionalTrace, weight_exponent, eps=1e-3, floor=1e-3) -> MonotonicityVerdict:
    """Is ``t**weight_exponent * value`` nondecreasing up to relative ``eps``?

    Each drop between neighbours is divided by the local magnitude, which is
    floored at ``floor`` times the largest magnitude of the trace.
    """
    y = tr.t**weight_exponent * tr.values
    if y.size < 2:
        return MonotonicityVerdict(True, 0.0, None, eps)
    big = float(np.max(np.abs(y)))
    if big == 0.0:
        return MonotonicityVerdict(True, 0.0, None, eps)
    local = np.maximum(np.maximum(np.abs(y[:-1]), np.abs(y[1:])), floor * big)
    drop = np.maximum(y[:-1] - y[1:], 0.0) / local
    i = int(np.argmax(drop))
    worst = float(drop[i])
    return MonotonicityVerdict(worst <= eps, worst, float(tr.t[i + 1]) if worst > 0 else None, eps)


# ----------------------------------------------------------------------------
# Rellich identity


RELLICH_BOUNDARY = ("boundary_Zu", "boundary_grad", "boundary_u2", "boundary_psi")
RELLICH_BULK = ("bulk_grad", "bulk_Zu", "bulk_u2", "bulk_psi")


@dataclass
class RellichReport:
    params: GrushinParams
    ell: float
    s_exp: float
    annulus: GaugeAnnulus
    lhs: dict
    rhs: dict
    refinement: list = dc_field(default_factory=list)

    @property
    def residual(self) -> float:
        return sum(self.lhs.values()) - sum(self.rhs.values())

    @property
    def scale(self) -> float:
        return sum(abs(v) for v in self.lhs.values()) + sum(abs(v) for v in self.rhs.values())

    @property
    def relative(self) -> float:
        s = self.scale
        return abs(self.residual) / s if s > 0 else 0.0

    def as_dict(self, verdict=None):
        return report_dict("rellich", self.params, {**self.lhs, **self.rhs}, self.residual, self.scale,
                           verdict, self.refinement,
                           extra={"ell": self.ell, "s_exp": self.s_exp,
                                  "annulus": [self.annulus.t_inner, self.annulus.t_outer],
                                  "relative": self.relative})


def rellich_identity_report(field: Field, ell, s_exp, annulus: GaugeAnnulus,
                            n_t: Optional[int] = None, n_phi: int = ANALYTIC_N_PHI) -> RellichReport:
    """All eight terms of the Rellich identity on ``annulus`` for ``u = rho**ell f``.

    Boundary terms are ``[at t_outer] - [at t_inner]`` with ``<Z, nu> dsigma = t dsigma/|grad rho|``.
    """
    if s_exp == 0:
        raise ValueError("the Rellich exponent s must be nonzero")
    if isinstance(field, AnalyticField) and field.kappa not in (None, 1.0):
        raise PreconditionError("normalize the field to kappa = 1 first (kappa_normalize)")
    if isinstance(field, GridField) and field.kappa is not None and field.kappa != 1.0:
        raise PreconditionError("normalize the field to kappa = 1 first (kappa_normalize)")
    P = field.params
    q = P.q
    s = float(s_exp)
    c = ell * (ell - q + 2)
    t0, t1 = annulus.t_inner, annulus.t_outer
    _check_interval(field, t0, t1)

    def pieces(sd):
        u, ut = _weighted(sd, ell)
        grad = sd.psi * ut**2 + sd.t ** (2 * ell) * sd.tau2
        return (sd.integrate(sd.psi * ut**2), sd.integrate(grad), sd.integrate(u**2),
                sd.integrate(u**2 * sd.psi))

    def boundary(t):
        zu, grad, u2, upsi = pieces(sphere_data(field, t, n_phi))
        t = float(t)
        return np.array([2 * t ** (s + 1) * zu, -(t ** (s + 1)) * grad, t ** (s + 1) * u2,
                         c * t ** (s - 1) * upsi])

    b = boundary(t1) - boundary(t0)
    coef = np.array([2 - q - s, 2 * (2 * ell + s), q + s, c * (q + s - 2)])
    def bulk_pieces(sd):
        zu, grad, u2, upsi = pieces(sd)
        return sd.t**s * np.array([grad, zu, u2, upsi / sd.t**2])

    bulk = coef * t_integral(field, t0, t1, bulk_pieces, n_t, n_phi)
    return RellichReport(P, float(ell), s, annulus, dict(zip(RELLICH_BOUNDARY, b.tolist())),
                         dict(zip(RELLICH_BULK, bulk.tolist())))


# ----------------------------------------------------------------------------
# ring estimates


def ring_mass(field: Field, R, n_t=None, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_{R < rho < 2R} f**2``."""
    return t_integral(field, R, 2 * R, lambda sd: sd.integrate(sd.f**2), n_t, n_phi)


def lp_mass(field: Field, p, lo, hi, n_t=None, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_{lo < rho < hi} |f|**p``."""
    return t_integral(field, lo, hi, lambda sd: sd.integrate(np.abs(sd.f) ** p), n_t, n_phi)


def energy_ratio(field: Field, R, n_t=None, n_phi: int = ANALYTIC_N_PHI) -> float:
    """``int_{5R/4 < rho < 7R/4} |grad_alpha f|**2 / int_{R < rho < 2R} f**2``."""
    num = t_integral(field, 1.25 * R, 1.75 * R, lambda sd: sd.integrate(sd.grad_sq), n_t, n_phi)
    den = ring_mass(field, R, n_t, n_phi)
    if not den > 0:
        raise ValueError(f"ring mass vanishes at R = {R}")
    return num / den


@dataclass
class LowerBoundReport:
    params: GrushinParams
    R: np.ndarray
    masses: np.ndarray
    refinement: list = dc_field(default_factory=list)

    @property
    def normalized(self):
        return self.masses / self.R

    @property
    def M_hat(self) -> float:
        return float(max(np.min(self.normalized), 0.0)) if self.R.size else 0.0

    def as_dict(self, verdict=None):
        terms = {f"R={R!r}": m for R, m in zip(self.R.tolist(), self.masses.tolist())}
        return report_dict("lowerbound", self.params, terms, None, None, verdict, self.refinement,
                           extra={"M_hat": self.M_hat})


def rellich_lowerbound(field: Field, R_grid: Sequence[float], n_t=None,
                       n_phi: int = ANALYTIC_N_PHI) -> LowerBoundReport:
    """Ring masses over ``R_grid`` and ``M_hat = min_R ring_mass(R)/R``."""
    R = np.asarray(R_grid, dtype=float)
    masses = np.array([ring_mass(field, x, n_t, n_phi) for x in R])
    return LowerBoundReport(field.params, R, masses)


def p_star(params: GrushinParams) -> float:
    return 2 * params.q / (params.q - 1)


@dataclass
class ThresholdReport:
    params: GrushinParams
    p: list
    R: np.ndarray
    traces: dict
    increments: dict
    decay: dict
    verdicts: dict

    @property
    def p_star(self):
        return p_star(self.params)

    def as_dict(self, verdict=None):
        terms = {f"p={p!r}": {"T": self.traces[p].tolist(), "increments": self.increments[p].tolist(),
                              "decay": self.decay[p], "verdict": self.verdicts[p]} for p in self.p}
        return report_dict("threshold", self.params, terms, None, None, verdict, [],
                           extra={"p_star": self.p_star, "R": self.R.tolist()})


def lp_threshold(field: Field, p_list: Sequence[float], R_ladder: Sequence[float], r0=None,
                 diverging_ratio=0.9, n_t=None, n_phi: int = ANALYTIC_N_PHI) -> ThresholdReport:
    """Traces ``T(p, R) = int_{r0 < rho < R} |f|**p`` and their doubling increments.

    ``R_ladder`` must be a doubling ladder. The per-rung decay of the
    increments is their geometric-mean ratio; a decay of at least
    ``diverging_ratio`` is read as "diverging", anything smaller as
    "converging". A trace with all increments zero is "converging".
    """
    R = np.asarray(R_ladder, dtype=float)
    if R.size < 2 or not np.allclose(R[1:], 2 * R[:-1]):
        raise ValueError("R_ladder must be a doubling sequence with at least two rungs")
    r0 = R[0] if r0 is None else float(r0)
    traces, increments, decay, verdicts = {}, {}, {}, {}
    for p in p_list:
        inc = np.array([lp_mass(field, p, lo, 2 * lo, n_t, n_phi) for lo in R[:-1]])
        base = lp_mass(field, p, r0, R[0], n_t, n_phi) if r0 < R[0] else 0.0
        traces[p] = base + np.concatenate([[0.0], np.cumsum(inc)])
        increments[p] = inc
        if np.all(inc == 0):
            d = 0.0
        elif inc.size < 2:
            d = float("nan")
        else:
            ratios = inc[1:] / inc[:-1]
            d = float(np.exp(np.mean(np.log(np.abs(ratios)))))
        decay[p] = d
        verdicts[p] = "diverging" if d >= diverging_ratio else "converging"
    return ThresholdReport(field.params, list(p_list), R, traces, increments, decay, verdicts)


# ----------------------------------------------------------------------------
# normalization and positivity


def kappa_normalize(field: Field, kappa) -> Field:
    """``x -> field(delta_{1/kappa} x)``, which solves the ``kappa = 1`` equation."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if isinstance(field, GridField):
        g = field.grid
        grid = Grid2D(g.params, g.t_nodes * kappa, g.n_phi, g.grading)
        new_kappa = None if field.kappa is None else field.kappa / kappa
        return GridField(grid, field.values.copy(), new_kappa, {k: v for k, v in field.meta.items()
                                                               if not k.startswith("_")})
    if kappa == 1:
        return field
    return dilated(field, 1.0 / kappa)


def F_positivity_check(field: Field, r0, ell0, n_phi: int = ANALYTIC_N_PHI) -> dict:
    """Check ``F(ell, r0) > 0`` for ``ell`` in ``{ell0, ell0 + 1, ell0 + 5}``."""
    if not surface_positivity(field, r0, n_phi) > 0:
        raise PreconditionError(f"int f^2 psi vanishes on S_{r0}; no positivity radius there")
    q = field.params.q
    C = C_threshold(field, r0, n_phi)
    ells = [ell0, ell0 + 1, ell0 + 5]
    sd = sphere_data(field, r0, n_phi)
    # the sign is decided on F / r0**(2 ell), which cannot overflow
    scaled = [_F_scaled(sd, e, q) for e in ells]
    with np.errstate(over="ignore"):
        vals = [float(np.float64(sd.t) ** (2 * e) * v) for e, v in zip(ells, scaled)]
    return {"C": C, "ell0_admissible": ell0 > max(q - 1, C), "ell": ells,
            "F": [v if math.isfinite(v) else None for v in vals], "F_scaled": scaled,
            "passed": all(v > 0 for v in scaled)}


# ----------------------------------------------------------------------------
# serialization


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def report_dict(kind, params, terms, residual, scale, verdict, refinement, extra=None) -> dict:
    """The shared JSON report layout."""
    out = {"kind": kind, "params": params.as_dict(), "terms": terms, "residual": residual,
           "scale": scale, "verdict": verdict, "refinement": refinement}
    if extra:
        out.update(extra)
    return _plain(out)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
