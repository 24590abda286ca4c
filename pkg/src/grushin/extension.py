"""Degenerate extension problem and its Dirichlet-to-Neumann map.

Solves ``U_zz + z**(2 alpha) U_ss = 0`` on ``(0, Z) x (-L, L)`` with
``U(0, sigma) = u(sigma)`` and ``U = 0`` on the far sides, where
``alpha = 1/(2 s) - 1``. This operator carries no factor 1/4 on the sigma
part, unlike ``B_alpha``; the two are never mixed.

For this normalization the Fourier mode ``exp(i xi sigma)`` extends to
``sqrt(z) K_s(xi z**(1+alpha) / (1+alpha))`` up to a constant, and the
small-``z`` expansion of ``K_s`` gives

    (-Delta)**s u = -s**(-2 s) Gamma(1+s)/Gamma(1-s) lim_{z->0} U_z.

:func:`literal_dtn_constant` returns the constant without the ``s**(-2 s)``
factor for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate
from scipy.special import gamma

from .errors import ConvergenceError, DomainError


def gaussian_datum(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2 / 2)


@dataclass(frozen=True)
class ExtensionConfig:
    """Strip problem for the fractional exponent ``s_exp``.

    ``Z_max`` defaults to the height at which ``z**(1+alpha)/(1+alpha)``
    reaches ``L``, so the strip has comparable extent in the variable where
    the equation is isotropic. ``n_z`` and ``n_sigma`` count cells; sigma is
    stretched by a sinh map of strength ``sigma_stretch`` to resolve the datum
    near the origin while reaching ``L``.
    """

    s_exp: float
    datum: Callable = gaussian_datum
    L: float = 30.0
    Z_max: Optional[float] = None
    gamma: float = 2.0
    n_z: int = 96
    n_sigma: int = 192
    sigma_stretch: float = 4.0

    def __post_init__(self):
        if not 0 < self.s_exp < 1:
            raise DomainError("s_exp must lie in (0, 1)")
        if self.L <= 0 or (self.Z_max is not None and self.Z_max <= 0):
            raise ValueError("strip sizes must be positive")
        if self.gamma < 1:
            raise ValueError("grading exponent must be >= 1")
        if self.n_z < 4 or self.n_sigma < 4:
            raise ValueError("resolution too small")

    @property
    def alpha(self) -> float:
        return 1 / (2 * self.s_exp) - 1

    @property
    def height(self) -> float:
        if self.Z_max is not None:
            return self.Z_max
        a = self.alpha + 1
        return (a * self.L) ** (1 / a)

    def z_nodes(self):
        return self.height * (np.arange(self.n_z + 1) / self.n_z) ** self.gamma

    def sigma_nodes(self):
        b = self.sigma_stretch
        x = np.arange(self.n_sigma + 1) / self.n_sigma
        return self.L * np.sinh(b * x) / math.sinh(b)

    def refined(self, factor=2):
        return ExtensionConfig(self.s_exp, self.datum, self.L, self.Z_max, self.gamma,
                               self.n_z * factor, self.n_sigma * factor, self.sigma_stretch)


@dataclass
class ExtensionField:
    config: ExtensionConfig
    z: np.ndarray
    sigma: np.ndarray
    values: np.ndarray  # shape (n_z + 1, n_sigma + 1), sigma >= 0 half of the strip

    def at(self, z, sigma):
        """Bilinear interpolation; the strip is even in ``sigma``."""
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator((self.z, self.sigma), self.values)
        pts = np.column_stack([np.ravel(z), np.abs(np.ravel(sigma))])
        return interp(pts).reshape(np.shape(z))


def _second_difference(x):
    """Three-point weights for ``d^2/dx^2`` on a nonuniform grid, interior nodes."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    lo = 2 / (hm * (hm + hp))
    hi = 2 / (hp * (hm + hp))
    return lo, -(lo + hi), hi


def solve_extension(ext: ExtensionConfig) -> ExtensionField:
    """Finite-difference solve on the half strip ``sigma >= 0`` (even reflection at 0).

    The stencil is a nonuniform five-point M-matrix, so the discrete maximum
    principle holds.
    """
    z = ext.z_nodes()
    sg = ext.sigma_nodes()
    nz, ns = z.size, sg.size
    u0 = np.asarray(ext.datum(sg), dtype=float) * np.ones(ns)
    U = np.zeros((nz, ns))
    U[0] = u0
    # unknowns: 1 <= i <= nz-2 in z, 0 <= j <= ns-2 in sigma
    iz = np.arange(1, nz - 1)
    js = np.arange(0, ns - 1)
    nI, nJ = iz.size, js.size
    idx = np.arange(nI * nJ).reshape(nI, nJ)

    zl, zc, zh = _second_difference(z)
    coef = z[1:-1] ** (2 * ext.alpha)
    # sigma stencil with ghost node -sigma_1 at j = 0
    sx = np.concatenate([[-sg[1]], sg])
    sl, sc, sh = _second_difference(sx)
    sl, sc, sh = sl[: nJ], sc[: nJ], sh[: nJ]
    sh = sh.copy()
    sh[0] += sl[0]
    sl = sl.copy()
    sl[0] = 0.0

    rows, cols, vals = [], [], []
    b = np.zeros((nI, nJ))
    II, JJ = np.meshgrid(np.arange(nI), np.arange(nJ), indexing="ij")
    C = coef[:, None] * np.ones((1, nJ))
    diag = zc[:, None] + C * sc[None, :]
    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    # z neighbours
    m = II > 0
    rows.append(idx[m]); cols.append(idx[II[m] - 1, JJ[m]]); vals.append((zl[:, None] * np.ones((1, nJ)))[m])
    b[0] -= zl[0] * u0[:nJ]
    m = II < nI - 1
    rows.append(idx[m]); cols.append(idx[II[m] + 1, JJ[m]]); vals.append((zh[:, None] * np.ones((1, nJ)))[m])
    # sigma neighbours
    m = JJ > 0
    rows.append(idx[m]); cols.append(idx[II[m], JJ[m] - 1]); vals.append((C * sl[None, :])[m])
    m = JJ < nJ - 1
    rows.append(idx[m]); cols.append(idx[II[m], JJ[m] + 1]); vals.append((C * sh[None, :])[m])

    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nI * nJ, nI * nJ))
    x = spla.splu(A).solve(b.ravel())
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("extension solve produced non-finite values")
    U[1:-1, :-1] = x.reshape(nI, nJ)
    return ExtensionField(ext, z, sg, U)


def dtn_constant(s) -> float:
    """``s**(-2 s) Gamma(1+s)/Gamma(1-s)`` for the ``z**(2 alpha)`` normalization."""
    return s ** (-2 * s) * gamma(1 + s) / gamma(1 - s)


def literal_dtn_constant(s) -> float:
    """``Gamma(1+s)/Gamma(1-s)`` without the normalization factor."""
    return gamma(1 + s) / gamma(1 - s)


def _datum_second_derivative(sol: ExtensionField, j):
    sg = sol.sigma
    u = sol.values[0]
    x = np.concatenate([[-sg[1]], sg])
    v = np.concatenate([[u[1]], u])
    lo, c, hi = _second_difference(x)
    d2 = lo * v[:-2] + c * v[1:-1] + hi * v[2:]
    return d2[j]


def normal_derivative(sol: ExtensionField, j) -> float:
    """One-sided estimate of ``U_z(0+, sigma_j)``.

    ``U = u + c z - u'' z**p / (p (p - 1)) + ...`` with ``p = 1/s``; the
    singular term is subtracted before differencing.
    """
    s = sol.config.s_exp
    p = 1 / s
    z1 = sol.z[1]
    d2 = _datum_second_derivative(sol, j)
    return float((sol.values[1, j] - sol.values[0, j]) / z1 + d2 * z1 ** (p - 1) / (p * (p - 1)))


@dataclass
class DtnResult:
    sigma: np.ndarray
    values: np.ndarray
    levels: list  # per level: raw fractional-Laplacian estimates at each sigma
    order: np.ndarray


def dtn_fractional_laplacian(ext: ExtensionConfig, sigma_points: Sequence[float] = (0.0,),
                             levels: int = 3, constant: Callable = dtn_constant) -> DtnResult:
    """``(-Delta)**s u`` at ``sigma_points`` from the extension.

    Solves on ``levels`` successively doubled meshes, evaluates the corrected
    one-sided derivative at each ``sigma`` node, and Richardson-extrapolates
    with the observed order of the last three levels.
    """
    sigma_points = np.atleast_1d(np.asarray(sigma_points, dtype=float))
    if levels < 3:
        raise ValueError("Richardson extrapolation needs at least three levels")
    est = []
    cfg = ext
    for lev in range(levels):
        sol = solve_extension(cfg)
        row = []
        for sp_ in sigma_points:
            j = int(np.argmin(np.abs(sol.sigma - abs(sp_))))
            if abs(sol.sigma[j] - abs(sp_)) > 1e-12 * max(1.0, abs(sp_)):
                raise DomainError(f"sigma = {sp_} is not a mesh node; use nodes of the coarse mesh")
            row.append(-constant(ext.s_exp) * normal_derivative(sol, j))
        est.append(row)
        cfg = cfg.refined(2)
    est = np.array(est)
    d1 = est[-2] - est[-3]
    d2 = est[-1] - est[-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d1 / d2
    out = np.empty(sigma_points.size)
    order = np.empty(sigma_points.size)
    for i in range(sigma_points.size):
        if d1[i] == 0 and d2[i] == 0:
            out[i], order[i] = est[-1, i], math.inf
            continue
        if not (np.isfinite(ratio[i]) and ratio[i] > 1.05):
            raise ConvergenceError(
                f"extrapolation does not converge at sigma = {sigma_points[i]}: "
                f"successive differences {d1[i]:.3e}, {d2[i]:.3e}", history=est[:, i].tolist())
        order[i] = math.log2(ratio[i])
        out[i] = est[-1, i] + d2[i] / (ratio[i] - 1)
    return DtnResult(sigma_points, out, est.tolist(), order)


def fourier_oracle(s, datum_hat: Callable = None) -> float:
    """``(1/2 pi) int |xi|**(2 s) u_hat(xi) d xi`` at ``sigma = 0`` by adaptive quadrature.

    The default transform is that of ``exp(-sigma**2/2)``,
    ``u_hat = sqrt(2 pi) exp(-xi**2/2)``.
    """
    if datum_hat is None:
        def datum_hat(xi):
            return math.sqrt(2 * math.pi) * math.exp(-xi * xi / 2)
    val, _ = integrate.quad(lambda xi: xi ** (2 * s) * datum_hat(xi), 0, math.inf,
                            epsabs=0, epsrel=1e-12, limit=200)
    return 2 * val / (2 * math.pi)


def gaussian_closed_form(s) -> float:
    """``2**s Gamma(s + 1/2) / sqrt(pi)``."""
    return 2**s * gamma(s + 0.5) / math.sqrt(math.pi)


def poisson_extension(z, sigma=0.0, datum: Callable = gaussian_datum) -> float:
    """Half-plane harmonic extension ``int z/(pi (z**2 + (sigma - y)**2)) u(y) dy``."""
    val, _ = integrate.quad(lambda y: z / (math.pi * (z * z + (sigma - y) ** 2)) * datum(y),
                            -math.inf, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val
