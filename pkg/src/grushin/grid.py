"""Finite-volume discretization of ``B_alpha + kappa**2`` on gauge annuli.

For cylindrically symmetric ``g`` the operator in gauge-polar coordinates
``(t, phi)`` separates as

    B_alpha g = psi(phi) * t**(1-Q) d_t(t**(Q-1) d_t g)
                + (alpha+1)**2 / t**2 * w(phi)**-1 d_phi(w psi d_phi g),

with ``psi = cos(phi)**(2 - 2 beta)``, ``w = cos(phi)**(beta m - 1) sin(phi)**(k - 1)``
and ``beta = 1/(alpha+1)``. Gauge circles are grid lines, ``phi`` is cell
centered, the ``phi`` edges carry zero-flux (even reflection) closures and the
``t`` edges carry Dirichlet rows.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import beta as beta_fn, betainc

from .errors import DomainError, ResonanceError
from .geometry import HALF_PI, GaugeAnnulus, GrushinParams, from_gauge_coords, sphere_area

BoundaryData = Union[float, Callable, np.ndarray]

CONDITION_LIMIT = 1e11


def _cos_pow_sin_pow_cdf(params, phi, cphi):
    """``int_0^phi cos**(beta m - 1) sin**(k - 1)`` given ``phi`` and ``pi/2 - phi``."""
    p = params.beta * params.m / 2
    q = params.k / 2
    total = 0.5 * beta_fn(q, p)
    sin2 = np.sin(phi) ** 2
    cos2 = np.sin(cphi) ** 2
    # pick the well-conditioned branch of the incomplete beta function
    return np.where(phi <= math.pi / 4, total * betainc(q, p, sin2), total * (1 - betainc(p, q, cos2)))


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid: ``t`` nodes include both boundary circles; ``phi`` is cell centered.

    The ``phi`` cells are uniform in ``eta`` with ``phi = pi/2 - (pi/2)(1 - eta)**grading``.
    ``grading = 1`` is the uniform grid; ``grading = alpha + 1`` makes ``r`` uniform
    near the axis ``r = 0`` on each gauge circle.
    """

    params: GrushinParams
    t_nodes: np.ndarray
    n_phi: int
    grading: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ValueError("t_nodes must be a positive strictly increasing array")
        if self.n_phi < 4:
            raise ValueError("n_phi must be at least 4")
        if not self.grading >= 1:
            raise ValueError("grading must be >= 1")
        object.__setattr__(self, "t_nodes", t)

    @classmethod
    def uniform(cls, params, t_min, t_max, n_t, n_phi, grading=1.0):
        return cls(params, np.linspace(t_min, t_max, int(n_t) + 1), int(n_phi), float(grading))

    def _complement(self, eta):
        return HALF_PI * (1 - eta) ** self.grading

    @property
    def h_phi(self):
        """Spacing in the computational variable, scaled to ``phi`` units."""
        return HALF_PI / self.n_phi

    @property
    def phi_face_complement(self):
        return self._complement(np.arange(self.n_phi + 1) / self.n_phi)

    @property
    def phi_faces(self):
        return HALF_PI - self.phi_face_complement

    @property
    def phi_complement(self):
        """``pi/2 - phi`` at cell centers, computed without cancellation."""
        return self._complement((np.arange(self.n_phi) + 0.5) / self.n_phi)

    @property
    def phi_nodes(self):
        return HALF_PI - self.phi_complement

    @property
    def shape(self):
        return (self.t_nodes.size, self.n_phi)

    @property
    def psi(self):
        return np.sin(self.phi_complement) ** (2 * (1 - self.params.beta))

    @property
    def measure_constant(self):
        P = self.params
        return sphere_area(P.m) * sphere_area(P.k) / (2 * P.a) ** P.k

    def cell_weights(self):
        """Exact ``int_cell cos**(beta m - 1) sin**(k - 1) dphi`` per cell."""
        cdf = _cos_pow_sin_pow_cdf(self.params, self.phi_faces, self.phi_face_complement)
        return np.diff(cdf)

    def face_coefficients(self):
        """``w psi`` at cell faces; zero at both ends (symmetry closure)."""
        P = self.params
        faces, cfaces = self.phi_faces, self.phi_face_complement
        c = np.sin(cfaces) ** (P.beta * (P.m - 2) + 1) * np.sin(faces) ** (P.k - 1)
        c[0] = 0.0
        c[-1] = 0.0
        return c

    def node_gaps(self):
        """Distances between neighbouring ``phi`` nodes, length ``n_phi - 1``."""
        return -np.diff(self.phi_complement)

    def sphere_weights(self, t):
        """Quadrature weights on ``S_t`` for values at the ``phi`` cell centers."""
        return self.measure_constant * t ** (self.params.q - 1) * self.cell_weights()

    def points(self):
        """``(r, s)`` at every node, shape ``(n_t + 1, n_phi)`` each."""
        T, PHI = np.meshgrid(self.t_nodes, self.phi_nodes, indexing="ij")
        p = from_gauge_coords(self.params, T, PHI)
        r = T * np.sin(np.broadcast_to(self.phi_complement, T.shape)) ** self.params.beta
        return r, p.s

    def row_index(self, t, rtol=1e-10):
        i = int(np.argmin(np.abs(self.t_nodes - t)))
        if abs(self.t_nodes[i] - t) > rtol * max(1.0, abs(t)):
            raise DomainError(f"t = {t} is not a grid circle")
        return i


@dataclass
class GridField:
    """Field values on a :class:`Grid2D`, indexed ``(i_t, i_phi)``."""

    grid: Grid2D
    values: np.ndarray
    kappa: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid field has non-finite values")

    @property
    def params(self):
        return self.grid.params

    def d_t(self):
        return np.gradient(self.values, self.grid.t_nodes, axis=0, edge_order=2)

    def d_phi(self):
        # even reflection across phi = 0 and phi = pi/2 supplies the ghost nodes
        phi = self.grid.phi_nodes
        c = self.grid.phi_complement
        x = np.concatenate([[-phi[0]], phi, [HALF_PI + c[-1]]])
        g = self.values
        padded = np.concatenate([g[:, :1], g, g[:, -1:]], axis=1)
        return np.gradient(padded, x, axis=1)[:, 1:-1]

    def to_csv(self, path_or_buffer=None):
        """Serialize as ``t,phi,value`` rows, row-major by ``t``.

        Two comment lines precede the header and carry the parameters needed
        to rebuild the grid.
        """
        P = self.params
        buf = io.StringIO()
        buf.write("# grushin-gridfield v1\n")
        kappa = "nan" if self.kappa is None else repr(float(self.kappa))
        buf.write(f"# m={P.m} k={P.k} alpha={float(P.alpha)!r} kappa={kappa} n_phi={self.grid.n_phi} grading={float(self.grid.grading)!r}\n")
        buf.write("t,phi,value\n")
        phi = self.grid.phi_nodes.tolist()
        for t, row in zip(self.grid.t_nodes.tolist(), self.values.tolist()):
            for ph, v in zip(phi, row):
                buf.write(f"{t!r},{ph!r},{v!r}\n")
        text = buf.getvalue()
        if path_or_buffer is None:
            return text
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_buffer):
        if hasattr(path_or_buffer, "read"):
            text = path_or_buffer.read()
        else:
            with open(path_or_buffer) as fh:
                text = fh.read()
        lines = text.splitlines()
        meta = {}
        for line in lines:
            if line.startswith("# ") and "=" in line:
                meta.update(kv.split("=", 1) for kv in line[2:].split())
        data = _read_rows(lines)
        params = GrushinParams(int(meta["m"]), int(meta["k"]), float(meta["alpha"]))
        n_phi = int(meta["n_phi"])
        t_nodes = data[::n_phi, 0]
        grid = Grid2D(params, t_nodes, n_phi, float(meta.get("grading", 1.0)))
        kappa = float(meta["kappa"])
        return cls(grid, data[:, 2].reshape(grid.shape), None if math.isnan(kappa) else kappa)


def _read_rows(lines):
    rows = [ln for ln in lines if ln and not ln.startswith("#") and not ln.startswith("t,")]
    return np.array([[float(x) for x in ln.split(",")] for ln in rows])


@dataclass
class SolveConfig:
    params: GrushinParams
    kappa: float
    annulus: GaugeAnnulus
    n_t: int = 128
    n_phi: int = 32
    bc_inner: BoundaryData = 0.0
    bc_outer: BoundaryData = 0.0
    # right-hand side h of B g + kappa**2 g = h, callable (r, s) or node array
    source: Optional[Union[Callable, np.ndarray]] = None
    tol: float = 1e-9
    check_conditioning: bool = True
    grading: float = 1.0

    def __post_init__(self):
        if self.n_t < 8 or self.n_phi < 8:
            raise ValueError("resolution must be at least 8 x 8")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    def grid(self):
        return Grid2D.uniform(self.params, self.annulus.t_inner, self.annulus.t_outer,
                              self.n_t, self.n_phi, self.grading)


def assemble_operator(config: SolveConfig, grid: Optional[Grid2D] = None):
    """Sparse matrix of ``B_alpha + kappa**2`` with Dirichlet rows on the two circles."""
    g = grid or config.grid()
    P = g.params
    nt, nphi = g.shape
    t = g.t_nodes
    idx = np.arange(nt * nphi).reshape(nt, nphi)

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    for i in (0, nt - 1):
        add(idx[i], idx[i], np.ones(nphi))

    ti = t[1:-1, None]
    hm = (t[1:-1] - t[:-2])[:, None]
    hp = (t[2:] - t[1:-1])[:, None]
    tm = 0.5 * (t[1:-1] + t[:-2])[:, None]
    tp = 0.5 * (t[2:] + t[1:-1])[:, None]
    q1 = P.q - 1
    psi = g.psi[None, :]
    vol = ti**q1 * 0.5 * (hm + hp)
    cm = psi * tm**q1 / (hm * vol)
    cp = psi * tp**q1 / (hp * vol)
    I = idx[1:-1]

    W = g.cell_weights()[None, :]
    face = g.face_coefficients()
    gaps = np.concatenate([[1.0], g.node_gaps(), [1.0]])
    ang = P.a**2 / ti**2 / W
    # end faces carry zero coefficient, so the padded gaps never contribute
    fl = (face / gaps)[None, :-1] * ang
    fr = (face / gaps)[None, 1:] * ang
    diag = -(cm + cp) - (fl + fr) + config.kappa**2

    add(I, idx[:-2], cm)
    add(I, idx[2:], cp)
    add(I, I, diag)
    add(I[:, 1:], I[:, :-1], fl[:, 1:] + 0 * I[:, 1:])
    add(I[:, :-1], I[:, 1:], fr[:, :-1] + 0 * I[:, :-1])

    n = nt * nphi
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A


def _boundary_values(data, grid, t):
    phi = grid.phi_nodes
    if callable(data):
        return np.asarray(data(phi), dtype=float) * np.ones(grid.n_phi)
    return np.asarray(data, dtype=float) * np.ones(grid.n_phi)


def _rhs(config, grid):
    nt, nphi = grid.shape
    b = np.zeros((nt, nphi))
    if config.source is not None:
        if callable(config.source):
            r, s = grid.points()
            b[:] = config.source(r, s)
        else:
            b[:] = config.source
    b[0] = _boundary_values(config.bc_inner, grid, grid.t_nodes[0])
    b[-1] = _boundary_values(config.bc_outer, grid, grid.t_nodes[-1])
    return b


def scaled_residual(A, x, b, rows=None):
    """Normwise backward error ``max|Ax - b| / max(|A||x| + |b|)``, optionally over ``rows``."""
    res = np.abs(A @ x - b)
    scale = abs(A) @ np.abs(x) + np.abs(b)
    if rows is not None:
        res, scale = res[rows], scale[rows]
    return float(res.max() / max(scale.max(), 1e-300))


def condition_estimate(A, lu=None):
    lu = lu or spla.splu(A.tocsc())
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"),
                              dtype=A.dtype)
    return float(spla.norm(A, 1) * spla.onenormest(inv))


def solve_system(A, b, check_conditioning=True, tol=1e-9):
    lu = spla.splu(A.tocsc())
    x = lu.solve(b)
    if check_conditioning:
        cond = condition_estimate(A, lu)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise ResonanceError(
                f"Helmholtz system is near-singular (condition ~ {cond:.2e}); "
                f"the annulus is close to resonance, perturb t_max", condition=cond)
    if not np.all(np.isfinite(x)):
        raise ResonanceError("solve produced non-finite values; perturb t_max")
    res = scaled_residual(A, x, b)
    if res > tol:
        # one step of iterative refinement before giving up
        x = x + lu.solve(b - A @ x)
        res = scaled_residual(A, x, b)
        if res > tol:
            raise ResonanceError(f"residual {res:.2e} exceeds tolerance {tol:.1e}")
    return x


def solve_helmholtz(config: SolveConfig, perturb_on_resonance=False) -> GridField:
    """Solve the Dirichlet problem for ``B_alpha g + kappa**2 g = h`` on the annulus."""
    try:
        grid = config.grid()
        A = assemble_operator(config, grid)
        b = _rhs(config, grid)
        x = solve_system(A, b.ravel(), config.check_conditioning, config.tol)
    except ResonanceError:
        if not perturb_on_resonance:
            raise
        ann = config.annulus
        bumped = SolveConfig(**{**config.__dict__,
                                "annulus": GaugeAnnulus(ann.t_inner, ann.t_outer * (1 + 1e-2))})
        return solve_helmholtz(bumped, perturb_on_resonance=False)
    values = x.reshape(grid.shape)
    values[0] = b[0]
    values[-1] = b[-1]
    return GridField(grid, values, kappa=config.kappa,
                     meta={"annulus": (config.annulus.t_inner, config.annulus.t_outer)})


@dataclass
class ConvergenceReport:
    resolutions: list
    h: list
    errors: list
    order: float

    def as_dict(self):
        return {"resolutions": [list(r) for r in self.resolutions], "h": self.h,
                "errors": self.errors, "order": self.order}


def observed_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


def mms_convergence(params, kappa, manufactured, annulus: GaugeAnnulus,
                    resolutions=((16, 16), (32, 32), (64, 64)), grading=1.0) -> ConvergenceReport:
    """Manufactured-solution study: max-norm error per resolution and the fitted order."""
    from .fields import balpha

    def source(r, s):
        j = manufactured.jet(r, s)
        return balpha(params, j, r, s) + kappa**2 * j.v

    errors, hs = [], []
    for n_t, n_phi in resolutions:
        cfg = SolveConfig(params, kappa, annulus, n_t, n_phi, source=source, grading=grading,
                          bc_inner=lambda phi: manufactured.value(*_circle(params, annulus.t_inner, phi)),
                          bc_outer=lambda phi: manufactured.value(*_circle(params, annulus.t_outer, phi)))
        sol = solve_helmholtz(cfg)
        r, s = sol.grid.points()
        errors.append(float(np.max(np.abs(sol.values - manufactured.value(r, s)))))
        hs.append(1.0 / n_t)
    return ConvergenceReport([tuple(x) for x in resolutions], hs, errors, observed_order(hs, errors))


def _circle(params, t, phi):
    p = from_gauge_coords(params, t, phi)
    return p.r, p.s
