import io
import math

import numpy as np
import pytest
import scipy.sparse as sp

from grushin.errors import DomainError, ResonanceError
from grushin.fields import bessel3, fundamental_solution, gaussian
from grushin.geometry import GaugeAnnulus, GrushinParams, sphere_rule, unit_ball_volume
from grushin.grid import (Grid2D, GridField, SolveConfig, assemble_operator, mms_convergence,
                          observed_order, scaled_residual, solve_helmholtz, solve_system)

P1 = GrushinParams(2, 1, 1.0)
P0 = GrushinParams(2, 1, 0.0)


@pytest.mark.parametrize("grading", [1.0, 2.0, 3.0])
def test_grid_layout(grading):
    g = Grid2D.uniform(P1, 1.0, 3.0, 20, 16, grading)
    assert g.t_nodes[0] == 1.0 and g.t_nodes[-1] == 3.0
    phi = g.phi_nodes
    assert np.all(phi > 0) and np.all(phi < math.pi / 2) and np.all(np.diff(phi) > 0)
    assert np.all(g.phi_complement > 0)
    f = g.face_coefficients()
    assert f[0] == 0 and f[-1] == 0 and np.all(f[1:-1] > 0)
    with pytest.raises(DomainError):
        g.row_index(1.05)
    assert g.row_index(2.0) == 10


@pytest.mark.parametrize("grading", [1.0, 2.0])
@pytest.mark.parametrize("P", [P0, P1, GrushinParams(1, 2, 0.5)])
def test_cell_weights_integrate_sphere_area(P, grading):
    g = Grid2D.uniform(P, 1.0, 2.0, 8, 12, grading)
    area = g.sphere_weights(1.7).sum()
    assert area == pytest.approx(P.q * unit_ball_volume(P) * 1.7 ** (P.q - 1), rel=1e-10)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(P1, np.array([1.0, 0.5, 2.0]), 8)
    with pytest.raises(ValueError):
        Grid2D.uniform(P1, 1.0, 2.0, 8, 8, grading=0.5)
    g = Grid2D.uniform(P1, 1.0, 2.0, 8, 8)
    with pytest.raises(ValueError):
        GridField(g, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        GridField(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError):
        SolveConfig(P1, 1.0, GaugeAnnulus(1.0, 2.0), 4, 8)


def test_derivatives_of_sampled_field():
    f = gaussian(P1)
    errs = []
    for n in (32, 64):
        g = Grid2D.uniform(P1, 1.0, 2.0, n, n, 2.0)
        r, s = g.points()
        gf = GridField(g, f.value(r, s))
        j = f.jet(r, s)
        T = g.t_nodes[:, None]
        exact_t = (r * j.r + P1.a * s * j.s) / T
        errs.append(np.max(np.abs(gf.d_t() - exact_t)))
    assert errs[1] < errs[0] / 3


def test_dirichlet_rows_and_residual():
    cfg = SolveConfig(P1, 1.0, GaugeAnnulus(1.0, 3.0), 40, 16, bc_inner=1.0,
                      bc_outer=lambda phi: np.cos(phi), grading=2.0)
    sol = solve_helmholtz(cfg)
    assert np.all(sol.values[0] == 1.0)
    np.testing.assert_array_equal(sol.values[-1], np.cos(sol.grid.phi_nodes))
    A = assemble_operator(cfg, sol.grid)
    b = np.zeros(sol.grid.shape)
    b[0], b[-1] = sol.values[0], sol.values[-1]
    assert scaled_residual(A, sol.values.ravel(), b.ravel()) <= 1e-9


@pytest.mark.parametrize("m,k", [(2, 1), (1, 1), (3, 2)])
def test_phi_reversal_alpha0(m, k):
    # at alpha = 0 with phi-independent data the discrete solution is constant in phi
    P = GrushinParams(m, k, 0.0)
    sol = solve_helmholtz(SolveConfig(P, 1.3, GaugeAnnulus(1.0, 4.0), 48, 16, bc_inner=1.0,
                                      bc_outer=-0.5))
    np.testing.assert_allclose(sol.values[:, ::-1], sol.values, atol=1e-10, rtol=0)


def test_bessel3_bvp_second_order():
    b = bessel3(P0)
    errs = []
    for n in (32, 64, 128):
        sol = solve_helmholtz(SolveConfig(P0, 1.0, GaugeAnnulus(1.0, 7.0), n, 8,
                                          bc_inner=math.sin(1.0), bc_outer=math.sin(7.0) / 7))
        r, s = sol.grid.points()
        errs.append(np.max(np.abs(sol.values - b.value(r, s))))
    assert errs[0] > errs[1] > errs[2]
    assert observed_order([1 / 32, 1 / 64, 1 / 128], errs) == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("alpha,grading", [(0.0, 1.0), (1.0, 1.0), (1.0, 2.0)])
def test_mms_order(alpha, grading):
    P = GrushinParams(2, 1, alpha)
    ann = GaugeAnnulus(1.0, 3.0)
    for f, kappa in ((gaussian(P), 1.0), (fundamental_solution(P), 0.0)):
        rep = mms_convergence(P, kappa, f, ann, grading=grading)
        assert rep.order == pytest.approx(2.0, abs=0.3)
        assert rep.errors[0] > rep.errors[1] > rep.errors[2]


def test_near_singular_system_raises():
    A = sp.csr_matrix(np.diag([1.0, 1e-14]))
    with pytest.raises(ResonanceError) as exc:
        solve_system(A, np.ones(2))
    assert exc.value.condition > 1e11


def test_csv_round_trip():
    sol = solve_helmholtz(SolveConfig(P1, 0.5, GaugeAnnulus(1.0, 2.0), 10, 8, bc_inner=1.0,
                                      grading=2.0))
    text = sol.to_csv()
    assert text.splitlines()[2] == "t,phi,value"
    back = GridField.from_csv(io.StringIO(text))
    np.testing.assert_array_equal(back.values, sol.values)
    np.testing.assert_array_equal(back.grid.t_nodes, sol.grid.t_nodes)
    np.testing.assert_array_equal(back.grid.phi_nodes, sol.grid.phi_nodes)
    assert back.kappa == 0.5 and back.grid.grading == 2.0


def test_functional_rows_match_sphere_rule():
    # a smooth sampled field integrates like the analytic sphere rule
    g = Grid2D.uniform(P1, 1.0, 2.0, 4, 64, 2.0)
    r, s = g.points()
    vals = np.exp(-r**2 - s)
    grid_int = g.sphere_weights(g.t_nodes[2]) @ vals[2]
    rule = sphere_rule(P1, g.t_nodes[2])
    assert grid_int == pytest.approx(rule.integrate(np.exp(-rule.r**2 - rule.s)), rel=1e-3)
