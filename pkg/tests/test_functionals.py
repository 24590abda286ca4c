import json
import math

import numpy as np
import pytest

from grushin.errors import PreconditionError
from grushin.fields import bessel3, constant_field, exp_gauge, gaussian, zero_field
from grushin.functionals import (C_threshold, F_functional, F_positivity_check, FunctionalTrace,
                                 G_functional, dumps, energy_ratio, fg_flux_consistency, flux_Zw2,
                                 kappa_normalize, lp_threshold, monotonicity_check,
                                 rellich_identity_report, rellich_lowerbound, ring_mass,
                                 surface_positivity, trace)
from grushin.geometry import GaugeAnnulus, GrushinParams
from grushin.grid import SolveConfig, solve_helmholtz
from grushin.oracles import (bessel3_F, bessel3_flux, bessel3_G, bessel3_ring_mass,
                             bessel3_surface, lp3_increment_limit, thin_shell_F)

P0 = GrushinParams(2, 1, 0.0)
P1 = GrushinParams(2, 1, 1.0)
B = bessel3(P0)


@pytest.fixture(scope="module")
def solved():
    cfg = SolveConfig(P1, 1.0, GaugeAnnulus(1.0, 7.25), 200, 48, bc_inner=1.0, grading=2.0)
    return solve_helmholtz(cfg)


@pytest.mark.parametrize("t", [0.7, 2.0, 5.5, 31.0])
def test_bessel3_sphere_functionals_match_radial_oracles(t):
    for ell in (1.0, 3.0, 6.0):
        assert F_functional(B, ell, t) == pytest.approx(bessel3_F(ell, t), rel=1e-10)
    assert G_functional(B, t) == pytest.approx(bessel3_G(t), rel=1e-12)
    assert surface_positivity(B, t) == pytest.approx(bessel3_surface(t), rel=1e-12)
    assert flux_Zw2(B, t) == pytest.approx(bessel3_flux(t), rel=1e-10, abs=1e-10 * t**3)


def test_surface_values():
    assert surface_positivity(B, math.pi) == pytest.approx(0.0, abs=1e-28)
    assert surface_positivity(B, math.pi / 2) == pytest.approx(2 * math.pi, rel=1e-12)
    assert surface_positivity(zero_field(P0), 1.0) == 0.0


def test_thin_shell_oracle_on_bessel3():
    for ell, t in ((2.0, 3.0), (1.0, 7.5)):
        assert thin_shell_F(B, ell, t) == pytest.approx(F_functional(B, ell, t), rel=1e-4)


def test_thin_shell_oracle_on_solved_field(solved):
    for ell in (1.5, 4.0):
        for t in (2.5, 4.0, 6.0):
            assert thin_shell_F(solved, ell, t) == pytest.approx(F_functional(solved, ell, t), rel=1e-2)


def test_G_requires_q3():
    with pytest.raises(PreconditionError):
        G_functional(gaussian(GrushinParams(1, 1, 0.5)), 1.0)


def test_fg_flux_consistency_reading():
    f = gaussian(P1)
    q_reading = fg_flux_consistency(f, 2.5, 1.3)
    assert q_reading["n"] == P1.q
    assert q_reading["relative"] <= 1e-12
    literal = fg_flux_consistency(f, 2.5, 1.3, n_reading=P1.m + P1.k)
    assert literal["relative"] > 1e-3


def test_rellich_bessel3_exact_over_full_periods():
    rep = rellich_identity_report(B, 2.0, -3.0, GaugeAnnulus(math.pi, 3 * math.pi), n_t=32)
    assert rep.relative <= 1e-12
    assert len(rep.lhs) == 4 and len(rep.rhs) == 4


def test_rellich_bessel3_converges():
    ann = GaugeAnnulus(3.0, 10.0)
    rel = [rellich_identity_report(B, 2.0, -3.0, ann, n_t=n).relative for n in (32, 64, 128)]
    assert rel[0] <= 1e-4
    assert rel[0] > rel[1] > rel[2]


def test_rellich_solved_field_converges():
    ann = GaugeAnnulus(2.0, 6.0)
    rel = []
    for n_t, n_phi in ((100, 24), (200, 48), (400, 96)):
        f = solve_helmholtz(SolveConfig(P1, 1.0, GaugeAnnulus(1.0, 7.25), n_t, n_phi,
                                        bc_inner=1.0, grading=2.0))
        rel.append(rellich_identity_report(f, 1.5, -4.0, ann).relative)
    assert max(rel) <= 0.02
    assert rel[0] > rel[1] > rel[2]


def test_rellich_preconditions():
    with pytest.raises(ValueError):
        rellich_identity_report(B, 2.0, 0.0, GaugeAnnulus(3.0, 4.0))
    with pytest.raises(PreconditionError):
        rellich_identity_report(bessel3(P0, 2.0), 2.0, -3.0, GaugeAnnulus(3.0, 4.0))


def test_ring_mass_and_lower_bound():
    for R in (40.0, 60.0, 80.0):
        assert ring_mass(B, R) == pytest.approx(bessel3_ring_mass(R), rel=1e-6)
        assert 0.98 * math.pi <= ring_mass(B, R) / R <= 1.02 * math.pi
    lb = rellich_lowerbound(zero_field(P0), [1.0, 2.0])
    assert lb.M_hat == 0.0


def test_ring_mass_dilation_covariance():
    kappa = 1.5
    f = solve_helmholtz(SolveConfig(P1, kappa, GaugeAnnulus(1.0, 5.0), 40, 16, bc_inner=1.0,
                                    grading=2.0))
    g = kappa_normalize(f, kappa)
    assert g.kappa == 1.0
    assert ring_mass(g, 3.0) == pytest.approx(kappa**P1.q * ring_mass(f, 2.0), rel=1e-12)


def test_energy_ratio():
    for R in (40.0, 60.0, 80.0):
        assert 0.3 <= energy_ratio(B, R) <= 0.7
    assert energy_ratio(constant_field(P1, 2.0), 1.0) == 0.0
    with pytest.raises(ValueError, match="vanishes"):
        energy_ratio(zero_field(P1), 1.0)


def test_threshold_dichotomy():
    rep = lp_threshold(B, [3.0, 3.5], [40.0, 80.0, 160.0, 320.0])
    assert rep.p_star == 3.0
    np.testing.assert_allclose(rep.increments[3.0], lp3_increment_limit(), rtol=0.05)
    ratios = rep.increments[3.5][1:] / rep.increments[3.5][:-1]
    np.testing.assert_allclose(ratios, 2**-0.5, rtol=0.15)
    assert rep.verdicts == {3.0: "diverging", 3.5: "converging"}
    z = lp_threshold(zero_field(P0), [3.0], [1.0, 2.0, 4.0])
    assert z.verdicts[3.0] == "converging" and np.all(z.traces[3.0] == 0)
    with pytest.raises(ValueError):
        lp_threshold(B, [3.0], [1.0, 3.0])


def test_lp3_constant():
    assert lp3_increment_limit() == pytest.approx(8 / 3 * math.log(2), rel=1e-12)


def test_monotonicity_on_bessel3():
    ts = np.arange(1.0, 60.0, 0.1)
    for ell in (1.0, 3.0, 6.0):
        assert monotonicity_check(trace(B, "F", ts, ell), 0.0).passed
    tr = trace(B, "G", ts)
    assert monotonicity_check(tr, -2.0).passed
    np.testing.assert_allclose(tr.values / ts**2, 2 * math.pi, rtol=5e-3)


def test_monotonicity_on_solved_field(solved):
    ts = solved.grid.t_nodes[16:-8:4]
    for ell in (1.5, 4.0, 7.0):
        assert monotonicity_check(trace(solved, "F", ts, ell), 3 - P1.q, 1e-2).passed
    assert monotonicity_check(trace(solved, "G", ts), 1 - P1.q, 1e-2).passed


def test_monotonicity_detects_a_drop():
    t = np.array([1.0, 2.0, 3.0])
    assert not monotonicity_check(FunctionalTrace("F", P0, t, [1.0, 2.0, 1.9]), 0.0).passed
    assert monotonicity_check(FunctionalTrace("F", P0, t, [1.0, 2.0, 1.9999]), 0.0).passed
    with pytest.raises(ValueError):
        FunctionalTrace("F", P0, [2.0, 1.0], [0.0, 0.0])


def test_trace_csv():
    tr = trace(zero_field(P0), "surface", [1.0, 2.0])
    lines = tr.to_csv().splitlines()
    assert lines == ["kind,t,value,ell_or_p", "surface,1.0,0.0,", "surface,2.0,0.0,"]
    assert trace(B, "F", [1.0], 2.0).to_csv().splitlines()[1].endswith(",2.0")
    with pytest.raises(ValueError):
        trace(B, "F", [1.0])


def test_C_threshold_and_positivity():
    for f in (B, exp_gauge(P0)):
        for r0 in (math.pi / 2, 2.3):
            assert C_threshold(f, r0) == pytest.approx(r0, rel=1e-13)
    res = F_positivity_check(B, math.pi / 2, 3.0)
    assert res["passed"] and res["ell0_admissible"]
    with pytest.raises(PreconditionError):
        F_positivity_check(zero_field(P0), 1.0, 3.0)
    with pytest.raises(PreconditionError):
        C_threshold(zero_field(P0), 1.0)


def test_positivity_on_solved_field(solved):
    C = C_threshold(solved, 5.0)
    res = F_positivity_check(solved, 5.0, max(P1.q - 1, C) + 1)
    assert res["passed"]


def test_report_schema():
    rep = rellich_identity_report(B, 2.0, -3.0, GaugeAnnulus(3.0, 4.0))
    d = json.loads(dumps(rep.as_dict("PASS")))
    assert {"kind", "params", "terms", "residual", "scale", "verdict", "refinement"} <= set(d)
    assert d["kind"] == "rellich" and d["params"]["Q"] == 3.0
