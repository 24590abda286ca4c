import numpy as np
import pytest

from grushin import checks
from grushin.config import ExperimentConfig
from grushin.fields import bessel3
from grushin.functionals import F_functional, F_positivity_check, ring_mass
from grushin.geometry import GrushinParams


def _solved(rep):
    return {v.name: v for v in rep.verdicts if v.name.startswith("solved")}


def test_q_below_three_gates():
    cfg = ExperimentConfig(m=1, k=1, alpha=0.5)
    assert _solved(checks.check_rellich(cfg))["solved"].status == checks.SKIP
    mono = _solved(checks.check_monotonicity(cfg))
    assert mono["solved G"].status == checks.SKIP and mono["solved G"].reason == "Q < 3"
    assert all(v.status == checks.PASS for k, v in mono.items() if k != "solved G")


def test_kappa_normalization_reproduces_default_results():
    # kappa = 2 on [0.5, 3.625] normalizes to the default annulus [1, 7.25]
    base, scaled = ExperimentConfig(), ExperimentConfig(kappa=2.0, t_min=0.5, t_max=3.625)
    f, g = checks.solved_field(base, 1), checks.solved_field(scaled, 1)
    np.testing.assert_allclose(g.grid.t_nodes, f.grid.t_nodes, rtol=1e-14)
    np.testing.assert_allclose(g.values, f.values, atol=1e-9)
    for fn in (checks.check_rellich, checks.check_lowerbound, checks.check_energy):
        a, b = _solved(fn(base)), _solved(fn(scaled))
        for name in a:
            assert a[name].status == b[name].status == checks.PASS
    assert ring_mass(g, 3.0) == pytest.approx(ring_mass(f, 3.0), rel=1e-9)


def test_positivity_survives_large_ell():
    B = bessel3(GrushinParams(2, 1, 0.0))
    res = F_positivity_check(B, 2.0, 500.0)
    assert res["passed"] and all(v > 0 for v in res["F_scaled"])
    # F itself overflows at the largest ell; the finite entries agree with F_functional
    assert res["F"][0] == pytest.approx(F_functional(B, 500.0, 2.0), rel=1e-12)
    assert res["F"][2] is None
