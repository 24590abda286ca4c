"""The twelve acceptance criteria, each run through the same check the CLI uses.

One summary line per criterion is printed at the end of the pytest run.
"""

import time

import pytest

from grushin import checks, cli
from grushin.config import ExperimentConfig

from conftest import ACCEPTANCE_LINES

# criterion number -> runtime budget in seconds
BUDGET = {1: 10, 2: 5, 3: 30, 4: 120, 5: 120, 6: 180, 7: 60, 8: 180, 9: 120, 10: 30, 11: 60,
          12: None}


def _record(number, name, ok, detail):
    line = f"criterion {number:2d} {name:13s} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(number):
    name = checks.CRITERIA[number]
    t0 = time.perf_counter()
    rep = checks.CHECKS[name](ExperimentConfig())
    elapsed = time.perf_counter() - t0
    failed = [f"{v.name}: {v.reason}" for v in rep.verdicts if v.status == checks.FAIL]
    skipped = [v.name for v in rep.verdicts if v.status == checks.SKIP]
    in_budget = elapsed <= BUDGET[number]
    ok = rep.passed and not skipped and in_budget
    detail = f"{len(rep.verdicts)} checks in {elapsed:.1f} s (budget {BUDGET[number]} s)"
    if failed or skipped:
        detail += f"; failed {failed}; skipped {skipped}"
    _record(number, name, ok, detail)
    assert not failed, failed
    assert not skipped, skipped
    assert in_budget, detail


def test_criterion_12_determinism(tmp_path):
    rep = cli.cmd_determinism(ExperimentConfig(), tmp_path)
    v = rep.verdicts[0]
    _record(12, "determinism", rep.passed, v.reason)
    assert rep.passed, v.data.get("differing")
    assert len(v.data["files"]) >= 11
