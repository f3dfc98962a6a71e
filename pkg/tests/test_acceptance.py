"""Acceptance criteria 1-10 at desk scale (256x256 grids, 100 seeded samples)."""
import pytest

from curvestar.verify import CRITERIA, VerifyConfig, run

RESULTS: dict[int, str] = {}


@pytest.fixture(scope="module")
def cfg(calib):
    return VerifyConfig(seed=0, samples=100, calib=calib)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"{n}-{CRITERIA[n]}")
def test_criterion(cfg, number):
    name = CRITERIA[number]
    checks = run([name], cfg)
    failed = [c for c in checks if not c.passed]
    asserted = [c for c in checks if c.kind == "ASSERTED"]
    worst = max(asserted, key=lambda c: c.value / c.tol if c.tol else 0.0)
    line = (f"criterion {number:2d} {name:11s} {'PASS' if not failed else 'FAIL'}  "
            f"{len(asserted) - len(failed)}/{len(asserted)} asserted, tightest {worst.name}={worst.value:.2e}"
            f" (tol {worst.tol:.0e})")
    RESULTS[number] = line
    print(line)
    assert not failed, "; ".join(f"{c.name}={c.value:.3e} > {c.tol:.0e}" for c in failed)
