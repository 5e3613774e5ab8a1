"""The ten acceptance criteria, each at its stated size, exactness and time budget.

Run under pytest, or directly with ``python3 tests/test_acceptance.py`` to get
only the one-line-per-criterion summary.
"""

import sys
import time

import pytest

from optmct.analysis import mct_no_broadcasting_sweep
from optmct.suites import SuiteConfig, run_suite

SEED = 7


def _run(suite, **kw):
    start = time.perf_counter()
    records = list(run_suite(SuiteConfig(suite, seed=SEED, **kw)))
    elapsed = time.perf_counter() - start
    cases = [r for r in records if r["record"] == "case" and r["case"] != "control"]
    controls = [r for r in records if r["record"] == "case" and r["case"] == "control"]
    return cases, controls, records[-1], elapsed


def _line(number, title, ok, detail):
    print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")


def check_normalization():
    cases, _, summary, t = _run("normalize", cases=1000, max_dim=3, max_factors=4)
    ok = len(cases) >= 1000 and summary["fail"] == 0 and summary["pass"] == len(cases) and t <= 120
    return 1, "normalization soundness", ok, \
        f"{summary['pass']}/{len(cases)} circuits exact, {t:.1f}s (limit 120s)"


def check_permutation():
    cases, _, summary, t = _run("permutation", max_factors=5)
    n = sum(c["detail"]["decompositions"] for c in cases)
    ok = summary["fail"] == 0 and t <= 60
    return 2, "permutation decomposition", ok, \
        f"{n} decompositions over {len(cases)} systems, {summary['fail']} failures, " \
        f"{t:.1f}s (limit 60s)"


def check_compatibility():
    cases, _, summary, t = _run("compatibility", cases=500, max_dim=4)
    ok = len(cases) >= 500 and summary["fail"] == 0 and t <= 120
    return 3, "full compatibility of observations", ok, \
        f"{summary['pass']}/{len(cases)} pairs with product and LP witnesses, {t:.1f}s (limit 120s)"


_ATOMICITY = {}


def _atomicity_run():
    if not _ATOMICITY:
        _ATOMICITY["atomicity"] = _run("atomicity", cases=1000, max_dim=3, max_factors=4)
        _ATOMICITY["niwd"] = _run("niwd", cases=1000, max_dim=3, max_factors=4)
    return _ATOMICITY


def check_atomicity():
    cases, controls, summary, t = _atomicity_run()["atomicity"]
    refinements = sum(c["detail"]["identity_refinement"] for c in cases)
    control_ok = len(controls) == 1 and controls[0]["verdict"] == "pass" \
        and controls[0]["detail"]["certificate"].startswith("atomicity")
    ok = len(cases) >= 1000 and summary["fail"] == 0 and control_ok and t <= 120
    return 4, "atomicity of the identity", ok, \
        f"{len(cases)} tests ({refinements} identity refinements), 0 counterexamples required, " \
        f"{summary['fail']} found; CT control {'NotInMCT/atomicity' if control_ok else 'misclassified'}; " \
        f"{t:.1f}s (limit 120s)"


def check_lift():
    cases, _, summary, t = _run("lift", cases=500, max_dim=3)
    ok = len(cases) >= 500 and summary["fail"] == 0 and t <= 30
    return 5, "lifted observation round trip", ok, \
        f"{summary['pass']}/{len(cases)} exact, {t:.1f}s (limit 30s)"


def check_exclusion():
    cases, _, summary, t = _run("exclusion", cases=300, max_dim=3, max_factors=4)
    replayed = summary["pass"]
    ok = replayed >= 200 and summary["fail"] == 0 and t <= 60
    return 6, "exclusion coherence", ok, \
        f"{replayed} composed witnesses replayed ({summary['unknown']} unknown, " \
        f"{summary['fail']} failed), {t:.1f}s (limit 60s)"


def check_niwd():
    a_cases, _, _, a_t = _atomicity_run()["atomicity"]
    cases, controls, summary, t = _atomicity_run()["niwd"]
    non_disturbing = sum(c["detail"]["non_disturbing"] for c in cases)
    control_ok = len(controls) == 1 and controls[0]["verdict"] == "pass"
    ok = summary["fail"] == 0 and control_ok and non_disturbing > 0 and a_t + t <= 120
    return 7, "no information without disturbance", ok, \
        f"{non_disturbing} non-disturbing tests all trivial; CT control " \
        f"{'returns false' if control_ok else 'wrong'}; {t:.1f}s"


def check_broadcast():
    start = time.perf_counter()
    reports = [mct_no_broadcasting_sweep(d, 500, SEED) for d in (2, 3, 4)]
    t = time.perf_counter() - start
    found = sum(len(r.broadcasting) for r in reports)
    ok = all(r.ok and r.samples >= 500 and r.copy_flagged for r in reports) and t <= 60
    return 8, "no-broadcasting", ok, \
        f"dims 2-4 x 500 samples: {found} broadcasting MCT channels, copy channel flagged " \
        f"{all(r.copy_flagged for r in reports)}, {t:.1f}s (limit 60s)"


def check_closure():
    cases, _, summary, t = _run("closure", cases=500, max_dim=3, max_factors=4)
    ok = len(cases) >= 500 and summary["fail"] == 0 and t <= 60
    return 9, "closure under composition", ok, \
        f"{summary['pass']}/{len(cases)} pairs equal, {t:.1f}s (limit 60s)"


def check_norm():
    cases, _, summary, t = _run("norm", cases=500, max_dim=3)
    eq = sum(1 for c in cases if c["detail"]["permutations"])
    ok = len(cases) >= 500 and summary["fail"] == 0 and t <= 30
    return 10, "operational-norm monotonicity", ok, \
        f"{summary['pass']}/{len(cases)} triples ({eq} with equality under permutations), " \
        f"{t:.1f}s (limit 30s)"


CHECKS = [check_normalization, check_permutation, check_compatibility, check_atomicity,
          check_lift, check_exclusion, check_niwd, check_broadcast, check_closure, check_norm]


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__[6:] for c in CHECKS])
def test_criterion(check, capsys):
    number, title, ok, detail = check()
    with capsys.disabled():
        _line(number, title, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for check in CHECKS:
        number, title, ok, detail = check()
        _line(number, title, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
