"""The ten acceptance checks, one test each, with a PASS/FAIL line per check.

Run ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""

import pytest

from capbarrier.acceptance import CRITERIA, Suite, run_acceptance


@pytest.fixture(scope="module")
def suite():
    return Suite(seed=0)


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA],
                         ids=[f"{c[0]}-{c[1].replace(' ', '_')}" for c in CRITERIA])
def test_criterion(suite, number):
    (result,) = run_acceptance(only={number}, suite=suite)
    print()
    print(result.line())
    assert result.passed, result.line()


def test_verdicts_do_not_depend_on_seed(suite):
    base = {r.number: r.passed for r in run_acceptance(only={1, 4}, suite=suite)}
    for seed in (1, 7):
        results = run_acceptance(seed=seed, only={1, 4})
        for r in results:
            print()
            print(r.line())
        assert {r.number: r.passed for r in results} == base
