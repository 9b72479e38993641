"""All thirteen acceptance criteria at their stated tolerances and time budgets.

Each criterion prints one PASS/FAIL line; the lines are also repeated in the
terminal summary so they show up without ``-s``.
"""
import pytest

from hotspot_dw import acceptance

LINES = []
SLOW = {5, 8, 9, 10, 11, 12}


def _param(k):
    marks = [pytest.mark.slow] if k in SLOW else []
    return pytest.param(k, marks=marks, id=f"criterion{k:02d}")


@pytest.mark.parametrize("number", [_param(k) for k in sorted(acceptance.CRITERIA)])
def test_criterion(number):
    res = acceptance.run_one(number)
    line = res.line()
    print(line)
    LINES.append(line)
    assert res.passed, f"{line}: {res.detail}"
    assert res.elapsed <= res.budget, f"{line}: over budget"
