"""Run the ten acceptance criteria at their fixed tolerances, one line per criterion.

Criteria share one context and run in order, since the simplicity check may
switch the context to a repaired potential that later criteria must use.
"""

import pytest

from bilapeig.acceptance import CRITERIA, Context, run_criterion


@pytest.fixture(scope="module")
def ctx():
    return Context()


@pytest.mark.parametrize("func", CRITERIA, ids=[f"{i:02d}-{f.__name__}" for i, f in enumerate(CRITERIA, 1)])
def test_criterion(func, ctx, capsys):
    res = run_criterion(func, ctx)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.details
    assert res.within_budget, f"{res.seconds:.1f}s exceeds the {res.budget:.0f}s budget"
