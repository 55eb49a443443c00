"""The nine acceptance criteria, one test each plus the full sweep.

Each criterion is self-contained (it builds its own models and fixtures) and
reports a one-line verdict with its runtime against a budget; the sweep test
prints all nine lines so a failing run shows the whole scoreboard, not just
the first casualty.
"""

import pytest

from tokenlab.acceptance import CRITERIA, run_criteria


@pytest.mark.parametrize("index", sorted(CRITERIA))
def test_criterion(index):
    r = CRITERIA[index]()
    print(r.line)
    assert r.index == index
    assert r.passed, r.line
    assert r.seconds <= r.budget, f"over budget: {r.line}"


def test_all_criteria_pass_together():
    results = run_criteria()
    for r in results:
        print(r.line)
    assert [r.index for r in results] == list(range(1, 10))
    assert all(r.passed for r in results), "\n".join(
        r.line for r in results if not r.passed)


def test_unknown_criterion_rejected():
    with pytest.raises(ValueError):
        run_criteria([42])
