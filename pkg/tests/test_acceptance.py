"""The fifteen acceptance criteria at their pinned sizes and tolerances.

Each test prints one PASS/FAIL line (shown even under output capture).
Set SRPFMC_ACCEPTANCE_SCALE=quick for a fast smoke run at reduced sizes.
"""
import os

import pytest

from srpfmc import acceptance

SCALE = os.environ.get("SRPFMC_ACCEPTANCE_SCALE", "full")


@pytest.fixture(scope="module")
def ctx():
    return acceptance.Context(seed=1, workers=int(os.environ.get("SRPFMC_WORKERS", "1")), scale=SCALE)


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, ctx, capsys):
    result = acceptance.CRITERIA[number](ctx)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
