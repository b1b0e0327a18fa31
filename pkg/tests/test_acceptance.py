"""Acceptance gate: one test and one printed pass/fail line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the whole file takes
tens of minutes on one core because criteria 4, 5 and 10 rerun full
parameter scans on the 4001-node grid.
"""

import pytest

from inhomlimit.acceptance import CRITERIA, AcceptanceRun, run_criterion

RUN = AcceptanceRun()


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, RUN)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
