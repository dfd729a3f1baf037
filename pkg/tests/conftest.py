import pytest

from votewire.model import Election, Medium, TallySheet, TerminateCause, TransmissionRecord
from votewire.simulate import generate_scenario, paper_2004, with_centers


def rec(mid, center="C1", medium=Medium.WIRE, stop=1000, start=None, inp=500, out=500,
        call=0, cause=TerminateCause.SERVER_REQUEST):
    start = stop - 10 if start is None else start
    return TransmissionRecord(mid, center, medium, start, stop, inp, out, 5, 5, cause, call)


def tally(mid="M1", center="C1", registered=600, yes=100, no=300, null=0, total=None,
          election=Election.PRR2004, cand=None):
    total = yes + no + null + sum((cand or {}).values()) if total is None else total
    return TallySheet(mid, center, registered, yes, no, null, total, election, cand or {})


@pytest.fixture(scope="session")
def small_scenario():
    cfg = with_centers(paper_2004(seed=7), A=40, B=30, C=20)
    return generate_scenario(cfg)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
