import math

import pytest
from hypothesis import given, strategies as st

from votewire.errors import ZeroBallots, ZeroRegistry
from votewire.model import (Basis, Election, TransmissionRecord, abstention_percentage,
                            candidate_percentage, no_percentage, yes_percentage)

from conftest import rec, tally


def test_no_percentage_example():
    assert no_percentage(tally(yes=100, no=300)) == pytest.approx(75.0)


def test_no_percentage_zero_ballots():
    with pytest.raises(ZeroBallots):
        no_percentage(tally(yes=0, no=0))


def test_abstention_example():
    assert abstention_percentage(tally(registered=600, yes=100, no=320)) == pytest.approx(30.0)


def test_abstention_zero_registry():
    with pytest.raises(ZeroRegistry):
        abstention_percentage(tally(registered=0))


def test_candidate_bases():
    t = tally(yes=0, no=0, null=20, election=Election.E2000, cand={"chavez": 120, "arias": 60})
    assert candidate_percentage(t, "chavez") == pytest.approx(100 * 120 / 180)
    assert candidate_percentage(t, "chavez", Basis.TOTAL_WITH_NULLS) == pytest.approx(60.0)
    with pytest.raises(KeyError):
        candidate_percentage(t, "salas")


def test_tally_anomaly_flag():
    assert not tally(yes=1, no=2).anomaly
    assert tally(yes=1, no=2, total=5).anomaly
    assert tally(registered=2, yes=1, no=2).anomaly


def test_record_validation():
    with pytest.raises(ValueError):
        rec("M", stop=10, start=20)
    with pytest.raises(ValueError):
        rec("M", inp=-1)
    assert rec("M", inp=3, out=4).total_octets == 7


@given(st.integers(0, 5000), st.integers(0, 5000))
def test_yes_no_complement(y, n):
    t = tally(yes=y, no=n, registered=y + n + 1)
    if y + n == 0:
        with pytest.raises(ZeroBallots):
            no_percentage(t)
        return
    assert no_percentage(t) + yes_percentage(t) == pytest.approx(100.0)
    assert 0.0 <= no_percentage(t) <= 100.0


@given(st.integers(1, 10_000), st.integers(0, 10_000))
def test_abstention_bounds(registered, voted):
    voted = min(voted, registered)
    t = tally(registered=registered, yes=voted, no=0)
    a = abstention_percentage(t)
    assert 0.0 <= a <= 100.0
    assert math.isclose(a, 100.0 * (registered - voted) / registered)
