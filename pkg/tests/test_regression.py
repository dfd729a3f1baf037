import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from votewire.classify import classify_records
from votewire.errors import DegenerateX, EmptySelection, TooFewPoints
from votewire.model import Medium
from votewire.regression import INCOMING, OUTGOING, group_regression, ols_fit, parse_selector

from conftest import rec, tally
import oracles


def test_exact_line():
    f = ols_fit([(0, 5), (1, 7), (2, 9), (3, 11)])
    assert f.slope == pytest.approx(2.0) and f.intercept == pytest.approx(5.0)
    assert f.slope_se == pytest.approx(0.0, abs=1e-12)
    assert f.r_squared == pytest.approx(1.0)


def test_three_points():
    f = ols_fit([(0, 0), (1, 2), (2, 2)])
    assert f.slope == pytest.approx(1.0)
    assert f.intercept == pytest.approx(1 / 3)
    # residuals -1/3, 2/3, -1/3 -> s^2 = (2/3)/1, sxx = 2
    assert f.slope_se == pytest.approx(math.sqrt(1 / 3))


def test_errors():
    with pytest.raises(TooFewPoints):
        ols_fit([(0, 0), (1, 1)])
    with pytest.raises(DegenerateX):
        ols_fit([(1, 0), (1, 1), (1, 2)])


def test_keyword_arrays_match_pairs():
    x, y = [1, 2, 4, 8], [3, 1, 4, 1]
    assert ols_fit(x=x, y=y) == ols_fit(list(zip(x, y)))


def test_large_offsets_are_stable():
    # centered sums keep precision where raw sums would cancel
    x = 1e9 + np.arange(50, dtype=float)
    y = 3.0 * np.arange(50) + 7.0
    f = ols_fit(x=x, y=y)
    assert f.slope == pytest.approx(3.0, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(-1000, 1000)), min_size=3, max_size=12),
       st.integers(-500, 500), st.integers(1, 20))
def test_oracle_and_invariances(pts, shift, scale):
    xs = [p[0] for p in pts]
    if len(set(xs)) < 2:
        return
    ys = [p[1] for p in pts]
    f = ols_fit(x=xs, y=ys)
    slope, icpt, se = oracles.ols_exact(xs, ys)
    assert f.slope == pytest.approx(slope, rel=1e-9, abs=1e-9)
    assert f.intercept == pytest.approx(icpt, rel=1e-9, abs=1e-7)
    assert f.slope_se == pytest.approx(se, rel=1e-6, abs=1e-9)
    g = ols_fit(x=xs, y=[scale * v + shift for v in ys])
    assert g.slope == pytest.approx(scale * f.slope, rel=1e-9, abs=1e-9)
    assert g.slope_se == pytest.approx(scale * f.slope_se, rel=1e-6, abs=1e-9)
    h = ols_fit(x=[v + shift for v in xs], y=ys)
    assert h.slope == pytest.approx(f.slope, rel=1e-9, abs=1e-9)


def test_slope_error_percent():
    f = ols_fit([(0, 0), (1, 2), (2, 2)])
    assert f.slope_error_percent == pytest.approx(100 * f.slope_se)


def test_parse_selector():
    from votewire.model import TrafficClass
    assert parse_selector("a:g1") == (TrafficClass.HIGH_WIRE, "G1")
    assert parse_selector("C") == (TrafficClass.CELLULAR, None)


def _cell_records(n=5):
    recs = [rec(f"M{i}", center=f"C{i}", medium=Medium.CELLULAR, inp=1000 + i, out=8000 + 50 * i)
            for i in range(n)]
    tallies = [tally(f"M{i}", f"C{i}", yes=10 * i, no=10) for i in range(n)]
    return recs, tallies


def test_group_regression_directions():
    recs, tallies = _cell_records()
    cl = classify_records(recs)
    inc = group_regression(cl, tallies, INCOMING, "C")
    out = group_regression(cl, tallies, OUTGOING, "C")
    assert inc.fit.slope == pytest.approx(5.0)
    assert out.fit.slope == pytest.approx(0.1)


def test_group_regression_missing_and_empty():
    recs, tallies = _cell_records()
    cl = classify_records(recs)
    gr = group_regression(cl, tallies[1:], INCOMING, "C")
    assert gr.missing_tallies == ("M0",)
    with pytest.raises(EmptySelection):
        group_regression(cl, tallies, INCOMING, "A")
    with pytest.raises(ValueError):
        group_regression(cl, tallies, "sideways", "C")


def test_two_se_coverage_is_nominal_on_synthetic_fleets():
    # the 2-se band around the fitted slope should hold the true slope about 95.4% of the time
    from votewire.simulate import machine_table, paper_2004, with_centers
    hits, seeds = 0, 400
    for s in range(seeds):
        cfg = with_centers(paper_2004(seed=900_000 + s, include_history=False), A=1, B=1, C=120)
        tab = machine_table(cfg)
        sel = tab.machine_class == "C"
        fit = ols_fit(x=tab.votes[sel], y=tab.output_octets[sel])
        hits += abs(fit.slope - 53.25) <= 2 * fit.slope_se
    assert 0.92 <= hits / seeds <= 0.985
