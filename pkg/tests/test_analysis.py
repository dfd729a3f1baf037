import math

import numpy as np
import pytest

from votewire import svg
from votewire.analysis import compare, metric_values, parse_group, table1
from votewire.classify import classify_records
from votewire.errors import EmptySelection, UnknownMetric
from votewire.ingest import Dataset
from votewire.model import Election, Medium, TrafficClass
from votewire.report import build_report, json_bytes

from conftest import rec, tally


def test_parse_group():
    g = parse_group("b:E2000", "abstention")
    assert g.cls == TrafficClass.LOW_WIRE and g.elections == (Election.E2000,)
    assert parse_group("A", "abstention_change").elections == (Election.E2000, Election.PRR2004)
    with pytest.raises(EmptySelection):
        parse_group("Z", "no_pct")
    with pytest.raises(EmptySelection):
        parse_group("A:E1998", "no_pct")


def test_table1_totals(small_scenario):
    cl = classify_records(small_scenario.records)
    rows = table1(cl, small_scenario.tallies)
    total = rows[-1]
    assert total["class"] == "Total"
    assert total["votes"] == sum(r["votes"] for r in rows[:-1])
    assert sum(r["vote_pct"] for r in rows[:-1]) == pytest.approx(100.0)
    assert total["machines_in_centers"] == len(cl.machines)


def test_compare_battery(small_scenario):
    cl = classify_records(small_scenario.records)
    c3 = compare(small_scenario, cl, "no_pct")
    assert [t.test_name for t in c3.tests] == ["anova_f", "van_der_waerden", "chi_square_homogeneity"]
    c2 = compare(small_scenario, cl, "abstention", ["A:E2000", "A:PRR2004"])
    assert [t.test_name for t in c2.tests][:3] == ["anova_f", "t_pooled", "t_welch"]
    assert ("A:E2000", "A:PRR2004") in c2.qq
    with pytest.raises(UnknownMetric):
        compare(small_scenario, cl, "turnout")


def test_compare_identical_groups_p_one(small_scenario):
    cl = classify_records(small_scenario.records)
    c = compare(small_scenario, cl, "no_pct", ["A", "A"])
    for t in c.tests:
        # mid-rank scores need not sum to zero exactly, so VdW sits a hair below 1
        assert t.p_value == pytest.approx(1.0, abs=1e-12), t


def test_candidate_maps_to_no_in_2004(small_scenario):
    cl = classify_records(small_scenario.records)
    cand = metric_values("candidate", parse_group("A", "candidate"), small_scenario, cl)
    assert cand and all(0 <= v <= 100 for v in cand.values())


def test_no_pct_zero_ballots_excluded():
    recs = [rec(f"M{i}", center=f"C{i}", medium=Medium.CELLULAR) for i in range(4)]
    tallies = [tally(f"M{i}", f"C{i}", yes=i, no=2 * i) for i in range(4)]
    ds = Dataset(recs, tallies, {})
    cl = classify_records(recs)
    c = compare(ds, cl, "no_pct", ["C", "C"])
    assert c.excluded == {"zero_ballots": 2}


def test_anova_same_distribution_calibrated():
    # A and C machines drawn from one NO% law: ANOVA rejects rarely
    from votewire.stats import anova_f
    hits = 0
    for s in range(100):
        rng = np.random.default_rng(1000 + s)
        a = rng.beta(8, 5, 300) * 100
        c = rng.beta(8, 5, 200) * 100
        hits += anova_f([a, c]).p_value > 0.05
    assert hits >= 90


def test_svg_deterministic_and_wellformed():
    import xml.dom.minidom
    a = svg.scatter([("x", [1, 2, 3], [2, 4, 7])], "t", "v", "b", [("fit", 2.0, 0.0)])
    assert a == svg.scatter([("x", [1, 2, 3], [2, 4, 7])], "t", "v", "b", [("fit", 2.0, 0.0)])
    for doc in (a, svg.boxplot([("A", [1, 2, 3, 4]), ("B", [2, 3])], "box"),
                svg.qq([(1, 1), (2, 2.5)], "qq"), svg.means_chart([("A", [1, None, 3])], ["x", "y", "z"])):
        xml.dom.minidom.parseString(doc.encode())


def test_report_bundle(small_scenario):
    files = build_report(small_scenario, seed=7)
    assert "report.md" in files and any(k.startswith("figures/") for k in files)
    md = files["report.md"].decode()
    assert "Bytes against votes" in md and "Seed: 7" in md
    assert build_report(small_scenario, seed=7) == files


def test_json_bytes_handles_nan():
    assert json_bytes({"b": math.nan, "a": math.inf}) == b'{\n  "a": "inf",\n  "b": null\n}\n'
