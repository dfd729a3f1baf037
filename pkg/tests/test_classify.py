import numpy as np
import pytest

from votewire.classify import (G1, G2, MachineClassification, center_category_counts,
                               classify_center, classify_machine, classify_records,
                               high_center_labels, mixed_center_proportions_test,
                               per_vote_pattern_share, regional_composition,
                               select_final_session, split_high_subgroups, unclassified_reason)
from votewire.errors import DegenerateSplit, EmptyInput, NoSessions, TooFewPoints, UnknownCenter
from votewire.model import Medium, TrafficClass, VotingCenter

from conftest import rec

A, B, C, U = (TrafficClass.HIGH_WIRE, TrafficClass.LOW_WIRE, TrafficClass.CELLULAR,
              TrafficClass.UNCLASSIFIED)


def test_final_session_latest_stop():
    r1, r2 = rec("M", stop=100, call=1), rec("M", stop=200, call=0)
    assert select_final_session([r1, r2]) is r2


def test_final_session_ties():
    r1, r2 = rec("M", stop=100, call=2), rec("M", stop=100, call=1)
    assert select_final_session([r1, r2]) is r1
    r3, r4 = rec("M", stop=100, inp=1), rec("M", stop=100, inp=2)
    assert select_final_session([r3, r4]) is r4      # later in file
    with pytest.raises(NoSessions):
        select_final_session([])


@pytest.mark.parametrize("total,medium,expected", [
    (30_000, Medium.WIRE, A), (23_000, Medium.WIRE, A), (63_000, Medium.WIRE, A),
    (4_000, Medium.WIRE, B), (1_500, Medium.WIRE, B), (7_500, Medium.WIRE, B),
    (10_000, Medium.WIRE, U), (70_000, Medium.WIRE, U), (1_000, Medium.WIRE, U),
    (30_000, Medium.CELLULAR, C), (10, Medium.CELLULAR, C),
])
def test_classify_machine(total, medium, expected):
    r = rec("M", medium=medium, inp=total // 2, out=total - total // 2)
    assert classify_machine(r) == expected


def test_unclassified_reasons():
    assert unclassified_reason(rec("M", inp=5000, out=5000)) == "between_ranges"
    assert unclassified_reason(rec("M", inp=50_000, out=50_000)) == "above_high_range"
    assert unclassified_reason(rec("M", inp=100, out=100)) == "below_low_range"
    assert unclassified_reason(rec("M", inp=15_000, out=15_000)) == ""


def _members(*classes):
    return [MachineClassification(f"M{i}", "X", rec(f"M{i}"), c) for i, c in enumerate(classes)]


def test_center_plurality_and_ties():
    assert classify_center(_members(A, A, B)).center_class == A
    assert classify_center(_members(A, B)).center_class == A
    assert classify_center(_members(B, C)).center_class == B
    assert classify_center(_members(C, C, B)).center_class == C
    assert classify_center(_members(A, U, U)).center_class == A


def test_center_flags():
    assert "MixedAB" in classify_center(_members(A, B)).anomaly_flags
    cc = classify_center(_members(U, U))
    assert cc.center_class == U and "AllUnclassified" in cc.anomaly_flags
    with pytest.raises(EmptyInput):
        classify_center([])


def test_split_examples():
    octets = {"a": 26_000, "b": 27_500, "c": 28_000, "d": 36_000, "e": 37_500}
    s = split_high_subgroups(octets)
    assert [s.labels[k] for k in "abcde"] == [G1, G1, G1, G2, G2]
    assert s.mean_g1 == pytest.approx(27_166.6667, abs=1e-3)
    assert s.mean_g2 == pytest.approx(36_750)


def test_split_degenerate():
    with pytest.raises(DegenerateSplit):
        split_high_subgroups({"a": 30_000, "b": 30_100, "c": 30_200})
    with pytest.raises(DegenerateSplit):
        split_high_subgroups({"a": 10_000, "b": 10_500})
    with pytest.raises(TooFewPoints):
        split_high_subgroups({"a": 1})


def test_split_midpoint_goes_to_g1():
    s = split_high_subgroups({"a": 32_000, "b": 27_000, "c": 37_000}, max_iter=1)
    assert s.labels["a"] == G1


def test_category_counts():
    obs, exp = center_category_counts([[G1, G2], [G1], [G2, G2]], 0.5)
    assert list(obs) == [1, 1, 1]
    # n=2: (.5, .25, .25) twice; n=1: (0, .5, .5)
    assert list(exp) == pytest.approx([1.0, 1.0, 1.0])


def test_proportions_test_under_independence():
    rng = np.random.default_rng(3)
    centers = [[G2 if u < 0.33 else G1 for u in rng.random(4)] for _ in range(2000)]
    r = mixed_center_proportions_test(centers, 0.33)
    assert r.df == (2,) and r.p_value > 0.001


def test_proportions_test_clustered_centers():
    # perfect clustering: whole centers share one label
    centers = [[G1] * 4] * 300 + [[G2] * 4] * 150
    assert mixed_center_proportions_test(centers, 0.33).p_value < 1e-10


def test_proportions_test_impossible_category():
    r = mixed_center_proportions_test([[G2, G2]], 0.0)
    assert r.p_value == 0.0 and "degenerate" in r.flags


def test_per_vote_flat_cloud():
    rng = np.random.default_rng(0)
    votes = rng.integers(100, 600, 500)
    octets = 5000 + rng.normal(0, 100, 500)
    assert per_vote_pattern_share(votes, octets).fraction == 0.0


def test_per_vote_single_line():
    votes = np.arange(100, 600, 5)
    octets = 1000 + 43.0 * votes
    r = per_vote_pattern_share(votes, octets)
    assert r.fraction == 1.0
    # several grid slopes hold all points within tau; any of them is a per-vote line
    assert not r.lines[0].flat and abs(r.lines[0].slope - 43.0) <= 2.0


def test_per_vote_too_few():
    with pytest.raises(TooFewPoints):
        per_vote_pattern_share([1, 2], [3, 4])


def test_regional_composition():
    from votewire.classify import CenterClassification
    reg = {f"X{i}": VotingCenter(f"X{i}", "p", "m1" if i < 3 else "m2", "s") for i in range(5)}
    centers = [CenterClassification(f"X{i}", c, {}) for i, c in enumerate([A, A, B, C, C])]
    rows = regional_composition(centers, reg)
    assert [(r.municipality, r.plurality, r.n_centers) for r in rows] == [("m1", A, 3), ("m2", C, 2)]
    assert rows[0].mixing_index == pytest.approx(2 / 3)
    with pytest.raises(UnknownCenter):
        regional_composition([CenterClassification("Z", A, {})], reg)


def test_classify_records_scenario(small_scenario):
    cl = classify_records(small_scenario.records)
    truth = small_scenario.truth
    agree = sum(cl.machines[m].traffic_class == t.traffic_class for m, t in truth.items())
    assert agree / len(truth) >= 0.99
    assert cl.split is not None
    labels = high_center_labels(cl)
    assert all(set(l) <= {G1, G2} for l in labels)
