import dataclasses

import numpy as np
import pytest

from votewire.classify import classify_records
from votewire.errors import InvalidConfig
from votewire.ingest import Dataset
from votewire.model import TrafficClass
from votewire.simulate import (CalibrationModel, FixedTally, PROFILE_A, PROFILE_B, PROFILE_C,
                               calibration_run, config_from_dict, config_to_dict,
                               generate_scenario, machine_table, paper_2004, with_centers,
                               write_nas_map_csv, write_registry_csv, write_radius_detail,
                               write_tally_csv, write_truth_jsonl)


def small(seed=11, **n):
    return with_centers(paper_2004(seed=seed), **({"A": 15, "B": 10, "C": 8} | n))


def test_profiles_peak_at_four_machines():
    for p in (PROFILE_A, PROFILE_B, PROFILE_C):
        assert int(np.argmax(p)) == 3
        assert sum(p) == pytest.approx(1.0)


def test_determinism_and_seed_sensitivity():
    a, b = generate_scenario(small()), generate_scenario(small())
    assert a.records == b.records and a.tallies == b.tallies and a.truth == b.truth
    c = generate_scenario(small(seed=12))
    assert c.records != a.records


def test_table_agrees_with_objects():
    cfg = small()
    tab, ds = machine_table(cfg), generate_scenario(cfg)
    votes = {t.machine_id: t.total_votes for t in ds.tallies if t.election_id.value == "PRR2004"}
    assert len(tab) == len(votes)
    assert sorted(tab.votes.tolist()) == sorted(votes.values())


def test_truth_matches_realized_classes(small_scenario):
    cl = classify_records(small_scenario.records)
    assert all(cl.machines[m].traffic_class == t.traffic_class
               for m, t in small_scenario.truth.items())


def test_every_machine_has_a_2004_tally(small_scenario):
    mids = {t.machine_id for t in small_scenario.tallies if t.election_id.value == "PRR2004"}
    assert mids == set(small_scenario.truth)
    assert all(not t.anomaly for t in small_scenario.tallies)


@pytest.mark.parametrize("field,value", [
    ("p_superior", 1.5), ("retry_prob", -0.1), ("history_correlation", 2.0),
])
def test_validation_top_level(field, value):
    with pytest.raises(InvalidConfig) as exc:
        dataclasses.replace(paper_2004(), **{field: value}).validate()
    assert exc.value.field == field


def test_validation_nested():
    cfg = paper_2004()
    bad = dataclasses.replace(cfg.classes["A"], n_centers=0)
    with pytest.raises(InvalidConfig, match="classes.A.n_centers"):
        dataclasses.replace(cfg, classes={**cfg.classes, "A": bad}).validate()
    tm = dataclasses.replace(cfg.traffic["B"], segments=None)
    with pytest.raises(InvalidConfig, match="segments"):
        dataclasses.replace(cfg, traffic={**cfg.traffic, "B": tm}).validate()


def test_config_dict_round_trip():
    cfg = paper_2004(scale=0.05)
    assert config_from_dict(config_to_dict(cfg)) == cfg
    packed = config_from_dict({"pack": "paper-2004", "scale": 0.05, "p_superior": 0.4}, seed=3)
    assert packed.p_superior == 0.4 and packed.seed == 3
    with pytest.raises(InvalidConfig):
        config_from_dict({"pack": "nope"})


def test_fixed_tally_bytes_ignore_votes():
    cfg = paper_2004(seed=5)
    b = dataclasses.replace(cfg.traffic["B"], per_vote_share=0.0)
    cfg = with_centers(dataclasses.replace(cfg, traffic={**cfg.traffic, "B": b}), A=1, B=400, C=1)
    tab = machine_table(cfg)
    sel = tab.machine_class == "B"
    r = np.corrcoef(tab.votes[sel], tab.output_octets[sel])[0, 1]
    assert abs(r) < 0.1


def test_calibration_zero_noise_no_flags():
    cfg = dataclasses.replace(small(), calibration=CalibrationModel(noise_sd=0.0))
    rep = calibration_run(cfg, file_size=10_000, repetitions=5)
    assert rep.flagged == [] and rep.median_overhead == pytest.approx(600.0)


def test_calibration_injected_machine_flagged():
    cfg = small()
    ds = generate_scenario(cfg)
    target = sorted(ds.truth)[7]
    cfg = dataclasses.replace(cfg, calibration=CalibrationModel(noise_sd=0.0,
                                                                injected={target: 10_000.0}))
    rep = calibration_run(cfg, 10_000, 3, dataset=ds)
    assert rep.flagged == [target]


def test_calibration_file_size_zero_and_errors():
    rep = calibration_run(small(), 0, 4)
    assert rep.median_overhead == pytest.approx(600.0, abs=100)
    with pytest.raises(InvalidConfig):
        calibration_run(small(), -1, 4)
    with pytest.raises(InvalidConfig):
        calibration_run(small(), 10, 0)


def test_writers_on_empty_dataset():
    empty = Dataset([], [], {})
    assert write_radius_detail(empty) == b""
    assert write_tally_csv(empty).decode().splitlines() == [
        "machine_id,center_id,registered,yes,no,null,total,election_id"]
    assert write_registry_csv(empty).count(b"\n") == 1
    assert write_nas_map_csv({}) == b"nas_ip,medium\n"


def test_truth_jsonl(small_scenario):
    lines = write_truth_jsonl(small_scenario).decode().splitlines()
    assert len(lines) == len(small_scenario.truth)


def test_history_tallies_present(small_scenario):
    elections = {t.election_id.value for t in small_scenario.tallies}
    assert elections == {"E1998", "E2000", "PRR2004"}
