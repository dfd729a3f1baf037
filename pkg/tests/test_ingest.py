import pytest

from votewire.errors import DataError, MalformedRecord, MissingColumn, NonNumericCell
from votewire.ingest import (Dataset, ParseReport, cross_check, dump_dataset_jsonl,
                             load_dataset_jsonl, parse_nas_map, parse_radius_detail,
                             parse_registry_csv, parse_tally_csv, parse_timestamp)
from votewire.model import Election, Medium, TerminateCause

from conftest import rec, tally

BLOCK = """Sun Aug 15 20:31:02 2004
\tUser-Name = "M-0001"
\tNAS-IP-Address = 10.1.0.1
\tCalling-Station-Id = "C-01"
\tAcct-Session-Time = 62
\tAcct-Input-Octets = 5498
\tAcct-Output-Octets = 30000
\tAcct-Input-Packets = 40
\tAcct-Output-Packets = 60
\tAcct-Terminate-Cause = User-Request
"""

NAS = {"10.1.0.1": "Cellular", "10.0.0.1": "Wire"}


def test_field_mapping():
    (r,) = parse_radius_detail(BLOCK, NAS)
    assert r.machine_id == "M-0001" and r.center_id == "C-01"
    assert r.medium == Medium.CELLULAR
    assert r.session_stop == parse_timestamp("2004-08-15T20:31:02Z")
    assert r.session_start == r.session_stop - 62
    assert (r.input_octets, r.output_octets) == (5498, 30000)
    assert r.terminate_cause == TerminateCause.MACHINE_REQUEST
    assert r.call_index == 0


def test_timestamps():
    assert parse_timestamp("1092601862") == 1092601862
    assert parse_timestamp("2004-08-15T20:31:02Z") == 1092601862
    assert parse_timestamp("Sun Aug 15 20:31:02 2004") == 1092601862
    with pytest.raises(ValueError):
        parse_timestamp("yesterday")


def test_without_nas_map_everything_is_wire():
    (r,) = parse_radius_detail(BLOCK)
    assert r.medium == Medium.WIRE


def test_unknown_nas_is_malformed():
    with pytest.raises(MalformedRecord):
        parse_radius_detail(BLOCK, {"10.0.0.1": "Wire"})


def test_strict_versus_lenient():
    bad = BLOCK.replace("Acct-Input-Octets = 5498", "Acct-Input-Octets = -5")
    text = bad + "\n" + BLOCK
    with pytest.raises(MalformedRecord) as exc:
        parse_radius_detail(text, NAS)
    assert exc.value.line_no == 6
    report = ParseReport()
    recs = parse_radius_detail(text, NAS, strict=False, report=report)
    assert len(recs) == 1 and report.blocks == 2 and len(report.skipped) == 1


def test_missing_attribute():
    text = "\n".join(l for l in BLOCK.splitlines() if "Calling-Station" not in l)
    with pytest.raises(MalformedRecord, match="Calling-Station-Id"):
        parse_radius_detail(text, NAS)


def test_call_index_by_occurrence_and_duplicates():
    two = parse_radius_detail(BLOCK + "\n" + BLOCK, NAS)
    assert [r.call_index for r in two] == [0, 1]
    with_id = BLOCK.replace("\tAcct-Session-Time", '\tAcct-Session-Id = "3"\n\tAcct-Session-Time')
    report = ParseReport()
    recs = parse_radius_detail(with_id + "\n" + with_id, NAS, report=report)
    assert len(recs) == 1 and report.duplicates == [("M-0001", 3)]


TALLY = """machine_id,center_id,registered,yes,no,null,total,election_id,chavez,arias
M1,C1,600,100,300,0,400,PRR2004,,
M1,C1,500,0,0,10,310,E2000,200,100
"""


def test_tally_csv():
    t04, t00 = parse_tally_csv(TALLY)
    assert t04.election_id == Election.PRR2004 and t04.candidate_votes == {}
    assert t00.candidate_votes == {"chavez": 200, "arias": 100}
    assert t00.valid_votes == 300 and not t00.anomaly


def test_tally_csv_errors():
    with pytest.raises(MissingColumn):
        parse_tally_csv("machine_id,center_id\nM,C\n")
    with pytest.raises(NonNumericCell) as exc:
        parse_tally_csv(TALLY.replace("600", "6x0"))
    assert exc.value.row == 2 and exc.value.column == "registered"
    with pytest.raises(MalformedRecord):
        parse_tally_csv(TALLY.replace("E2000", "E1999"))


def test_registry_and_nas():
    reg = parse_registry_csv("center_id,parish,municipality,state,machine_ids\nC1,p,m,s,M1;M2\n")
    assert reg["C1"].machine_ids == ("M1", "M2")
    assert parse_nas_map("nas_ip,medium\n10.0.0.1,Wire\n") == {"10.0.0.1": "Wire"}
    with pytest.raises(MalformedRecord):
        parse_nas_map("nas_ip,medium\n10.0.0.1,Pigeon\n")


def test_cross_check():
    close = 10_000
    recs = [rec("M1", stop=close + 50), rec("M2", stop=close + 5, start=close - 5),
            rec("M3", stop=close + 60, inp=0)]
    tallies = [tally("M1"), tally("M2"), tally("M4"), tally("M3", election=Election.E2000)]
    cc = cross_check(recs, tallies, close)
    assert cc.matched == 2 and cc.log_only == ["M3"] and cc.tally_only == ["M4"]
    assert cc.time_anomalies == [("M2", close - 5, close)]
    assert cc.counter_anomalies == [("M3", "zero_input_octets")]


def test_jsonl_round_trip(small_scenario):
    ds = Dataset(small_scenario.records, small_scenario.tallies, small_scenario.centers,
                 small_scenario.poll_close)
    back = load_dataset_jsonl(dump_dataset_jsonl(ds))
    assert back.records == ds.records and back.tallies == ds.tallies
    assert back.centers == ds.centers and back.poll_close == ds.poll_close


def test_jsonl_bad_line():
    with pytest.raises(DataError, match="line 1"):
        load_dataset_jsonl('{"kind": "spaceship"}\n')
