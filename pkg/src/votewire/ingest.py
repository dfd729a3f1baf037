"""Parsers for accounting detail logs, tally sheets and the center registry.

Detail files hold blank-line-separated blocks: a timestamp header (epoch
seconds, RFC 3339 or ctime form, read as UTC) followed by indented
``Attribute = Value`` lines.  The header time is the session stop; the
start is the stop minus ``Acct-Session-Time``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional

from .errors import DataError, MalformedRecord, MissingColumn, NonNumericCell
from .model import (Election, Medium, TallySheet, TerminateCause, TransmissionRecord,
                    VotingCenter)

log = logging.getLogger(__name__)

REQUIRED_ATTRIBUTES = (
    "Acct-Input-Octets", "Acct-Output-Octets", "Acct-Input-Packets", "Acct-Output-Packets",
    "Acct-Session-Time", "Acct-Terminate-Cause", "User-Name", "NAS-IP-Address",
    "Calling-Station-Id",
)

TERMINATE_CAUSES = {
    "NAS-Request": TerminateCause.SERVER_REQUEST,
    "Admin-Reset": TerminateCause.SERVER_REQUEST,
    "Session-Timeout": TerminateCause.SERVER_REQUEST,
    "User-Request": TerminateCause.MACHINE_REQUEST,
    "Lost-Carrier": TerminateCause.ERROR,
    "Lost-Service": TerminateCause.ERROR,
    "NAS-Error": TerminateCause.ERROR,
    "Port-Error": TerminateCause.ERROR,
    "Service-Unavailable": TerminateCause.ERROR,
}

_ATTR_RE = re.compile(r"^\s+([A-Za-z0-9-]+)\s*=\s*(.*?)\s*$")


def parse_timestamp(text: str) -> int:
    """Epoch seconds, RFC 3339, or ctime (``Sun Aug 15 20:31:02 2004``) to epoch seconds UTC."""
    text = text.strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00").replace("z", "+00:00"))
    except ValueError:
        try:
            dt = datetime.strptime(re.sub(r"\s+", " ", text), "%a %b %d %H:%M:%S %Y")
        except ValueError:
            raise ValueError(f"unrecognized timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class ParseReport:
    blocks: int = 0
    skipped: list = field(default_factory=list)      # (line_no, reason)
    duplicates: list = field(default_factory=list)   # (machine_id, call_index)


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    if hasattr(data, "read"):
        return _decode(data.read())
    return data


def _blocks(text: str):
    block, start = [], 0
    for no, line in enumerate(text.splitlines(), 1):
        if line.strip():
            if not block:
                start = no
            block.append(line)
        elif block:
            yield start, block
            block = []
    if block:
        yield start, block


def _uint(attrs, name, line_no):
    value = attrs[name]
    if not re.fullmatch(r"\d+", value):
        raise MalformedRecord(line_no, f"{name} is not a nonnegative integer: {value!r}")
    return int(value)


def _parse_block(start, lines, nas_map, occurrence):
    try:
        stop = parse_timestamp(lines[0])
    except ValueError as exc:
        raise MalformedRecord(start, str(exc)) from None
    attrs, where = {}, {}
    for offset, line in enumerate(lines[1:], 1):
        m = _ATTR_RE.match(line)
        if not m:
            raise MalformedRecord(start + offset, f"not an indented 'Attribute = Value' line: {line!r}")
        value = m.group(2)
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        attrs[m.group(1)] = value
        where[m.group(1)] = start + offset
    for name in REQUIRED_ATTRIBUTES:
        if name not in attrs:
            raise MalformedRecord(start, f"missing attribute {name}")
    counters = {name: _uint(attrs, name, where[name]) for name in
                ("Acct-Input-Octets", "Acct-Output-Octets", "Acct-Input-Packets",
                 "Acct-Output-Packets", "Acct-Session-Time")}
    nas = attrs["NAS-IP-Address"]
    if nas_map is None:
        medium = Medium.WIRE
    elif nas in nas_map:
        medium = Medium(nas_map[nas])
    else:
        raise MalformedRecord(where["NAS-IP-Address"], f"NAS {nas} not in the medium map")
    machine_id = attrs["User-Name"]
    if not machine_id:
        raise MalformedRecord(where["User-Name"], "empty User-Name")
    session_id = attrs.get("Acct-Session-Id", "")
    if re.fullmatch(r"\d+", session_id):
        call_index = int(session_id)
    else:
        call_index = occurrence.get(machine_id, 0)
    occurrence[machine_id] = occurrence.get(machine_id, 0) + 1
    return TransmissionRecord(
        machine_id=machine_id,
        center_id=attrs["Calling-Station-Id"],
        medium=medium,
        session_start=stop - counters["Acct-Session-Time"],
        session_stop=stop,
        input_octets=counters["Acct-Input-Octets"],
        output_octets=counters["Acct-Output-Octets"],
        input_packets=counters["Acct-Input-Packets"],
        output_packets=counters["Acct-Output-Packets"],
        terminate_cause=TERMINATE_CAUSES.get(attrs["Acct-Terminate-Cause"], TerminateCause.OTHER),
        call_index=call_index,
    )


def parse_radius_detail(data, nas_map: Optional[Mapping[str, str]] = None, strict: bool = True,
                        report: Optional[ParseReport] = None) -> list:
    """Parse a detail log into :class:`TransmissionRecord` objects.

    ``nas_map`` maps NAS IP addresses to ``"Wire"``/``"Cellular"``; without
    it every session is taken as wire.  In strict mode the first bad block
    raises :class:`MalformedRecord`; otherwise bad blocks are skipped and
    recorded in ``report``.  A repeated ``(machine, call index)`` keeps the
    later block and is noted in ``report.duplicates``.
    """
    report = report if report is not None else ParseReport()
    text = _decode(data)
    records, seen, occurrence = [], {}, {}
    for start, lines in _blocks(text):
        report.blocks += 1
        try:
            rec = _parse_block(start, lines, nas_map, occurrence)
        except MalformedRecord as exc:
            if strict:
                raise
            log.warning("skipping detail block at line %d: %s", exc.line_no, exc.reason)
            report.skipped.append((exc.line_no, exc.reason))
            continue
        key = (rec.machine_id, rec.call_index)
        if key in seen:
            report.duplicates.append(key)
            records[seen[key]] = None
        seen[key] = len(records)
        records.append(rec)
    return [r for r in records if r is not None]


TALLY_COLUMNS = ("machine_id", "center_id", "registered", "yes", "no", "null", "total", "election_id")


def parse_tally_csv(data) -> list:
    """Parse tally sheets; extra columns become per-option counts (blank = absent)."""
    reader = csv.DictReader(io.StringIO(_decode(data)))
    header = reader.fieldnames or []
    for col in TALLY_COLUMNS:
        if col not in header:
            raise MissingColumn(col)
    options = [c for c in header if c not in TALLY_COLUMNS]
    out = []
    for row_no, row in enumerate(reader, 2):
        def num(col):
            value = (row.get(col) or "").strip()
            if not re.fullmatch(r"\d+", value):
                raise NonNumericCell(row_no, col, value)
            return int(value)
        try:
            election = Election(row["election_id"].strip())
        except ValueError:
            raise MalformedRecord(row_no, f"unknown election {row['election_id']!r}") from None
        cand = {opt: num(opt) for opt in options if (row.get(opt) or "").strip()}
        out.append(TallySheet(
            machine_id=row["machine_id"], center_id=row["center_id"],
            registered_voters=num("registered"), yes_votes=num("yes"), no_votes=num("no"),
            null_votes=num("null"), total_votes=num("total"), election_id=election,
            candidate_votes=cand))
    return out


def parse_registry_csv(data) -> dict:
    """Center registry: ``center_id,parish,municipality,state,machine_ids`` (ids ';'-joined)."""
    reader = csv.DictReader(io.StringIO(_decode(data)))
    for col in ("center_id", "parish", "municipality", "state"):
        if col not in (reader.fieldnames or []):
            raise MissingColumn(col)
    out = {}
    for row in reader:
        ids = tuple(x for x in (row.get("machine_ids") or "").split(";") if x)
        out[row["center_id"]] = VotingCenter(row["center_id"], row["parish"], row["municipality"],
                                             row["state"], ids)
    return out


def parse_nas_map(data) -> dict:
    reader = csv.DictReader(io.StringIO(_decode(data)))
    for col in ("nas_ip", "medium"):
        if col not in (reader.fieldnames or []):
            raise MissingColumn(col)
    out = {}
    for row_no, row in enumerate(reader, 2):
        try:
            out[row["nas_ip"].strip()] = Medium(row["medium"].strip()).value
        except ValueError:
            raise MalformedRecord(row_no, f"unknown medium {row['medium']!r}") from None
    return out


@dataclass
class CrossCheckReport:
    matched: int
    log_only: list
    tally_only: list
    time_anomalies: list      # (machine_id, session_start, poll_close)
    counter_anomalies: list   # (machine_id, reason)
    skipped_blocks: int = 0
    duplicate_sessions: list = field(default_factory=list)
    tally_anomalies: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "log_only": list(self.log_only),
            "tally_only": list(self.tally_only),
            "time_anomalies": [list(t) for t in self.time_anomalies],
            "counter_anomalies": [list(t) for t in self.counter_anomalies],
            "skipped_blocks": self.skipped_blocks,
            "duplicate_sessions": [list(t) for t in self.duplicate_sessions],
            "tally_anomalies": list(self.tally_anomalies),
        }


def id_differences(a_ids: Iterable[str], b_ids: Iterable[str]):
    a, b = set(a_ids), set(b_ids)
    return len(a & b), sorted(a - b), sorted(b - a)


def cross_check(records: Iterable[TransmissionRecord], tallies: Iterable[TallySheet],
                poll_close: int) -> CrossCheckReport:
    """Compare the log evidence with the tally evidence.

    Only 2004 tallies take part in the id comparison.  A machine whose
    final session started strictly before ``poll_close`` is a time anomaly;
    any session with a zero octet counter is a counter anomaly.
    """
    from .classify import select_final_session

    by_machine = {}
    counter = []
    for r in records:
        by_machine.setdefault(r.machine_id, []).append(r)
        if r.input_octets == 0 or r.output_octets == 0:
            which = "zero_octets" if r.total_octets == 0 else (
                "zero_input_octets" if r.input_octets == 0 else "zero_output_octets")
            counter.append((r.machine_id, which))
    tallies = [t for t in tallies if t.election_id == Election.PRR2004]
    matched, log_only, tally_only = id_differences(by_machine, (t.machine_id for t in tallies))
    times = []
    for mid in sorted(by_machine):
        final = select_final_session(by_machine[mid])
        if final.session_start < poll_close:
            times.append((mid, final.session_start, poll_close))
    return CrossCheckReport(matched, log_only, tally_only, times, sorted(counter),
                            tally_anomalies=sorted(t.machine_id for t in tallies if t.anomaly))


# normalized dataset (JSON lines)

@dataclass
class Dataset:
    records: list
    tallies: list
    centers: dict
    poll_close: Optional[int] = None

    def tallies_for(self, election: Election) -> list:
        return [t for t in self.tallies if t.election_id == election]


def _record_row(r: TransmissionRecord) -> dict:
    return {"kind": "record", "machine_id": r.machine_id, "center_id": r.center_id,
            "medium": r.medium.value, "session_start": r.session_start,
            "session_stop": r.session_stop, "input_octets": r.input_octets,
            "output_octets": r.output_octets, "input_packets": r.input_packets,
            "output_packets": r.output_packets, "terminate_cause": r.terminate_cause.value,
            "call_index": r.call_index}


def _tally_row(t: TallySheet) -> dict:
    return {"kind": "tally", "machine_id": t.machine_id, "center_id": t.center_id,
            "registered_voters": t.registered_voters, "yes_votes": t.yes_votes,
            "no_votes": t.no_votes, "null_votes": t.null_votes, "total_votes": t.total_votes,
            "election_id": t.election_id.value,
            "candidate_votes": dict(sorted(t.candidate_votes.items())),
            "anomaly": t.anomaly}


def _center_row(c: VotingCenter) -> dict:
    return {"kind": "center", "center_id": c.center_id, "parish": c.parish,
            "municipality": c.municipality, "state": c.state, "machine_ids": list(c.machine_ids)}


def dump_dataset_jsonl(dataset: Dataset) -> str:
    lines = []
    if dataset.poll_close is not None:
        lines.append(json.dumps({"kind": "meta", "poll_close": dataset.poll_close}, sort_keys=True))
    lines += [json.dumps(_center_row(c), sort_keys=True) for _, c in sorted(dataset.centers.items())]
    lines += [json.dumps(_record_row(r), sort_keys=True) for r in dataset.records]
    lines += [json.dumps(_tally_row(t), sort_keys=True) for t in dataset.tallies]
    return "\n".join(lines) + "\n"


def load_dataset_jsonl(data) -> Dataset:
    records, tallies, centers, poll_close = [], [], {}, None
    for no, line in enumerate(_decode(data).splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            kind = row.pop("kind")
            if kind == "record":
                row["medium"] = Medium(row["medium"])
                row["terminate_cause"] = TerminateCause(row["terminate_cause"])
                records.append(TransmissionRecord(**row))
            elif kind == "tally":
                row.pop("anomaly", None)
                row["election_id"] = Election(row["election_id"])
                tallies.append(TallySheet(**row))
            elif kind == "center":
                row["machine_ids"] = tuple(row["machine_ids"])
                centers[row["center_id"]] = VotingCenter(**row)
            elif kind == "meta":
                poll_close = row.get("poll_close")
            else:
                raise ValueError(f"unknown row kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"dataset line {no}: {exc}") from None
    return Dataset(records, tallies, centers, poll_close)
