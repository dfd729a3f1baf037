"""Domain types and the elementary electoral formulas."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import ZeroBallots, ZeroRegistry


class Medium(str, enum.Enum):
    WIRE = "Wire"
    CELLULAR = "Cellular"


class TerminateCause(str, enum.Enum):
    SERVER_REQUEST = "ServerRequest"
    MACHINE_REQUEST = "MachineRequest"
    ERROR = "Error"
    OTHER = "Other"


class Election(str, enum.Enum):
    E1998 = "E1998"
    E2000 = "E2000"
    PRR2004 = "PRR2004"


class TrafficClass(str, enum.Enum):
    HIGH_WIRE = "A"
    LOW_WIRE = "B"
    CELLULAR = "C"
    UNCLASSIFIED = "U"


class Basis(str, enum.Enum):
    VALID_ONLY = "valid"
    TOTAL_WITH_NULLS = "total"


@dataclass(frozen=True)
class TransmissionRecord:
    """One accounting session.

    ``input_octets`` counts bytes sent by the machine (its Outgoing data);
    ``output_octets`` counts bytes the machine received (Incoming data).
    """

    machine_id: str
    center_id: str
    medium: Medium
    session_start: int
    session_stop: int
    input_octets: int
    output_octets: int
    input_packets: int
    output_packets: int
    terminate_cause: TerminateCause
    call_index: int = 0

    def __post_init__(self):
        if self.session_stop < self.session_start:
            raise ValueError(f"{self.machine_id}: session_stop precedes session_start")
        for name in ("input_octets", "output_octets", "input_packets", "output_packets", "call_index"):
            if getattr(self, name) < 0:
                raise ValueError(f"{self.machine_id}: negative {name}")

    @property
    def total_octets(self) -> int:
        return self.input_octets + self.output_octets


@dataclass(frozen=True)
class TallySheet:
    """A machine's official result sheet.

    For 1998/2000 elections ``yes_votes``/``no_votes`` are zero and the
    options live in ``candidate_votes``.  ``anomaly`` is set when the
    declared total disagrees with the option counts; such rows are kept.
    """

    machine_id: str
    center_id: str
    registered_voters: int
    yes_votes: int
    no_votes: int
    null_votes: int
    total_votes: int
    election_id: Election = Election.PRR2004
    candidate_votes: Mapping[str, int] = field(default_factory=dict)

    @property
    def option_votes(self) -> dict:
        opts = {}
        if self.election_id == Election.PRR2004 or self.yes_votes or self.no_votes:
            opts["yes"] = self.yes_votes
            opts["no"] = self.no_votes
        opts.update(self.candidate_votes)
        return opts

    @property
    def valid_votes(self) -> int:
        return self.yes_votes + self.no_votes + sum(self.candidate_votes.values())

    @property
    def anomaly(self) -> bool:
        return (self.total_votes != self.valid_votes + self.null_votes
                or self.total_votes > self.registered_voters)


@dataclass(frozen=True)
class VotingCenter:
    center_id: str
    parish: str
    municipality: str
    state: str
    machine_ids: tuple = ()


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    df: tuple
    p_value: float
    flags: tuple = ()

    __test__ = False  # not a pytest class

    def to_row(self) -> dict:
        df = self.df[0] if len(self.df) == 1 else list(self.df)
        return {"test": self.test_name, "statistic": self.statistic, "df": df, "p": self.p_value}


@dataclass(frozen=True)
class DistributionSummary:
    n: int
    mean: float
    std: float
    min: float
    max: float
    range: float
    q10: float
    q25: float
    median: float
    q75: float
    q90: float
    std_defined: bool = True


def no_percentage(tally: TallySheet) -> float:
    """Percent of NO over YES+NO (the 2004 ballot had no null option)."""
    denom = tally.yes_votes + tally.no_votes
    if denom <= 0:
        raise ZeroBallots(f"machine {tally.machine_id}: no YES/NO ballots")
    return 100.0 * tally.no_votes / denom


def yes_percentage(tally: TallySheet) -> float:
    denom = tally.yes_votes + tally.no_votes
    if denom <= 0:
        raise ZeroBallots(f"machine {tally.machine_id}: no YES/NO ballots")
    return 100.0 * tally.yes_votes / denom


def abstention_percentage(tally: TallySheet) -> float:
    if tally.registered_voters <= 0:
        raise ZeroRegistry(f"machine {tally.machine_id}: empty registry")
    return 100.0 * (tally.registered_voters - tally.total_votes) / tally.registered_voters


def candidate_percentage(tally: TallySheet, option: str, basis: Basis = Basis.VALID_ONLY) -> float:
    """Share of ``option`` under the chosen denominator.

    ``Basis.VALID_ONLY`` divides by the sum of option counts;
    ``Basis.TOTAL_WITH_NULLS`` adds the null ballots to it.
    """
    opts = tally.option_votes
    if option not in opts:
        raise KeyError(f"option {option!r} not on tally for {tally.machine_id}")
    denom = sum(opts.values())
    if Basis(basis) == Basis.TOTAL_WITH_NULLS:
        denom += tally.null_votes
    if denom <= 0:
        raise ZeroBallots(f"machine {tally.machine_id}: no ballots under basis {Basis(basis).value}")
    return 100.0 * opts[option] / denom


