"""Forensic analysis of voting-machine transmission logs against tally sheets.

The pipeline reads RADIUS accounting detail logs and per-machine tally
sheets, sorts machines into High Traffic, Low Traffic and Cellular classes
by the volume of their final session, fits bytes-versus-votes lines, and
runs a battery of group comparisons on the electoral results.  A seeded
generator produces synthetic countries with known ground truth.
"""

__version__ = "0.1.0"

from .classify import classify_records, per_vote_pattern_share, split_high_subgroups
from .ingest import load_dataset_jsonl, parse_radius_detail, parse_tally_csv
from .model import Election, Medium, TallySheet, TrafficClass, TransmissionRecord
from .regression import group_regression, ols_fit
from .simulate import generate_scenario, paper_2004

__all__ = [
    "Election", "Medium", "TallySheet", "TrafficClass", "TransmissionRecord",
    "classify_records", "generate_scenario", "group_regression", "load_dataset_jsonl",
    "ols_fit", "paper_2004", "parse_radius_detail", "parse_tally_csv",
    "per_vote_pattern_share", "split_high_subgroups",
]
