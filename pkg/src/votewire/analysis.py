"""Group comparisons over electoral metrics, and the class partition table.

Groups are written ``CLASS[:ELECTION]``: ``A`` (2004 by default),
``B:E2000``.  For ``abstention_change`` the election part is a pair,
``A:E2000-PRR2004``, and the value is abstention in the first event
minus abstention in the second.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import DegenerateBinning, EmptySelection, UnknownMetric, ZeroBallots, ZeroRegistry
from .model import (Basis, Election, TallySheet, TestResult, TrafficClass, abstention_percentage,
                    candidate_percentage, no_percentage)
from .stats import (Sample, anova_f, chi_square_homogeneity, qq_points, summarize,
                    t_test_two_sample, van_der_waerden)

METRICS = ("no_pct", "abstention", "abstention_change", "candidate")
CLASS_ORDER = (TrafficClass.HIGH_WIRE, TrafficClass.LOW_WIRE, TrafficClass.CELLULAR,
               TrafficClass.UNCLASSIFIED)


def table1(classification, tallies) -> list:
    """Centers, machines and 2004 votes per center class.

    ``machines_in_centers`` counts every machine of the class's centers
    (whatever its own class); ``machines_in_class`` counts machines by
    their own class.  A final ``Total`` row sums the columns.
    """
    votes = {t.machine_id: t.total_votes for t in tallies if t.election_id == Election.PRR2004}
    rows = {c: {"class": c.value, "centers": 0, "machines_in_centers": 0,
                "machines_in_class": 0, "votes": 0} for c in CLASS_ORDER}
    for cc in classification.centers.values():
        rows[cc.center_class]["centers"] += 1
    for m in classification.machines.values():
        rows[classification.centers[m.center_id].center_class]["machines_in_centers"] += 1
        rows[m.traffic_class]["machines_in_class"] += 1
        rows[classification.centers[m.center_id].center_class]["votes"] += votes.get(m.machine_id, 0)
    out = [rows[c] for c in CLASS_ORDER
           if c != TrafficClass.UNCLASSIFIED or rows[c]["centers"] or rows[c]["machines_in_class"]]
    total = {k: sum(r[k] for r in out) for k in ("centers", "machines_in_centers",
                                                 "machines_in_class", "votes")}
    for r in out:
        r["vote_pct"] = 100.0 * r["votes"] / total["votes"] if total["votes"] else 0.0
    out.append({"class": "Total", **total, "vote_pct": 100.0 if total["votes"] else 0.0})
    return out


def center_tallies(tallies, election: Election) -> dict:
    """Machine sheets of one election summed per center."""
    acc = {}
    for t in tallies:
        if t.election_id != election:
            continue
        a = acc.get(t.center_id)
        if a is None:
            acc[t.center_id] = TallySheet(t.center_id, t.center_id, t.registered_voters, t.yes_votes,
                                          t.no_votes, t.null_votes, t.total_votes, election,
                                          dict(t.candidate_votes))
            continue
        cand = dict(a.candidate_votes)
        for k, v in t.candidate_votes.items():
            cand[k] = cand.get(k, 0) + v
        acc[t.center_id] = TallySheet(a.machine_id, a.center_id,
                                      a.registered_voters + t.registered_voters,
                                      a.yes_votes + t.yes_votes, a.no_votes + t.no_votes,
                                      a.null_votes + t.null_votes, a.total_votes + t.total_votes,
                                      election, cand)
    return acc


@dataclass(frozen=True)
class GroupSpec:
    token: str
    cls: TrafficClass
    elections: tuple


def parse_group(token: str, metric: str) -> GroupSpec:
    head, _, tail = token.strip().partition(":")
    try:
        cls = TrafficClass(head.strip().upper())
    except ValueError:
        raise EmptySelection(f"unknown class in group {token!r}") from None
    if metric == "abstention_change":
        first, _, second = (tail or "E2000-PRR2004").partition("-")
        elections = (Election(first), Election(second or "PRR2004"))
    else:
        elections = (Election(tail or "PRR2004"),)
    if metric == "no_pct" and elections[0] != Election.PRR2004:
        raise EmptySelection("no_pct exists only for the 2004 referendum")
    return GroupSpec(token.strip(), cls, elections)


def default_groups(metric: str) -> list:
    return ["A", "B", "C"]


@dataclass
class Comparison:
    metric: str
    samples: list                         # Sample per group, in request order
    summaries: list                       # DistributionSummary per group
    tests: list                           # TestResult
    qq: dict                              # (label_i, label_j) -> [(qi, qj)]
    excluded: dict = field(default_factory=dict)   # reason -> count


def _option_share(tally, option, basis):
    if tally.election_id == Election.PRR2004 and option not in tally.option_votes:
        option = "no"
    return candidate_percentage(tally, option, basis)


def metric_values(metric, spec: GroupSpec, dataset, classification, basis=Basis.VALID_ONLY,
                  option="chavez", excluded=None):
    """Values of ``metric`` for one group, keyed by machine or center id."""
    if metric not in METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    excluded = excluded if excluded is not None else defaultdict(int)
    centers = classification.centers
    values = {}
    if metric == "no_pct":
        for t in dataset.tallies:
            if t.election_id != Election.PRR2004:
                continue
            cc = centers.get(t.center_id)
            if cc is None:
                excluded["no_transmission"] += 1
                continue
            if cc.center_class != spec.cls:
                continue
            try:
                values[t.machine_id] = no_percentage(t)
            except ZeroBallots:
                excluded["zero_ballots"] += 1
        return values
    per_election = [center_tallies(dataset.tallies, e) for e in spec.elections]
    for cid, cc in sorted(centers.items()):
        if cc.center_class != spec.cls:
            continue
        sheets = [p.get(cid) for p in per_election]
        if any(s is None for s in sheets):
            excluded["missing_election"] += 1
            continue
        try:
            if metric == "abstention":
                values[cid] = abstention_percentage(sheets[0])
            elif metric == "abstention_change":
                values[cid] = abstention_percentage(sheets[0]) - abstention_percentage(sheets[1])
            else:
                values[cid] = _option_share(sheets[0], option, basis)
        except (ZeroBallots, ZeroRegistry):
            excluded["zero_denominator"] += 1
        except KeyError:
            excluded["option_missing"] += 1
    return values


def _guarded(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DegenerateBinning as exc:
        return TestResult(name, math.nan, (), math.nan, ("degenerate", str(exc)))


def compare(dataset, classification, metric: str, groups=None, bins: int = 20,
            basis=Basis.VALID_ONLY, option: str = "chavez", qq_k: int = 99) -> Comparison:
    """Summaries and the full test battery for ``metric`` across ``groups``.

    ANOVA, Van der Waerden and the chi-square homogeneity test always run;
    the pooled and Welch t-tests run when exactly two groups are compared.
    """
    if metric not in METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    specs = [parse_group(g, metric) for g in (groups or default_groups(metric))]
    excluded = defaultdict(int)
    samples = []
    for spec in specs:
        vals = metric_values(metric, spec, dataset, classification, basis, option, excluded)
        if not vals:
            raise EmptySelection(f"group {spec.token!r} has no {metric} values")
        samples.append(Sample(tuple(vals[k] for k in sorted(vals)), spec.token))
    summaries = [summarize(s) for s in samples]
    tests = []
    if len(samples) >= 2:
        tests.append(anova_f(samples))
        if len(samples) == 2:
            tests.append(t_test_two_sample(samples[0], samples[1], pooled=True))
            tests.append(t_test_two_sample(samples[0], samples[1], pooled=False))
        tests.append(van_der_waerden(samples))
        tests.append(_guarded("chi_square_homogeneity", chi_square_homogeneity, samples, bins))
    qq = {}
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            if len(samples[i]) >= 2 and len(samples[j]) >= 2:
                qq[(samples[i].label, samples[j].label)] = qq_points(samples[i], samples[j], qq_k)
    return Comparison(metric, samples, summaries, tests, qq, dict(sorted(excluded.items())))


def summary_row(label, s) -> dict:
    """One line in the Level / Number / Mean / Std dev / quartiles layout."""
    return {"Level": label, "Number": s.n, "Mean": s.mean,
            "Std dev": s.std if s.std_defined else math.nan,
            "25%—Q": s.q25, "Median": s.median, "75%—Q": s.q75}
