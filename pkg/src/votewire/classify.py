"""Machine and center taxonomy.

A machine is judged on its last successful session only.  Wire machines
fall into High Traffic (A) or Low Traffic (B) by the total octets of that
session; machines on the cellular network form group C whatever their
volume.  Centers take the plurality class of their machines.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateSplit, EmptyInput, NoSessions, TooFewPoints, UnknownCenter
from .model import Medium, TestResult, TrafficClass, TransmissionRecord
from .stats import chi_square_gof

G1 = "G1"
G2 = "G2"


@dataclass(frozen=True)
class Thresholds:
    high: tuple = (23_000, 63_000)
    low: tuple = (1_500, 7_500)


DEFAULT_THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class MachineClassification:
    machine_id: str
    center_id: str
    final_session: TransmissionRecord
    traffic_class: TrafficClass
    subgroup: Optional[str] = None
    reason: str = ""
    n_sessions: int = 1

    @property
    def total_octets(self) -> int:
        return self.final_session.total_octets


@dataclass(frozen=True)
class CenterClassification:
    center_id: str
    center_class: TrafficClass
    composition: Mapping[TrafficClass, int]
    anomaly_flags: frozenset = frozenset()


def select_final_session(records: Sequence[TransmissionRecord]) -> TransmissionRecord:
    """Last successful connection: latest stop, then highest call index, then file order."""
    if not records:
        raise NoSessions("no sessions for machine")
    best_i = max(range(len(records)),
                 key=lambda i: (records[i].session_stop, records[i].call_index, i))
    return records[best_i]


def unclassified_reason(final: TransmissionRecord, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> str:
    if final.medium == Medium.CELLULAR:
        return ""
    total = final.total_octets
    (hlo, hhi), (llo, lhi) = thresholds.high, thresholds.low
    if hlo <= total <= hhi or llo <= total <= lhi:
        return ""
    if total > hhi:
        return "above_high_range"
    if total < llo:
        return "below_low_range"
    return "between_ranges"


def classify_machine(final: TransmissionRecord,
                     thresholds: Thresholds = DEFAULT_THRESHOLDS) -> TrafficClass:
    if final.medium == Medium.CELLULAR:
        return TrafficClass.CELLULAR
    total = final.total_octets
    if thresholds.high[0] <= total <= thresholds.high[1]:
        return TrafficClass.HIGH_WIRE
    if thresholds.low[0] <= total <= thresholds.low[1]:
        return TrafficClass.LOW_WIRE
    return TrafficClass.UNCLASSIFIED


# plurality ties: wire over cellular, then high over low
_TIE_PRIORITY = {TrafficClass.HIGH_WIRE: 0, TrafficClass.LOW_WIRE: 1, TrafficClass.CELLULAR: 2}


def classify_center(members: Sequence[MachineClassification], center_id: str = None) -> CenterClassification:
    if not members:
        raise EmptyInput("center without machines")
    counts = Counter(m.traffic_class for m in members)
    composition = {c: counts.get(c, 0) for c in TrafficClass}
    flags = set()
    if composition[TrafficClass.HIGH_WIRE] and composition[TrafficClass.LOW_WIRE]:
        flags.add("MixedAB")
    ranked = [c for c in _TIE_PRIORITY if composition[c] > 0]
    if ranked:
        label = min(ranked, key=lambda c: (-composition[c], _TIE_PRIORITY[c]))
    else:
        label = TrafficClass.UNCLASSIFIED
        flags.add("AllUnclassified")
    cid = center_id if center_id is not None else members[0].center_id
    return CenterClassification(cid, label, composition, frozenset(flags))


@dataclass(frozen=True)
class SubgroupSplit:
    labels: Mapping[str, str]
    mean_g1: float
    mean_g2: float
    iterations: int


def split_high_subgroups(octets: Mapping[str, float], initial=(27_000.0, 37_000.0),
                         min_gap: float = 1_000.0, max_iter: int = 100) -> SubgroupSplit:
    """Two-means split of received bytes into the inferior (G1) and superior (G2) clouds.

    ``octets`` maps machine id to its final-session ``output_octets``.
    Centers start at ``initial``; a point exactly halfway goes to G1.
    Raises :class:`DegenerateSplit` when a cluster empties or the final
    means lie closer than ``min_gap``.
    """
    if len(octets) < 2:
        raise TooFewPoints("need at least two machines to split")
    ids = sorted(octets)
    x = np.array([float(octets[i]) for i in ids])
    c1, c2 = float(initial[0]), float(initial[1])
    upper = None
    for it in range(1, max_iter + 1):
        new_upper = x > 0.5 * (c1 + c2)
        if not new_upper.any() or new_upper.all():
            raise DegenerateSplit("two-means left a cluster empty")
        c1, c2 = float(x[~new_upper].mean()), float(x[new_upper].mean())
        if upper is not None and np.array_equal(new_upper, upper):
            break
        upper = new_upper
    if c2 - c1 < min_gap:
        raise DegenerateSplit(f"cluster means {c1:.0f} and {c2:.0f} closer than {min_gap:.0f} bytes")
    labels = {i: (G2 if u else G1) for i, u in zip(ids, upper)}
    return SubgroupSplit(labels, c1, c2, it)


CATEGORIES = ("mixed", "all_G1", "all_G2")


def center_category_counts(centers: Iterable[Sequence[str]], p_superior: float):
    """Observed and binomial-expected center counts per category.

    Each element of ``centers`` is the multiset of G labels of one center's
    High Traffic machines.  Returns ``(observed, expected)`` arrays ordered
    as :data:`CATEGORIES`.
    """
    if not 0.0 <= p_superior <= 1.0:
        raise ValueError("p_superior must lie in [0, 1]")
    observed = np.zeros(3)
    expected = np.zeros(3)
    q = 1.0 - p_superior
    n_centers = 0
    for labels in centers:
        n = len(labels)
        if n == 0:
            continue
        n_centers += 1
        n2 = sum(1 for g in labels if g == G2)
        if n2 == 0:
            observed[1] += 1
        elif n2 == n:
            observed[2] += 1
        else:
            observed[0] += 1
        p_all1, p_all2 = q ** n, p_superior ** n
        expected += (1.0 - p_all1 - p_all2, p_all1, p_all2)
    if n_centers == 0:
        raise EmptyInput("no centers with labeled machines")
    return observed, expected


def mixed_center_proportions_test(centers: Iterable[Sequence[str]], p_superior: float = 0.33) -> TestResult:
    """Chi-square check of mixed / all-G1 / all-G2 center counts against independent labels.

    Under independence a center with n labeled machines is all-G1 with
    probability (1-p)^n and all-G2 with p^n.  Categories with zero expected
    count are dropped when nothing was observed in them (flagged); an
    observation in an impossible category makes the result degenerate
    (statistic inf, p 0).
    """
    observed, expected = center_category_counts(centers, p_superior)
    keep = expected > 1e-12
    flags = []
    if not keep.all():
        if np.any(observed[~keep] > 0):
            return TestResult("mixed_center_proportions", math.inf, (2,), 0.0, ("degenerate",))
        flags.append("dropped:" + ",".join(c for c, k in zip(CATEGORIES, keep) if not k))
    if keep.sum() < 2:
        return TestResult("mixed_center_proportions", 0.0, (1,), 1.0, tuple(flags) + ("single_category",))
    res = chi_square_gof(observed[keep], expected[keep])
    return TestResult("mixed_center_proportions", res.statistic, res.df, res.p_value, tuple(flags))


@dataclass(frozen=True)
class PatternLine:
    slope: float
    intercept: float
    support: int
    flat: bool


@dataclass(frozen=True)
class PerVotePattern:
    fraction: float
    flags: np.ndarray = field(repr=False)
    lines: tuple = ()


def _best_line(v, y, slopes, tau):
    best = None
    width = 2.0 * tau
    for s in slopes:
        b = np.sort(y - s * v)
        # widest count of intercepts inside a window of width 2*tau
        hi = np.searchsorted(b, b + width, side="right")
        counts = hi - np.arange(len(b))
        j = int(np.argmax(counts))
        cand = (int(counts[j]), float(s), float(b[j] + tau))
        if best is None or cand[0] > best[0]:
            best = cand
    return best


def per_vote_pattern_share(votes, octets, slopes=None, tau: float = 500.0,
                           flat_slopes=(0.0,), min_support: Optional[int] = None,
                           max_flat_lines: int = 1) -> PerVotePattern:
    """Fraction of machines lying on vote-proportional line segments.

    Greedy Hough extraction: at each round the line (from the flat slopes
    plus the per-vote grid, 41..46 bytes/vote in 0.5 steps by default)
    holding the most unassigned points within ``tau`` bytes is taken and
    its points assigned.  Points captured by a per-vote line are flagged;
    points captured by a flat line are not.  Flat lines stand for the
    horizontal cluster base, so at most ``max_flat_lines`` of them are
    taken; a further flat band would cut across every vertical segment at
    once.  Rounds stop when the best line holds fewer than ``min_support``
    points.
    """
    v = np.asarray(votes, dtype=np.float64)
    y = np.asarray(octets, dtype=np.float64)
    n = len(v)
    if n < 10:
        raise TooFewPoints(f"need at least 10 machines, got {n}")
    if slopes is None:
        slopes = np.arange(41.0, 46.0 + 1e-9, 0.5)
    if min_support is None:
        min_support = max(5, int(math.ceil(0.005 * n)))
    flat_set = tuple(float(s) for s in flat_slopes)
    sloped = [float(s) for s in slopes]
    n_flat = 0
    flags = np.zeros(n, dtype=bool)
    free = np.ones(n, dtype=bool)
    lines = []
    while free.sum() >= min_support:
        idx = np.flatnonzero(free)
        grid = (list(flat_set) if n_flat < max_flat_lines else []) + sloped
        support, s, b = _best_line(v[idx], y[idx], grid, tau)
        if support < min_support:
            break
        hit = idx[np.abs(y[idx] - (b + s * v[idx])) <= tau]
        flat = s in flat_set
        if flat:
            n_flat += 1
        else:
            flags[hit] = True
        free[hit] = False
        lines.append(PatternLine(s, b, len(hit), flat))
    return PerVotePattern(float(flags.mean()), flags, tuple(lines))


@dataclass(frozen=True)
class CompositionRow:
    state: str
    municipality: str
    counts: Mapping[TrafficClass, int]
    n_centers: int
    plurality: TrafficClass
    mixing_index: float


def regional_composition(centers: Iterable[CenterClassification], registry: Mapping) -> list:
    """Per-municipality counts of center classes.

    The mixing index is the share of the municipality's centers that carry
    its plurality class (1.0 = homogeneous).  Rows are sorted by state then
    municipality.
    """
    groups = defaultdict(Counter)
    for cc in centers:
        if cc.center_id not in registry:
            raise UnknownCenter(cc.center_id)
        vc = registry[cc.center_id]
        groups[(vc.state, vc.municipality)][cc.center_class] += 1
    rows = []
    for (state, muni), cnt in sorted(groups.items()):
        counts = {c: cnt.get(c, 0) for c in TrafficClass}
        total = sum(counts.values())
        plur = min((c for c in TrafficClass if counts[c] > 0),
                   key=lambda c: (-counts[c], list(TrafficClass).index(c)))
        rows.append(CompositionRow(state, muni, counts, total, plur, counts[plur] / total))
    return rows


@dataclass
class Classification:
    machines: dict
    centers: dict
    split: Optional[SubgroupSplit] = None
    split_error: str = ""

    def counts(self) -> Counter:
        return Counter(m.traffic_class for m in self.machines.values())

    def machines_in(self, cls: TrafficClass) -> list:
        return [m for _, m in sorted(self.machines.items()) if m.traffic_class == cls]

    def center_of(self, machine_id: str) -> CenterClassification:
        return self.centers[self.machines[machine_id].center_id]


def classify_records(records: Iterable[TransmissionRecord], thresholds: Thresholds = DEFAULT_THRESHOLDS,
                     split_subgroups: bool = True, **split_kw) -> Classification:
    """Run the full taxonomy over all sessions of all machines."""
    by_machine = defaultdict(list)
    for r in records:
        by_machine[r.machine_id].append(r)
    machines = {}
    for mid in sorted(by_machine):
        final = select_final_session(by_machine[mid])
        machines[mid] = MachineClassification(
            mid, final.center_id, final, classify_machine(final, thresholds),
            reason=unclassified_reason(final, thresholds), n_sessions=len(by_machine[mid]))
    split, split_error = None, ""
    if split_subgroups:
        high = {mid: m.final_session.output_octets for mid, m in machines.items()
                if m.traffic_class == TrafficClass.HIGH_WIRE}
        try:
            split = split_high_subgroups(high, **split_kw)
        except (DegenerateSplit, TooFewPoints) as exc:
            split_error = str(exc)
        if split is not None:
            machines = {mid: (MachineClassification(m.machine_id, m.center_id, m.final_session,
                                                    m.traffic_class, split.labels[mid], m.reason,
                                                    m.n_sessions)
                              if mid in split.labels else m)
                        for mid, m in machines.items()}
    members = defaultdict(list)
    for m in machines.values():
        members[m.center_id].append(m)
    centers = {cid: classify_center(members[cid], cid) for cid in sorted(members)}
    return Classification(machines, centers, split, split_error)


def high_center_labels(classification: Classification) -> list:
    """G-label multisets of the High Traffic machines of each High Traffic center."""
    labels = defaultdict(list)
    for m in classification.machines.values():
        if m.subgroup is not None:
            labels[m.center_id].append(m.subgroup)
    return [labels[cid] for cid, cc in classification.centers.items()
            if cc.center_class == TrafficClass.HIGH_WIRE]
