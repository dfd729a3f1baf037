"""Least-squares lines of bytes against votes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateX, EmptySelection, TooFewPoints
from .model import Election, TrafficClass


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    r_squared: float
    n: int
    residual_std: float

    @property
    def slope_error_percent(self) -> float:
        """Standard error as a percentage of the slope, as figure captions quote it."""
        return 100.0 * self.slope_se / abs(self.slope) if self.slope else math.inf

    def to_dict(self) -> dict:
        return asdict(self)


def ols_fit(points=None, *, x=None, y=None) -> RegressionFit:
    """Fit ``y = intercept + slope * x`` by ordinary least squares.

    Accepts either a sequence of ``(x, y)`` pairs or the ``x=``/``y=``
    arrays.  Sums of squares are formed on centered data; standard errors
    use the residual variance with n - 2 degrees of freedom.
    """
    if points is not None:
        arr = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        x, y = arr[:, 0], arr[:, 1]
    else:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n < 3:
        raise TooFewPoints(f"need at least 3 points, got {n}")
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    sxx = float(dx @ dx)
    if sxx == 0:
        raise DegenerateX("all x values are identical")
    sxy = float(dx @ dy)
    syy = float(dy @ dy)
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = dy - slope * dx
    ssr = float(resid @ resid)
    s2 = ssr / (n - 2)
    slope_se = math.sqrt(s2 / sxx)
    intercept_se = math.sqrt(s2 * (1.0 / n + mx * mx / sxx))
    r2 = 1.0 - ssr / syy if syy > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    return RegressionFit(slope=slope, intercept=float(intercept), slope_se=slope_se,
                         intercept_se=intercept_se, r_squared=r2, n=n,
                         residual_std=math.sqrt(s2))


INCOMING = "incoming"
OUTGOING = "outgoing"


@dataclass(frozen=True)
class GroupRegression:
    selector: str
    direction: str
    fit: RegressionFit
    points: list = field(repr=False)   # (votes, bytes, machine_id)
    missing_tallies: tuple = ()


def parse_selector(selector: str):
    """``"A"``, ``"C"``, ``"A:G1"`` -> (TrafficClass, subgroup or None)."""
    head, _, sub = selector.partition(":")
    return TrafficClass(head.strip().upper()), (sub.strip().upper() or None)


def group_regression(classification, tallies, direction: str = INCOMING,
                     selector: str = "A") -> GroupRegression:
    """Regress final-session octets on the machine's total votes.

    ``direction`` picks the octet counter from the machine's point of view:
    incoming = received (``output_octets``), outgoing = sent
    (``input_octets``).  Machines lacking a 2004 tally are reported in
    ``missing_tallies`` rather than dropped silently.
    """
    direction = direction.lower()
    if direction not in (INCOMING, OUTGOING):
        raise ValueError(f"direction must be {INCOMING!r} or {OUTGOING!r}")
    cls, sub = parse_selector(selector)
    votes = {t.machine_id: t.total_votes for t in tallies if t.election_id == Election.PRR2004}
    points, missing = [], []
    for mid, mc in sorted(classification.machines.items()):
        if mc.traffic_class != cls or (sub is not None and mc.subgroup != sub):
            continue
        if mid not in votes:
            missing.append(mid)
            continue
        rec = mc.final_session
        octets = rec.output_octets if direction == INCOMING else rec.input_octets
        points.append((votes[mid], octets, mid))
    if len(points) < 3:
        raise EmptySelection(f"selector {selector!r} matches {len(points)} machines with tallies")
    fit = ols_fit(x=[p[0] for p in points], y=[p[1] for p in points])
    return GroupRegression(selector, direction, fit, points, tuple(missing))
