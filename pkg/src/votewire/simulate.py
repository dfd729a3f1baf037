"""Synthetic country generator with ground truth.

Two transmission regimes are modeled.  Under *per-vote* traffic the
received bytes grow linearly with the machine's votes, plus a
retransmission line offset drawn from {0, +step, +2 step, ...}; under
*fixed-tally* traffic the bytes do not depend on votes at all.  Low
Traffic machines may additionally sit on short vote-proportional
segments (a sawtooth in votes).

All randomness comes from :mod:`votewire.rng`, keyed by (seed, purpose,
center index), so a center's draws do not depend on which other centers
exist or in what order they are generated.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional, Union

import numpy as np
from scipy.special import betaincinv

from . import rng
from .errors import InvalidConfig
from .ingest import Dataset, format_timestamp
from .model import (Election, Medium, TallySheet, TerminateCause, TrafficClass,
                    TransmissionRecord, VotingCenter)

CLASSES = (TrafficClass.HIGH_WIRE, TrafficClass.LOW_WIRE, TrafficClass.CELLULAR)
MAX_MACHINES = 18
POLL_CLOSE_2004 = int(datetime(2004, 8, 15, 20, 0, tzinfo=timezone.utc).timestamp())


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class PerVote:
    """bytes = intercept + slope * votes + line * line_step + noise."""
    slope: float
    intercept: float
    noise_sd: float = 0.0
    line_step: float = 0.0
    line_probs: tuple = (1.0,)
    kind: str = "per_vote"


@dataclass(frozen=True)
class FixedTally:
    """bytes = base + noise, whatever the votes."""
    base: float
    noise_sd: float = 0.0
    kind: str = "fixed_tally"


@dataclass(frozen=True)
class Segmented:
    """bytes = base + slope * (votes mod period) + noise, slope ~ U(slope_range)."""
    base: float
    slope_range: tuple = (41.0, 46.0)
    period: int = 30
    noise_sd: float = 50.0
    kind: str = "segmented"


Model = Union[PerVote, FixedTally, Segmented]


@dataclass(frozen=True)
class TrafficModel:
    incoming: Model                 # bytes received by the machine (output_octets)
    outgoing: Model                 # bytes sent by the machine (input_octets)
    per_vote_share: float = 0.0     # fraction whose incoming follows `segments`
    segments: Optional[Segmented] = None
    superior_incoming: float = 0.0  # G2 offsets (High Traffic only)
    superior_outgoing: float = 0.0
    terminate_cause: str = "ServerRequest"
    bytes_per_packet_in: float = 512.0
    bytes_per_packet_out: float = 512.0


@dataclass(frozen=True)
class ElectionModel:
    abstention: tuple = (40.0, 8.0)     # mean, sd (percent, per center)
    chavez_share: tuple = (55.0, 12.0)  # mean, sd (percent of valid votes, per center)
    null_share: float = 0.05            # share of ballots cast that are null
    runner_up_share: float = 0.85       # of the non-Chavez valid votes
    runner_up: str = "runner_up"


@dataclass(frozen=True)
class CenterClassConfig:
    n_centers: int
    machines_per_center: tuple          # probabilities for 1..len machines
    registered_range: tuple             # per machine, inclusive
    abstention: tuple                   # 2004 mean, sd (percent, per center)
    machine_jitter: float               # sd (points) of machine abstention around its center
    no_share: tuple                     # mean, sd (percent, per machine)
    minority_share: float               # machines on the other medium
    history: dict = field(default_factory=dict)   # Election value -> ElectionModel


@dataclass(frozen=True)
class RegionLayout:
    n_states: int = 24
    municipalities_per_state: int = 14
    parishes_per_municipality: int = 3
    blocking: float = 0.95              # chance a center sits in a municipality of its own class


@dataclass(frozen=True)
class CalibrationModel:
    overhead: dict = field(default_factory=lambda: {"A": 600.0, "B": 600.0, "C": 600.0})
    noise_sd: float = 100.0
    injected: dict = field(default_factory=dict)   # machine_id -> extra bytes


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    classes: dict                        # "A"/"B"/"C" -> CenterClassConfig
    traffic: dict                        # "A"/"B"/"C" -> TrafficModel
    p_superior: float = 0.33
    electorate_growth: float = 0.326     # 2000 -> 2004 registry growth
    growth_1998_2000: float = 0.05
    history_correlation: float = 0.6     # center abstention, across elections
    include_history: bool = True
    regions: RegionLayout = field(default_factory=RegionLayout)
    poll_close: int = POLL_CLOSE_2004
    retry_prob: float = 0.12
    early_session_prob: float = 0.0
    calibration: CalibrationModel = field(default_factory=CalibrationModel)

    def validate(self):
        _check_prob("p_superior", self.p_superior)
        _check_prob("retry_prob", self.retry_prob)
        _check_prob("early_session_prob", self.early_session_prob)
        _check_prob("regions.blocking", self.regions.blocking)
        if not -1.0 <= self.history_correlation <= 1.0:
            raise InvalidConfig("history_correlation", "must lie in [-1, 1]")
        if self.electorate_growth <= -1 or self.growth_1998_2000 <= -1:
            raise InvalidConfig("electorate_growth", "must exceed -1")
        for attr in ("n_states", "municipalities_per_state", "parishes_per_municipality"):
            if getattr(self.regions, attr) <= 0:
                raise InvalidConfig(f"regions.{attr}", "must be positive")
        for key in ("A", "B", "C"):
            if key not in self.classes:
                raise InvalidConfig(f"classes.{key}", "missing")
            if key not in self.traffic:
                raise InvalidConfig(f"traffic.{key}", "missing")
            cc = self.classes[key]
            if cc.n_centers <= 0:
                raise InvalidConfig(f"classes.{key}.n_centers", "must be positive")
            probs = np.asarray(cc.machines_per_center, dtype=float)
            if (len(probs) == 0 or len(probs) > MAX_MACHINES or np.any(probs < 0)
                    or probs.sum() <= 0):
                raise InvalidConfig(f"classes.{key}.machines_per_center",
                                    f"need 1..{MAX_MACHINES} nonnegative weights")
            lo, hi = cc.registered_range
            if not 0 < lo <= hi:
                raise InvalidConfig(f"classes.{key}.registered_range", "need 0 < lo <= hi")
            _check_prob(f"classes.{key}.minority_share", cc.minority_share)
            for name, (mean, sd) in (("abstention", cc.abstention), ("no_share", cc.no_share)):
                if sd < 0 or not 0 < mean < 100:
                    raise InvalidConfig(f"classes.{key}.{name}", "mean in (0, 100), sd >= 0")
            if cc.machine_jitter < 0:
                raise InvalidConfig(f"classes.{key}.machine_jitter", "sd must be >= 0")
            _beta_params(cc.no_share, f"classes.{key}.no_share")
            for ename, em in cc.history.items():
                Election(ename)
                _beta_params(em.chavez_share, f"classes.{key}.history.{ename}.chavez_share")
                _check_prob(f"classes.{key}.history.{ename}.null_share", em.null_share)
            tm = self.traffic[key]
            _check_prob(f"traffic.{key}.per_vote_share", tm.per_vote_share)
            if tm.per_vote_share > 0 and tm.segments is None:
                raise InvalidConfig(f"traffic.{key}.segments", "required when per_vote_share > 0")
            for mname in ("incoming", "outgoing", "segments"):
                m = getattr(tm, mname)
                if m is None:
                    continue
                if m.noise_sd < 0:
                    raise InvalidConfig(f"traffic.{key}.{mname}.noise_sd", "must be >= 0")
                if isinstance(m, PerVote):
                    lp = np.asarray(m.line_probs, dtype=float)
                    if np.any(lp < 0) or np.any(lp > 1) or not math.isclose(lp.sum(), 1.0, abs_tol=1e-9):
                        raise InvalidConfig(f"traffic.{key}.{mname}.line_probs",
                                            "probabilities in [0,1] summing to 1")
                if isinstance(m, Segmented) and m.period <= 0:
                    raise InvalidConfig(f"traffic.{key}.{mname}.period", "must be positive")
        if self.calibration.noise_sd < 0:
            raise InvalidConfig("calibration.noise_sd", "must be >= 0")
        return self


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise InvalidConfig(name, f"probability {p} outside [0, 1]")


def _beta_params(mean_sd, name):
    mean, sd = mean_sd[0] / 100.0, mean_sd[1] / 100.0
    if not 0 < mean < 1:
        raise InvalidConfig(name, "mean must lie in (0, 100)")
    if sd == 0:
        return None
    k = mean * (1 - mean) / (sd * sd) - 1.0
    if k <= 0:
        raise InvalidConfig(name, "sd too large for a beta distribution with this mean")
    return mean * k, (1 - mean) * k


# paper-2004 pack -------------------------------------------------------

# Machines per center, 1..18.  Many one- and two-machine centers plus a
# long tail: under independent G labels with p = 0.33 this profile gives
# roughly 56% mixed / 34% all-G1 / 10% all-G2 High Traffic centers.
PROFILE_A = (0.23, 0.18, 0.08, 0.244, 0.04, 0.03, 0.02, 0.04, 0.05, 0.035, 0.02, 0.012,
             0.007, 0.005, 0.003, 0.002, 0.001, 0.001)
PROFILE_B = (0.09, 0.09, 0.14, 0.25, 0.13, 0.10, 0.065, 0.045, 0.033, 0.022, 0.013, 0.009,
             0.005, 0.003, 0.002, 0.001, 0.001, 0.001)
PROFILE_C = (0.20, 0.19, 0.18, 0.23, 0.09, 0.05, 0.03, 0.015, 0.008, 0.007)

TABLE1_CENTERS = {"A": 1876, "B": 1573, "C": 972}


def paper_2004(seed: int = 20040815, scale: float = 1.0, include_history: bool = True) -> ScenarioConfig:
    """Parameter pack shaped after the published 2004 figures.

    Regression coefficients of the High Traffic lowest line and of the
    cellular center, class sizes, NO% and abstention moments per class.
    ``scale`` multiplies the number of centers.
    """
    def n(key):
        return max(1, int(round(TABLE1_CENTERS[key] * scale)))

    hist = {
        "A": {"E1998": ElectionModel((35.69, 6.23), (58.36, 9.90), 0.06, 0.85, "salas"),
              "E2000": ElectionModel((42.43, 6.70), (64.11, 13.10), 0.04, 0.85, "arias")},
        "B": {"E1998": ElectionModel((35.05, 7.83), (51.62, 13.84), 0.06, 0.85, "salas"),
              "E2000": ElectionModel((43.94, 8.25), (54.55, 18.53), 0.04, 0.85, "arias")},
        "C": {"E1998": ElectionModel((38.32, 8.99), (51.46, 11.80), 0.06, 0.85, "salas"),
              "E2000": ElectionModel((42.99, 8.63), (60.39, 13.38), 0.04, 0.85, "arias")},
    }
    classes = {
        # High Traffic abstention sd held at 3 points so the two received-byte
        # clouds stay separable along the votes axis
        "A": CenterClassConfig(n("A"), PROFILE_A, (630, 715), (28.35, 3.0), 1.0, (62.04, 14.65),
                               0.081, hist["A"]),
        "B": CenterClassConfig(n("B"), PROFILE_B, (590, 680), (29.71, 6.34), 2.0, (51.83, 19.25),
                               0.092, hist["B"]),
        "C": CenterClassConfig(n("C"), PROFILE_C, (560, 655), (28.41, 6.16), 2.0, (62.30, 15.92),
                               0.0054, hist["C"]),
    }
    traffic = {
        "A": TrafficModel(incoming=PerVote(47.11, 5606.0, 300.0, 700.0, (0.85, 0.12, 0.03)),
                          outgoing=PerVote(1.28, 5498.0, 60.0),
                          superior_incoming=10_000.0, superior_outgoing=500.0,
                          terminate_cause="ServerRequest",
                          bytes_per_packet_in=512.0, bytes_per_packet_out=512.0),
        "B": TrafficModel(incoming=FixedTally(2500.0, 150.0), outgoing=FixedTally(900.0, 25.0),
                          per_vote_share=0.275, segments=Segmented(3300.0, (41.0, 46.0), 30, 50.0),
                          terminate_cause="MachineRequest",
                          bytes_per_packet_in=300.0, bytes_per_packet_out=48.0),
        "C": TrafficModel(incoming=PerVote(53.25, 8461.0, 300.0), outgoing=PerVote(1.28, 6304.0, 60.0),
                          terminate_cause="ServerRequest",
                          bytes_per_packet_in=512.0, bytes_per_packet_out=512.0),
    }
    return ScenarioConfig(seed=seed, classes=classes, traffic=traffic,
                          include_history=include_history).validate()


PACKS = {"paper-2004": paper_2004}


# JSON round trip of configs ----------------------------------------------

def config_to_dict(config: ScenarioConfig) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(config)))


_MODELS = {"per_vote": PerVote, "fixed_tally": FixedTally, "segmented": Segmented}


def _model(d):
    if d is None or isinstance(d, (PerVote, FixedTally, Segmented)):
        return d
    d = dict(d)
    kind = d.get("kind", "per_vote")
    if kind not in _MODELS:
        raise InvalidConfig("traffic", f"unknown model kind {kind!r}")
    for key in ("line_probs", "slope_range"):
        if key in d:
            d[key] = tuple(d[key])
    return _MODELS[kind](**d)


def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for k, v in override.items():
            out[k] = _merge(base.get(k), v) if k in base else v
        return out
    return override


def config_from_dict(data: dict, seed: Optional[int] = None) -> ScenarioConfig:
    """Build a config from a JSON document.

    ``{"pack": "paper-2004", "scale": 0.1, ...}`` starts from a parameter
    pack and overlays the remaining keys (nested dicts merge).  Field names
    follow :class:`ScenarioConfig`.
    """
    data = dict(data)
    pack = data.pop("pack", None)
    scale = data.pop("scale", 1.0)
    if pack is not None:
        if pack not in PACKS:
            raise InvalidConfig("pack", f"unknown pack {pack!r}")
        data = _merge(config_to_dict(PACKS[pack](scale=scale)), data)
    if seed is not None:
        data["seed"] = seed
    try:
        classes = {}
        for key, cc in data["classes"].items():
            cc = dict(cc)
            hist = {e: (em if isinstance(em, ElectionModel) else
                        ElectionModel(**{k: tuple(v) if isinstance(v, list) else v for k, v in em.items()}))
                    for e, em in cc.pop("history", {}).items()}
            for k in ("machines_per_center", "registered_range", "abstention", "no_share"):
                cc[k] = tuple(cc[k])
            classes[key] = CenterClassConfig(history=hist, **cc)
        traffic = {}
        for key, tm in data["traffic"].items():
            tm = dict(tm)
            for k in ("incoming", "outgoing", "segments"):
                tm[k] = _model(tm.get(k))
            traffic[key] = TrafficModel(**tm)
        rest = {k: v for k, v in data.items() if k not in ("classes", "traffic")}
        if "regions" in rest:
            rest["regions"] = RegionLayout(**rest["regions"])
        if "calibration" in rest:
            rest["calibration"] = CalibrationModel(**rest["calibration"])
        config = ScenarioConfig(classes=classes, traffic=traffic, **rest)
    except KeyError as exc:
        raise InvalidConfig(str(exc.args[0]), "missing") from None
    except TypeError as exc:
        raise InvalidConfig("config", str(exc)) from None
    return config.validate()


# ---------------------------------------------------------------- dataset

@dataclass(frozen=True)
class MachineTruth:
    machine_id: str
    center_id: str
    traffic_class: TrafficClass
    center_class: TrafficClass
    subgroup: Optional[str]
    per_vote: bool          # incoming bytes depend on votes
    line: int               # retransmission line index (0 = lowest)
    incoming_model: str
    outgoing_model: str

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["traffic_class"] = self.traffic_class.value
        d["center_class"] = self.center_class.value
        return d


@dataclass
class SyntheticDataset(Dataset):
    nas_map: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)          # machine_id -> MachineTruth
    center_truth: dict = field(default_factory=dict)   # center_id -> TrafficClass
    config: Optional[ScenarioConfig] = None


NAS_IPS = {Medium.WIRE: ("10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"),
           Medium.CELLULAR: ("10.1.0.1", "10.1.0.2")}

# purposes for substream keys
_P_SIZE, _P_ABST, _P_PLACE, _P_HIST = 1, 2, 3, 4
_P_MIX, _P_REG, _P_JIT, _P_NO, _P_ROUND, _P_SUB, _P_LINE = 10, 11, 12, 13, 14, 15, 16
_P_NOISE_IN, _P_NOISE_OUT, _P_SEG, _P_SEGSLOPE, _P_TIME, _P_RETRY = 17, 18, 19, 20, 21, 22
_P_MUNI, _P_CALIB = 30, 40


def _keys(seed, purpose, idx):
    return rng.derive_keys(seed, (purpose,), idx)


def _beta_draw(u, mean_sd):
    ab = _beta_params(mean_sd, "beta")
    if ab is None:
        return np.full_like(u, mean_sd[0] / 100.0)
    return betaincinv(ab[0], ab[1], u)


def _model_bytes(model, votes, noise, line):
    if isinstance(model, PerVote):
        return model.intercept + model.slope * votes + line * model.line_step + model.noise_sd * noise
    if isinstance(model, FixedTally):
        return model.base + model.noise_sd * noise
    raise TypeError(f"unsupported model {model!r}")


def _stratified_sizes(keys, probs):
    """Machines per center by stratified inverse-CDF sampling.

    Center i of n gets the stratum (rank_i + u_i) / n, where the ranks are a
    random permutation.  The class's size histogram then follows the profile
    to within one center per size, which keeps class vote totals stable.
    """
    n = len(keys)
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(rng.uniform(keys, 0), kind="stable")] = np.arange(n)
    u = (rank + rng.uniform(keys, 1)) / n
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1) + 1


def _center_layout(config):
    """Center ids, classes and global indices (A block, then B, then C)."""
    cls_of, ids = [], []
    for key in ("A", "B", "C"):
        cls_of += [key] * config.classes[key].n_centers
    ids = [f"CV{i + 1:05d}" for i in range(len(cls_of))]
    return ids, np.array(cls_of)


def _place_centers(config, center_cls):
    """Assign each center a (state, municipality, parish) with class blocking."""
    seed, layout = config.seed, config.regions
    n_muni = layout.n_states * layout.municipalities_per_state
    # municipality home classes in proportion to center counts
    counts = np.array([config.classes[k].n_centers for k in ("A", "B", "C")], dtype=float)
    order = np.argsort(rng.uniform(rng.derive_key(seed, _P_MUNI), np.arange(n_muni)), kind="stable")
    cuts = np.round(np.cumsum(counts) / counts.sum() * n_muni).astype(int)
    home = np.empty(n_muni, dtype="<U1")
    start = 0
    for key, cut in zip(("A", "B", "C"), cuts):
        home[order[start:cut]] = key
        start = cut
    n = len(center_cls)
    keys = _keys(seed, _P_PLACE, np.arange(n))
    u_block = rng.uniform(keys, 0)
    u_muni = rng.uniform(keys, 1)
    u_par = rng.uniform(keys, 2)
    muni = np.empty(n, dtype=np.int64)
    for key in ("A", "B", "C"):
        own = np.flatnonzero(home == key)
        if len(own) == 0:
            own = np.arange(n_muni)
        sel = center_cls == key
        blocked = sel & (u_block < layout.blocking)
        muni[blocked] = own[np.minimum((u_muni[blocked] * len(own)).astype(int), len(own) - 1)]
        free = sel & ~blocked
        muni[free] = np.minimum((u_muni[free] * n_muni).astype(int), n_muni - 1)
    parish = np.minimum((u_par * layout.parishes_per_municipality).astype(int),
                        layout.parishes_per_municipality - 1)
    state = muni // layout.municipalities_per_state
    return state, muni, parish


@dataclass
class MachineTable:
    """Columnar per-machine draws, center-major; the objects are built from these."""
    center_ids: list
    center_cls: np.ndarray
    n_machines: np.ndarray          # per center
    state: np.ndarray
    municipality: np.ndarray
    parish: np.ndarray
    abstention_z: np.ndarray        # per center
    center: np.ndarray              # machine -> center index
    slot: np.ndarray
    center_class: np.ndarray        # class of the machine's center
    machine_class: np.ndarray       # class of the machine itself
    registered: np.ndarray
    votes: np.ndarray
    yes: np.ndarray
    no: np.ndarray
    superior: np.ndarray
    line: np.ndarray
    segmented: np.ndarray
    output_octets: np.ndarray       # received by the machine
    input_octets: np.ndarray        # sent by the machine

    def __len__(self):
        return len(self.center)


def machine_table(config: ScenarioConfig) -> MachineTable:
    """Electoral and final-session traffic draws for every machine, as arrays.

    Much cheaper than :func:`generate_scenario` when only votes and octets
    are needed (large Monte-Carlo loops).
    """
    config.validate()
    seed = config.seed
    center_ids, center_cls = _center_layout(config)
    n_centers = len(center_ids)
    cidx = np.arange(n_centers)

    # center-level draws
    size_keys = _keys(seed, _P_SIZE, cidx)
    n_mach = np.empty(n_centers, dtype=np.int64)
    abst_z = rng.normal(_keys(seed, _P_ABST, cidx), 0)
    for key in ("A", "B", "C"):
        sel = center_cls == key
        n_mach[sel] = _stratified_sizes(size_keys[sel], config.classes[key].machines_per_center)
    center_abst = np.empty(n_centers)
    for key in ("A", "B", "C"):
        sel = center_cls == key
        mean, sd = config.classes[key].abstention
        center_abst[sel] = mean + sd * abst_z[sel]
    state, muni, parish = _place_centers(config, center_cls)

    # machine rows, center-major
    m_center = np.repeat(cidx, n_mach)
    m_slot = np.concatenate([np.arange(k) for k in n_mach]) if n_centers else np.zeros(0, int)
    m_cls = center_cls[m_center]
    n_total = len(m_center)

    def mkeys(purpose):
        return _keys(seed, purpose, cidx)[m_center]

    slot = m_slot.astype(np.uint64)

    # minority medium, capped below half of the center
    minority_share = np.array([config.classes[k].minority_share for k in m_cls])
    minority = rng.uniform(mkeys(_P_MIX), slot) < minority_share
    cap = (n_mach[m_center] - 1) // 2
    run = np.cumsum(minority)
    starts = np.concatenate([[0], np.cumsum(n_mach)[:-1]]) if n_centers else np.zeros(0, int)
    before = np.concatenate([[0], run])[starts][m_center]
    minority &= (run - before) <= cap
    machine_cls = np.where(m_cls == "C", np.where(minority, "A", "C"),
                           np.where(minority, "C", m_cls))

    # electorate and votes
    lo = np.array([config.classes[k].registered_range[0] for k in m_cls])
    hi = np.array([config.classes[k].registered_range[1] for k in m_cls])
    registered = lo + np.minimum((rng.uniform(mkeys(_P_REG), slot) * (hi - lo + 1)).astype(np.int64),
                                 hi - lo)
    jitter = np.array([config.classes[k].machine_jitter for k in m_cls])
    abst = np.clip(center_abst[m_center] + jitter * rng.normal(mkeys(_P_JIT), slot), 0.0, 100.0)
    votes = np.clip(np.rint(registered * (1.0 - abst / 100.0)).astype(np.int64), 0, registered)
    u_no = rng.uniform_open(mkeys(_P_NO), slot)
    p_no = np.empty(n_total)
    for key in ("A", "B", "C"):
        sel = m_cls == key
        p_no[sel] = _beta_draw(u_no[sel], config.classes[key].no_share)
    no = np.minimum(np.floor(votes * p_no + rng.uniform(mkeys(_P_ROUND), slot)).astype(np.int64), votes)
    yes = votes - no

    # transmission
    subgroup_u = rng.uniform(mkeys(_P_SUB), slot)
    superior = (machine_cls == "A") & (subgroup_u < config.p_superior)
    noise_in = rng.normal(mkeys(_P_NOISE_IN), slot)
    noise_out = rng.normal(mkeys(_P_NOISE_OUT), slot)
    line_keys, seg_keys = mkeys(_P_LINE), mkeys(_P_SEG)
    incoming = np.empty(n_total)
    outgoing = np.empty(n_total)
    line = np.zeros(n_total, dtype=np.int64)
    segmented = np.zeros(n_total, dtype=bool)
    for key in ("A", "B", "C"):
        sel = machine_cls == key
        if not sel.any():
            continue
        tm = config.traffic[key]
        if isinstance(tm.incoming, PerVote):
            line[sel] = rng.categorical(line_keys[sel], slot[sel], tm.incoming.line_probs)
        incoming[sel] = _model_bytes(tm.incoming, votes[sel], noise_in[sel], line[sel])
        outgoing[sel] = _model_bytes(tm.outgoing, votes[sel], noise_out[sel], 0)
        if tm.per_vote_share > 0:
            seg = sel & (rng.uniform(seg_keys, slot) < tm.per_vote_share)
            sm = tm.segments
            slope = sm.slope_range[0] + (sm.slope_range[1] - sm.slope_range[0]) * \
                rng.uniform(mkeys(_P_SEGSLOPE)[seg], slot[seg])
            incoming[seg] = sm.base + slope * (votes[seg] % sm.period) + sm.noise_sd * noise_in[seg]
            segmented |= seg
    tmA = config.traffic["A"]
    incoming[superior] += tmA.superior_incoming
    outgoing[superior] += tmA.superior_outgoing
    output_octets = np.maximum(np.rint(incoming), 0).astype(np.int64)
    input_octets = np.maximum(np.rint(outgoing), 0).astype(np.int64)
    return MachineTable(center_ids, center_cls, n_mach, state, muni, parish, abst_z, m_center,
                        m_slot, m_cls, machine_cls, registered, votes, yes, no, superior, line,
                        segmented, output_octets, input_octets)


def generate_scenario(config: ScenarioConfig) -> SyntheticDataset:
    """Generate logs, tallies, registry and ground truth for one scenario."""
    t = machine_table(config)
    seed = config.seed
    center_ids, center_cls, n_mach = t.center_ids, t.center_cls, t.n_machines
    state, muni, parish, abst_z = t.state, t.municipality, t.parish, t.abstention_z
    m_center, m_slot, m_cls, machine_cls = t.center, t.slot, t.center_class, t.machine_class
    registered, votes, yes, no = t.registered, t.votes, t.yes, t.no
    superior, line, segmented = t.superior, t.line, t.segmented
    output_octets, input_octets = t.output_octets, t.input_octets
    n_centers = len(center_ids)
    cidx = np.arange(n_centers)
    slot = m_slot.astype(np.uint64)

    def mkeys(purpose):
        return _keys(seed, purpose, cidx)[m_center]

    # session times and earlier failed calls
    tkeys = mkeys(_P_TIME)
    t_off = 600 + (rng.uniform(tkeys, slot * np.uint64(4)) * 13_800).astype(np.int64)
    early = rng.uniform(tkeys, slot * np.uint64(4) + np.uint64(1)) < config.early_session_prob
    early_off = 60 + (rng.uniform(tkeys, slot * np.uint64(4) + np.uint64(2)) * 3_540).astype(np.int64)
    duration = 20 + (rng.uniform(tkeys, slot * np.uint64(4) + np.uint64(3)) * 100).astype(np.int64)
    start = np.where(early, config.poll_close - early_off, config.poll_close + t_off)
    rkeys = mkeys(_P_RETRY)
    rbase = slot * np.uint64(8)
    retries = np.where(rng.uniform(rkeys, rbase) < config.retry_prob,
                       1 + (rng.uniform(rkeys, rbase + np.uint64(1)) < 0.3), 0)

    registry, records, tallies, truth, center_truth = {}, [], [], {}, {}
    layout = config.regions
    machine_ids = [f"{center_ids[c]}-{s + 1:02d}" for c, s in zip(m_center, m_slot)]
    per_center = [[] for _ in range(n_centers)]
    for i, mid in enumerate(machine_ids):
        per_center[m_center[i]].append(mid)
    for c in range(n_centers):
        st = f"S{state[c] + 1:02d}"
        mu = f"{st}-M{muni[c] % layout.municipalities_per_state + 1:02d}"
        cid = center_ids[c]
        registry[cid] = VotingCenter(cid, f"{mu}-P{parish[c] + 1}", mu, st, tuple(per_center[c]))
        center_truth[cid] = TrafficClass(center_cls[c])

    for i, mid in enumerate(machine_ids):
        key = machine_cls[i]
        tm = config.traffic[key]
        cid = center_ids[m_center[i]]
        medium = Medium.CELLULAR if key == "C" else Medium.WIRE
        n_retry = int(retries[i])
        for r in range(n_retry):
            u = rng.uniform(rkeys[i], rbase[i] + np.uint64(2 + 3 * r) + np.arange(3, dtype=np.uint64))
            stop_r = int(start[i]) - 30 - int(u[0] * 570) - 700 * (n_retry - 1 - r)
            dur_r = 5 + int(u[1] * 55)
            frac = u[2] * 0.6
            records.append(TransmissionRecord(
                mid, cid, medium, stop_r - dur_r, stop_r,
                int(input_octets[i] * frac), int(output_octets[i] * frac * 0.5),
                int(math.ceil(input_octets[i] * frac / tm.bytes_per_packet_out)),
                int(math.ceil(output_octets[i] * frac * 0.5 / tm.bytes_per_packet_in)),
                TerminateCause.ERROR, r))
        records.append(TransmissionRecord(
            mid, cid, medium, int(start[i]), int(start[i] + duration[i]),
            int(input_octets[i]), int(output_octets[i]),
            int(math.ceil(input_octets[i] / tm.bytes_per_packet_out)),
            int(math.ceil(output_octets[i] / tm.bytes_per_packet_in)),
            TerminateCause(tm.terminate_cause), n_retry))
        tallies.append(TallySheet(mid, cid, int(registered[i]), int(yes[i]), int(no[i]), 0,
                                  int(votes[i]), Election.PRR2004))
        inc = "segmented" if segmented[i] else tm.incoming.kind
        truth[mid] = MachineTruth(
            mid, cid, TrafficClass(key), TrafficClass(m_cls[i]),
            ("G2" if superior[i] else "G1") if key == "A" else None,
            bool(segmented[i]) or isinstance(tm.incoming, PerVote),
            int(line[i]), inc, tm.outgoing.kind)

    if config.include_history:
        tallies += _history_tallies(config, center_ids, center_cls, registered, m_center, abst_z)
    records.sort(key=lambda r: (r.session_stop, r.machine_id, r.call_index))
    return SyntheticDataset(records=records, tallies=tallies, centers=registry,
                            poll_close=config.poll_close, nas_map=_nas_map(), truth=truth,
                            center_truth=center_truth, config=config)


def _history_tallies(config, center_ids, center_cls, registered, m_center, abst_z):
    """Center-level 1998 and 2000 result sheets for the same centers."""
    seed = config.seed
    n_centers = len(center_ids)
    reg2004 = np.bincount(m_center, weights=registered, minlength=n_centers)
    reg2000 = np.rint(reg2004 / (1.0 + config.electorate_growth))
    regs = {"E2000": reg2000, "E1998": np.rint(reg2000 / (1.0 + config.growth_1998_2000))}
    keys = _keys(seed, _P_HIST, np.arange(n_centers))
    rho = config.history_correlation
    out = []
    for j, ename in enumerate(("E1998", "E2000")):
        z = rho * abst_z + math.sqrt(1.0 - rho * rho) * rng.normal(keys, 3 * j)
        u_ch = rng.uniform_open(keys, 10 + 3 * j)
        rows = []
        for c in range(n_centers):
            em = config.classes[center_cls[c]].history.get(ename)
            if em is None:
                rows.append(None)
                continue
            abst = min(max(em.abstention[0] + em.abstention[1] * z[c], 0.0), 100.0)
            reg = int(regs[ename][c])
            cast = int(round(reg * (1.0 - abst / 100.0)))
            null = int(round(cast * em.null_share))
            valid = cast - null
            share = float(_beta_draw(np.array([u_ch[c]]), em.chavez_share)[0])
            chavez = int(round(valid * share))
            runner = int(round((valid - chavez) * em.runner_up_share))
            others = valid - chavez - runner
            rows.append(TallySheet(f"{center_ids[c]}-{ename}", center_ids[c], reg, 0, 0, null, cast,
                                   Election(ename),
                                   {"chavez": chavez, em.runner_up: runner, "others": others}))
        out += [r for r in rows if r is not None]
    return out


def _nas_map():
    return {ip: medium.value for medium, ips in NAS_IPS.items() for ip in ips}


# ---------------------------------------------------------------- writers

_CAUSE_NAMES = {TerminateCause.SERVER_REQUEST: "NAS-Request",
                TerminateCause.MACHINE_REQUEST: "User-Request",
                TerminateCause.ERROR: "Lost-Carrier",
                TerminateCause.OTHER: "Port-Unneeded"}


def nas_for(record: TransmissionRecord) -> str:
    ips = NAS_IPS[record.medium]
    return ips[zlib.crc32(record.center_id.encode()) % len(ips)]


def format_detail_block(record: TransmissionRecord, nas_ip: str) -> str:
    lines = [
        format_timestamp(record.session_stop),
        f'\tUser-Name = "{record.machine_id}"',
        f"\tNAS-IP-Address = {nas_ip}",
        f'\tCalling-Station-Id = "{record.center_id}"',
        f'\tAcct-Session-Id = "{record.call_index}"',
        f"\tAcct-Session-Time = {record.session_stop - record.session_start}",
        f"\tAcct-Input-Octets = {record.input_octets}",
        f"\tAcct-Output-Octets = {record.output_octets}",
        f"\tAcct-Input-Packets = {record.input_packets}",
        f"\tAcct-Output-Packets = {record.output_packets}",
        f"\tAcct-Terminate-Cause = {_CAUSE_NAMES[record.terminate_cause]}",
    ]
    return "\n".join(lines) + "\n"


def write_radius_detail(dataset: Dataset) -> bytes:
    return "\n".join(format_detail_block(r, nas_for(r)) for r in dataset.records).encode("utf-8")


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def write_tally_csv(dataset: Dataset) -> bytes:
    options = sorted({opt for t in dataset.tallies for opt in t.candidate_votes})
    header = ["machine_id", "center_id", "registered", "yes", "no", "null", "total", "election_id"] + options
    rows = [[t.machine_id, t.center_id, t.registered_voters, t.yes_votes, t.no_votes, t.null_votes,
             t.total_votes, t.election_id.value] + [t.candidate_votes.get(o, "") for o in options]
            for t in dataset.tallies]
    return _csv_bytes(header, rows)


def write_registry_csv(dataset: Dataset) -> bytes:
    rows = [[c.center_id, c.parish, c.municipality, c.state, ";".join(c.machine_ids)]
            for _, c in sorted(dataset.centers.items())]
    return _csv_bytes(["center_id", "parish", "municipality", "state", "machine_ids"], rows)


def write_nas_map_csv(nas_map: dict) -> bytes:
    return _csv_bytes(["nas_ip", "medium"], sorted(nas_map.items()))


def write_truth_jsonl(dataset: SyntheticDataset) -> bytes:
    lines = [json.dumps(t.to_dict(), sort_keys=True) for _, t in sorted(dataset.truth.items())]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True)
class CalibrationRow:
    machine_id: str
    traffic_class: str
    mean_octets: float
    overhead: float
    deviation: float
    flagged: bool


@dataclass(frozen=True)
class CalibrationReport:
    file_size: int
    repetitions: int
    median_overhead: float
    sigma: float
    rows: tuple

    @property
    def flagged(self) -> list:
        return [r.machine_id for r in self.rows if r.flagged]


def calibration_run(config: ScenarioConfig, file_size: int, repetitions: int,
                    dataset: Optional[SyntheticDataset] = None) -> CalibrationReport:
    """Send a file of known size from every machine ``repetitions`` times.

    Each transmission costs ``file_size`` plus the machine class's protocol
    overhead, any injected extra, and Gaussian noise.  The overhead
    estimate is the mean octet count minus ``file_size``; machines farther
    than 3 fleet standard deviations from the fleet median are flagged.
    """
    if repetitions < 1:
        raise InvalidConfig("repetitions", "must be >= 1")
    if file_size < 0:
        raise InvalidConfig("file_size", "must be >= 0")
    if dataset is None:
        dataset = generate_scenario(config)
    cal = config.calibration
    ids = sorted(dataset.truth)
    idx = np.arange(len(ids))
    keys = _keys(config.seed, _P_CALIB, idx)
    reps = np.arange(repetitions, dtype=np.uint64)
    noise = rng.normal(keys[:, None], idx[:, None].astype(np.uint64) * 0 + reps[None, :])
    base = np.array([cal.overhead[dataset.truth[m].traffic_class.value] + cal.injected.get(m, 0.0)
                     for m in ids])
    octets = np.rint(file_size + base[:, None] + cal.noise_sd * noise)
    mean = octets.mean(axis=1)
    overhead = mean - file_size
    median = float(np.median(overhead)) if len(ids) else 0.0
    sigma = float(overhead.std(ddof=1)) if len(ids) > 1 else 0.0
    dev = overhead - median
    rows = tuple(CalibrationRow(m, dataset.truth[m].traffic_class.value, float(mean[i]),
                                float(overhead[i]), float(dev[i]), bool(abs(dev[i]) > 3.0 * sigma))
                 for i, m in enumerate(ids))
    return CalibrationReport(file_size, repetitions, median, sigma, rows)


def with_centers(config: ScenarioConfig, **n_centers) -> ScenarioConfig:
    """Copy of ``config`` with some class center counts replaced (``A=900``)."""
    classes = dict(config.classes)
    for key, n in n_centers.items():
        classes[key] = replace(classes[key], n_centers=n)
    return replace(config, classes=classes)
