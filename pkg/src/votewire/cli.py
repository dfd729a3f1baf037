"""Command line: ``votewire ingest|classify|regress|compare|simulate|report``.

Exit codes: 0 success, 2 data error, 3 I/O error.  Every command writes
its artifacts plus ``manifest-<command>.json`` under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .analysis import METRICS, compare, table1
from .classify import (Thresholds, center_category_counts, classify_records, high_center_labels,
                       mixed_center_proportions_test, per_vote_pattern_share, regional_composition)
from .errors import DataError, EmptySelection, InvalidConfig
from .ingest import (Dataset, ParseReport, cross_check, dump_dataset_jsonl, load_dataset_jsonl,
                     parse_nas_map, parse_radius_detail, parse_registry_csv, parse_tally_csv,
                     parse_timestamp)
from .model import Basis, Election, TrafficClass
from .regression import INCOMING, OUTGOING, group_regression
from .report import (ArtifactWriter, build_report, csv_bytes, dict_rows_csv, json_bytes,
                     summaries_csv, tests_jsonl)
from .simulate import (POLL_CLOSE_2004, calibration_run, config_from_dict, config_to_dict,
                       generate_scenario, write_nas_map_csv, write_radius_detail,
                       write_registry_csv, write_tally_csv, write_truth_jsonl)

DEFAULT_SEED = 20040815
log = logging.getLogger("votewire")


class InputMissing(OSError):
    pass


def _read(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputMissing(f"cannot read {path}: {exc.strerror or exc}") from None


def _config(args) -> tuple:
    """(parsed config dict, raw bytes) from ``--config``, or empty."""
    if not args.config:
        return {}, b""
    raw = _read(args.config)
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise InvalidConfig("config", f"not valid JSON: {exc}") from None


def _load_dataset(args):
    path = args.dataset or os.path.join(args.out, "dataset.jsonl")
    raw = _read(path)
    return load_dataset_jsonl(raw), raw


def _thresholds(cfg) -> Thresholds:
    t = cfg.get("thresholds", {})
    try:
        return Thresholds(high=tuple(t.get("high", (23_000, 63_000))), low=tuple(t.get("low", (1_500, 7_500))))
    except TypeError as exc:
        raise InvalidConfig("thresholds", str(exc)) from None


# commands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg, raw = _config(args)
    cfg = dict(cfg)
    calib = cfg.pop("calibration_run", None)
    if "classes" not in cfg and "pack" not in cfg:
        cfg["pack"] = "paper-2004"
        cfg["scale"] = args.scale
    seed = args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED)
    config = config_from_dict(cfg, seed=seed)
    ds = generate_scenario(config)
    w = ArtifactWriter(args.out, "simulate")
    w.put("detail.log", write_radius_detail(ds))
    w.put("tallies.csv", write_tally_csv(ds))
    w.put("registry.csv", write_registry_csv(ds))
    w.put("nas.csv", write_nas_map_csv(ds.nas_map))
    w.put("truth.jsonl", write_truth_jsonl(ds))
    resolved = config_to_dict(config)
    w.put("scenario.json", json_bytes(resolved))
    if calib is not None:
        rep = calibration_run(config, int(calib.get("file_size", 0)), int(calib.get("repetitions", 1)), ds)
        w.put("calibration.csv", csv_bytes(
            ["machine_id", "class", "mean_octets", "overhead", "deviation", "flagged"],
            [[r.machine_id, r.traffic_class, r.mean_octets, r.overhead, r.deviation, r.flagged]
             for r in rep.rows]))
    w.manifest({"seed": seed, "scenario": resolved, "calibration_run": calib}, {"config": raw})
    print(f"simulated {len(ds.truth)} machines in {len(ds.centers)} centers -> {args.out}")
    return 0


def cmd_ingest(args) -> int:
    src = args.inputs or args.out

    def path(given, default):
        return given or os.path.join(src, default)

    detail = _read(path(args.detail, "detail.log"))
    tallies_raw = _read(path(args.tallies, "tallies.csv"))
    inputs = {"detail": detail, "tallies": tallies_raw}
    nas_path = path(args.nas, "nas.csv")
    nas_map = None
    if args.nas or os.path.exists(nas_path):
        inputs["nas"] = _read(nas_path)
        nas_map = parse_nas_map(inputs["nas"])
    reg_path = path(args.registry, "registry.csv")
    centers = {}
    if args.registry or os.path.exists(reg_path):
        inputs["registry"] = _read(reg_path)
        centers = parse_registry_csv(inputs["registry"])
    poll_close = parse_timestamp(args.poll_close) if args.poll_close else POLL_CLOSE_2004

    report = ParseReport()
    records = parse_radius_detail(detail, nas_map, strict=args.strict, report=report)
    tallies = parse_tally_csv(tallies_raw)
    check = cross_check(records, tallies, poll_close)
    check.skipped_blocks = len(report.skipped)
    check.duplicate_sessions = list(report.duplicates)
    dataset = Dataset(records, tallies, centers, poll_close)

    w = ArtifactWriter(args.out, "ingest")
    w.put("dataset.jsonl", dump_dataset_jsonl(dataset))
    w.put("crosscheck.json", json_bytes(check.to_dict()))
    w.put("diagnostics.json", json_bytes({
        "blocks": report.blocks, "records": len(records), "tallies": len(tallies),
        "centers": len(centers), "nas_map": nas_map is not None,
        "skipped": [list(s) for s in report.skipped],
        "duplicates": [list(d) for d in report.duplicates]}))
    w.manifest({"strict": args.strict, "poll_close": poll_close}, inputs)
    print(f"ingested {len(records)} sessions, {len(tallies)} tally rows; "
          f"skipped {len(report.skipped)} blocks")
    return 0


def cmd_classify(args) -> int:
    cfg, raw = _config(args)
    dataset, draw = _load_dataset(args)
    cl = classify_records(dataset.records, _thresholds(cfg))
    w = ArtifactWriter(args.out, "classify")
    w.put("classification.csv", csv_bytes(
        ["machine_id", "class", "subgroup", "total_octets"],
        [[m.machine_id, m.traffic_class.value, m.subgroup or "", m.total_octets]
         for _, m in sorted(cl.machines.items())]))
    w.put("centers.csv", csv_bytes(
        ["center_id", "class", "flags"],
        [[c.center_id, c.center_class.value, ";".join(sorted(c.anomaly_flags))]
         for _, c in sorted(cl.centers.items())]))
    w.put("unclassified.csv", csv_bytes(
        ["machine_id", "total_octets", "reason"],
        [[m.machine_id, m.total_octets, m.reason] for _, m in sorted(cl.machines.items())
         if m.traffic_class == TrafficClass.UNCLASSIFIED]))
    w.put("table1.csv", dict_rows_csv(table1(cl, dataset.tallies)))
    if dataset.centers:
        rows = regional_composition(cl.centers.values(), dataset.centers)
        w.put("composition.csv", csv_bytes(
            ["state", "municipality", "centers", "A", "B", "C", "U", "plurality", "mixing_index"],
            [[r.state, r.municipality, r.n_centers] +
             [r.counts.get(c, 0) for c in (TrafficClass.HIGH_WIRE, TrafficClass.LOW_WIRE,
                                           TrafficClass.CELLULAR, TrafficClass.UNCLASSIFIED)] +
             [r.plurality.value, r.mixing_index] for r in rows]))
    p = float(cfg.get("p_superior", 0.33))
    sub = {"split": None, "error": cl.split_error}
    if cl.split is not None:
        labels = high_center_labels(cl)
        obs, exp = center_category_counts(labels, p)
        sub = {"split": {"mean_g1": cl.split.mean_g1, "mean_g2": cl.split.mean_g2,
                         "iterations": cl.split.iterations},
               "p_superior": p, "categories": ["mixed", "all_G1", "all_G2"],
               "observed": [int(o) for o in obs], "expected": [float(e) for e in exp],
               "test": mixed_center_proportions_test(labels, p).to_row(), "error": ""}
    w.put("subgroups.json", json_bytes(sub))
    votes = {t.machine_id: t.total_votes for t in dataset.tallies_for(Election.PRR2004)}
    low = [m for m in cl.machines_in(TrafficClass.LOW_WIRE) if m.machine_id in votes]
    if len(low) >= 10:
        pv = per_vote_pattern_share([votes[m.machine_id] for m in low],
                                    [m.final_session.output_octets for m in low])
        w.put("per_vote.csv", csv_bytes(["machine_id", "votes", "output_octets", "per_vote"],
                                        [[m.machine_id, votes[m.machine_id], m.final_session.output_octets,
                                          bool(f)] for m, f in zip(low, pv.flags)]))
        w.put("per_vote.json", json_bytes({"fraction": pv.fraction, "n": len(low),
                                           "lines": [vars(l) for l in pv.lines]}))
    w.manifest({"thresholds": vars(_thresholds(cfg)), "p_superior": p},
               {"dataset": draw, "config": raw})
    counts = cl.counts()
    print(" ".join(f"{c.value}={counts.get(c, 0)}" for c in TrafficClass))
    return 0


def cmd_regress(args) -> int:
    dataset, draw = _load_dataset(args)
    cl = classify_records(dataset.records)
    directions = (INCOMING, OUTGOING) if args.direction == "both" else (args.direction,)
    groups = args.group or ["A:G1", "A:G2", "B", "C"]
    w = ArtifactWriter(args.out, "regress")
    done = 0
    for sel in groups:
        for d in directions:
            try:
                gr = group_regression(cl, dataset.tallies, d, sel)
            except EmptySelection as exc:
                if args.group:
                    raise
                log.warning("%s", exc)
                continue
            stem = f"{sel.replace(':', '_')}_{d}"
            w.put(f"fit_{stem}.json", json_bytes({
                "group": sel, "direction": d, **gr.fit.to_dict(),
                "slope_error_percent": gr.fit.slope_error_percent,
                "missing_tallies": list(gr.missing_tallies)}))
            w.put(f"scatter_{stem}.csv", csv_bytes(["votes", "bytes", "machine_id"], gr.points))
            print(f"{sel} {d}: slope {gr.fit.slope:.3f} +- {gr.fit.slope_se:.3f}, "
                  f"intercept {gr.fit.intercept:.1f}, n={gr.fit.n}")
            done += 1
    if done == 0:
        raise EmptySelection("no group had enough machines to fit")
    w.manifest({"groups": groups, "directions": list(directions)}, {"dataset": draw})
    return 0


def cmd_compare(args) -> int:
    dataset, draw = _load_dataset(args)
    cl = classify_records(dataset.records)
    groups = [g for tok in (args.groups or ["A,B,C"]) for g in tok.split(",") if g.strip()]
    basis = Basis.TOTAL_WITH_NULLS if args.basis == "total" else Basis.VALID_ONLY
    cmp = compare(dataset, cl, args.metric, groups, bins=args.bins, basis=basis, option=args.option,
                  qq_k=args.qq_k)
    w = ArtifactWriter(args.out, "compare")
    stem = args.metric
    w.put(f"{stem}_summaries.csv", summaries_csv(cmp))
    w.put(f"{stem}_tests.jsonl", tests_jsonl(cmp.tests))
    for (a, b), pairs in cmp.qq.items():
        w.put(f"{stem}_qq_{a.replace(':', '_')}_{b.replace(':', '_')}.csv",
              csv_bytes([f"q_{a}", f"q_{b}"], pairs))
    w.manifest({"metric": args.metric, "groups": groups, "bins": args.bins, "basis": basis.value,
                "option": args.option, "qq_k": args.qq_k, "excluded": cmp.excluded},
               {"dataset": draw})
    for t in cmp.tests:
        print(f"{t.test_name}: statistic {t.statistic:.4f}, p = {t.p_value:.4g}")
    return 0


def cmd_report(args) -> int:
    dataset, draw = _load_dataset(args)
    files = build_report(dataset, bins=args.bins, seed=args.seed)
    w = ArtifactWriter(args.out, "report")
    for name in sorted(files):
        w.put(name, files[name])
    w.manifest({"bins": args.bins, "seed": args.seed}, {"dataset": draw})
    print(f"report written to {os.path.join(args.out, 'report.md')}")
    return 0


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None,
                        help=f"64-bit seed for all randomness (default {DEFAULT_SEED})")
    common.add_argument("--strict", action="store_true", help="fail on the first malformed input block")
    common.add_argument("--bins", type=int, default=20, help="bins for chi-square tests (default 20)")
    common.add_argument("--out", default="votewire-run", help="output (run) directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="votewire", description="Transmission and tally forensics.")
    p.add_argument("--version", action="version", version=f"votewire {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="generate a synthetic scenario")
    s.add_argument("--scale", type=float, default=1.0, help="center-count scale for the default pack")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ingest", parents=[common], help="parse logs and tallies into a dataset")
    s.add_argument("--inputs", help="directory holding detail.log, tallies.csv, registry.csv, nas.csv")
    s.add_argument("--detail")
    s.add_argument("--tallies")
    s.add_argument("--registry")
    s.add_argument("--nas")
    s.add_argument("--poll-close", help="poll close time (RFC 3339 or epoch); default 2004-08-15T20:00:00Z")
    s.set_defaults(func=cmd_ingest)

    for name, func, text in (("classify", cmd_classify, "traffic classes, subgroups, class partition table"),
                             ("regress", cmd_regress, "bytes-vs-votes regressions"),
                             ("compare", cmd_compare, "group comparison battery"),
                             ("report", cmd_report, "markdown and SVG report")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--dataset", help="normalized dataset (default <out>/dataset.jsonl)")
        s.set_defaults(func=func)
        if name == "regress":
            s.add_argument("--group", action="append", help="selector such as A:G1 or C (repeatable)")
            s.add_argument("--direction", choices=(INCOMING, OUTGOING, "both"), default="both")
        if name == "compare":
            s.add_argument("--metric", default="no_pct", help=f"one of {', '.join(METRICS)}")
            s.add_argument("--groups", action="append",
                           help="comma-separated CLASS[:ELECTION] tokens (default A,B,C)")
            s.add_argument("--basis", choices=("valid", "total"), default="valid")
            s.add_argument("--option", default="chavez")
            s.add_argument("--qq-k", type=int, default=99)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
