"""Artifact writing, manifests and the markdown/SVG report bundle."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

from . import svg
from .analysis import compare, summary_row, table1
from .classify import (center_category_counts, classify_records, high_center_labels,
                       mixed_center_proportions_test, per_vote_pattern_share)
from .errors import DataError
from .model import Election, TrafficClass
from .regression import INCOMING, OUTGOING, group_regression


def fmt(x) -> str:
    """Stable text for CSV cells: integers as is, floats to 10 significant digits."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".10g")
    return "" if x is None else str(x)


def csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def dict_rows_csv(rows, header=None) -> bytes:
    header = header or (list(rows[0]) if rows else [])
    return csv_bytes(header, [[r.get(h) for h in header] for r in rows])


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def json_bytes(obj) -> bytes:
    return (json.dumps(_json_safe(obj), sort_keys=True, indent=2) + "\n").encode("utf-8")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class ArtifactWriter:
    """Collects named outputs under one directory and writes the manifest last."""
    out_dir: str
    command: str
    entries: list = field(default_factory=list)

    def put(self, name: str, data) -> str:
        if isinstance(data, str):
            data = data.encode("utf-8")
        path = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
        self.entries.append({"path": name, "sha256": sha256(data), "bytes": len(data)})
        return path

    def manifest(self, config: dict, inputs: dict) -> dict:
        """``inputs`` maps a label to raw bytes; only basenames and hashes are kept."""
        doc = {"command": self.command, "config": config,
               "inputs": {k: sha256(v) for k, v in sorted(inputs.items())},
               "outputs": sorted(self.entries, key=lambda e: e["path"])}
        self.put(f"manifest-{self.command}.json", json_bytes(doc))
        return doc


def tests_jsonl(tests) -> bytes:
    lines = [json.dumps(_json_safe(t.to_row()), sort_keys=True) for t in tests]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


SUMMARY_HEADER = ["Level", "Number", "Mean", "Std dev", "25%—Q", "Median", "75%—Q"]


def summaries_csv(comparison) -> bytes:
    rows = [summary_row(s.label, summ) for s, summ in zip(comparison.samples, comparison.summaries)]
    return dict_rows_csv(rows, SUMMARY_HEADER)


# report bundle ----------------------------------------------------------

def _md_table(header, rows) -> str:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for r in rows:
        out.append("| " + " | ".join(_cell(v) for v in r) + " |")
    return "\n".join(out)


def _cell(v):
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.4g}" if abs(v) < 1e-3 and v else f"{v:.2f}"
    return str(v)


def _summary_md(comparison) -> str:
    rows = [[r[h] for h in SUMMARY_HEADER] for r in
            (summary_row(s.label, m) for s, m in zip(comparison.samples, comparison.summaries))]
    tests = [[t.test_name, t.statistic, ", ".join(str(d) for d in t.df), t.p_value,
              " ".join(t.flags)] for t in comparison.tests]
    text = _md_table(SUMMARY_HEADER, rows)
    if tests:
        text += "\n\n" + _md_table(["test", "statistic", "df", "p", "flags"], tests)
    if comparison.excluded:
        text += "\n\nExcluded: " + ", ".join(f"{k} {v}" for k, v in comparison.excluded.items())
    return text


def _try(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DataError:
        return None


def build_report(dataset, bins: int = 20, seed=None) -> dict:
    """All report artifacts as ``{relative path: bytes}``.

    Recomputes classification, fits and comparisons from the normalized
    dataset so the report depends on nothing but its input.
    """
    files = {}
    cl = classify_records(dataset.records)
    md = ["# Transmission and tally analysis", ""]
    if seed is not None:
        md += [f"Seed: {seed}", ""]

    t1 = table1(cl, dataset.tallies)
    md += ["## Machine and center partition", "",
           _md_table(["class", "centers", "machines in centers", "machines in class", "votes", "% votes"],
                     [[r["class"], r["centers"], r["machines_in_centers"], r["machines_in_class"],
                       r["votes"], r["vote_pct"]] for r in t1]), ""]
    unclassified = [m for _, m in sorted(cl.machines.items())
                    if m.traffic_class == TrafficClass.UNCLASSIFIED]
    if unclassified:
        md += ["### Unclassified machines", "",
               _md_table(["machine", "total octets", "reason"],
                         [[m.machine_id, m.total_octets, m.reason] for m in unclassified]), ""]

    # bytes against votes
    md += ["## Bytes against votes", ""]
    fit_rows = []
    for selector in ("A:G1", "A:G2", "B", "C"):
        series, lines = [], []
        for direction in (INCOMING, OUTGOING):
            gr = _try(group_regression, cl, dataset.tallies, direction, selector)
            if gr is None:
                continue
            f = gr.fit
            fit_rows.append([selector, direction, f.n, f.slope, f.slope_se, f.slope_error_percent,
                             f.intercept, f.r_squared])
            series.append((direction, [p[0] for p in gr.points], [p[1] for p in gr.points]))
            lines.append((f"{direction} fit {f.slope:.2f} B/vote", f.slope, f.intercept))
        if series:
            name = f"figures/scatter_{selector.replace(':', '_')}.svg"
            files[name] = svg.scatter(series, f"Bytes vs votes, group {selector}", "votes", "bytes",
                                      lines).encode()
            md.append(f"![{selector}]({name})")
    md += ["", _md_table(["group", "direction", "n", "slope", "slope se", "se %", "intercept", "R2"],
                         fit_rows), ""]
    if cl.split is not None:
        labels = high_center_labels(cl)
        obs, exp = center_category_counts(labels, 0.33)
        res = mixed_center_proportions_test(labels, 0.33)
        md += ["## High Traffic subgroups", "",
               f"Cluster means: G1 {cl.split.mean_g1:.0f} bytes, G2 {cl.split.mean_g2:.0f} bytes.", "",
               _md_table(["category", "observed", "expected (p=0.33)"],
                         [[c, int(o), float(e)] for c, o, e in zip(("mixed", "all G1", "all G2"), obs, exp)]),
               "", f"Proportions test: chi-square {res.statistic:.3f}, p = {res.p_value:.4f}", ""]
    elif cl.split_error:
        md += ["## High Traffic subgroups", "", f"No split: {cl.split_error}", ""]
    low = cl.machines_in(TrafficClass.LOW_WIRE)
    votes = {t.machine_id: t.total_votes for t in dataset.tallies_for(Election.PRR2004)}
    low = [m for m in low if m.machine_id in votes]
    if len(low) >= 10:
        pv = per_vote_pattern_share([votes[m.machine_id] for m in low],
                                    [m.final_session.output_octets for m in low])
        md += ["## Low Traffic per-vote segments", "",
               f"{100 * pv.fraction:.1f}% of {len(low)} Low Traffic machines lie on 41-46 bytes/vote segments.", ""]

    # electoral comparisons
    md += ["## NO share per machine", ""]
    cmp_no = _try(compare, dataset, cl, "no_pct", ["A", "B", "C"], bins)
    if cmp_no is not None:
        md += [_summary_md(cmp_no), ""]
        files["figures/box_no_pct.svg"] = svg.boxplot(
            [(s.label, s.values) for s in cmp_no.samples], "NO % per machine", "NO %").encode()
        md.append("![box](figures/box_no_pct.svg)")
        for (a, b), pairs in cmp_no.qq.items():
            name = f"figures/qq_no_pct_{a}_{b}.svg"
            files[name] = svg.qq(pairs, f"Q-Q NO %: {a} vs {b}", a, b).encode()
            md.append(f"![qq]({name})")
        md.append("")

    elections = [e for e in (Election.E1998, Election.E2000, Election.PRR2004) if dataset.tallies_for(e)]
    means = {c: [] for c in "ABC"}
    for e in elections:
        groups = [f"{c}:{e.value}" for c in "ABC"]
        cmp_ab = _try(compare, dataset, cl, "abstention", groups, bins)
        for c in "ABC":
            s = None if cmp_ab is None else next(
                (m for smp, m in zip(cmp_ab.samples, cmp_ab.summaries) if smp.label.startswith(c)), None)
            means[c].append(None if s is None else s.mean)
        if cmp_ab is not None:
            md += [f"## Abstention per center, {e.value}", "", _summary_md(cmp_ab), ""]
    if len(elections) > 1:
        files["figures/abstention_means.svg"] = svg.means_chart(
            [(c, means[c]) for c in "ABC"], [e.value for e in elections],
            "Mean abstention per center", "abstention %").encode()
        md += ["![means](figures/abstention_means.svg)", ""]
        for a, b in zip(elections, elections[1:]):
            groups = [f"{c}:{a.value}-{b.value}" for c in "ABC"]
            cmp_d = _try(compare, dataset, cl, "abstention_change", groups, bins)
            if cmp_d is not None:
                md += [f"## Abstention change {a.value} to {b.value}", "", _summary_md(cmp_d), ""]
        for c in "AB":
            groups = [f"{c}:{e.value}" for e in elections]
            cmp_c = _try(compare, dataset, cl, "candidate", groups, bins)
            if cmp_c is not None:
                md += [f"## Government share per center, class {c}", "",
                       "Chavez share of valid votes in earlier elections, NO share in 2004.", "",
                       _summary_md(cmp_c), ""]
                if len(cmp_c.samples) >= 2:
                    last = cmp_c.samples[-1].label
                    for (a, b), pairs in cmp_c.qq.items():
                        if b == last:
                            name = f"figures/qq_candidate_{a.replace(':', '_')}_{b.replace(':', '_')}.svg"
                            files[name] = svg.qq(pairs, f"Q-Q government share: {a} vs {b}", a, b).encode()
                            md.append(f"![qq]({name})")
                    md.append("")
    files["report.md"] = ("\n".join(md).rstrip() + "\n").encode("utf-8")
    return files
