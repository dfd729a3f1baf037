"""Simulate a small fleet, then classify it and read the bytes-per-vote signal back.

Run: python3 demos/walkthrough.py
"""

from votewire.analysis import compare, table1
from votewire.classify import classify_records, high_center_labels, mixed_center_proportions_test
from votewire.regression import INCOMING, group_regression
from votewire.simulate import generate_scenario, paper_2004

ds = generate_scenario(paper_2004(seed=20040815, scale=0.05))
cl = classify_records(ds.records)
print(f"{len(ds.records)} sessions, {len(cl.machines)} machines, {len(cl.centers)} centers\n")

print("class  centers  machines  votes  % votes")
for row in table1(cl, ds.tallies):
    print(f"{row['class']:>5}  {row['centers']:7d}  {row['machines_in_centers']:8d}  "
          f"{row['votes']:6d}  {row['vote_pct']:6.2f}")

# incoming bytes grow with votes in A and C; B carries a fixed-size message
print()
for sel in ("A:G1", "A:G2", "B", "C"):
    f = group_regression(cl, ds.tallies, INCOMING, sel).fit
    print(f"{sel:>5}: {f.slope:6.2f} +- {f.slope_se:4.2f} bytes/vote, R2 {f.r_squared:.2f}")

res = mixed_center_proportions_test(high_center_labels(cl), 0.33)
print(f"\nG1/G2 mixing across High Traffic centers: chi-square {res.statistic:.2f}, p {res.p_value:.3f}")

cmp = compare(ds, cl, "no_pct", ["A", "B", "C"])
print("\nNO % per machine")
for s, summ in zip(cmp.samples, cmp.summaries):
    print(f"  {s.label}: n={summ.n}, mean {summ.mean:.1f}, median {summ.median:.1f}")
for t in cmp.tests:
    print(f"  {t.test_name}: statistic {t.statistic:.3f}, p {t.p_value:.3g}")
