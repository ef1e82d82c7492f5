"""Counting members with small class number.

Counts d = 4n^2 + 1 with h(d) <= H and compares with C2 H log H, with twice
that, and with a model count that keeps the exact relation between h, L(1)
and the regulator instead of its large-H limit.
"""
import sys

from cffam import harness
from cffam.family import CHOWLA

H = int(sys.argv[1]) if len(sys.argv) > 1 else 23
rep = harness.cmd_census(CHOWLA, H)
print(f"C2 = {rep.predicted['C2']:.6f}")
print(f"{'H':>4} {'X':>10} {'count':>6} {'C2 H log H':>11} {'ratio':>6} {'2 C2':>6} {'model count':>11}")
for h, r in rep.observed["by_H"].items():
    print(
        f"{h:>4} {r['X']:>10} {r['count']:>6} {r['predicted']:>11.1f} {r['ratio']:>6.2f} "
        f"{r['ratio_if_doubled_C2']:>6.2f} {r['refined_model_count']:>11.1f}"
    )
