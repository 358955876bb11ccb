"""Relative errors for the 3-ball and for the disk in l^p bounding balls.

Writes both result sets as CSV (the same files `volume table` produces).

    python3 demos/tables.py [out_dir]
"""
import os
import sys

from sosvolume.bench import reproduce_table, write_results

out = sys.argv[1] if len(sys.argv) > 1 else "."
os.makedirs(out, exist_ok=True)

rows = reproduce_table("T1", max_degree=8)
print("3-ball of radius 3/4 in the unit ball")
for r in rows:
    print(f"  d={r.d:2d} {r.variant:15s} {100 * r.relative_error:7.2f} %  {r.wall_time:6.2f} s")
write_results(rows, os.path.join(out, "t1.csv"))

rows = reproduce_table("T3", degrees=[8])
print("\ndisk of radius 3/4 in the unit l^p ball, d = 8")
for r in rows:
    print(f"  {r.scenario:9s} {r.variant:15s} {100 * r.relative_error:7.2f} %")
write_results(rows, os.path.join(out, "t3.csv"))
