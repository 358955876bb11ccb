"""One-dimensional case K = [0, 1/2] inside B = [-1, 1].

Without Stokes constraints the optimal polynomial w >= 1 on K and >= 0 on B
has visible bumps above 1 near the end points of K. The grid dump is the
data one would plot.

    python3 demos/interval_bumps.py [degree] [grid.csv]
"""
import sys

import numpy as np

from sosvolume import Variant
from sosvolume.bench import dump_w_grid, solve_scenario, write_grid

d = int(sys.argv[1]) if len(sys.argv) > 1 else 10
row, cert = solve_scenario("interval", d, Variant.PLAIN, mc_samples=0)
print(f"d = {d}: bound {row.bound:.6f} vs length 0.5 ({row.status}, {row.iterations} iterations)")

dump = dump_w_grid(cert, "interval", 401, wstar_samples=100_000)
x, w = dump.points[:, 0], dump.w
i = int(np.argmax(w))
print(f"max w = {w[i]:.4f} at x = {x[i]:+.3f}")

# crude text plot: one row per 0.1 step
for xv in np.linspace(-1, 1, 21):
    v = float(cert.w(np.array([xv])))
    print(f"{xv:+.1f} {v:7.3f} " + "#" * max(0, int(round(30 * v))))

if len(sys.argv) > 2:
    write_grid(dump, sys.argv[2])
    print(f"grid written to {sys.argv[2]}")
