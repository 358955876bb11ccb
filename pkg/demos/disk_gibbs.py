"""Disk of radius 1/2 inside the unit disk: plain vs Stokes-augmented bounds.

Runs the SOS side at a few degrees, then looks at the certificate w on a
grid. The plain w tries to follow the indicator of K and overshoots next to
the boundary; with Stokes constraints w is close to 0 outside K.

    python3 demos/disk_gibbs.py [max_degree]
"""
import math
import sys

from sosvolume import Variant
from sosvolume.bench import dump_w_grid, exterior_overshoot, grid_max, solve_scenario

top = int(sys.argv[1]) if len(sys.argv) > 1 else 12
exact = math.pi / 4
print(f"exact area pi/4 = {exact:.6f}\n")
print(f"{'d':>3} {'plain':>10} {'err %':>7} {'stokes':>10} {'err %':>7}")
certs = {}
for d in range(4, top + 1, 2):
    out = [f"{d:3d}"]
    for v in (Variant.PLAIN, Variant.GENERAL):
        row, cert = solve_scenario("disk", d, v, mc_samples=0)
        certs[d, v] = cert
        out.append(f"{row.bound:10.6f} {100 * row.relative_error:7.2f}")
    print(" ".join(out))

# w on a 101 x 101 grid for the largest degree
print(f"\ncertificate w at d = {top}:")
for v in (Variant.PLAIN, Variant.GENERAL):
    g = dump_w_grid(certs[top, v], "disk", 101, wstar_samples=200_000)
    print(f"  {v.value:15s} max w on B = {grid_max(g):.4f}   max w on B outside K = {exterior_overshoot(g):.4f}")

# a slice through the centre of K along x2 = 0
_, cert = solve_scenario("disk", top, Variant.GENERAL, mc_samples=0)
print("\nslice x2 = 0 (stokes):")
for k in range(11):
    x = -1 + 0.2 * k
    print(f"  x1 = {x:+.1f}  w = {cert.w((x, 0.0)):+.4f}")
