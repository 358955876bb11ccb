"""Same cell solved from both sides.

The SOS program gives w, u and the multipliers directly; the moment program
gives pseudo-moments of mu and nu, and w comes back from its dual slacks.
Their values agree up to solver tolerance.

    python3 demos/duality_check.py [scenario] [degree]
"""
import sys

from sosvolume import Variant, assemble, decode, get_scenario, solve

name = sys.argv[1] if len(sys.argv) > 1 else "double-disk"
d = int(sys.argv[2]) if len(sys.argv) > 2 else 8
s = get_scenario(name)

for v in Variant:
    vals = {}
    for side in ("sos", "moment"):
        problem, dmap = assemble(s, d, v, side=side)
        sol = solve(problem)
        cert = decode(dmap, sol)
        vals[side] = cert.bound
        print(f"{v.value:15s} {side:6s} blocks={problem.block_sizes} free={problem.n_free} "
              f"rows={problem.n_rows} bound={cert.bound:.9f} {sol.status.value} ({sol.iterations} it)")
    gap = abs(vals["sos"] - vals["moment"]) / (1 + abs(vals["sos"]))
    print(f"{'':15s} relative difference {gap:.1e}\n")

# the moment side also yields the pseudo-mass of mu, another upper bound
problem, dmap = assemble(s, d, Variant.GENERAL, side="moment")
cert = decode(dmap, solve(problem))
print(f"y_mu[0] = {cert.pseudo_moments_mu.mass:.9f}, exact volume {s.exact_volume:.9f}")
