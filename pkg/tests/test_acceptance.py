"""Acceptance criteria, one PASS/FAIL line each.

Lines are printed as the tests run and again in the terminal summary.
Tolerances are the ones fixed by the build contract; nothing here is tuned
to what the implementation happens to reach.
"""
import functools
import math

import numpy as np

from sosvolume import Variant, get_scenario, registry
from sosvolume.bench import dump_w_grid, exterior_overshoot, grid_l1, grid_max, solve_scenario
from sosvolume.moments import LpBall, lp_ball_moments, riesz
from sosvolume.oracle import mc_moments, wstar_fit, wstar_integral
from sosvolume.poly import Polynomial, add, differentiate, multiply

from conftest import random_poly

RESULTS: list[str] = []

PLAIN, FACTORED, GENERAL = Variant.PLAIN, Variant.FACTORED, Variant.GENERAL
VARIANTS = (PLAIN, FACTORED, GENERAL)
DEGREES = (4, 6, 8, 10, 12)


def report(label: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def cell(name: str, d: int, variant: Variant, side: str = "sos"):
    row, cert = solve_scenario(name, d, variant, side=side, mc_samples=0)
    return row, cert


def bound(name, d, variant, side="sos") -> float:
    row, _ = cell(name, d, variant, side)
    return row.bound if row.ok else math.nan


def rel_pct(name, d, variant) -> float:
    return 100.0 * (bound(name, d, variant) - get_scenario(name).exact_volume) / get_scenario(name).exact_volume


def within(x, target, tol) -> bool:
    return abs(x - target) <= tol  # False for nan


@functools.lru_cache(maxsize=None)
def grid(name, d, variant, resolution=201):
    _, cert = cell(name, d, variant)
    return dump_w_grid(cert, name, resolution, wstar_samples=10**6, seed=0)


# 1 -----------------------------------------------------------------------

def test_criterion_1_disk_golden():
    p, g = bound("disk", 16, PLAIN), bound("disk", 16, GENERAL)
    floor = math.pi / 4 - 1e-5
    ok = within(p, 1.1626, 0.005) and within(g, 0.7870, 0.005) and p >= floor and g >= floor
    report("1", ok, f"disk d=16 Plain {p:.5f} (1.1626 +- 0.005), GeneralStokes {g:.5f} (0.7870 +- 0.005), "
                    f"both >= pi/4 - 1e-5: {p >= floor and g >= floor}")


# 2 -----------------------------------------------------------------------

def test_criterion_2_table1():
    checks = []
    for d, variant, ref in ((4, PLAIN, 88.0), (4, GENERAL, 18.0), (8, PLAIN, 57.0), (8, GENERAL, 1.0)):
        e = rel_pct("ball3", d, variant)
        checks.append((within(e, ref, 1.5), f"d={d} {variant.value} {e:.2f}% (reference {ref}%)"))
    e12 = rel_pct("ball3", 12, GENERAL)
    checks.append((e12 <= 0.1, f"d=12 stokes-general {e12:.3f}% (<= 0.1%)"))
    report("2", all(c for c, _ in checks), "; ".join(t for _, t in checks))


# 3 -----------------------------------------------------------------------

T3_WITH = {8: (0.6, 1.2, 1.7, 2.0, 2.2)}
T3_WITHOUT = {8: (39, 52, 57, 59, 61), 16: (27, 33, 36, 37, 38)}


def test_criterion_3_table3():
    checks = []
    for d in (8, 16):
        for k, p in enumerate((2, 4, 6, 8, 10)):
            name = f"lp{p}-box"
            e_with = rel_pct(name, d, GENERAL)
            e_without = rel_pct(name, d, PLAIN)
            if d == 8:
                ok_with = within(e_with, T3_WITH[8][k], 1.5)
                want = f"{T3_WITH[8][k]}"
            else:
                ok_with = e_with <= 0.1
                want = "<=0.1"
            ok_without = within(e_without, T3_WITHOUT[d][k], 3.0)
            checks.append((ok_with and ok_without,
                           f"d={d} p={p} with {e_with:.2f}% ({want}) without {e_without:.1f}% ({T3_WITHOUT[d][k]})"))
    bad = [t for c, t in checks if not c]
    report("3", not bad, f"{len(checks) - len(bad)}/{len(checks)} cells in tolerance"
                         + (f"; out: {'; '.join(bad)}" if bad else ""))


# 4, 5 --------------------------------------------------------------------

def test_criterion_4_lp4_disk():
    p, g = bound("lp4-disk", 16, PLAIN), bound("lp4-disk", 16, GENERAL)
    exact = get_scenario("lp4-disk").exact_volume
    ok = within(p, 0.8511, 0.01) and within(g, 0.4653, 0.005)
    report("4", ok, f"lp4-disk d=16 Plain {p:.5f} (0.8511 +- 0.01), GeneralStokes {g:.5f} (0.4653 +- 0.005), "
                    f"exact {exact:.5f}")


def test_criterion_5_double_disk():
    p, g = bound("double-disk", 16, PLAIN), bound("double-disk", 16, GENERAL)
    ok = within(p, 0.8551, 0.01) and within(g, 0.4671, 0.01)
    report("5", ok, f"double-disk d=16 Plain {p:.5f} (0.8551 +- 0.01), GeneralStokes {g:.5f} (0.4671 +- 0.01), "
                    f"pi/8 = {math.pi / 8:.5f}")


# 6 -----------------------------------------------------------------------

def test_criterion_6a_validity_monotonicity_dominance():
    failures = []
    statuses = []
    for name, s in sorted(registry().items()):
        for variant in VARIANTS:
            prev = None
            for d in DEGREES:
                row, _ = cell(name, d, variant)
                statuses.append(row.status)
                v = bound(name, d, variant)
                if not v >= s.exact_volume - 1e-5:
                    failures.append(f"validity {name} d={d} {variant.value}: {v} < {s.exact_volume}")
                if prev is not None and not v <= prev + 1e-6:
                    failures.append(f"monotonicity {name} {variant.value} d={d}: {v} > {prev}")
                prev = v
        for d in DEGREES:
            vp = bound(name, d, PLAIN)
            for variant in (FACTORED, GENERAL):
                v = bound(name, d, variant)
                if not v <= vp + 1e-6:
                    failures.append(f"dominance {name} d={d} {variant.value}: {v} > {vp}")
    counts = {k: statuses.count(k) for k in sorted(set(statuses))}
    report("6a", not failures, f"{len(statuses)} cells {counts}"
                               + (f"; violations: {'; '.join(failures[:6])}" if failures else "; no violations"))


def test_criterion_6b_duality():
    worst, where, failures = 0.0, "", []
    for name in sorted(registry()):
        for variant in VARIANTS:
            for d in (4, 6, 8):
                a, b = bound(name, d, variant), bound(name, d, variant, side="moment")
                err = abs(a - b) / (1 + abs(a))
                if not err <= 1e-5:
                    failures.append(f"{name} d={d} {variant.value}: sos {a} moment {b}")
                if err > worst:
                    worst, where = err, f"{name} d={d} {variant.value}"
    report("6b", not failures, f"worst |sos - moment|/(1+v) = {worst:.2e} at {where}"
                               + (f"; failing: {'; '.join(failures[:5])}" if failures else ""))


def test_criterion_6c_moments_vs_mc():
    worst, total, bad = 0.0, 0, []
    for n, p in ((2, 2), (2, 4), (3, 2)):
        exact = lp_ball_moments(n, p, 4)
        est, se = mc_moments(LpBall(n, p), 4, 10**6, seed=2024)
        for k, e, m, s in zip(exact.basis, exact.values, est.values, se):
            z = abs(m - e) / s if s > 0 else (0.0 if m == e else math.inf)
            total += 1
            worst = max(worst, z)
            if z > 4.0:
                bad.append(f"B^{n}_{p} k={k} z={z:.2f}")
    report("6c", not bad, f"{total} moments, max |z| = {worst:.2f} (<= 4)" + (f"; {bad}" if bad else ""))


def test_criterion_6d_invariants():
    from test_assembly import CASES, test_round_trip_random_feasible

    rng = np.random.default_rng(99)
    leib = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        p, q = random_poly(rng, n, int(rng.integers(0, 7))), random_poly(rng, n, int(rng.integers(0, 7)))
        i = int(rng.integers(0, n))
        lhs = differentiate(multiply(p, q), i)
        rhs = add(multiply(differentiate(p, i), q), multiply(p, differentiate(q, i)))
        leib += lhs == rhs
    y = lp_ball_moments(3, 2, 6)
    lin = 0
    for _ in range(100):
        p, q = random_poly(rng, 3, 6), random_poly(rng, 3, 6)
        a, b = rng.normal(size=2)
        lin += abs(riesz(y, a * p + b * q) - a * riesz(y, p) - b * riesz(y, q)) <= 1e-12 * (1 + abs(riesz(y, a * p + b * q)))
    trips = 0
    for case in CASES:
        try:
            test_round_trip_random_feasible(*case)
            trips += 1
        except AssertionError:
            pass
    ok = leib == 100 and lin == 100 and trips == len(CASES)
    report("6d", ok, f"Leibniz {leib}/100 exact, Riesz linearity {lin}/100, "
                     f"round trip {trips}/{len(CASES)} assemblies x 100 PSD-feasible samples (residual <= 1e-10)")


def test_criterion_6e_wstar():
    parts, ok = [], True
    for name in ("disk", "lp4-disk", "double-disk"):
        s = get_scenario(name)
        est = wstar_integral(wstar_fit(s, 10**6, seed=0), 10**6, seed=1)
        z = abs(est.estimate - s.exact_volume) / est.std_error
        ok &= z <= 4.0
        parts.append(f"{name} int w* z={z:.2f}")
    l8, l16 = grid_l1(grid("disk", 8, GENERAL)), grid_l1(grid("disk", 16, GENERAL))
    ok &= l16 < l8
    parts.append(f"disk L1(w, w*) d=16 {l16:.4f} < d=8 {l8:.4f}: {l16 < l8}")
    report("6e", ok, "; ".join(parts))


# 7 -----------------------------------------------------------------------

def test_criterion_7_excluded():
    line = ("SKIP  criterion 7: dimensions n = 6..10, T1 at d in {16, 20} and wall-clock "
            "comparisons are out of scope at desk scale")
    RESULTS.append(line)
    print(line)


# module invariants checked at acceptance level ---------------------------

def test_registry_completeness():
    x1, x2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    y = [Polynomial.variable(3, i) for i in range(3)]
    t = Polynomial.variable(1, 0)
    want = {
        "disk": (0.25 - (x1 - 0.5) ** 2 - x2**2, LpBall(2, 2)),
        "ball3": (0.5625 - y[0] ** 2 - y[1] ** 2 - y[2] ** 2, LpBall(3, 2)),
        "lp4-disk": ((25 / 72) ** 4 - x1**4 - x2**4, LpBall(2, 2)),
        "double-disk": ((1 / 16 - (x1 - 0.5) ** 2 - x2**2) * ((x1 + 0.5) ** 2 + x2**2 - 1 / 16), LpBall(2, 2)),
        "interval": (t * (0.5 - t), LpBall(1, 2)),
    }
    for p in (2, 4, 6, 8, 10):
        want[f"lp{p}-box"] = (0.5625 - x1**2 - x2**2, LpBall(2, p))
    reg = registry()
    bad = []
    for name, (g, b) in want.items():
        s = reg.get(name)
        if s is None:
            bad.append(f"{name} missing")
            continue
        diff = s.g - g
        if max((abs(c) for c in diff.terms.values()), default=0.0) > 1e-15 or s.bounding != b:
            bad.append(f"{name} differs")
        if s.exact_volume is None:
            bad.append(f"{name} has no exact volume")
    report("registry", not bad, f"{len(want)} scenarios checked" + (f"; {bad}" if bad else ", all present and exact"))


def test_gibbs_sup_norm():
    p, g = grid_max(grid("disk", 16, PLAIN)), grid_max(grid("disk", 16, GENERAL))
    report("Gibbs max(w)", g < p, f"disk d=16 grid max w: Plain {p:.4f}, GeneralStokes {g:.4f} (need GeneralStokes < Plain)")


def test_gibbs_exterior_overshoot():
    p, g = exterior_overshoot(grid("disk", 16, PLAIN)), exterior_overshoot(grid("disk", 16, GENERAL))
    report("Gibbs overshoot on B\\K", g < p, f"disk d=16 max of w outside K: Plain {p:.4f}, GeneralStokes {g:.4f}")
