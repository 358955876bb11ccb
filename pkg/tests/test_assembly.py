import math
import zlib

import numpy as np
import pytest
import scipy.linalg as la

from sosvolume import (
    DegreeError,
    SolveError,
    SolverOptions,
    Variant,
    assemble,
    assemble_moment,
    assemble_sos,
    decode,
    get_scenario,
    solve,
)
from sosvolume.assembly import primal_polynomials
from sosvolume.poly import Polynomial, differentiate, divergence, enumerate_monomials
from sosvolume.sdp import FREE, SdpSolution, Status

DISK = get_scenario("disk")


def builder_row(problem, dmap, builder_row_id):
    """Unnormalised coefficients of one builder row: ({free index: coeff}, rhs)."""
    r = dmap.row_map.index[builder_row_id]
    scale = dmap.row_map.scale[builder_row_id]
    m = (problem.row == r) & (problem.blk == FREE)
    assert not np.any((problem.row == r) & (problem.blk != FREE))
    return {int(i): v * scale for i, v in zip(problem.ii[m], problem.val[m])}, problem.rhs[r] * scale


def test_disk_plain_sizes():
    p, m = assemble_sos(DISK, 4, Variant.PLAIN)
    assert p.block_sizes == (6, 3, 6, 3)
    assert p.n_free == 0
    assert p.n_rows == 15


def test_disk_general_sizes():
    p, m = assemble_sos(DISK, 4, Variant.GENERAL)
    start, fb, ncomp = m.free["u"]
    assert (len(fb), ncomp) == (10, 2)
    assert fb.max_degree == 3
    start, eb, _ = m.free["eta1"]
    assert len(eb) == 6
    assert p.n_free == 26
    blk, gb, _ = m.grams["eta0"]
    assert p.block_sizes[blk] == 6
    # identity (iii) adds one row per monomial of degree <= 4
    assert p.n_rows == 30


def test_moment_plain_k1_blocks():
    p, m = assemble_moment(DISK, 2, Variant.PLAIN)
    assert p.block_sizes == (3, 1, 3, 1)


def test_moment_stokes_row_constant_alpha():
    p, m = assemble_moment(DISK, 4, Variant.GENERAL)
    rows, fb = m.rows["stokes"]
    yn, nb, _ = m.free["y_nu"]
    for i in range(2):
        coeffs, rhs = builder_row(p, m, rows[i * len(fb) + fb.index((0, 0))])
        want = {yn + nb.index(k): c for k, c in differentiate(DISK.g, i).terms.items()}
        assert rhs == 0.0
        assert coeffs.keys() == want.keys()
        for k in want:
            assert coeffs[k] == pytest.approx(want[k], rel=1e-15)


def test_moment_stokes_row_first_degree():
    # alpha = (1, 0), i = 1: y_mu[0] + L_nu(x1 (1 - 2 x1)) = 0
    p, m = assemble_moment(DISK, 4, Variant.GENERAL)
    rows, fb = m.rows["stokes"]
    ym = m.free["y_mu"][0]
    yn, nb, _ = m.free["y_nu"]
    coeffs, rhs = builder_row(p, m, rows[fb.index((1, 0))])
    want = {ym + 0: 1.0, yn + nb.index((1, 0)): 1.0, yn + nb.index((2, 0)): -2.0}
    assert rhs == 0.0
    assert coeffs == pytest.approx(want, rel=1e-15)


def _disk_true_moments(d, quad=4000):
    """Moments of lambda on K and of the boundary measure nu (|grad g| = 1 on the circle)."""
    basis = enumerate_monomials(2, d)
    # K is the disk of radius 1/2 about (1/2, 0)
    r, th = np.polynomial.legendre.leggauss(200)
    rr = 0.25 * (r + 1)
    t = np.linspace(0, 2 * np.pi, quad, endpoint=False)
    R, T = np.meshgrid(rr, t, indexing="ij")
    W = (0.25 * th)[:, None] * R * (2 * np.pi / quad)
    X1, X2 = 0.5 + R * np.cos(T), R * np.sin(T)
    c1, c2 = 0.5 + 0.5 * np.cos(t), 0.5 * np.sin(t)
    mu = np.array([np.sum(W * X1 ** a * X2 ** b) for a, b in basis])
    nu = np.array([np.sum(c1 ** a * c2 ** b) * 0.5 * (2 * np.pi / quad) for a, b in basis])
    return basis, mu, nu


@pytest.mark.parametrize("variant", [Variant.FACTORED, Variant.GENERAL])
def test_stokes_rows_vanish_on_true_moments(variant):
    d = 6
    p, m = assemble_moment(DISK, d, variant)
    basis, mu, nu = _disk_true_moments(d)
    assert mu[0] == pytest.approx(math.pi / 4, rel=1e-12)
    x = np.zeros(p.n_free)
    ym = m.free["y_mu"][0]
    x[ym: ym + len(basis)] = mu
    if "y_nu" in m.free:
        yn = m.free["y_nu"][0]
        x[yn: yn + len(basis)] = nu
    F = p.free_matrix()
    for name in ("stokes", "nu"):
        if name not in m.rows:
            continue
        idx = m.row_map.index[m.rows[name][0]]
        idx = idx[idx >= 0]
        assert np.max(np.abs(F[idx] @ x - p.rhs[idx])) < 1e-12


@pytest.mark.parametrize("side", ["sos", "moment"])
def test_degree_errors(side):
    with pytest.raises(DegreeError):
        assemble(DISK, 3, Variant.PLAIN, side=side)
    with pytest.raises(DegreeError):
        assemble(get_scenario("double-disk"), 2, Variant.PLAIN, side=side)
    with pytest.raises(DegreeError):
        assemble(get_scenario("lp10-box"), 0, Variant.GENERAL, side=side)


def test_variant_parsing():
    assert Variant.parse("stokes-general") is Variant.GENERAL
    assert Variant.parse(Variant.PLAIN) is Variant.PLAIN
    with pytest.raises(ValueError):
        Variant.parse("nonsense")


def test_assembly_is_deterministic():
    a, _ = assemble_sos(get_scenario("double-disk"), 6, Variant.GENERAL)
    b, _ = assemble_sos(get_scenario("double-disk"), 6, Variant.GENERAL)
    for f in ("row", "blk", "ii", "jj", "val", "rhs", "obj_val"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_sigma1_dropped_below_bounding_degree():
    p, m = assemble_sos(get_scenario("lp10-box"), 8, Variant.PLAIN)
    assert not any(k.startswith("sigma1") for k in m.grams)
    p, m = assemble_sos(get_scenario("lp10-box"), 10, Variant.PLAIN)
    assert "sigma1[0]" in m.grams


# ---- round trip: feasible PSD assignments satisfy the identities -----------

def _svec_columns(problem):
    """Dense map (X, x) coordinates -> row values, with the coordinate list."""
    coords = [(b, i, j) for b, s in enumerate(problem.block_sizes) for i in range(s) for j in range(i, s)]
    coords += [(FREE, k, 0) for k in range(problem.n_free)]
    zero = [np.zeros((s, s)) for s in problem.block_sizes]
    cols = []
    for b, i, j in coords:
        X = [z.copy() for z in zero]
        x = np.zeros(problem.n_free)
        if b == FREE:
            x[i] = 1.0
        else:
            X[b][i, j] = X[b][j, i] = 1.0
        cols.append(problem.apply(X, x))
    return coords, np.array(cols).T


def _unpack(problem, coords, v):
    X = [np.zeros((s, s)) for s in problem.block_sizes]
    x = np.zeros(problem.n_free)
    for (b, i, j), val in zip(coords, v):
        if b == FREE:
            x[i] = val
        else:
            X[b][i, j] = X[b][j, i] = val
    return X, x


def _identity_residuals(s, variant, polys):
    g = s.g
    sig = polys["sigma0"]
    for name, p in polys.items():
        if name.startswith("sigma1"):
            sig = sig + p
    w = polys["w"]
    out = [w - sig]
    lhs = w - 1.0
    if variant is Variant.FACTORED:
        lhs = lhs - divergence([g * v for v in polys["field"]])
    elif variant is Variant.GENERAL:
        lhs = lhs - divergence(polys["field"])
    out.append(lhs - polys["psi0"] - polys["psi1"])
    if variant is Variant.GENERAL:
        ug = Polynomial.zero(s.n)
        for i, u in enumerate(polys["field"]):
            ug = ug + u * differentiate(g, i)
        out.append(-ug - polys["eta0"] - polys["eta1"] * g)
    return max(max((abs(c) for c in p.terms.values()), default=0.0) for p in out)


# double-disk / GeneralStokes at d = 4 is left out on purpose: there eta1 is a
# constant, g < 0 at the origin and g > 0 at both maxima (all critical points),
# which forces eta1 = 0 and eta0 to vanish at the maxima, so the feasible set
# has no interior to sample around
CASES = [("disk", 4, Variant.PLAIN), ("disk", 4, Variant.FACTORED), ("disk", 4, Variant.GENERAL),
         ("double-disk", 4, Variant.FACTORED), ("lp4-disk", 4, Variant.GENERAL),
         ("ball3", 4, Variant.GENERAL), ("interval", 6, Variant.GENERAL)]


@pytest.mark.parametrize("name,d,variant", CASES)
def test_round_trip_random_feasible(name, d, variant):
    s = get_scenario(name)
    p, m = assemble_sos(s, d, variant)
    coords, A = _svec_columns(p)
    N = la.null_space(A)
    pinv = np.linalg.pinv(A)
    # a strictly feasible centre: a loose interior-point iterate projected onto A v = b
    sol = solve(p, SolverOptions(tol_gap=1e-2, tol_feas=1e-2))
    v0 = np.array([sol.x[i] if b == FREE else sol.X[b][i, j] for b, i, j in coords])
    v0 = v0 + pinv @ (p.rhs - A @ v0)
    X0, _ = _unpack(p, coords, v0)
    assert min(np.linalg.eigvalsh(x)[0] for x in X0) > 0
    rng = np.random.default_rng(zlib.crc32(f"{name}{d}{variant.value}".encode()))
    worst = 0.0
    for _ in range(100):
        dv = N @ rng.normal(size=N.shape[1])
        dX, _ = _unpack(p, coords, dv)
        # largest step keeping every block PSD, then a random fraction of it
        t = np.inf
        for x, dx in zip(X0, dX):
            L = np.linalg.cholesky(x)
            Li = np.linalg.inv(L)
            lo = np.linalg.eigvalsh(Li @ dx @ Li.T)[0]
            if lo < 0:
                t = min(t, -1.0 / lo)
        v = v0 + rng.uniform(0.1, 0.95) * (t if np.isfinite(t) else 1.0) * dv
        X, x = _unpack(p, coords, v)
        assert min(np.linalg.eigvalsh(b)[0] for b in X) >= -1e-12
        assert np.max(np.abs(A @ v - p.rhs)) < 1e-9
        polys = primal_polynomials(m, X, x)
        scale = 1.0 + np.max(np.abs(v))
        worst = max(worst, _identity_residuals(s, variant, polys) / scale)
    assert worst <= 1e-10


def test_decode_infeasible_raises():
    p, m = assemble_sos(DISK, 4, Variant.PLAIN)
    bad = SdpSolution(Status.INFEASIBLE, [], np.zeros(0), np.zeros(p.n_rows), [], 0.0, 0.0, 3, 0.0)
    with pytest.raises(SolveError) as exc:
        decode(m, bad)
    assert exc.value.status is Status.INFEASIBLE


def test_decode_consistency_small():
    p, m = assemble_sos(DISK, 6, Variant.GENERAL)
    cert = decode(m, solve(p))
    assert cert.objective_check <= 1e-6
    assert cert.w.degree() <= 6
    assert all(r <= 1e-6 for r in cert.identity_residuals.values())
    assert cert.bound >= math.pi / 4 - 1e-5
