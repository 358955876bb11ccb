"""Build the SDP for one level of the volume hierarchy, and read it back.

Two assemblies are provided for every variant:

* ``assemble_sos``: the sum-of-squares strengthening. Unknowns are Gram
  matrices (sigma0, sigma1 per bounding polynomial, psi0, psi1, eta0) and free
  coefficient vectors (u or v, eta1). ``w = sigma0 + sum_j sigma1_j b_j`` is
  never a variable; its coefficients are linear images of the Gram blocks.
* ``assemble_moment``: the moment relaxation with pseudo-moments ``y_mu``
  (and ``y_nu``) as free variables, tied to moment/localizing blocks by one
  linking row per upper-triangular Gram entry.

Identities (SOS side, imposed coefficientwise)::

    (i)   w = sigma0 + sum_j sigma1_j * b_j
    (ii)  w - S - 1 = psi0 + psi1 * g       S = 0, div(g v) or div(u)
    (iii) -u . grad g = eta0 + eta1 * g      (general Stokes only)

The duals of rows (ii) are the pseudo-moments of mu, the duals of (iii) those
of nu. On the moment side the roles swap: Gram matrices are the dual slacks
and u, v, eta1 are row multipliers.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .moments import MomentVector, moments_of, riesz
from .poly import MonomialBasis, Polynomial, differentiate, divergence, enumerate_monomials
from .scenario import ScenarioSpec
from .sdp import FREE, ProblemBuilder, RowMap, SdpProblem, SdpSolution, Status

__all__ = [
    "Variant",
    "DegreeError",
    "SolveError",
    "DecodingMap",
    "Certificate",
    "assemble_sos",
    "assemble_moment",
    "assemble",
    "decode",
    "primal_polynomials",
    "gram_polynomial",
]


class Variant(str, enum.Enum):
    PLAIN = "plain"
    FACTORED = "stokes-factored"
    GENERAL = "stokes-general"

    @classmethod
    def parse(cls, s) -> "Variant":
        if isinstance(s, Variant):
            return s
        aliases = {
            "plain": cls.PLAIN,
            "stokes-factored": cls.FACTORED,
            "factoredstokes": cls.FACTORED,
            "factored": cls.FACTORED,
            "stokes-general": cls.GENERAL,
            "generalstokes": cls.GENERAL,
            "general": cls.GENERAL,
            "stokes": cls.GENERAL,
        }
        key = str(s).strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown variant {s!r}")
        return aliases[key]


class DegreeError(ValueError):
    pass


class SolveError(RuntimeError):
    """Raised by decode when the solver did not return a usable point."""

    def __init__(self, status: Status, message: str = ""):
        super().__init__(message or f"solver finished with status {status.value}")
        self.status = status


@dataclass
class DecodingMap:
    """Where every named object lives in the assembled SDP.

    ``grams`` maps a name ("sigma0", "sigma1[0]", "psi0", "psi1", "eta0") to
    ``(block id, basis, multiplier polynomial)``. ``free`` maps "u", "v",
    "eta1", "y_mu", "y_nu" to ``(start, basis, count)`` where vector fields
    store their n components back to back. ``rows`` maps an identity name to
    the builder rows, one per monomial of the given basis (moment side: the
    Stokes and nu rows).
    """

    scenario: ScenarioSpec
    d: int
    variant: Variant
    side: str
    z: MomentVector
    row_map: RowMap
    grams: dict = field(default_factory=dict)
    free: dict = field(default_factory=dict)
    rows: dict = field(default_factory=dict)
    literal_degrees: bool = False
    assembly_time: float = 0.0


@dataclass
class Certificate:
    variant: Variant
    d: int
    side: str
    bound: float
    w: Polynomial
    field: list[Polynomial]
    eta1: Polynomial | None
    pseudo_moments_mu: MomentVector
    pseudo_moments_nu: MomentVector | None
    solver_report: dict
    identity_residuals: dict
    objective_check: float
    grams: dict = field(default_factory=dict, repr=False)

    @property
    def u(self) -> list[Polynomial]:
        return self.field if self.variant is Variant.GENERAL else []

    @property
    def v(self) -> list[Polynomial]:
        return self.field if self.variant is Variant.FACTORED else []


def _check_degree(s: ScenarioSpec, d: int):
    if d % 2:
        raise DegreeError(f"relaxation degree must be even, got {d}")
    if d < s.g.degree():
        raise DegreeError(f"degree too small: d={d} < deg g={s.g.degree()}")


def _gram_degree(m: int) -> int | None:
    """Gram basis degree for an SOS multiplier of degree <= m, or None if m < 0."""
    return None if m < 0 else m // 2


def _add_gram(pb: ProblemBuilder, rows, target: MonomialBasis, gbasis: MonomialBasis,
              q: Polynomial, block: int, sign: float):
    """Append sign * coeffs(m^T G m * q) to the rows indexed by ``target``."""
    mons = gbasis.monomials
    qt = list(q.terms.items())
    for a in range(len(mons)):
        ka = mons[a]
        for b in range(a, len(mons)):
            kab = tuple(x + y for x, y in zip(ka, mons[b]))
            mult = 1.0 if a == b else 2.0
            for kq, c in qt:
                k = tuple(x + y for x, y in zip(kab, kq))
                pb.entry(rows[target.index(k)], block, a, b, sign * mult * c)


def _gram_objective(pb: ProblemBuilder, gbasis: MonomialBasis, q: Polynomial,
                    z: MomentVector, block: int):
    mons = gbasis.monomials
    for a in range(len(mons)):
        for b in range(a, len(mons)):
            kab = tuple(x + y for x, y in zip(mons[a], mons[b]))
            val = sum(c * z[tuple(x + y for x, y in zip(kab, kq))] for kq, c in q.terms.items())
            pb.objective(block, a, b, (1.0 if a == b else 2.0) * val)


def _field_degree(s: ScenarioSpec, d: int, variant: Variant, literal: bool) -> int:
    if variant is Variant.GENERAL and literal:
        return d
    return d - s.g.degree() + 1


def assemble_sos(s: ScenarioSpec, d: int, variant=Variant.PLAIN,
                 literal_degrees: bool = False) -> tuple[SdpProblem, DecodingMap]:
    """SOS strengthening at degree ``d``.

    ``literal_degrees`` gives u degree d in the general Stokes variant; the
    (iii) identity is then imposed up to degree d + deg g - 1, where only u
    contributes to the top rows.
    """
    t0 = time.perf_counter()
    variant = Variant.parse(variant)
    _check_degree(s, d)
    n, g = s.n, s.g
    dg = g.degree()
    grad_g = [differentiate(g, i) for i in range(n)]
    pb = ProblemBuilder()

    top_iii = d
    if variant is Variant.GENERAL and literal_degrees:
        top_iii = d + dg - 1
    z = moments_of(s.bounding, d)
    basis = enumerate_monomials(n, d)
    one = Polynomial.constant(n, 1.0)

    rows_ii = [pb.add_row(1.0 if k == (0,) * n else 0.0, f"ii{k}") for k in basis]
    grams: dict = {}
    free: dict = {}

    # w = sigma0 + sum_j sigma1_j b_j enters (ii) with sign +1 and the objective
    gb = enumerate_monomials(n, d // 2)
    blk = pb.add_block(len(gb), "sigma0")
    _add_gram(pb, rows_ii, basis, gb, one, blk, 1.0)
    _gram_objective(pb, gb, one, z, blk)
    grams["sigma0"] = (blk, gb, one)
    for j, b in enumerate(s.b):
        m = _gram_degree(d - b.degree())
        if m is None:
            continue
        gb = enumerate_monomials(n, m)
        blk = pb.add_block(len(gb), f"sigma1[{j}]")
        _add_gram(pb, rows_ii, basis, gb, b, blk, 1.0)
        _gram_objective(pb, gb, b, z, blk)
        grams[f"sigma1[{j}]"] = (blk, gb, b)

    gb = enumerate_monomials(n, d // 2)
    blk = pb.add_block(len(gb), "psi0")
    _add_gram(pb, rows_ii, basis, gb, one, blk, -1.0)
    grams["psi0"] = (blk, gb, one)
    m = _gram_degree(d - dg)
    gb = enumerate_monomials(n, m)
    blk = pb.add_block(len(gb), "psi1")
    _add_gram(pb, rows_ii, basis, gb, g, blk, -1.0)
    grams["psi1"] = (blk, gb, g)

    rows = {"ii": (rows_ii, basis)}
    if variant is Variant.FACTORED:
        # -div(g v): v_i = sum_a v_{i,a} x^a contributes -d/dx_i (g x^a)
        fb = enumerate_monomials(n, _field_degree(s, d, variant, literal_degrees))
        start = pb.add_free(n * len(fb), "v")
        free["v"] = (start, fb, n)
        for i in range(n):
            for a, ka in enumerate(fb):
                col = start + i * len(fb) + a
                for k, c in differentiate(Polynomial.monomial(ka) * g, i).terms.items():
                    pb.entry(rows_ii[basis.index(k)], FREE, col, 0, -c)
    elif variant is Variant.GENERAL:
        fb = enumerate_monomials(n, _field_degree(s, d, variant, literal_degrees))
        start = pb.add_free(n * len(fb), "u")
        free["u"] = (start, fb, n)
        basis3 = enumerate_monomials(n, top_iii)
        rows_iii = [pb.add_row(0.0, f"iii{k}") for k in basis3]
        rows["iii"] = (rows_iii, basis3)
        for i in range(n):
            for a, ka in enumerate(fb):
                col = start + i * len(fb) + a
                if ka[i] > 0:
                    k = list(ka)
                    k[i] -= 1
                    pb.entry(rows_ii[basis.index(tuple(k))], FREE, col, 0, -float(ka[i]))
                for kg, c in grad_g[i].terms.items():
                    k = tuple(x + y for x, y in zip(ka, kg))
                    pb.entry(rows_iii[basis3.index(k)], FREE, col, 0, -c)
        gb = enumerate_monomials(n, d // 2)
        blk = pb.add_block(len(gb), "eta0")
        _add_gram(pb, rows_iii, basis3, gb, one, blk, -1.0)
        grams["eta0"] = (blk, gb, one)
        eb = enumerate_monomials(n, d - dg)
        start = pb.add_free(len(eb), "eta1")
        free["eta1"] = (start, eb, 1)
        for a, ka in enumerate(eb):
            for kg, c in g.terms.items():
                k = tuple(x + y for x, y in zip(ka, kg))
                pb.entry(rows_iii[basis3.index(k)], FREE, start + a, 0, -c)

    problem, row_map = pb.build(normalize_rows=True)
    dmap = DecodingMap(s, d, variant, "sos", z, row_map, grams, free, rows,
                       literal_degrees, time.perf_counter() - t0)
    return problem, dmap


def _link_block(pb: ProblemBuilder, label: str, gbasis: MonomialBasis, q: Polynomial,
                y_start: int, ybasis: MonomialBasis, sign: float, z: MomentVector | None):
    """Block X with X_ab = sign * L_y(q x^(a+b)) (+ L_z(...) when z is given)."""
    blk = pb.add_block(len(gbasis), label)
    mons = gbasis.monomials
    for a in range(len(mons)):
        for b in range(a, len(mons)):
            kab = tuple(x + y for x, y in zip(mons[a], mons[b]))
            rhs = 0.0
            if z is not None:
                rhs = sum(c * z[tuple(x + y for x, y in zip(kab, kq))] for kq, c in q.terms.items())
            r = pb.add_row(rhs, f"{label}[{a},{b}]")
            pb.entry(r, blk, a, b, 1.0)
            for kq, c in q.terms.items():
                k = tuple(x + y for x, y in zip(kab, kq))
                pb.entry(r, FREE, y_start + ybasis.index(k), 0, -sign * c)
    return blk


class _SubBasis:
    """A subset of a monomial basis with the MonomialBasis lookup interface."""

    def __init__(self, nvars: int, monomials):
        self.nvars = nvars
        self.monomials = tuple(monomials)
        self._index = {k: i for i, k in enumerate(self.monomials)}

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __contains__(self, k):
        return tuple(k) in self._index

    def index(self, k) -> int:
        return self._index[tuple(k)]


def leading_monomial(g: Polynomial) -> tuple[int, ...]:
    """Largest exponent of g in graded-lex order (x1 > x2 > ...)."""
    top = g.degree()
    return max((k for k in g.terms if sum(k) == top))


def _standard_monomials(basis: MonomialBasis, g: Polynomial) -> _SubBasis:
    # Monomials not divisible by LM(g). Multiples g*q have distinct leading
    # monomials LM(g)LM(q), so these span a complement of {g q} in basis.
    lm = leading_monomial(g)
    keep = [k for k in basis if not all(a >= b for a, b in zip(k, lm))]
    return _SubBasis(basis.nvars, keep)


def assemble_moment(s: ScenarioSpec, d: int, variant=Variant.PLAIN) -> tuple[SdpProblem, DecodingMap]:
    """Moment relaxation at degree d = 2k; the objective is -y_mu[0].

    For the general Stokes variant the rows L_nu(g x^a) = 0 put every
    multiple g q (deg q <= k - deg g) in the kernel of M_k(y_nu), so that
    block has no interior. It is imposed on the principal submatrix over
    the monomials not divisible by LM(g), which is equivalent given those
    rows and keeps a strictly feasible point.
    """
    t0 = time.perf_counter()
    variant = Variant.parse(variant)
    _check_degree(s, d)
    n, g = s.n, s.g
    dg = g.degree()
    k = d // 2
    z = moments_of(s.bounding, d)
    basis = enumerate_monomials(n, d)
    one = Polynomial.constant(n, 1.0)
    pb = ProblemBuilder()
    grams: dict = {}
    free: dict = {}
    rows: dict = {}

    ym = pb.add_free(len(basis), "y_mu")
    free["y_mu"] = (ym, basis, 1)
    pb.objective(FREE, ym, 0, -1.0)

    gb = enumerate_monomials(n, k)
    grams["psi0"] = (_link_block(pb, "M(y_mu)", gb, one, ym, basis, 1.0, None), gb, one)
    gb = enumerate_monomials(n, k - math.ceil(dg / 2))
    grams["psi1"] = (_link_block(pb, "M(g y_mu)", gb, g, ym, basis, 1.0, None), gb, g)
    gb = enumerate_monomials(n, k)
    grams["sigma0"] = (_link_block(pb, "M(z - y_mu)", gb, one, ym, basis, -1.0, z), gb, one)
    for j, b in enumerate(s.b):
        m = k - math.ceil(b.degree() / 2)
        if m < 0:
            continue
        gb = enumerate_monomials(n, m)
        grams[f"sigma1[{j}]"] = (
            _link_block(pb, f"M(b{j} (z - y_mu))", gb, b, ym, basis, -1.0, z), gb, b)

    if variant is Variant.FACTORED:
        fb = enumerate_monomials(n, _field_degree(s, d, variant, False))
        rr = []
        for i in range(n):
            for ka in fb:
                r = pb.add_row(0.0, f"stokes[{i}]{ka}")
                rr.append(r)
                for kk, c in differentiate(Polynomial.monomial(ka) * g, i).terms.items():
                    pb.entry(r, FREE, ym + basis.index(kk), 0, c)
        rows["stokes"] = (rr, fb)
    elif variant is Variant.GENERAL:
        yn = pb.add_free(len(basis), "y_nu")
        free["y_nu"] = (yn, basis, 1)
        gb = _standard_monomials(enumerate_monomials(n, k), g)
        grams["eta0"] = (_link_block(pb, "M(y_nu)", gb, one, yn, basis, 1.0, None), gb, one)
        eb = enumerate_monomials(n, d - dg)
        rr = []
        for ka in eb:
            r = pb.add_row(0.0, f"nu_support{ka}")
            rr.append(r)
            for kg, c in g.terms.items():
                kk = tuple(x + y for x, y in zip(ka, kg))
                pb.entry(r, FREE, yn + basis.index(kk), 0, c)
        rows["nu"] = (rr, eb)
        fb = enumerate_monomials(n, _field_degree(s, d, variant, False))
        rr = []
        for i in range(n):
            dgi = differentiate(g, i)
            for ka in fb:
                r = pb.add_row(0.0, f"stokes[{i}]{ka}")
                rr.append(r)
                if ka[i] > 0:
                    kk = list(ka)
                    kk[i] -= 1
                    pb.entry(r, FREE, ym + basis.index(tuple(kk)), 0, float(ka[i]))
                for kg, c in dgi.terms.items():
                    kk = tuple(x + y for x, y in zip(ka, kg))
                    pb.entry(r, FREE, yn + basis.index(kk), 0, c)
        rows["stokes"] = (rr, fb)

    problem, row_map = pb.build(normalize_rows=True)
    dmap = DecodingMap(s, d, variant, "moment", z, row_map, grams, free, rows,
                       False, time.perf_counter() - t0)
    return problem, dmap


def assemble(s: ScenarioSpec, d: int, variant=Variant.PLAIN, side: str = "sos", **kw):
    if side == "sos":
        return assemble_sos(s, d, variant, **kw)
    if side == "moment":
        return assemble_moment(s, d, variant)
    raise ValueError(f"side must be 'sos' or 'moment', got {side!r}")


def gram_polynomial(G: np.ndarray, gbasis: MonomialBasis) -> Polynomial:
    """m^T G m for the monomial vector m of ``gbasis``."""
    mons = gbasis.monomials
    terms: dict = {}
    for a in range(len(mons)):
        for b in range(len(mons)):
            if G[a, b] != 0.0:
                k = tuple(x + y for x, y in zip(mons[a], mons[b]))
                terms[k] = terms.get(k, 0.0) + G[a, b]
    return Polynomial(gbasis.nvars, terms)


def _vector_field(x: np.ndarray, start: int, fb: MonomialBasis, n: int) -> list[Polynomial]:
    L = len(fb)
    return [Polynomial.from_coefficients(fb, x[start + i * L: start + (i + 1) * L]) for i in range(n)]


def _identities(dmap: DecodingMap, polys: dict) -> dict:
    """Coefficient residuals of (i)-(iii) for decoded polynomials."""
    s = dmap.scenario
    g = s.g
    n = s.n
    w = polys["w"]
    sig = polys["sigma0"]
    for name, p in polys.items():
        if name.startswith("sigma1"):
            sig = sig + p
    out = {"i": _maxabs(w - sig)}
    lhs = w - 1.0
    if dmap.variant is Variant.FACTORED:
        lhs = lhs - divergence([g * vi for vi in polys["field"]])
    elif dmap.variant is Variant.GENERAL:
        lhs = lhs - divergence(polys["field"])
    out["ii"] = _maxabs(lhs - polys["psi0"] - polys["psi1"])
    if dmap.variant is Variant.GENERAL:
        ug = Polynomial.zero(n)
        for i, ui in enumerate(polys["field"]):
            ug = ug + ui * differentiate(g, i)
        out["iii"] = _maxabs(-ug - polys["eta0"] - polys["eta1"] * g)
    return out


def _maxabs(p: Polynomial) -> float:
    return max((abs(c) for c in p.terms.values()), default=0.0)


def primal_polynomials(dmap: DecodingMap, X: list[np.ndarray], x: np.ndarray) -> dict:
    """Named polynomials carried by an SOS-side assignment (X, x).

    Keys: "sigma0", "sigma1[j]", "psi0", "psi1" (already multiplied by g),
    "eta0", "eta1", "w" and "field" (u or v).
    """
    if dmap.side != "sos":
        raise ValueError("primal_polynomials applies to the SOS assembly")
    out = {}
    for name, (blk, gb, q) in dmap.grams.items():
        out[name] = gram_polynomial(X[blk], gb) * q
    w = out["sigma0"]
    for name, p in out.items():
        if name.startswith("sigma1"):
            w = w + p
    out["w"] = w
    for key in ("u", "v"):
        if key in dmap.free:
            start, fb, nn = dmap.free[key]
            out["field"] = _vector_field(x, start, fb, nn)
    if "eta1" in dmap.free:
        start, eb, _ = dmap.free["eta1"]
        out["eta1"] = Polynomial.from_coefficients(eb, x[start: start + len(eb)])
    return out


def decode(dmap: DecodingMap, sol: SdpSolution) -> Certificate:
    if not sol.status.usable:
        raise SolveError(sol.status)
    s = dmap.scenario
    n = s.n
    duals = dmap.row_map.original_duals(sol.y)
    eta1 = None
    nu = None
    if dmap.side == "sos":
        polys = primal_polynomials(dmap, sol.X, sol.x)
        rows, basis = dmap.rows["ii"]
        mu = MomentVector(basis, duals[rows])
        if "iii" in dmap.rows:
            rows, basis3 = dmap.rows["iii"]
            nu = MomentVector(basis3, duals[rows])
        eta1 = polys.get("eta1")
        # w is built from the primal Gram blocks
        solver_value = sol.objective_primal
    else:
        polys = {}
        for name, (blk, gb, q) in dmap.grams.items():
            polys[name] = gram_polynomial(sol.Z[blk], gb) * q
        w = polys["sigma0"]
        for name, p in polys.items():
            if name.startswith("sigma1"):
                w = w + p
        polys["w"] = w
        start, basis, _ = dmap.free["y_mu"]
        mu = MomentVector(basis, sol.x[start: start + len(basis)].copy())
        if "y_nu" in dmap.free:
            start, basis, _ = dmap.free["y_nu"]
            nu = MomentVector(basis, sol.x[start: start + len(basis)].copy())
        if "stokes" in dmap.rows:
            rows, fb = dmap.rows["stokes"]
            polys["field"] = _vector_field(duals[rows], 0, fb, n)
        if "nu" in dmap.rows:
            rows, eb = dmap.rows["nu"]
            eta1 = Polynomial.from_coefficients(eb, duals[rows])
            polys["eta1"] = eta1
        # here w comes from the dual slacks
        solver_value = -sol.objective_dual
    w = polys["w"]
    bound = riesz(dmap.z, w)
    check = abs(bound - solver_value) / max(1.0, abs(solver_value))
    report = dict(sol.report)
    report.update(
        status=sol.status.value,
        iterations=sol.iterations,
        wall_time=sol.wall_time,
        assembly_time=dmap.assembly_time,
        solver_value=solver_value,
    )
    return Certificate(
        variant=dmap.variant,
        d=dmap.d,
        side=dmap.side,
        bound=bound,
        w=w,
        field=polys.get("field", []),
        eta1=eta1,
        pseudo_moments_mu=mu,
        pseudo_moments_nu=nu,
        solver_report=report,
        identity_residuals=_identities(dmap, polys),
        objective_check=check,
        grams={k: v for k, v in polys.items() if k not in ("w", "field")},
    )
