"""Closed-form Lebesgue moments on boxes and unit l^p balls."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poly import MonomialBasis, Polynomial, enumerate_monomials

__all__ = [
    "LpBall",
    "Box",
    "MomentVector",
    "log_gamma",
    "gamma",
    "box_moments",
    "lp_ball_moments",
    "moments_of",
    "riesz",
]


def log_gamma(x: float) -> float:
    if x <= 0:
        raise ValueError(f"log_gamma needs a positive argument, got {x}")
    return math.lgamma(x)


def gamma(x: float) -> float:
    if x <= 0:
        raise ValueError(f"gamma needs a positive argument, got {x}")
    if x > 171.6:
        raise OverflowError("gamma overflows double precision; use log_gamma")
    return math.gamma(x)


@dataclass(frozen=True)
class LpBall:
    """Unit l^p ball {x : sum |x_i|^p <= 1} in dimension n."""

    n: int
    p: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def polynomials(self) -> list[Polynomial]:
        """Defining polynomial(s) b with B = {b >= 0}; p must be even."""
        if self.p % 2:
            raise ValueError(f"l^{self.p} ball is not a polynomial superlevel set (odd p)")
        b = Polynomial.constant(self.n, 1.0)
        for i in range(self.n):
            k = [0] * self.n
            k[i] = self.p
            b = b - Polynomial.monomial(k)
        return [b]

    def enclosing_box(self) -> tuple[np.ndarray, np.ndarray]:
        return -np.ones(self.n), np.ones(self.n)

    def volume(self) -> float:
        return lp_ball_moments(self.n, self.p, 0).values[0]

    def to_json(self) -> dict:
        return {"kind": "lp_ball", "n": self.n, "p": self.p}


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box needs lo_i < hi_i for every coordinate")

    @property
    def n(self) -> int:
        return len(self.lo)

    def polynomials(self) -> list[Polynomial]:
        """One quadratic (x_i - lo_i)(hi_i - x_i) per coordinate."""
        out = []
        for i, (a, b) in enumerate(zip(self.lo, self.hi)):
            xi = Polynomial.variable(self.n, i)
            out.append((xi - a) * (b - xi))
        return out

    def enclosing_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lo), np.array(self.hi)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def to_json(self) -> dict:
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}


BoundingSet = LpBall | Box


def bounding_from_json(data: dict) -> BoundingSet:
    kind = data["kind"]
    if kind == "lp_ball":
        return LpBall(int(data["n"]), int(data.get("p", 2)))
    if kind == "box":
        return Box(tuple(data["lo"]), tuple(data["hi"]))
    raise ValueError(f"unknown bounding set kind {kind!r}")


@dataclass(frozen=True)
class MomentVector:
    """Moments (or pseudo-moments) aligned with a graded-lex basis."""

    basis: MonomialBasis
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.basis):
            raise ValueError("moment vector length does not match its basis")

    def __getitem__(self, k) -> float:
        if isinstance(k, (int, np.integer)):
            return float(self.values[k])
        return float(self.values[self.basis.index(k)])

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def truncate(self, t: int) -> "MomentVector":
        basis = enumerate_monomials(self.basis.nvars, t)
        if t > self.basis.max_degree:
            raise ValueError("cannot extend a moment vector by truncation")
        return MomentVector(basis, self.values[: len(basis)].copy())

    def rows(self):
        """(exponents..., value) tuples, the CSV dump layout."""
        for k, v in zip(self.basis.monomials, self.values):
            yield (*k, float(v))


def box_moments(box: Box, t: int) -> MomentVector:
    basis = enumerate_monomials(box.n, t)
    lo, hi = np.array(box.lo), np.array(box.hi)
    # one_d[i, e] = int_{lo_i}^{hi_i} x^e dx
    e = np.arange(t + 1)
    one_d = (hi[:, None] ** (e + 1) - lo[:, None] ** (e + 1)) / (e + 1)
    exps = basis.exponent_array()
    vals = np.prod(one_d[np.arange(box.n)[None, :], exps], axis=1)
    return MomentVector(basis, vals)


def lp_ball_moments(n: int, p: int, t: int) -> MomentVector:
    """Moments of Lebesgue measure on the unit l^p ball, degrees <= t.

    Even multi-indices get
    (2/p)^n * prod_i Gamma((1+k_i)/p) / Gamma(1 + (n+|k|)/p),
    assembled in log space; any odd entry gives exactly 0.
    """
    if n < 1 or p < 1 or t < 0:
        raise ValueError("need n >= 1, p >= 1, t >= 0")
    basis = enumerate_monomials(n, t)
    vals = np.zeros(len(basis))
    log_pref = n * math.log(2.0 / p)
    for idx, k in enumerate(basis.monomials):
        if any(ki % 2 for ki in k):
            continue
        s = log_pref - log_gamma(1.0 + (n + sum(k)) / p)
        s += sum(log_gamma((1.0 + ki) / p) for ki in k)
        vals[idx] = math.exp(s)
    return MomentVector(basis, vals)


def moments_of(bounding: BoundingSet, t: int) -> MomentVector:
    if isinstance(bounding, LpBall):
        return lp_ball_moments(bounding.n, bounding.p, t)
    if isinstance(bounding, Box):
        return box_moments(bounding, t)
    raise TypeError(f"unsupported bounding set {bounding!r}")


def riesz(y: MomentVector, q: Polynomial) -> float:
    """L_y(q) = sum_k q_k y_k."""
    if q.nvars != y.basis.nvars:
        raise ValueError("dimension mismatch between polynomial and moments")
    total = 0.0
    for k, c in q.terms.items():
        if k not in y.basis:
            raise ValueError(
                f"monomial {k} exceeds moment degree {y.basis.max_degree}"
            )
        total += c * y.values[y.basis.index(k)]
    return float(total)
