"""Sparse multivariate polynomials and graded-lex monomial bases.

Polynomials are immutable maps from exponent tuples to float coefficients.
Every other module indexes pseudo-moments, Gram matrices and coefficient
identities through :class:`MonomialBasis`.
"""
from __future__ import annotations

import itertools
import json
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "MonomialBasis",
    "Polynomial",
    "enumerate_monomials",
    "add",
    "multiply",
    "scale",
    "differentiate",
    "gradient",
    "divergence",
    "evaluate",
]

Exponent = tuple[int, ...]


def _graded_lex_key(k: Exponent):
    # Within a degree, (1,0) precedes (0,1): larger leading exponent first.
    return (sum(k), tuple(-e for e in k))


class MonomialBasis:
    """All exponents of degree <= ``max_degree`` in ``nvars`` variables,
    sorted by total degree and then lexicographically (x1 before x2)."""

    __slots__ = ("nvars", "max_degree", "monomials", "_index")

    def __init__(self, nvars: int, max_degree: int):
        if nvars < 1:
            raise ValueError(f"nvars must be >= 1, got {nvars}")
        if max_degree < 0:
            raise ValueError(f"max_degree must be >= 0, got {max_degree}")
        self.nvars = nvars
        self.max_degree = max_degree
        mons = []
        for deg in range(max_degree + 1):
            mons.extend(_monomials_of_degree(nvars, deg))
        self.monomials: tuple[Exponent, ...] = tuple(mons)
        self._index = {k: i for i, k in enumerate(self.monomials)}

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def __contains__(self, k):
        return tuple(k) in self._index

    def index(self, k: Sequence[int]) -> int:
        return self._index[tuple(k)]

    def lookup(self, k: Sequence[int]) -> int:
        """Position of exponent ``k``; raises KeyError when absent."""
        return self._index[tuple(k)]

    def degrees(self) -> np.ndarray:
        return np.array([sum(k) for k in self.monomials], dtype=int)

    def exponent_array(self) -> np.ndarray:
        return np.array(self.monomials, dtype=int).reshape(len(self), self.nvars)

    def __repr__(self):
        return f"MonomialBasis(nvars={self.nvars}, max_degree={self.max_degree})"


def _monomials_of_degree(n: int, deg: int) -> list[Exponent]:
    # Compositions of deg into n parts, first coordinate descending.
    if n == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _monomials_of_degree(n - 1, deg - first):
            out.append((first,) + rest)
    return out


def enumerate_monomials(n: int, t: int) -> MonomialBasis:
    basis = MonomialBasis(n, t)
    assert len(basis) == comb(n + t, n)
    return basis


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables.

    ``terms`` maps exponent tuples to nonzero float coefficients.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be >= 1")
        clean: dict[Exponent, float] = {}
        for k, c in (terms or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != nvars:
                raise ValueError(f"exponent {k} has length {len(k)}, expected {nvars}")
            if any(e < 0 for e in k):
                raise ValueError(f"negative exponent in {k}")
            c = float(c)
            if c != 0.0:
                clean[k] = clean.get(k, 0.0) + c
                if clean[k] == 0.0:
                    del clean[k]
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # construction helpers
    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        """The coordinate ``x_{i+1}`` (0-based index ``i``)."""
        k = [0] * nvars
        k[i] = 1
        return cls(nvars, {tuple(k): 1.0})

    @classmethod
    def monomial(cls, k: Sequence[int], c: float = 1.0) -> "Polynomial":
        return cls(len(k), {tuple(k): c})

    @classmethod
    def from_coefficients(cls, basis: MonomialBasis, coeffs: Iterable[float]) -> "Polynomial":
        coeffs = np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs, dtype=float)
        if coeffs.shape != (len(basis),):
            raise ValueError("coefficient vector does not match basis length")
        return cls(basis.nvars, {k: c for k, c in zip(basis.monomials, coeffs) if c != 0.0})

    def coefficients(self, basis: MonomialBasis) -> np.ndarray:
        """Dense coefficient vector in ``basis``; KeyError if a term falls outside."""
        if basis.nvars != self.nvars:
            raise ValueError("basis dimension mismatch")
        out = np.zeros(len(basis))
        for k, c in self.terms.items():
            if k not in basis:
                raise KeyError(f"monomial {k} outside basis of degree {basis.max_degree}")
            out[basis.index(k)] = c
        return out

    # queries
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, k: Sequence[int]) -> float:
        return self.terms.get(tuple(k), 0.0)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"Polynomial({self.nvars}, 0)"
        parts = []
        for k in sorted(self.terms, key=_graded_lex_key):
            mon = "*".join(
                f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(k) if e
            )
            parts.append(f"{self.terms[k]:+g}" + (f"*{mon}" if mon else ""))
        return f"Polynomial({self.nvars}, {' '.join(parts)})"

    # arithmetic
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return add(self, scale(other, -1.0))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return multiply(self, other)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.nvars, 1.0)
        for _ in range(e):
            out = out * self
        return out

    def __call__(self, x):
        return evaluate(self, x)

    # serialization (config-file format)
    def to_json(self) -> list[dict]:
        return [
            {"coeff": c, "exps": list(k)}
            for k, c in sorted(self.terms.items(), key=lambda kc: _graded_lex_key(kc[0]))
        ]

    @classmethod
    def from_json(cls, data: list[dict] | str, nvars: int | None = None) -> "Polynomial":
        """Parse a list of ``{"coeff": float, "exps": [int, ...]}`` terms."""
        if isinstance(data, str):
            data = json.loads(data)
        if not data:
            if nvars is None:
                raise ValueError("cannot infer nvars from an empty term list")
            return cls(nvars)
        terms: dict[Exponent, float] = {}
        for t in data:
            exps = tuple(t["exps"])
            if any(not isinstance(e, int) or isinstance(e, bool) for e in exps):
                raise ValueError(f"non-integer exponent in {exps}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            if nvars is None:
                nvars = len(exps)
            terms[exps] = terms.get(exps, 0.0) + float(t["coeff"])
        return cls(nvars, terms)


def _check_same(p: Polynomial, q: Polynomial):
    if p.nvars != q.nvars:
        raise ValueError(f"dimension mismatch: {p.nvars} vs {q.nvars}")


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    _check_same(p, q)
    out = dict(p.terms)
    for k, c in q.terms.items():
        out[k] = out.get(k, 0.0) + c
    return Polynomial(p.nvars, out)


def scale(p: Polynomial, c: float) -> Polynomial:
    return Polynomial(p.nvars, {k: c * v for k, v in p.terms.items()})


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    _check_same(p, q)
    out: dict[Exponent, float] = {}
    for (k1, c1), (k2, c2) in itertools.product(p.terms.items(), q.terms.items()):
        k = tuple(a + b for a, b in zip(k1, k2))
        out[k] = out.get(k, 0.0) + c1 * c2
    return Polynomial(p.nvars, out)


def differentiate(p: Polynomial, i: int) -> Polynomial:
    """Partial derivative with respect to the 0-based variable ``i``."""
    if not 0 <= i < p.nvars:
        raise IndexError(f"variable index {i} out of range for {p.nvars} variables")
    out = {}
    for k, c in p.terms.items():
        if k[i] > 0:
            kk = list(k)
            kk[i] -= 1
            out[tuple(kk)] = c * k[i]
    return Polynomial(p.nvars, out)


def gradient(p: Polynomial) -> list[Polynomial]:
    return [differentiate(p, i) for i in range(p.nvars)]


def divergence(u: Sequence[Polynomial]) -> Polynomial:
    if not u:
        raise ValueError("empty vector field")
    n = u[0].nvars
    if len(u) != n or any(ui.nvars != n for ui in u):
        raise ValueError(f"vector field needs {n} components over {n} variables")
    out = Polynomial.zero(n)
    for i, ui in enumerate(u):
        out = add(out, differentiate(ui, i))
    return out


def evaluate(p: Polynomial, x) -> float | np.ndarray:
    """Evaluate at a point of shape (n,) or at a batch of points of shape (m, n)."""
    x = np.asarray(x)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != p.nvars:
        raise ValueError(f"point dimension {pts.shape[1]} != nvars {p.nvars}")
    if not p.terms:
        return 0.0 if single else np.zeros(len(pts))
    if single and np.issubdtype(x.dtype, np.integer):
        # Python ints keep integer inputs exact.
        total = 0.0
        xs = [int(v) for v in x]
        for k, c in p.terms.items():
            m = 1
            for xi, e in zip(xs, k):
                m *= xi**e
            total += c * m
        return float(total)
    pts = pts.astype(float)
    exps = np.array(list(p.terms.keys()), dtype=int)
    coeffs = np.array(list(p.terms.values()))
    vals = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) @ coeffs
    return float(vals[0]) if single else vals
