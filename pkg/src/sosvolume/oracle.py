"""Independent ground truth: Monte-Carlo volumes and moments, closed-form
volumes, and the continuous optimal certificate w*.

Sampling uses numpy's Philox4x64 counter-based generator. A run with seed
``s`` is cut into fixed blocks of ``BLOCK`` points; block ``j`` draws from
``Philox(SeedSequence(s, spawn_key=(j,)))``. Results therefore depend only on
(seed, n_samples), never on how blocks are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .moments import BoundingSet, MomentVector
from .poly import enumerate_monomials
from .scenario import Component, ScenarioSpec

__all__ = [
    "BLOCK",
    "McEstimate",
    "WStarModel",
    "uniform_blocks",
    "mc_volume",
    "exact_volume",
    "wstar_fit",
    "wstar_eval",
    "wstar_integral",
    "containment_violations",
    "mc_moments",
]

BLOCK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    n_samples: int
    seed: int

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.estimate - value) <= k * self.std_error


def _generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def uniform_blocks(lo, hi, n_samples: int, seed: int):
    """Yield (block index, points) covering ``n_samples`` uniform draws in [lo, hi]."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    for j in range(-(-n_samples // BLOCK)):
        yield j, _block_points(lo, hi, n_samples, seed, j)


def _block_points(lo, hi, n_samples, seed, j):
    m = min(BLOCK, n_samples - j * BLOCK)
    return lo + (hi - lo) * _generator(seed, j).random((m, len(lo)))


def _map_blocks(fn, lo, hi, n_samples, seed, workers):
    """Apply fn to every block of points; returns per-block results in order."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    nblocks = -(-n_samples // BLOCK)

    def job(j):
        return fn(_block_points(lo, hi, n_samples, seed, j))

    if workers <= 1:
        return [job(j) for j in range(nblocks)]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(job, range(nblocks)))


def mc_volume(s: ScenarioSpec, n_samples: int, seed: int = 0, workers: int = 1) -> McEstimate:
    """Hit-or-miss estimate of vol(K) from uniform points in the box enclosing B."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    lo, hi = s.bounding.enclosing_box()
    vol_box = float(np.prod(hi - lo))
    hits = sum(_map_blocks(lambda x: int(np.count_nonzero(s.indicator(x))), lo, hi, n_samples, seed, workers))
    rho = hits / n_samples
    return McEstimate(rho * vol_box, math.sqrt(rho * (1 - rho) / n_samples) * vol_box, n_samples, seed)


def exact_volume(s: ScenarioSpec) -> float | None:
    return s.exact_volume


@dataclass(frozen=True)
class WStarModel:
    """w*(x) = g(x) / m_i on component i of K, 0 elsewhere; m_i = mean of g on it."""

    scenario: ScenarioSpec
    components: tuple[tuple[Component, float], ...]

    def __post_init__(self):
        if any(m <= 0 for _, m in self.components):
            raise ValueError("component means of g must be positive")


def wstar_fit(s: ScenarioSpec, mc_samples: int = 1_000_000, seed: int = 0) -> WStarModel:
    lo, hi = s.bounding.enclosing_box()
    sums = np.zeros(len(s.components))
    counts = np.zeros(len(s.components), dtype=np.int64)
    for _, x in uniform_blocks(lo, hi, mc_samples, seed):
        x = x[s.indicator(x)]
        gx = s.g(x)
        for i, c in enumerate(s.components):
            m = c.contains(x)
            sums[i] += gx[m].sum()
            counts[i] += m.sum()
    if np.any(counts == 0):
        empty = [c.name for c, k in zip(s.components, counts) if k == 0]
        raise ValueError(f"component predicate covers no samples: {empty}")
    return WStarModel(s, tuple(zip(s.components, (sums / counts).tolist())))


def wstar_eval(model: WStarModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    s = model.scenario
    gx = np.asarray(s.g(pts), dtype=float).reshape(-1)
    inside = (gx > 0) & s.in_bounding(pts)
    out = np.zeros(len(pts))
    for comp, m in model.components:
        sel = inside & comp.contains(pts)
        out[sel] = gx[sel] / m
    return float(out[0]) if single else out


def wstar_integral(model: WStarModel, n_samples: int, seed: int = 1) -> McEstimate:
    """MC quadrature of w* over B (uniform draws in the enclosing box)."""
    lo, hi = model.scenario.bounding.enclosing_box()
    vol_box = float(np.prod(hi - lo))
    s1 = s2 = 0.0
    for _, x in uniform_blocks(lo, hi, n_samples, seed):
        v = wstar_eval(model, x)
        s1 += v.sum()
        s2 += (v * v).sum()
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean**2, 0.0)
    return McEstimate(mean * vol_box, math.sqrt(var / n_samples) * vol_box, n_samples, seed)


def containment_violations(s: ScenarioSpec, n_samples: int = 1_000_000, seed: int = 2) -> int:
    """Number of sampled points with g >= 0 outside B; 0 supports K in B."""
    lo, hi = s.bounding.enclosing_box()
    # sample a slightly larger box so points just outside B are seen too
    pad = 0.25 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    bad = 0
    for _, x in uniform_blocks(lo, hi, n_samples, seed):
        bad += int(np.count_nonzero((s.g(x) >= 0) & ~s.in_bounding(x)))
    return bad


def mc_moments(bounding: BoundingSet, t: int, n_samples: int, seed: int = 3) -> tuple[MomentVector, np.ndarray]:
    """MC estimates of all moments of degree <= t of Lebesgue measure on B,
    with their standard errors."""
    lo, hi = bounding.enclosing_box()
    vol_box = float(np.prod(hi - lo))
    basis = enumerate_monomials(bounding.n, t)
    exps = basis.exponent_array()
    polys = bounding.polynomials()
    s1 = np.zeros(len(basis))
    s2 = np.zeros(len(basis))
    for _, x in uniform_blocks(lo, hi, n_samples, seed):
        inside = np.ones(len(x), dtype=bool)
        for b in polys:
            inside &= b(x) >= 0
        v = np.prod(x[:, None, :] ** exps[None, :, :], axis=2) * inside[:, None]
        s1 += v.sum(axis=0)
        s2 += (v * v).sum(axis=0)
    mean = s1 / n_samples
    var = np.maximum(s2 / n_samples - mean**2, 0.0)
    return MomentVector(basis, mean * vol_box), np.sqrt(var / n_samples) * vol_box
