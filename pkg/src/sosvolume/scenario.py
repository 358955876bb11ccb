"""Scenario definitions: the pair (K, B) as polynomial data, and the
checked-in registry of JSON scenario files."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .moments import BoundingSet, LpBall, bounding_from_json
from .poly import Polynomial

__all__ = ["Component", "ScenarioSpec", "load_scenario", "registry", "get_scenario"]


@dataclass(frozen=True)
class Component:
    """Membership predicate for one connected component of {g > 0}.

    A point belongs to the component when ``normal . x > offset``; a
    ``normal`` of None means the whole set (single component).
    """

    name: str
    normal: tuple[float, ...] | None = None
    offset: float = 0.0

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.normal is None:
            return np.ones(len(x), dtype=bool)
        return x @ np.asarray(self.normal) > self.offset

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "normal": None if self.normal is None else list(self.normal),
            "offset": self.offset,
        }


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int
    g: Polynomial
    bounding: BoundingSet
    exact_volume: float | None = None
    exact_expr: str = ""
    components: tuple[Component, ...] = (Component("K"),)
    notes: str = ""

    def __post_init__(self):
        if self.g.nvars != self.n or self.bounding.n != self.n:
            raise ValueError("g, the bounding set and n disagree on the dimension")
        if self.g.degree() < 1:
            raise ValueError("g must have degree >= 1")
        if isinstance(self.bounding, LpBall) and self.bounding.p % 2:
            raise ValueError("l^p bounding balls need an even p to be polynomial")

    @property
    def b(self) -> list[Polynomial]:
        """Polynomials whose common superlevel set is B."""
        return self.bounding.polynomials()

    def indicator(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return (self.g(x) >= 0) & self.in_bounding(x)

    def in_bounding(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        ok = np.ones(len(x), dtype=bool)
        for b in self.b:
            ok &= b(x) >= 0
        return ok

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "n": self.n,
            "g": self.g.to_json(),
            "bounding": self.bounding.to_json(),
            "exact_volume": None
            if self.exact_volume is None
            else {"value": self.exact_volume, "expr": self.exact_expr},
            "components": [c.to_json() for c in self.components],
            "notes": self.notes,
        }
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioSpec":
        n = int(data["n"])
        ev = data.get("exact_volume")
        comps = tuple(
            Component(
                c["name"],
                None if c.get("normal") is None else tuple(float(v) for v in c["normal"]),
                float(c.get("offset", 0.0)),
            )
            for c in data.get("components") or [{"name": "K"}]
        )
        return cls(
            name=data["name"],
            n=n,
            g=Polynomial.from_json(data["g"], nvars=n),
            bounding=bounding_from_json(data["bounding"]),
            exact_volume=None if ev is None else float(ev["value"]),
            exact_expr="" if ev is None else ev.get("expr", ""),
            components=comps,
            notes=data.get("notes", ""),
        )


def load_scenario(path: str | Path) -> ScenarioSpec:
    with open(path) as f:
        return ScenarioSpec.from_json(json.load(f))


@lru_cache(maxsize=None)
def registry() -> dict[str, ScenarioSpec]:
    """All scenarios shipped in the package, keyed by name."""
    out = {}
    for entry in sorted(resources.files("sosvolume").joinpath("scenarios").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            s = ScenarioSpec.from_json(json.loads(entry.read_text()))
            out[s.name] = s
    return out


def get_scenario(name: str) -> ScenarioSpec:
    reg = registry()
    if name not in reg:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(reg))}")
    return reg[name]
