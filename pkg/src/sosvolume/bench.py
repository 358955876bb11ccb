"""Benchmark harness: run single cells, reproduce the reference tables, dump
certificates on grids, and read/write the CSV files.

Results CSV columns, in this order::

    scenario,d,variant,side,bound,reference,reference_kind,relative_error,iterations,wall_time,status

``reference`` is the exact volume when the scenario knows it, otherwise a
Monte-Carlo estimate (``reference_kind`` says which, empty when neither is
available). Floats are written with ``repr`` so a file reads back
bit-exactly; missing values are empty fields.

Grid CSV: ``#`` comment lines carry metadata as ``key=value``, then a header
``x1[,x2],w,wstar,indicator`` and one row per grid point (first axis
slowest).
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .assembly import Certificate, DegreeError, SolveError, Variant, assemble, decode
from .moments import moments_of
from .oracle import containment_violations, mc_moments, mc_volume, wstar_eval, wstar_fit
from .scenario import ScenarioSpec, get_scenario, registry
from .solver import SolverOptions, solve

__all__ = [
    "ResultRow",
    "GridDump",
    "TableLimitError",
    "run_scenario",
    "solve_scenario",
    "reproduce_table",
    "table_cells",
    "write_results",
    "read_results",
    "dump_w_grid",
    "write_grid",
    "read_grid",
    "grid_l1",
    "grid_max",
    "exterior_overshoot",
    "consistency_checks",
]

log = logging.getLogger(__name__)

T1_DEGREES = (4, 6, 8, 10, 12)
T3_DEGREES = (8, 16)
T3_PS = (2, 4, 6, 8, 10)
TABLE_VARIANTS = (Variant.PLAIN, Variant.GENERAL)


@dataclass
class ResultRow:
    scenario: str
    d: int
    variant: str
    side: str
    bound: float | None
    reference: float | None
    reference_kind: str
    relative_error: float | None
    iterations: int
    wall_time: float
    status: str

    def __post_init__(self):
        if (self.relative_error is None) != (self.reference is None):
            raise ValueError("relative_error must be present exactly when a reference volume is")

    @property
    def ok(self) -> bool:
        return self.status in ("Optimal", "NearOptimal")

    @property
    def exact_volume(self) -> float | None:
        return self.reference if self.reference_kind == "exact" else None

    def sort_key(self):
        return (self.scenario, self.d, self.variant, self.side)


COLUMNS = [f.name for f in fields(ResultRow)]
_INT = {"d", "iterations"}
_FLOAT = {"bound", "reference", "relative_error", "wall_time"}


def _reference(s: ScenarioSpec, mc_samples: int, seed: int) -> tuple[float | None, str]:
    if s.exact_volume is not None:
        return s.exact_volume, "exact"
    if mc_samples > 0:
        return mc_volume(s, mc_samples, seed).estimate, "mc"
    return None, ""


def solve_scenario(scenario, d: int, variant, opts: SolverOptions | None = None, side: str = "sos",
                   mc_samples: int = 1_000_000, seed: int = 0) -> tuple[ResultRow, Certificate | None]:
    """Assemble, solve and decode one cell. Errors end up in the status field."""
    s = scenario if isinstance(scenario, ScenarioSpec) else get_scenario(scenario)
    variant = Variant.parse(variant)
    ref, kind = _reference(s, mc_samples, seed)
    t0 = time.perf_counter()
    cert = None
    bound = None
    iters = 0
    try:
        problem, dmap = assemble(s, d, variant, side=side)
        sol = solve(problem, opts)
        iters = sol.iterations
        status = sol.status.value
        cert = decode(dmap, sol)
        bound = cert.bound
    except DegreeError as e:
        status = "InvalidDegree"
        log.warning("%s d=%d %s: %s", s.name, d, variant.value, e)
    except SolveError as e:
        status = e.status.value
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        status = "NumericalFailure"
        log.warning("%s d=%d %s: %s", s.name, d, variant.value, e)
    wall = time.perf_counter() - t0
    rel = None
    if ref is not None:
        rel = (bound - ref) / ref if bound is not None else math.nan
    row = ResultRow(s.name, d, variant.value, side, bound, ref, kind, rel, iters, wall, status)
    return row, cert


def run_scenario(name, d: int, variant, opts: SolverOptions | None = None, side: str = "sos",
                 mc_samples: int = 1_000_000, seed: int = 0) -> ResultRow:
    return solve_scenario(name, d, variant, opts, side, mc_samples, seed)[0]


class TableLimitError(ValueError):
    pass


def table_cells(table_id: str, degrees=None, ps=None, max_degree: int | None = None) -> list[tuple[str, int]]:
    """(scenario, d) pairs of a reference table after filtering."""
    tid = table_id.upper()
    if tid == "T1":
        if ps is not None:
            raise TableLimitError("T1 has no p filter")
        allowed = T1_DEGREES
        degrees = tuple(allowed if degrees is None else degrees)
        if max_degree is not None:
            if max_degree > 12:
                raise TableLimitError(f"T1 degrees are limited to d <= 12 (got max degree {max_degree})")
            degrees = tuple(d for d in degrees if d <= max_degree)
        bad = [d for d in degrees if d not in allowed]
        if bad:
            raise TableLimitError(f"T1 degrees are limited to d <= 12, even d >= 4 (got {bad})")
        return [("ball3", d) for d in degrees]
    if tid == "T3":
        degrees = tuple(T3_DEGREES if degrees is None else degrees)
        if max_degree is not None:
            if max_degree not in T3_DEGREES and max_degree < 8:
                raise TableLimitError(f"T3 degrees are limited to d in {{8, 16}} (got max degree {max_degree})")
            degrees = tuple(d for d in degrees if d <= max_degree)
        bad = [d for d in degrees if d not in T3_DEGREES]
        if bad:
            raise TableLimitError(f"T3 degrees are limited to d in {{8, 16}} (got {bad})")
        ps = tuple(T3_PS if ps is None else ps)
        bad = [p for p in ps if p not in T3_PS]
        if bad:
            raise TableLimitError(f"T3 p values are limited to {{2, 4, 6, 8, 10}} (got {bad})")
        return [(f"lp{p}-box", d) for d in degrees for p in ps]
    raise TableLimitError(f"unknown table {table_id!r}; expected T1 or T3")


def reproduce_table(table_id: str, degrees=None, ps=None, max_degree: int | None = None,
                    variants=TABLE_VARIANTS, opts: SolverOptions | None = None, side: str = "sos",
                    workers: int = 1) -> list[ResultRow]:
    cells = [(name, d, Variant.parse(v)) for name, d in table_cells(table_id, degrees, ps, max_degree)
             for v in variants]

    def job(cell):
        name, d, v = cell
        row = run_scenario(name, d, v, opts, side)
        log.info("%s d=%d %s: %s %s", name, d, v.value, row.bound, row.status)
        return row

    if workers <= 1:
        rows = [job(c) for c in cells]
    else:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(job, cells))
    return sorted(rows, key=ResultRow.sort_key)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows, path_or_file=None) -> str:
    """Write rows as CSV; returns the text. ``path_or_file`` may be a path,
    a file object or None."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in COLUMNS])
    text = buf.getvalue()
    if isinstance(path_or_file, str) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", newline="") as f:
            f.write(text)
    elif path_or_file is not None:
        path_or_file.write(text)
    return text


def _parse(col, v):
    if col in _INT:
        return int(v)
    if col in _FLOAT:
        return None if v == "" else float(v)
    return v


def read_results(source) -> list[ResultRow]:
    """Parse a results CSV from a path or from its text (anything with a newline)."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, newline="") as f:
            text = f.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}; expected {COLUMNS}")
    return [ResultRow(**{c: _parse(c, rec[c]) for c in COLUMNS}) for rec in reader]


@dataclass
class GridDump:
    scenario: str
    metadata: dict
    resolution: tuple[int, ...]
    points: np.ndarray  # (N, n)
    w: np.ndarray
    wstar: np.ndarray
    indicator: np.ndarray
    in_bounding: np.ndarray = field(repr=False, default=None)
    cell_volume: float = 0.0

    def __len__(self):
        return len(self.w)


def dump_w_grid(cert: Certificate, scenario, resolution: int, wstar_samples: int = 1_000_000,
                seed: int = 0) -> GridDump:
    """Evaluate w, w* and the indicator of K on a regular grid over the box enclosing B."""
    s = scenario if isinstance(scenario, ScenarioSpec) else get_scenario(scenario)
    if s.n > 2:
        raise ValueError(f"grid dumps are available for n = 1, 2 only (scenario has n = {s.n})")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo, hi = s.bounding.enclosing_box()
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(s.n)]
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    model = wstar_fit(s, wstar_samples, seed)
    meta = {
        "scenario": s.name,
        "variant": cert.variant.value,
        "d": cert.d,
        "side": cert.side,
        "bound": cert.bound,
        "status": cert.solver_report.get("status", ""),
        "wstar_samples": wstar_samples,
        "seed": seed,
    }
    cell = float(np.prod((hi - lo) / (resolution - 1)))
    return GridDump(
        scenario=s.name,
        metadata=meta,
        resolution=(resolution,) * s.n,
        points=pts,
        w=np.asarray(cert.w(pts), dtype=float),
        wstar=np.asarray(wstar_eval(model, pts), dtype=float),
        indicator=s.indicator(pts),
        in_bounding=s.in_bounding(pts),
        cell_volume=cell,
    )


def write_grid(dump: GridDump, path) -> None:
    n = dump.points.shape[1]
    with open(path, "w", newline="") as f:
        for k, v in dump.metadata.items():
            f.write(f"# {k}={v}\n")
        f.write(f"# resolution={'x'.join(map(str, dump.resolution))}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(n)] + ["w", "wstar", "indicator"])
        for p, a, b, c in zip(dump.points, dump.w, dump.wstar, dump.indicator):
            w.writerow([repr(float(t)) for t in p] + [repr(float(a)), repr(float(b)), int(c)])


def read_grid(path, scenario=None) -> GridDump:
    meta = {}
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    body = []
    for ln in lines:
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition("=")
            meta[k] = v
        else:
            body.append(ln)
    rows = list(csv.reader(body))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    n = len(header) - 3
    res = tuple(int(r) for r in meta.pop("resolution").split("x"))
    name = meta.get("scenario", "")
    s = scenario if isinstance(scenario, ScenarioSpec) else (get_scenario(name) if name in registry() else None)
    pts = data[:, :n]
    inb = s.in_bounding(pts) if s is not None else np.ones(len(pts), dtype=bool)
    cell = float(np.prod((pts.max(axis=0) - pts.min(axis=0)) / (np.asarray(res) - 1)))
    return GridDump(name, meta, res, pts, data[:, n], data[:, n + 1], data[:, n + 2] > 0.5, inb, cell)


def grid_l1(dump: GridDump) -> float:
    """Riemann sum of |w - w*| over the grid points lying in B."""
    return float(np.abs(dump.w - dump.wstar)[dump.in_bounding].sum() * dump.cell_volume)


def grid_max(dump: GridDump) -> float:
    """Largest value of w on grid points of B (sup-norm overshoot)."""
    return float(dump.w[dump.in_bounding].max())


def exterior_overshoot(dump: GridDump) -> float:
    """Largest value of w on grid points of B outside K, where the target is 0."""
    sel = dump.in_bounding & ~dump.indicator
    return float(dump.w[sel].max()) if sel.any() else 0.0


def consistency_checks(n_samples: int = 1_000_000, t: int = 4, k: float = 4.0) -> list[tuple[str, bool, str]]:
    """Containment of K in B for every scenario, and closed-form moments of
    every distinct bounding set against Monte Carlo."""
    out = []
    seen = {}
    for name, s in sorted(registry().items()):
        bad = containment_violations(s, n_samples)
        out.append((f"containment {name}", bad == 0, f"{bad} violating samples"))
        seen.setdefault(repr(s.bounding), s.bounding)
    for key, b in seen.items():
        exact = moments_of(b, t)
        est, se = mc_moments(b, t, n_samples)
        z = np.abs(est.values - exact.values) / np.maximum(se, 1e-300)
        # moments that vanish by symmetry can have se > 0 and |diff| tiny; exact zeros with se = 0 pass
        worst = float(np.max(np.where(se > 0, z, 0.0)))
        ok = bool(np.all((se > 0) | (np.abs(est.values - exact.values) < 1e-12)) and worst <= k)
        out.append((f"moments {key} |k|<={t}", ok, f"max z-score {worst:.2f}"))
    return out
