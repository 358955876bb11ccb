"""Standard-form SDP container shared by assembly and the solver.

Primal problem::

    minimize    sum_b <C_b, X_b> + c_free . x
    subject to  sum_b <A_{r,b}, X_b> + F_r . x = rhs_r     for every row r
                X_b PSD, x free

Matrix data is stored as triplets ``(block, i, j, coeff)`` with ``i <= j``.
A triplet contributes ``coeff * X_ij`` to the linear form, i.e. an off-diagonal
triplet stands for the symmetric entries ``A_ij = A_ji = coeff / 2``. Free
variables use ``block = FREE`` with ``i`` the variable index and ``j = 0``.
Repeated triplets are summed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp

FREE = -1

__all__ = ["FREE", "SdpProblem", "ProblemBuilder", "SdpSolution", "Status", "write_sdpa"]


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    NEAR_OPTIMAL = "NearOptimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"
    FAILED = "NumericalFailure"

    @property
    def usable(self) -> bool:
        return self in (Status.OPTIMAL, Status.NEAR_OPTIMAL)


@dataclass(frozen=True)
class SdpProblem:
    block_sizes: tuple[int, ...]
    n_free: int
    # constraint triplets, one entry per nonzero
    row: np.ndarray
    blk: np.ndarray
    ii: np.ndarray
    jj: np.ndarray
    val: np.ndarray
    rhs: np.ndarray
    # objective triplets
    obj_blk: np.ndarray
    obj_i: np.ndarray
    obj_j: np.ndarray
    obj_val: np.ndarray
    row_labels: tuple[str, ...] = ()
    block_labels: tuple[str, ...] = ()
    free_labels: tuple[str, ...] = ()

    def __post_init__(self):
        nb = len(self.block_sizes)
        if np.any(self.blk >= nb) or np.any(self.obj_blk >= nb):
            raise ValueError("triplet references a missing block")
        if np.any(self.ii > self.jj) and np.any(self.blk[self.ii > self.jj] != FREE):
            raise ValueError("matrix triplets must satisfy i <= j")
        for b, s in enumerate(self.block_sizes):
            mask = self.blk == b
            if np.any(self.jj[mask] >= s):
                raise ValueError(f"triplet index out of range for block {b}")
        if np.any(self.ii[self.blk == FREE] >= self.n_free):
            raise ValueError("free-variable index out of range")
        if len(self.row) and (self.row.max() >= self.n_rows or self.row.min() < 0):
            raise ValueError("row index out of range")

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    # dense views, mostly for tests and small problems
    def block_matrix(self, b: int, r: int | None = None) -> np.ndarray:
        """Symmetric matrix A_{r,b} (or C_b when ``r`` is None)."""
        s = self.block_sizes[b]
        out = np.zeros((s, s))
        if r is None:
            m = self.obj_blk == b
            ii, jj, vv = self.obj_i[m], self.obj_j[m], self.obj_val[m]
        else:
            m = (self.blk == b) & (self.row == r)
            ii, jj, vv = self.ii[m], self.jj[m], self.val[m]
        for i, j, v in zip(ii, jj, vv):
            if i == j:
                out[i, i] += v
            else:
                out[i, j] += v / 2
                out[j, i] += v / 2
        return out

    def free_matrix(self) -> sp.csr_matrix:
        m = self.blk == FREE
        return sp.csr_matrix(
            (self.val[m], (self.row[m], self.ii[m])), shape=(self.n_rows, self.n_free)
        )

    def free_objective(self) -> np.ndarray:
        c = np.zeros(self.n_free)
        m = self.obj_blk == FREE
        np.add.at(c, self.obj_i[m], self.obj_val[m])
        return c

    def apply(self, X: list[np.ndarray], x: np.ndarray | None = None) -> np.ndarray:
        """Row values sum_b <A_{r,b}, X_b> + F_r . x."""
        out = np.zeros(self.n_rows)
        m = self.blk != FREE
        if np.any(m):
            vals = np.array(
                [X[b][i, j] for b, i, j in zip(self.blk[m], self.ii[m], self.jj[m])]
            )
            np.add.at(out, self.row[m], self.val[m] * vals)
        if self.n_free and x is not None:
            out += self.free_matrix() @ x
        return out

    def objective(self, X: list[np.ndarray], x: np.ndarray | None = None) -> float:
        total = 0.0
        for b, i, j, v in zip(self.obj_blk, self.obj_i, self.obj_j, self.obj_val):
            if b == FREE:
                total += v * (x[i] if x is not None else 0.0)
            else:
                total += v * X[b][i, j]
        return float(total)

    def scaled(self, factor: float) -> "SdpProblem":
        """Same constraints with the objective multiplied by ``factor``."""
        return SdpProblem(
            self.block_sizes, self.n_free, self.row, self.blk, self.ii, self.jj,
            self.val, self.rhs, self.obj_blk, self.obj_i, self.obj_j,
            self.obj_val * factor, self.row_labels, self.block_labels, self.free_labels,
        )


class ProblemBuilder:
    """Accumulates triplets; rows are created on demand by label."""

    def __init__(self):
        self.block_sizes: list[int] = []
        self.block_labels: list[str] = []
        self.n_free = 0
        self.free_labels: list[str] = []
        self.row_labels: list[str] = []
        self.rhs: list[float] = []
        self._t: list[tuple[int, int, int, int, float]] = []
        self._obj: list[tuple[int, int, int, float]] = []

    def add_block(self, size: int, label: str = "") -> int:
        if size < 1:
            raise ValueError("PSD block size must be positive")
        self.block_sizes.append(size)
        self.block_labels.append(label or f"block{len(self.block_sizes) - 1}")
        return len(self.block_sizes) - 1

    def add_free(self, count: int, label: str = "") -> int:
        """Reserve ``count`` free variables; returns the first index."""
        start = self.n_free
        self.n_free += count
        self.free_labels.extend(f"{label}[{k}]" for k in range(count))
        return start

    def add_row(self, rhs: float = 0.0, label: str = "") -> int:
        self.rhs.append(float(rhs))
        self.row_labels.append(label or f"row{len(self.rhs) - 1}")
        return len(self.rhs) - 1

    def entry(self, row: int, block: int, i: int, j: int, coeff: float):
        if block != FREE and i > j:
            i, j = j, i
        self._t.append((row, block, i, j, coeff))

    def objective(self, block: int, i: int, j: int, coeff: float):
        if block != FREE and i > j:
            i, j = j, i
        self._obj.append((block, i, j, coeff))

    def build(self, normalize_rows: bool = True) -> tuple[SdpProblem, "RowMap"]:
        """Freeze into an SdpProblem.

        Duplicate triplets are merged, zero triplets dropped, and rows left
        with no coefficients (and zero rhs) dropped. With ``normalize_rows``
        each row is divided by its largest absolute coefficient. Returns the
        problem and a :class:`RowMap` back to the builder's rows.
        """
        t = np.array(self._t, dtype=float).reshape(-1, 5)
        row = t[:, 0].astype(int)
        blk = t[:, 1].astype(int)
        ii = t[:, 2].astype(int)
        jj = t[:, 3].astype(int)
        val = t[:, 4]
        # merge duplicates deterministically
        keys = np.stack([row, blk, ii, jj], axis=1)
        if len(keys):
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            inv = inv.ravel()
            merged = np.zeros(len(uniq))
            np.add.at(merged, inv, val)
            row, blk, ii, jj = uniq.T
            val = merged
        keep = val != 0.0
        row, blk, ii, jj, val = row[keep], blk[keep], ii[keep], jj[keep], val[keep]
        rhs = np.array(self.rhs, dtype=float)
        m0 = len(rhs)
        has = np.zeros(m0, dtype=bool)
        has[row] = True
        if np.any(~has & (rhs != 0.0)):
            bad = [self.row_labels[r] for r in np.flatnonzero(~has & (rhs != 0.0))]
            raise ValueError(f"rows with no variables but nonzero rhs: {bad[:5]}")
        new_index = np.full(m0, -1)
        new_index[has] = np.arange(has.sum())
        row = new_index[row]
        rhs = rhs[has]
        labels = tuple(l for l, h in zip(self.row_labels, has) if h)
        scale = np.ones(len(rhs))
        if normalize_rows and len(val):
            mx = np.zeros(len(rhs))
            np.maximum.at(mx, row, np.abs(val))
            scale = mx
            val = val / scale[row]
            rhs = rhs / scale
        o = np.array(self._obj, dtype=float).reshape(-1, 4)
        problem = SdpProblem(
            block_sizes=tuple(self.block_sizes),
            n_free=self.n_free,
            row=row, blk=blk, ii=ii, jj=jj, val=val, rhs=rhs,
            obj_blk=o[:, 0].astype(int), obj_i=o[:, 1].astype(int),
            obj_j=o[:, 2].astype(int), obj_val=o[:, 3],
            row_labels=labels,
            block_labels=tuple(self.block_labels),
            free_labels=tuple(self.free_labels),
        )
        full_scale = np.zeros(m0)
        full_scale[has] = scale
        return problem, RowMap(new_index, full_scale)


@dataclass(frozen=True)
class RowMap:
    """Where each builder row ended up: ``index[r]`` (-1 if dropped) and the
    divisor applied to it. A dual multiplier of the original row r equals
    ``y[index[r]] / scale[r]``."""

    index: np.ndarray
    scale: np.ndarray

    def original_duals(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.index))
        k = self.index >= 0
        out[k] = y[self.index[k]] / self.scale[k]
        return out


@dataclass
class SdpSolution:
    status: Status
    X: list[np.ndarray]
    x: np.ndarray
    y: np.ndarray
    Z: list[np.ndarray]
    objective_primal: float
    objective_dual: float
    iterations: int
    wall_time: float
    report: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return 0.5 * (self.objective_primal + self.objective_dual)


def write_sdpa(problem: SdpProblem, out: TextIO):
    """Write the problem in SDPA sparse format.

    SDPA's primal is ``min sum_r rhs_r y_r  s.t.  sum_r F_r y_r - F_0 PSD``
    and its dual ``max <F_0, Y> s.t. <F_r, Y> = rhs_r, Y PSD``; our problem
    maps onto that dual with ``F_r = A_r`` and ``F_0 = -C``. Each free
    variable x_k is split as x_k = x_k+ - x_k- and stored in a trailing
    diagonal (LP) block of size ``2 * n_free``, listed with a negative size.
    Matrix entries are written with i <= j and 1-based indices; the SDPA
    value of an off-diagonal entry is half our triplet coefficient.
    """
    nb = problem.n_blocks + (1 if problem.n_free else 0)
    sizes = list(problem.block_sizes)
    if problem.n_free:
        sizes.append(-2 * problem.n_free)
    out.write(f"{problem.n_rows}\n{nb}\n")
    out.write(" ".join(str(s) for s in sizes) + "\n")
    out.write(" ".join(repr(float(v)) for v in problem.rhs) + "\n")

    def emit(mat, b, i, j, v):
        if b == FREE:
            k = problem.n_blocks + 1
            out.write(f"{mat} {k} {2 * i + 1} {2 * i + 1} {v!r}\n")
            out.write(f"{mat} {k} {2 * i + 2} {2 * i + 2} {-v!r}\n")
        else:
            sv = v if i == j else v / 2
            out.write(f"{mat} {b + 1} {i + 1} {j + 1} {sv!r}\n")

    for b, i, j, v in zip(problem.obj_blk, problem.obj_i, problem.obj_j, problem.obj_val):
        emit(0, int(b), int(i), int(j), -float(v))
    order = np.lexsort((problem.jj, problem.ii, problem.blk, problem.row))
    for t in order:
        emit(int(problem.row[t]) + 1, int(problem.blk[t]), int(problem.ii[t]),
             int(problem.jj[t]), float(problem.val[t]))
