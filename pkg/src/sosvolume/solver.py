"""Dense primal-dual interior-point method for block SDPs with free variables.

HKM search direction with Mehrotra predictor-corrector, infeasible start.
The Schur complement is formed block by block from the sparse constraint
data, factored per connected group of rows (rows that share no PSD block are
independent), and free variables enter through a small reduced KKT system.
"""
from __future__ import annotations

import logging
import sys
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .sdp import FREE, SdpProblem, SdpSolution, Status

__all__ = ["SolverOptions", "solve", "residuals"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iters: int = 200
    free_var_regularization: float = 1e-9
    # tried in turn when a run does not reach Optimal; the best run is kept
    fallback_regularization: tuple = (1e-15,)
    step_fraction: float = 0.98
    verbosity: int = 0
    # NearOptimal is reported when a stalled run is within this factor of tolerance
    near_factor: float = 1e4
    # stop after this many iterations without progress
    stall_iters: int = 40
    # neighbourhood of the central path kept by step backtracking
    theta: float = 1e-4
    backtracks: int = 8

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


class _Block:
    """Constraint data of one PSD block restricted to the rows touching it."""

    def __init__(self, p: SdpProblem, b: int):
        s = p.block_sizes[b]
        self.s = s
        mask = p.blk == b
        rows, ii, jj, vv = p.row[mask], p.ii[mask], p.jj[mask], p.val[mask]
        self.rows, local = np.unique(rows, return_inverse=True)
        local = local.ravel()
        mb = len(self.rows)
        off = ii != jj
        r_all = np.concatenate([local, local[off]])
        p_all = np.concatenate([ii, jj[off]])
        q_all = np.concatenate([jj, ii[off]])
        v_all = np.concatenate([np.where(off, vv / 2, vv), vv[off] / 2])
        # vec(A_r) as rows of a (mb, s*s) matrix, and A_r stacked as (mb*s, s)
        self.A = sp.csr_matrix((v_all, (r_all, p_all * s + q_all)), shape=(mb, s * s))
        self.A_stack = sp.csr_matrix((v_all, (r_all * s + p_all, q_all)), shape=(mb * s, s))
        self.AT = self.A.T.tocsr()
        C = np.zeros((s, s))
        om = p.obj_blk == b
        for i, j, v in zip(p.obj_i[om], p.obj_j[om], p.obj_val[om]):
            if i == j:
                C[i, i] += v
            else:
                C[i, j] += v / 2
                C[j, i] += v / 2
        self.C = C
        self.row_norms = np.sqrt(np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel())

    def apply(self, W: np.ndarray) -> np.ndarray:
        return self.A @ W.ravel()

    def adjoint(self, y_rows: np.ndarray) -> np.ndarray:
        W = (self.AT @ y_rows).reshape(self.s, self.s)
        return 0.5 * (W + W.T)

    def schur(self, Lx: np.ndarray, Rzi: np.ndarray) -> np.ndarray:
        """M_ij = tr(A_i X A_j Z^{-1}) over this block's rows.

        With X = Lx Lx^T and Z^{-1} = Rzi^T Rzi this is the Gram matrix of
        the vectors vec(Rzi A_i Lx), which stays PSD in floating point.
        """
        mb, s = len(self.rows), self.s
        T = (self.A_stack @ Lx).reshape(mb, s, s)  # A_i Lx
        Q = np.matmul(Rzi, T).reshape(mb, s * s)
        return Q @ Q.T


class _Structure:
    """Solver-side view of an SdpProblem, built once per solve."""

    def __init__(self, p: SdpProblem):
        self.p = p
        self.m = p.n_rows
        self.nf = p.n_free
        self.blocks = [_Block(p, b) for b in range(p.n_blocks)]
        self.b = p.rhs.astype(float)
        self.F = p.free_matrix()
        self.FT = self.F.T.tocsr()
        self.cf = p.free_objective()
        # group rows connected through shared blocks
        parent = list(range(p.n_blocks))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        row_block = np.full(self.m, -1)
        for b, blk in enumerate(self.blocks):
            for r in blk.rows:
                if row_block[r] < 0:
                    row_block[r] = b
                else:
                    ra, rb = find(row_block[r]), find(b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        row_root = np.array([find(int(b)) if b >= 0 else -1 for b in row_block], dtype=int)
        roots = sorted(set(row_root[row_root >= 0].tolist()))
        self.groups = [np.flatnonzero(row_root == r) for r in roots]
        self.group_of_block = [
            roots.index(find(b)) if find(b) in roots else -1 for b in range(p.n_blocks)
        ]
        self.local_in_group = []
        for b, blk in enumerate(self.blocks):
            g = self.group_of_block[b]
            if g < 0:
                self.local_in_group.append(np.zeros(0, dtype=int))
            else:
                self.local_in_group.append(np.searchsorted(self.groups[g], blk.rows))
        self.R0 = np.flatnonzero(row_block < 0)
        self.normC = np.sqrt(sum(np.sum(blk.C**2) for blk in self.blocks) + np.sum(self.cf**2))
        self.normb = float(np.linalg.norm(self.b))
        self._aat = None

    def project(self, e: np.ndarray):
        """Least-norm (W, w) with A(W) + F w = e; used to restore A(dX) = Rp."""
        if self._aat is None:
            AAt = np.zeros((self.m, self.m))
            for blk in self.blocks:
                AAt[np.ix_(blk.rows, blk.rows)] += (blk.A @ blk.A.T).toarray()
            if self.nf:
                AAt += (self.F @ self.FT).toarray()
            self._aat, _ = _chol(AAt)
        t = la.cho_solve(self._aat, e, check_finite=False)
        return self.At(t), (self.FT @ t if self.nf else np.zeros(0))

    def A(self, W: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.m)
        for blk, Wb in zip(self.blocks, W):
            out[blk.rows] += blk.apply(Wb)
        return out

    def At(self, y: np.ndarray) -> list[np.ndarray]:
        return [blk.adjoint(y[blk.rows]) for blk in self.blocks]


def _inner(U: list[np.ndarray], V: list[np.ndarray]) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(U, V)))


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD (X positive definite)."""
    try:
        L = la.cholesky(X, lower=True)
    except la.LinAlgError:
        return 0.0
    W = la.solve_triangular(L, dX, lower=True)
    W = la.solve_triangular(L, W.T, lower=True)
    lam = la.eigvalsh(0.5 * (W + W.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _centrality(X, Z, N: int) -> float:
    """min eig(X^1/2 Z X^1/2) / mu over all blocks; 0 if not positive definite."""
    mu = _inner(X, Z) / N
    if mu <= 0:
        return 0.0
    lo = np.inf
    for x, z in zip(X, Z):
        try:
            L = la.cholesky(0.5 * (x + x.T), lower=True, check_finite=False)
        except la.LinAlgError:
            return 0.0
        W = L.T @ z @ L
        lo = min(lo, la.eigvalsh(0.5 * (W + W.T))[0])
    return lo / mu


def _psd_factor(X: np.ndarray) -> np.ndarray:
    """L with X = L L^T; eigenvalue fallback when Cholesky fails."""
    try:
        return la.cholesky(X, lower=True, check_finite=False)
    except la.LinAlgError:
        lam, V = la.eigh(X)
        return V * np.sqrt(np.maximum(lam, 0.0))


def _chol(M: np.ndarray):
    """Cholesky with escalating diagonal shift on failure."""
    shift = 0.0
    scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300)
    for attempt in range(8):
        try:
            return la.cho_factor(M + shift * np.eye(len(M)), lower=True, check_finite=False), shift
        except la.LinAlgError:
            shift = scale * (1e-14 * 100**attempt)
    raise la.LinAlgError("Schur complement is not positive definite after regularization")


class _Newton:
    """Factorization of the Newton system at one iterate.

    Without free variables the Schur complement M is block diagonal over
    row groups and each group gets a Cholesky factorization. With free
    variables the augmented system [[M, F], [F^T, -delta I]] is factored by
    LU with partial pivoting; forming F^T M^-1 F explicitly loses too much
    accuracy when M is badly conditioned near the optimum. The tiny
    regularization is removed again by iterative refinement.
    """

    refine_steps = 3
    ruiz_passes = 4

    def __init__(self, st: _Structure, Lx, Rzi, delta: float):
        self.st = st
        Ms = [np.zeros((len(g), len(g))) for g in st.groups]
        for b, blk in enumerate(st.blocks):
            g = st.group_of_block[b]
            if g < 0:
                continue
            loc = st.local_in_group[b]
            Ms[g][np.ix_(loc, loc)] += blk.schur(Lx[b], Rzi[b])
        self.Ms = Ms
        self.nf = st.nf
        self.shift = 0.0
        if not self.nf:
            if len(st.R0):
                raise la.LinAlgError("rows without any variable")
            self.facs = []
            for M in Ms:
                fac, shift = _chol(M)
                self.facs.append(fac)
                self.shift = max(self.shift, shift)
            return
        m, nf = st.m, self.nf
        self.F = st.F.toarray()
        K = np.zeros((m + nf, m + nf))
        for g, M in zip(st.groups, Ms):
            K[np.ix_(g, g)] = M
        K[:m, m:] = self.F
        K[m:, :m] = self.F.T
        K[m:, m:] = -delta * np.eye(nf)
        # R0 rows carry no PSD part; a tiny negative diagonal keeps dependent ones solvable
        K[st.R0, st.R0] = -delta
        # symmetric Ruiz equilibration: entries of M and F can differ by many
        # orders of magnitude near the optimum, which ruins the LU pivoting
        d = np.ones(m + nf)
        for _ in range(self.ruiz_passes):
            r = np.sqrt(np.max(np.abs(K), axis=1))
            r[r == 0] = 1.0
            K = K / r[:, None] / r[None, :]
            d /= r
        self.d = d
        self.kkt = la.lu_factor(K, check_finite=False)
        if not np.all(np.isfinite(self.kkt[0])):
            raise la.LinAlgError("augmented Newton system is singular")

    def _solve_once(self, h, rf):
        st = self.st
        if not self.nf:
            u = np.zeros(st.m)
            for g, fac in zip(st.groups, self.facs):
                u[g] = la.cho_solve(fac, h[g], check_finite=False)
            return u, np.zeros(0)
        sol = self.d * la.lu_solve(self.kkt, self.d * np.concatenate([h, rf]), check_finite=False)
        return sol[: st.m], sol[st.m :]

    def _apply(self, dy, dx):
        st = self.st
        out = np.zeros(st.m)
        for g, M in zip(st.groups, self.Ms):
            out[g] = M @ dy[g]
        if not self.nf:
            return out, np.zeros(0)
        out += self.F @ dx
        return out, self.F.T @ dy

    def solve(self, h: np.ndarray, rf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dy, dx = self._solve_once(h, rf)
        for _ in range(self.refine_steps):
            a, b = self._apply(dy, dx)
            r1, r2 = h - a, rf - b
            size = 1.0 + np.max(np.abs(h), initial=0.0) + np.max(np.abs(rf), initial=0.0)
            if max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(r2), initial=0.0)) <= 1e-15 * size:
                break
            ey, ex = self._solve_once(r1, r2)
            dy, dx = dy + ey, dx + ex
        return dy, dx


def _initial_point(st: _Structure):
    X, Z = [], []
    b = st.b
    for blk in st.blocks:
        s = blk.s
        rn = blk.row_norms
        xi = max(10.0, np.sqrt(s), s * float(np.max((1 + np.abs(b[blk.rows])) / (1 + rn))) if len(rn) else 0.0)
        eta = max(10.0, np.sqrt(s), float(np.linalg.norm(blk.C)), float(np.max(rn)) if len(rn) else 0.0)
        X.append(xi * np.eye(s))
        Z.append(eta * np.eye(s))
    return X, np.zeros(st.m), Z, np.zeros(st.nf)


def dependent_rows(problem: SdpProblem, tol: float = 1e-10) -> np.ndarray:
    """Rows that touch no PSD block and are linear combinations of other such rows.

    Found by a column-pivoted QR of the free-variable part of those rows.
    """
    psd = np.zeros(problem.n_rows, dtype=bool)
    psd[problem.row[problem.blk != FREE]] = True
    r0 = np.flatnonzero(~psd)
    if len(r0) < 2:
        return np.zeros(0, dtype=int)
    F0 = problem.free_matrix()[r0].toarray()
    _, R, piv = la.qr(F0.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if len(diag) else 0
    return np.sort(r0[piv[rank:]])


def dependent_columns(problem: SdpProblem, tol: float = 1e-10) -> np.ndarray:
    """Free variables whose column of F is a combination of other columns
    with a consistent objective coefficient. Fixing them at 0 leaves the
    feasible set of F x and the optimal value unchanged."""
    if problem.n_free < 2:
        return np.zeros(0, dtype=int)
    F = problem.free_matrix().toarray()
    c = problem.free_objective()
    Q, R, piv = la.qr(F, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if len(diag) else 0
    if rank == problem.n_free:
        return np.zeros(0, dtype=int)
    basis, rest = piv[:rank], piv[rank:]
    # F[:, rest] = F[:, basis] @ alpha; the dual row F_j^T y = c_j is implied only if c_rest = alpha^T c_basis
    alpha = la.solve_triangular(R[:rank, :rank], R[:rank, rank:])
    ok = np.abs(c[rest] - alpha.T @ c[basis]) <= 1e-9 * (1 + np.abs(c[rest]))
    return np.sort(rest[ok])


def _drop_columns(problem: SdpProblem, drop: np.ndarray) -> SdpProblem:
    keep = np.ones(problem.n_free, dtype=bool)
    keep[drop] = False
    new_index = np.cumsum(keep) - 1
    fm = problem.blk == FREE
    t = ~fm | keep[np.where(fm, problem.ii, 0)]
    ii = np.where(fm, new_index[np.where(fm, problem.ii, 0)], problem.ii)
    om = problem.obj_blk == FREE
    to = ~om | keep[np.where(om, problem.obj_i, 0)]
    oi = np.where(om, new_index[np.where(om, problem.obj_i, 0)], problem.obj_i)
    return SdpProblem(
        problem.block_sizes, int(keep.sum()),
        problem.row[t], problem.blk[t], ii[t], problem.jj[t], problem.val[t], problem.rhs,
        problem.obj_blk[to], oi[to], problem.obj_j[to], problem.obj_val[to],
        problem.row_labels, problem.block_labels,
        tuple(l for l, k in zip(problem.free_labels, keep) if k) if problem.free_labels else (),
    )


def _drop_rows(problem: SdpProblem, drop: np.ndarray) -> SdpProblem:
    keep = np.ones(problem.n_rows, dtype=bool)
    keep[drop] = False
    new_index = np.cumsum(keep) - 1
    t = keep[problem.row]
    return SdpProblem(
        problem.block_sizes, problem.n_free,
        new_index[problem.row[t]], problem.blk[t], problem.ii[t], problem.jj[t], problem.val[t],
        problem.rhs[keep], problem.obj_blk, problem.obj_i, problem.obj_j, problem.obj_val,
        tuple(l for l, k in zip(problem.row_labels, keep) if k) if problem.row_labels else (),
        problem.block_labels, problem.free_labels,
    )


def solve(problem: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``problem``; never raises on numerical trouble, reports a status.

    Linearly dependent rows without a PSD part (redundant Stokes rows, for
    instance) are removed first; their multipliers are reported as 0.
    """
    opts = opts or SolverOptions()
    if problem.n_rows == 0:
        raise ValueError("problem has no constraint rows")
    t0 = time.perf_counter()
    drop = dependent_rows(problem)
    work = _drop_rows(problem, drop) if len(drop) else problem
    dcols = dependent_columns(work)
    if len(dcols):
        work = _drop_columns(work, dcols)
    if len(drop) or len(dcols):
        log.debug("presolve: dropping %d dependent rows, %d dependent free columns", len(drop), len(dcols))
    sol = _solve(work, opts, t0)
    for delta in opts.fallback_regularization if work.n_free else ():
        if sol.status is Status.OPTIMAL:
            break
        log.debug("status %s; retrying with free-variable regularization %g", sol.status.value, delta)
        again = _solve(work, replace(opts, free_var_regularization=delta), time.perf_counter())
        again.iterations += sol.iterations
        again.wall_time += sol.wall_time
        if _rank(again) < _rank(sol):
            sol = again
        else:
            sol.iterations, sol.wall_time = again.iterations, again.wall_time
    if work is problem:
        return sol
    y = np.zeros(problem.n_rows)
    y[np.setdiff1d(np.arange(problem.n_rows), drop)] = sol.y
    x = np.zeros(problem.n_free)
    x[np.setdiff1d(np.arange(problem.n_free), dcols)] = sol.x
    sol.y, sol.x = y, x
    score = sol.report.get("kkt_score")
    sol.report = residuals(problem, sol)
    sol.report.update(kkt_score=score, dropped_rows=len(drop), dropped_free=len(dcols))
    return sol


_STATUS_ORDER = {Status.OPTIMAL: 0, Status.NEAR_OPTIMAL: 1}


def _rank(sol: SdpSolution):
    return (_STATUS_ORDER.get(sol.status, 2), sol.report.get("kkt_score", np.inf))


class _Breakdown(ArithmeticError):
    pass


def _solve(problem: SdpProblem, opts: SolverOptions, t0: float) -> SdpSolution:
    st = _Structure(problem)
    # work with a unit-norm objective; multiplying C by a constant then
    # leaves the iterates unchanged and only rescales y and Z
    cs = max(1.0, float(st.normC))
    saved = ([blk.C for blk in st.blocks], st.cf, st.normC)
    for blk in st.blocks:
        blk.C = blk.C / cs
    st.cf = st.cf / cs
    st.normC = st.normC / cs
    X, y, Z, xf = _initial_point(st)
    N = sum(blk.s for blk in st.blocks)
    status = Status.MAX_ITER
    best = None
    best_score = np.inf
    prev_score = np.inf
    stall = 0
    since = 0
    it = 0

    def measures(X, y, Z, xf):
        Rp = st.b - st.A(X) - (st.F @ xf if st.nf else 0.0)
        AtY = st.At(y)
        Rd = [blk.C - a - z for blk, a, z in zip(st.blocks, AtY, Z)]
        rf = st.cf - (st.FT @ y if st.nf else np.zeros(0))
        pobj = sum(float(np.vdot(blk.C, x)) for blk, x in zip(st.blocks, X)) + float(st.cf @ xf)
        dobj = float(st.b @ y)
        xz = _inner(X, Z)
        denom = 1.0 + abs(pobj) + abs(dobj)
        gap = max(abs(xz), abs(pobj - dobj)) / denom
        pinf = float(np.linalg.norm(Rp)) / (1.0 + st.normb)
        rd = float(np.sqrt(sum(np.sum(r**2) for r in Rd) + np.sum(rf**2)))
        dinf = rd / (1.0 + st.normC)
        # the same measures for the unscaled objective
        gap = max(gap, cs * max(abs(xz), abs(pobj - dobj)) / (1.0 + cs * (abs(pobj) + abs(dobj))))
        dinf = max(dinf, cs * rd / (1.0 + cs * st.normC))
        return Rp, Rd, rf, pobj, dobj, xz, gap, pinf, dinf

    for it in range(1, opts.max_iters + 1):
        Rp, Rd, rf, pobj, dobj, xz, gap, pinf, dinf = measures(X, y, Z, xf)
        score = max(gap / opts.tol_gap, pinf / opts.tol_feas, dinf / opts.tol_feas)
        if score < best_score:
            best_score = score
            best = ([x.copy() for x in X], y.copy(), [z.copy() for z in Z], xf.copy(), it - 1)
        if gap <= opts.tol_gap and pinf <= opts.tol_feas and dinf <= opts.tol_feas:
            status = Status.OPTIMAL
            it -= 1
            break
        # normalised Farkas certificates: the dual objective diverging while
        # the primal stays infeasible (or the other way round)
        if pinf > opts.tol_feas and dobj > 0 and (st.normC + np.sqrt(sum(np.sum(r**2) for r in Rd))) / dobj < opts.tol_feas:
            status = Status.INFEASIBLE
            break
        if dinf > opts.tol_feas and pobj < 0 and (st.normb + np.linalg.norm(Rp)) / -pobj < opts.tol_feas:
            status = Status.UNBOUNDED
            break
        mu = xz / N
        try:
            Lx = [_psd_factor(x) for x in X]
            Rzi = []
            for z in Z:
                Lz = la.cholesky(z, lower=True, check_finite=False)
                Rzi.append(la.solve_triangular(Lz, np.eye(len(z)), lower=True, check_finite=False))
            Zi = [r.T @ r for r in Rzi]
            newton = _Newton(st, Lx, Rzi, opts.free_var_regularization)
        except la.LinAlgError as exc:
            log.debug("factorization failed at iteration %d: %s", it, exc)
            status = Status.FAILED
            break

        def direction(sigma_mu, corr):
            # target: X Z + dX Z + X dZ (+ corr) = sigma_mu I
            base = [sigma_mu * zi - x for zi, x in zip(Zi, X)]
            if corr is not None:
                base = [bb - c @ zi for bb, c, zi in zip(base, corr, Zi)]
            h = Rp - st.A([bb - x @ r @ zi for bb, x, r, zi in zip(base, X, Rd, Zi)])
            dy, dx = newton.solve(h, rf)
            dZ = [r - a for r, a in zip(Rd, st.At(dy))]
            dX = [bb - x @ dz @ zi for bb, x, dz, zi in zip(base, X, dZ, Zi)]
            dX = [0.5 * (d + d.T) for d in dX]
            # X dZ Z^-1 cancels badly when Z is nearly singular; pull the
            # direction back onto A(dX) + F dx = Rp
            e = Rp - st.A(dX) - (st.F @ dx if st.nf else 0.0)
            cX, cx = st.project(e)
            if opts.verbosity > 2:
                print(f"   projection |e|={np.linalg.norm(e):.2e} |cX|={np.sqrt(_inner(cX, cX)):.2e} "
                      f"|dX|={np.sqrt(_inner(dX, dX)):.2e} |dy|={np.linalg.norm(dy):.2e}", file=sys.stderr)
            dX = [d + c for d, c in zip(dX, cX)]
            dx = dx + cx
            if not (np.all(np.isfinite(dy)) and np.all(np.isfinite(dx))
                    and all(np.all(np.isfinite(d)) for d in dX + dZ)):
                raise _Breakdown
            return dX, dy, dZ, dx

        def steps(dX, dZ):
            ap = min([1.0] + [_max_step(x, d) for x, d in zip(X, dX)])
            ad = min([1.0] + [_max_step(z, d) for z, d in zip(Z, dZ)])
            return ap, ad

        try:
            dXp, dyp, dZp, dxp = direction(0.0, None)
            ap, ad = steps(dXp, dZp)
            ap = min(1.0, opts.step_fraction * ap) if ap < np.inf else 1.0
            ad = min(1.0, opts.step_fraction * ad) if ad < np.inf else 1.0
            mu_aff = _inner([x + ap * d for x, d in zip(X, dXp)], [z + ad * d for z, d in zip(Z, dZp)]) / N
            expon = max(1.0, 3.0 * min(ap, ad) ** 2)
            sigma = min(1.0, max(0.0, mu_aff / mu) ** expon) if mu > 0 else 0.0
            corr = [dx_ @ dz_ for dx_, dz_ in zip(dXp, dZp)]
            dX, dy, dZ, dx = direction(sigma * mu, corr)
            ap, ad = steps(dX, dZ)
            if min(ap, ad) < 1e-2:
                # lost centrality: pure centering step instead
                dX, dy, dZ, dx = direction(mu, None)
                ap, ad = steps(dX, dZ)
        except _Breakdown:
            log.debug("non-finite search direction at iteration %d", it)
            status = Status.FAILED
            break
        if opts.verbosity > 1:
            print("   per-block primal steps", [f"{_max_step(x, d):.2e}" for x, d in zip(X, dX)],
                  "dual", [f"{_max_step(z, d):.2e}" for z, d in zip(Z, dZ)], file=sys.stderr)
        gamma = max(opts.step_fraction, 0.9 + 0.09 * min(ap, ad, 1.0))
        gamma = min(gamma, 0.995)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        # stay in a wide neighbourhood of the central path: shorten both
        # steps until every eigenvalue of X Z is at least theta * mu
        for _ in range(opts.backtracks):
            Xn = [x + ap * d for x, d in zip(X, dX)]
            Zn = [z + ad * d for z, d in zip(Z, dZ)]
            if _centrality(Xn, Zn, N) >= opts.theta:
                break
            ap *= 0.7
            ad *= 0.7
        X = [x + ap * d for x, d in zip(X, dX)]
        X = [0.5 * (x + x.T) for x in X]
        xf = xf + ap * dx
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        Z = [0.5 * (z + z.T) for z in Z]
        if opts.verbosity > 0:
            print(
                f"{it:4d} gap={gap:9.2e} pres={pinf:9.2e} dres={dinf:9.2e} "
                f"step=({ap:.3f},{ad:.3f}) pobj={pobj:+.10e} dobj={dobj:+.10e} shift={newton.shift:.1e}",
                file=sys.stderr,
            )
        if max(ap, ad) < 1e-8:
            stall += 1
        else:
            stall = 0
        # progress means a 10% drop of the best score
        if score < 0.9 * prev_score:
            prev_score = score
            since = 0
        else:
            since += 1
        if stall >= 3 or since >= opts.stall_iters:
            status = Status.FAILED
            break
    else:
        Rp, Rd, rf, pobj, dobj, xz, gap, pinf, dinf = measures(X, y, Z, xf)
        score = max(gap / opts.tol_gap, pinf / opts.tol_feas, dinf / opts.tol_feas)
        if score < best_score:
            best_score = score
            best = ([x.copy() for x in X], y.copy(), [z.copy() for z in Z], xf.copy(), it)
        if gap <= opts.tol_gap and pinf <= opts.tol_feas and dinf <= opts.tol_feas:
            status = Status.OPTIMAL

    if status in (Status.MAX_ITER, Status.FAILED) and best is not None:
        X, y, Z, xf, _ = best
        if best_score <= opts.near_factor:
            status = Status.NEAR_OPTIMAL
    _, _, _, pobj, dobj, _, _, _, _ = measures(X, y, Z, xf)
    for blk, C in zip(st.blocks, saved[0]):
        blk.C = C
    st.cf, st.normC = saved[1], saved[2]
    sol = SdpSolution(
        status=status,
        X=X,
        x=xf,
        y=cs * y,
        Z=[cs * z for z in Z],
        objective_primal=cs * pobj,
        objective_dual=cs * dobj,
        iterations=it,
        wall_time=time.perf_counter() - t0,
    )
    sol.report = residuals(problem, sol, _structure=st)
    sol.report["kkt_score"] = float(best_score) if best is not None else float("inf")
    return sol


def residuals(problem: SdpProblem, sol: SdpSolution, _structure: _Structure | None = None) -> dict:
    """Relative KKT residuals of a solution.

    * ``primal_infeasibility`` = ||rhs - A(X) - F x|| / (1 + ||rhs||)
    * ``dual_infeasibility`` = sqrt(sum_b ||min(eig(Zr_b), 0)||^2 + ||c_free - F^T y||^2)
      / (1 + ||C||), with the reconstructed slack Zr_b = C_b - A_b^*(y)
    * ``gap`` = |pobj - dobj| / (1 + |pobj| + |dobj|)
    * ``complementarity`` = <X, Zr> / (1 + |pobj|)
    * ``min_eig_X`` / ``min_eig_Z``: smallest eigenvalue per block
    """
    st = _structure or _Structure(problem)
    X, y, xf = sol.X, sol.y, sol.x
    Rp = st.b - st.A(X) - (st.F @ xf if st.nf else 0.0)
    Zr = [blk.C - a for blk, a in zip(st.blocks, st.At(y))]
    eigZ = [la.eigvalsh(z) for z in Zr]
    eigX = [la.eigvalsh(x) for x in X]
    rf = st.cf - (st.FT @ y if st.nf else np.zeros(0))
    neg = sum(float(np.sum(np.minimum(e, 0.0) ** 2)) for e in eigZ)
    pobj = sum(float(np.vdot(blk.C, x)) for blk, x in zip(st.blocks, X)) + float(st.cf @ xf)
    dobj = float(st.b @ y)
    return {
        "primal_infeasibility": float(np.linalg.norm(Rp)) / (1.0 + st.normb),
        "dual_infeasibility": float(np.sqrt(neg + np.sum(rf**2))) / (1.0 + st.normC),
        "gap": abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
        "complementarity": _inner(X, Zr) / (1.0 + abs(pobj)),
        "min_eig_X": [float(e[0]) for e in eigX],
        "min_eig_Z": [float(e[0]) for e in eigZ],
        "objective_primal": pobj,
        "objective_dual": dobj,
    }
