"""Log-barrier interior-point solver for structured smooth convex programs.

Problems handed to :func:`solve` minimise ``cost @ v`` subject to ``g_i(v) < 0``
for a collection of smooth convex functions with small support, plus a few
dense linear rows ``A @ v + b <= 0``.  The variable vector is split into
``n_global`` leading "global" entries and trailing "local" entries; every
constraint row may touch at most one local variable, which keeps the Newton
system an arrow matrix: locals are eliminated by a diagonal Schur complement
and the dense rows are folded back in with the Woodbury identity.

A problem object provides::

    n_global, n_local        ints
    cost                     (n,) array
    rows(v, derivatives)     -> list[RowBlock]
    dense_rows()             -> (A, b) with A of shape (k, n), or None
    start_point()            -> optional strictly feasible point (may return None)
"""

from __future__ import annotations

from dataclasses import dataclass, field
import enum
import logging
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class RowBlock:
    """A family of constraints ``g < 0`` evaluated at one point.

    ``idx`` has shape (m, w); ``grad`` (m, w) and ``hess`` (m, w, w) are taken
    with respect to the variables listed in ``idx`` (repeated indices are
    allowed and simply add up).
    """

    g: np.ndarray
    idx: np.ndarray
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None
    shiftable: bool = True
    name: str = ""


@dataclass(frozen=True)
class SolveOptions:
    t0: float = 1.0
    mu: float = 10.0
    gap_tol: float = 1e-8
    newton_tol: float = 1e-10
    max_outer: int = 50
    max_inner: int = 200
    ls_alpha: float = 0.01
    ls_beta: float = 0.5
    phase_one_margin: float = 1e-6
    boundary_fraction: float = 0.01
    method: str = "primal_dual"
    kkt_tol: float = 1e-8
    max_pd_iterations: int = 300

    def __post_init__(self):
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        if self.gap_tol <= 0 or self.newton_tol <= 0 or self.t0 <= 0 or self.kkt_tol <= 0:
            raise ValueError("tolerances and t0 must be positive")
        if self.method not in ("primal_dual", "barrier"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveResult:
    status: Status
    x: Optional[np.ndarray]
    objective: float = float("nan")
    gap: float = float("inf")
    outer_iterations: int = 0
    newton_steps: int = 0
    history: list = field(default_factory=list)
    multipliers: Optional[list] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class SolverError(RuntimeError):
    pass


class _Barrier:
    """Evaluates the barrier and its Newton step for one problem."""

    def __init__(self, problem):
        self.p = problem
        self.nG = int(problem.n_global)
        self.nL = int(problem.n_local)
        self.n = self.nG + self.nL
        self.cost = np.asarray(problem.cost, dtype=float)
        dense = problem.dense_rows() if hasattr(problem, "dense_rows") else None
        if dense is None:
            self.A = np.zeros((0, self.n))
            self.b = np.zeros(0)
        else:
            self.A = np.atleast_2d(np.asarray(dense[0], dtype=float))
            self.b = np.atleast_1d(np.asarray(dense[1], dtype=float))

    def values(self, v):
        blocks = self.p.rows(v, False)
        dense = self.A @ v + self.b
        return blocks, dense

    def count(self, v) -> int:
        blocks, dense = self.values(v)
        return sum(len(b.g) for b in blocks) + len(dense)

    @staticmethod
    def strictly_feasible(blocks, dense) -> bool:
        for b in blocks:
            if not np.all(b.g < 0):
                return False
        return bool(np.all(dense < 0))

    def max_violation(self, v) -> float:
        blocks, dense = self.values(v)
        worst = max((float(np.max(b.g)) for b in blocks if len(b.g)), default=-np.inf)
        if len(dense):
            worst = max(worst, float(np.max(dense)))
        return worst

    @staticmethod
    def min_ratio(old, new) -> float:
        """Smallest ``r_new / r_old`` over all rows (r = -g)."""
        (ob, od), (nb, nd) = old, new
        worst = min((float(np.min(c.g / a.g)) for a, c in zip(ob, nb) if len(a.g)), default=1.0)
        if len(od):
            worst = min(worst, float(np.min(nd / od)))
        return worst

    def log_ratio_sum(self, old, new) -> float:
        """``sum log(r_new / r_old)`` over all rows, with r = -g."""
        (ob, od), (nb, nd) = old, new
        total = 0.0
        for a, c in zip(ob, nb):
            total += float(np.sum(np.log(c.g / a.g)))
        if len(od):
            total += float(np.sum(np.log(nd / od)))
        return total

    def _pattern(self, blocks):
        """Symbolic assembly data for the Hessian, cached while row supports are unchanged."""
        key = [b.idx for b in blocks]
        cached = getattr(self, "_pat", None)
        if cached is not None and len(cached[0]) == len(key) and all(
                a.shape == b.shape and np.array_equal(a, b) for a, b in zip(cached[0], key)):
            return cached[1]
        nG, nL = self.nG, self.nL
        rows = np.concatenate([np.repeat(b.idx, b.idx.shape[1], axis=1).ravel() for b in blocks])
        cols = np.concatenate([np.tile(b.idx, (1, b.idx.shape[1])).ravel() for b in blocks])
        rg, cg = rows < nG, cols < nG
        gg, ll, lg = rg & cg, ~rg & ~cg, ~rg & cg
        if np.any(rows[ll] != cols[ll]):
            raise SolverError("a row couples two different local variables")
        gkey = rows[gg] * nG + cols[gg]
        guniq, ginv = np.unique(gkey, return_inverse=True)
        gpat = sp.csc_matrix((np.arange(1, len(guniq) + 1, dtype=float),
                              (guniq // nG, guniq % nG)), shape=(nG, nG))
        gperm = gpat.data.astype(int) - 1
        lkey = (rows[lg] - nG) * nG + cols[lg]
        luniq, linv = np.unique(lkey, return_inverse=True)
        pat = dict(gg=gg, ll=ll, lg=lg, ginv=ginv, nguniq=len(guniq), gperm=gperm,
                   gindices=gpat.indices, gindptr=gpat.indptr, lrow_ll=rows[ll] - nG,
                   linv=linv, nluniq=len(luniq), lr=luniq // nG, lc=luniq % nG)
        self._pat = (key, pat)
        return pat

    def newton(self, v, tb, weights=None, dense_weights=None, blocks=None):
        """Gradient and Newton direction of ``tb*cost@v - sum log(-g)``.

        With ``weights`` (one array per non-empty row block, plus
        ``dense_weights``) the row curvature uses ``w_i`` in place of the
        central-path value ``1/r_i``; primal-dual steps pass ``w = tb*lambda``.
        """
        nG, nL, n = self.nG, self.nL, self.n
        grad = tb * self.cost.copy()
        if blocks is None:
            blocks = [b for b in self.p.rows(v, True) if len(b.g)]
        vals = []
        for i, blk in enumerate(blocks):
            r = -blk.g
            if np.any(r <= 0):
                raise SolverError(f"row block {blk.name!r} infeasible during Newton step")
            w = 1.0 / r if weights is None else weights[i]
            grad += np.bincount(blk.idx.ravel(), weights=(blk.grad / r[:, None]).ravel(),
                                minlength=n)
            gw = blk.grad * np.sqrt(w / r)[:, None]
            hw = gw[:, :, None] * gw[:, None, :]
            if blk.hess is not None:
                hw += blk.hess * w[:, None, None]
            vals.append(hw.ravel())
        vals = np.concatenate(vals) if vals else np.zeros(0)
        pat = self._pattern(blocks) if blocks else None
        if pat is None:
            Hgg = sp.csc_matrix((nG, nG))
            dloc = np.zeros(nL)
        else:
            gdata = np.bincount(pat["ginv"], weights=vals[pat["gg"]], minlength=pat["nguniq"])
            Hgg = sp.csc_matrix((gdata[pat["gperm"]], pat["gindices"], pat["gindptr"]),
                                shape=(nG, nG))
            dloc = np.bincount(pat["lrow_ll"], weights=vals[pat["ll"]], minlength=nL)
        if nL:
            if np.any(dloc <= 0):
                raise SolverError("local variable without curvature")
            ldata = np.bincount(pat["linv"], weights=vals[pat["lg"]], minlength=pat["nluniq"])
            C = sp.csr_matrix((ldata, (pat["lr"], pat["lc"])), shape=(nL, nG))
            S = Hgg - (C.T @ sp.diags(1.0 / dloc) @ C)
        else:
            C = None
            S = Hgg

        dense = self.A @ v + self.b
        rd = -dense
        if np.any(rd <= 0):
            raise SolverError("dense row infeasible during Newton step")
        grad += self.A.T @ (1.0 / rd)
        # dense-row curvature is U diag(wd / rd) U^T
        wd = 1.0 / rd if dense_weights is None else dense_weights

        solve_global = _factorize(S)

        def solve0(rhs):
            rhs = np.atleast_2d(rhs.T).T if rhs.ndim == 1 else rhs
            rG, rL = rhs[:nG], rhs[nG:]
            if nL:
                y = rL / dloc[:, None]
                dG = solve_global(rG - C.T @ y)
                dL = (rL - C @ dG) / dloc[:, None]
                return np.vstack([dG, dL])
            return solve_global(rG)

        if len(rd):
            U = self.A.T
            HU = solve0(U)
            small = np.diag(rd / wd) + U.T @ HU

            def solve_full(rhs):
                d = solve0(rhs)
                return d - HU @ np.linalg.solve(small, U.T @ d)
        else:
            U = None
            solve_full = solve0

        def hmv(d):
            dG, dL = d[:nG], d[nG:]
            out = np.empty_like(d)
            out[:nG] = Hgg @ dG
            if nL:
                out[:nG] += C.T @ dL
                out[nG:] = C @ dG + dloc[:, None] * dL
            if U is not None:
                out += U @ ((U.T @ d) * (wd / rd)[:, None])
            return out

        def refined(rhs):
            rhs = rhs[:, None]
            d = solve_full(rhs)
            # iterative refinement against the unfactored operator
            for _ in range(2):
                res = rhs - hmv(d)
                if np.linalg.norm(res) <= 1e-14 * np.linalg.norm(rhs):
                    break
                d = d + solve_full(res)
            return d[:, 0]

        self.last_solve = refined
        return grad, refined(-grad)


def _factorize(S):
    n = S.shape[0]
    if n == 0:
        return lambda r: r
    if n <= 400:
        dense = S.toarray()
        dense = 0.5 * (dense + dense.T)
        try:
            cf = sla.cho_factor(dense, check_finite=False)
            return lambda r: sla.cho_solve(cf, r, check_finite=False)
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(dense, check_finite=False)
            return lambda r: sla.lu_solve(lu, r, check_finite=False)
    S = sp.csc_matrix(S)
    try:
        lu = spla.splu(S, permc_spec="COLAMD")
    except RuntimeError:
        # numerically singular: regularise the diagonal slightly and retry
        shift = 1e-12 * max(float(np.max(np.abs(S.diagonal()))), 1.0)
        lu = spla.splu(sp.csc_matrix(S + shift * sp.identity(n, format="csc")),
                       permc_spec="COLAMD")
    return lambda r: lu.solve(np.asarray(r, dtype=float))


def _centering(bar: _Barrier, v, tb, opts: SolveOptions, stop=None):
    """Damped Newton minimisation of the barrier at weight ``tb``.

    Besides the Newton-decrement test, centering ends once two consecutive
    accepted steps change the barrier by less than its rounding level, which
    happens before ``newton_tol`` is reachable when ``tb`` is very large.
    """
    steps = 0
    old = bar.values(v)
    m = sum(len(b.g) for b in old[0]) + len(old[1])
    flat = 0
    for _ in range(opts.max_inner):
        grad, d = bar.newton(v, tb)
        lam2 = float(-grad @ d)
        steps += 1
        if not np.isfinite(lam2) or lam2 < 0:
            # direction spoiled by round-off; fall back to steepest descent
            d = -grad
            lam2 = float(grad @ grad)
        if lam2 / 2.0 <= opts.newton_tol:
            return v, steps, True
        slope = float(grad @ d)
        cd = float(bar.cost @ d)
        step = 1.0
        while True:
            trial = v + step * d
            new = bar.values(trial)
            if (bar.strictly_feasible(*new)
                    and bar.min_ratio(old, new) >= opts.boundary_fraction):
                dphi = tb * step * cd - bar.log_ratio_sum(old, new)
                if dphi <= opts.ls_alpha * step * slope:
                    break
            step *= opts.ls_beta
            if step < 1e-14:
                log.debug("line search stalled at tb=%.3g (lambda^2=%.3g)", tb, lam2)
                return v, steps, lam2 / 2.0 <= 1e-6
        noise = 1e-13 * (tb * abs(float(bar.cost @ v)) + m)
        flat = flat + 1 if abs(dphi) <= noise else 0
        v, old = trial, new
        log.debug("newton tb=%.3e obj=%.12e step=%.3e lambda2=%.3e",
                  tb, float(bar.cost @ v), step, lam2)
        if stop is not None and stop(v):
            return v, steps, True
        if flat >= 2:
            return v, steps, True
    return v, steps, False


def _multipliers(bar: _Barrier, v, tb):
    blocks, dense = bar.values(v)
    lam = [(-1.0 / (tb * b.g)) for b in blocks]
    lam.append(-1.0 / (tb * dense))
    return lam


def barrier_method(problem, x0, opts: SolveOptions = SolveOptions(), stop=None,
                   lower_bound_stop=None) -> SolveResult:
    """Barrier path-following from a strictly feasible ``x0``."""
    bar = _Barrier(problem)
    v = np.asarray(x0, dtype=float).copy()
    blocks, dense = bar.values(v)
    if not bar.strictly_feasible(blocks, dense):
        raise SolverError("starting point is not strictly feasible")
    m = sum(len(b.g) for b in blocks) + len(dense)
    tb = opts.t0
    history, total = [], 0
    for outer in range(1, opts.max_outer + 1):
        v, steps, converged = _centering(bar, v, tb, opts, stop)
        total += steps
        obj = float(bar.cost @ v)
        gap = m / tb
        history.append(obj)
        log.debug("outer %d tb=%.3e obj=%.12e gap=%.3e newton=%d", outer, tb, obj, gap, steps)
        if stop is not None and stop(v):
            return SolveResult(Status.OPTIMAL, v, obj, gap, outer, total, history,
                               _multipliers(bar, v, tb), "stopped early")
        if lower_bound_stop is not None and lower_bound_stop(obj - gap):
            return SolveResult(Status.INFEASIBLE, v, obj, gap, outer, total, history,
                               message="lower bound certifies infeasibility")
        if gap <= opts.gap_tol:
            if not converged:
                # m/tb only bounds the gap at a centred point
                return SolveResult(Status.ITERATION_LIMIT, v, obj, gap, outer, total, history,
                                   _multipliers(bar, v, tb), "final centering did not converge")
            return SolveResult(Status.OPTIMAL, v, obj, gap, outer, total, history,
                               _multipliers(bar, v, tb))
        tb *= opts.mu
    return SolveResult(Status.ITERATION_LIMIT, v, float(bar.cost @ v), m / tb * opts.mu,
                       opts.max_outer, total, history, message="outer iteration cap")


def _row_products(blocks, d):
    """``grad_i @ d`` for every row of every block."""
    return [np.sum(b.grad * d[b.idx], axis=1) for b in blocks]


class _PrimalDualState:
    """Rows, multipliers and KKT residuals at one primal-dual point."""

    def __init__(self, bar: _Barrier, v, lam, lam_d):
        self.v, self.lam, self.lam_d = v, lam, lam_d
        self.blocks = [b for b in bar.p.rows(v, True) if len(b.g)]
        self.r = [-b.g for b in self.blocks]
        self.rd = -(bar.A @ v + bar.b)
        dual = bar.cost.copy()
        for b, lm in zip(self.blocks, lam):
            dual += np.bincount(b.idx.ravel(), weights=(b.grad * lm[:, None]).ravel(),
                                minlength=bar.n)
        dual += bar.A.T @ lam_d
        self.dual = dual
        self.eta = (sum(float(lm @ r) for lm, r in zip(lam, self.r))
                    + float(lam_d @ self.rd))

    def residual(self, t) -> float:
        cent = sum(float(np.sum((lm * r - 1.0 / t) ** 2)) for lm, r in zip(self.lam, self.r))
        cent += float(np.sum((self.lam_d * self.rd - 1.0 / t) ** 2))
        return float(np.sqrt(self.dual @ self.dual + cent))


def primal_dual(problem, x0, opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Primal-dual interior-point iterations from a strictly feasible ``x0``.

    Each step solves the same arrow-structured system as the barrier method,
    with the row weights taken from the current multipliers, then backtracks
    on the norm of the perturbed KKT residual.  Success needs the surrogate
    gap below ``gap_tol`` and the dual residual below ``kkt_tol`` (max norm).
    """
    bar = _Barrier(problem)
    v = np.asarray(x0, dtype=float).copy()
    blocks, dense = bar.values(v)
    if not bar.strictly_feasible(blocks, dense):
        raise SolverError("starting point is not strictly feasible")
    nonempty = [b for b in blocks if len(b.g)]
    m = sum(len(b.g) for b in nonempty) + len(dense)
    t0 = opts.t0
    lam = [1.0 / (t0 * -b.g) for b in nonempty]
    lam_d = 1.0 / (t0 * -dense)
    st = _PrimalDualState(bar, v, lam, lam_d)
    history = []
    message = "iteration cap"
    status = Status.ITERATION_LIMIT
    it = 0
    for it in range(1, opts.max_pd_iterations + 1):
        history.append(float(bar.cost @ st.v))
        kkt = float(np.max(np.abs(st.dual))) if len(st.dual) else 0.0
        log.debug("pd %d obj=%.12e eta=%.3e kkt=%.3e", it, history[-1], st.eta, kkt)
        if st.eta <= opts.gap_tol and kkt <= opts.kkt_tol:
            status, message = Status.OPTIMAL, ""
            break
        t = opts.mu * m / st.eta
        try:
            _, d = bar.newton(st.v, t, [t * lm for lm in st.lam], t * st.lam_d, st.blocks)
        except SolverError as exc:
            message = str(exc)
            break
        # second-order correction: the rows' curvature along d, fed back
        # through the same factorization, bends the step along curved rows
        curv = [0.5 * np.einsum("ri,rij,rj->r", d[b.idx], b.hess, d[b.idx])
                if b.hess is not None else np.zeros(len(b.g)) for b in st.blocks]
        extra = np.zeros(bar.n)
        for b, q, lm, r in zip(st.blocks, curv, st.lam, st.r):
            extra -= np.bincount(b.idx.ravel(), weights=(b.grad * (t * lm * q / r)[:, None]).ravel(),
                                 minlength=bar.n)
        if np.any(extra):
            d = d + bar.last_solve(extra)
        prods = _row_products(st.blocks, d)
        dlam = [lm * (gd + q) / r - lm + 1.0 / (t * r)
                for lm, gd, q, r in zip(st.lam, prods, curv, st.r)]
        dlam_d = st.lam_d * (bar.A @ d) / st.rd - st.lam_d + 1.0 / (t * st.rd)
        step = 1.0
        for lm, dl in zip(st.lam + [st.lam_d], dlam + [dlam_d]):
            neg = dl < 0
            if np.any(neg):
                step = min(step, 0.99 * float(np.min(-lm[neg] / dl[neg])))
        res0 = st.residual(t)
        old = bar.values(st.v)
        while step >= 1e-14:
            trial = st.v + step * d
            new = bar.values(trial)
            if (bar.strictly_feasible(*new)
                    and bar.min_ratio(old, new) >= opts.boundary_fraction):
                cand = _PrimalDualState(bar, trial,
                                        [lm + step * dl for lm, dl in zip(st.lam, dlam)],
                                        st.lam_d + step * dlam_d)
                if cand.residual(t) <= (1 - opts.ls_alpha * step) * res0:
                    break
            step *= opts.ls_beta
        else:
            message = "line search stalled"
            break
        st = cand
    obj = float(bar.cost @ st.v)
    return SolveResult(status, st.v, obj, st.eta, it, it, history,
                       st.lam + [st.lam_d], message)


class _PhaseOne:
    """Wraps a problem as ``min s  s.t.  g_i(v) <= s`` for shiftable rows."""

    def __init__(self, problem):
        self.p = problem
        self.s_index = int(problem.n_global)
        self.n_global = problem.n_global + 1
        self.n_local = problem.n_local
        n = self.n_global + self.n_local
        self.cost = np.zeros(n)
        self.cost[self.s_index] = 1.0

    def split(self, w):
        v = np.concatenate([w[:self.s_index], w[self.s_index + 1:]])
        return v, w[self.s_index]

    def join(self, v, s):
        return np.concatenate([v[:self.s_index], [s], v[self.s_index:]])

    def _remap(self, idx):
        return np.where(idx >= self.s_index, idx + 1, idx)

    def rows(self, w, derivatives):
        v, s = self.split(w)
        out = []
        for b in self.p.rows(v, derivatives):
            idx = self._remap(b.idx)
            if not b.shiftable:
                out.append(RowBlock(b.g, idx, b.grad, b.hess, False, b.name))
                continue
            m, wd = idx.shape
            idx2 = np.concatenate([idx, np.full((m, 1), self.s_index)], axis=1)
            grad = hess = None
            if derivatives:
                grad = np.concatenate([b.grad, -np.ones((m, 1))], axis=1)
                if b.hess is not None:
                    hess = np.zeros((m, wd + 1, wd + 1))
                    hess[:, :wd, :wd] = b.hess
            out.append(RowBlock(b.g - s, idx2, grad, hess, True, b.name))
        return out

    def dense_rows(self):
        dense = self.p.dense_rows() if hasattr(self.p, "dense_rows") else None
        if dense is None:
            return None
        A, b = np.atleast_2d(dense[0]), np.atleast_1d(dense[1])
        A2 = np.insert(A, self.s_index, -1.0, axis=1)
        return A2, b


def phase_one(problem, x0=None, opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Find a point with every shiftable constraint below ``-opts.phase_one_margin``.

    Rows flagged non-shiftable (simple bounds) must already hold strictly at
    ``x0``; if they do not, the problem is reported infeasible.
    """
    if x0 is None:
        x0 = problem.start_point()
    if x0 is None:
        return SolveResult(Status.INFEASIBLE, None, message="no start point for simple bounds")
    x0 = np.asarray(x0, dtype=float)
    wrapped = _PhaseOne(problem)
    blocks = problem.rows(x0, False)
    for b in blocks:
        if not b.shiftable and not np.all(b.g < 0):
            return SolveResult(Status.INFEASIBLE, None,
                               message=f"simple bounds {b.name!r} cannot be met")
    worst = max((float(np.max(b.g)) for b in blocks if b.shiftable and len(b.g)),
                default=-np.inf)
    dense = wrapped.p.dense_rows() if hasattr(problem, "dense_rows") else None
    if dense is not None:
        worst = max(worst, float(np.max(np.atleast_2d(dense[0]) @ x0 + dense[1])))
    if worst < -opts.phase_one_margin:
        return SolveResult(Status.OPTIMAL, x0, worst, 0.0, message="start point already feasible")
    s0 = worst + 1.0
    margin = opts.phase_one_margin
    res = barrier_method(wrapped, wrapped.join(x0, s0), opts,
                         stop=lambda w: w[wrapped.s_index] < -margin,
                         lower_bound_stop=lambda lb: lb > 0.0)
    v, s = wrapped.split(res.x) if res.x is not None else (None, np.inf)
    if s < -margin:
        return SolveResult(Status.OPTIMAL, v, float(s), 0.0, res.outer_iterations,
                           res.newton_steps, res.history)
    msg = f"phase-one shift stalled at {s:.3e} (needs < {-margin:.1e})"
    status = Status.ITERATION_LIMIT if res.status is Status.ITERATION_LIMIT else Status.INFEASIBLE
    return SolveResult(status, None, float(s), res.gap, res.outer_iterations,
                       res.newton_steps, res.history, message=msg)


def solve(problem, opts: SolveOptions = SolveOptions(), x0=None) -> SolveResult:
    """Minimise ``problem.cost @ v`` over the strict interior of the constraints.

    Without a usable ``x0`` the problem's own ``start_point`` is tried and, if
    that is not strictly feasible, a phase-one solve is run first.
    """
    bar = _Barrier(problem)
    if x0 is None and hasattr(problem, "start_point"):
        x0 = problem.start_point()
    if x0 is None or not bar.strictly_feasible(*bar.values(np.asarray(x0, dtype=float))):
        p1 = phase_one(problem, x0, opts)
        if not p1.ok:
            return SolveResult(p1.status, None, message=p1.message,
                               newton_steps=p1.newton_steps)
        x0 = p1.x
    if opts.method == "barrier":
        return barrier_method(problem, x0, opts)
    return primal_dual(problem, x0, opts)


@dataclass
class SmoothProblem:
    """Small dense convex program, convenient for tests and tiny instances.

    ``constraints`` is a list of callables ``f(v) -> (g, grad, hess)``; all
    variables are global.
    """

    cost: np.ndarray
    constraints: Sequence[Callable]
    x_start: Optional[np.ndarray] = None
    shiftable: bool = True
    linear: Optional[tuple] = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.n_global = len(self.cost)
        self.n_local = 0

    def rows(self, v, derivatives):
        out = []
        n = self.n_global
        idx = np.arange(n)[None, :]
        for i, f in enumerate(self.constraints):
            g, gr, h = f(v)
            out.append(RowBlock(np.array([g], dtype=float), idx,
                                np.asarray(gr, dtype=float)[None, :] if derivatives else None,
                                np.asarray(h, dtype=float)[None, :, :] if derivatives else None,
                                self.shiftable, f"c{i}"))
        return out

    def dense_rows(self):
        return self.linear

    def start_point(self):
        return None if self.x_start is None else np.asarray(self.x_start, dtype=float)
