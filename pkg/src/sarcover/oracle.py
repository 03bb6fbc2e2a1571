"""Brute-force reference solutions for tiny instances and finite-difference checks.

Nothing here touches the convex restriction or the barrier solver.  The grid
search evaluates the original constraints directly, with the sweep geometry
rebuilt from scratch, so it can serve as an independent check on the SCA
pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .linkbudget import sar_data_rate, throughput
from .problem import DecisionVector, ScenarioParams, make_decision_vector

MAX_POINTS = 10 ** 8


class NoFeasiblePoint(RuntimeError):
    """No grid point satisfies the constraints."""


@dataclass(frozen=True)
class Axis:
    """Evenly spaced values ``lo, lo + step, ...`` not exceeding ``hi``."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.hi < self.lo:
            raise ValueError("grid upper end lies below lower end")

    def values(self) -> np.ndarray:
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(count)


@dataclass(frozen=True)
class GridSpec:
    """Grid over per-sweep altitude and radar power.

    With ``p_com=None`` the backhaul power of every slot is set to the
    smallest value meeting the rate requirement.  Otherwise it is gridded,
    one value per slot, or a single shared value when ``tie_p_com`` is set.
    """

    z: Axis
    p_sar: Axis
    p_com: Optional[Axis] = None
    tie_p_com: bool = False
    max_points: int = MAX_POINTS

    @classmethod
    def tiny(cls, s: ScenarioParams, z_step=0.5, p_sar_step=0.5, **kw) -> "GridSpec":
        """Whole altitude and radar-power ranges at the given steps."""
        return cls(Axis(s.z_min, s.z_max, z_step), Axis(0.0, s.p_sar_max, p_sar_step), **kw)

    def shape(self, n_sweeps: int, n_slots: int) -> tuple:
        dims = [len(self.z.values())] * n_sweeps + [len(self.p_sar.values())] * n_sweeps
        if self.p_com is not None:
            dims += [len(self.p_com.values())] * (1 if self.tie_p_com else n_slots)
        return tuple(dims)

    def cardinality(self, n_sweeps: int, n_slots: int) -> int:
        return math.prod(self.shape(n_sweeps, n_slots))


@dataclass(frozen=True)
class GridResult:
    coverage: float
    dv: DecisionVector
    n_points: int
    n_feasible: int
    cell_slack: float

    def __iter__(self):
        yield self.coverage
        yield self.dv


def _x_positions(tan_1, tan_2, z):
    # footprints tile the ground: each sweep starts where the previous one ended
    x = np.empty_like(z)
    x[:, 0] = -tan_1 * z[:, 0]
    for k in range(1, z.shape[1]):
        x[:, k] = x[:, k - 1] + tan_2 * z[:, k - 1] - tan_1 * z[:, k]
    return x


def grid_best(s: ScenarioParams, n_sweeps: int, grid: GridSpec, chunk: int = 1 << 18,
              rate_rtol: float = 1e-9) -> GridResult:
    """Exhaustive search for the largest coverage over ``grid``.

    Each point fixes the per-sweep altitudes and radar powers (and the
    backhaul powers if gridded).  The footprint-adjacency and per-sweep
    equalities hold by construction; the altitude box, radar SNR, backhaul
    rate, power boxes and battery level are tested at every point.  The rate
    check allows a relative shortfall of ``rate_rtol`` so that the analytic
    minimum power is not lost to rounding.
    """
    plan = s.plan(n_sweeps)
    n, m, nm = plan.n_sweeps, plan.slots_per_sweep, plan.n_slots
    shape = grid.shape(n, nm)
    total = math.prod(shape)
    if total > grid.max_points:
        raise ValueError(f"grid has {total} points, above the cap of {grid.max_points}")

    zs, ps = grid.z.values(), grid.p_sar.values()
    pcs = grid.p_com.values() if grid.p_com is not None else None
    g, comm = s.geom, s.comm
    # azimuth steps: forward on even sweeps, backward on odd ones
    heading = np.where((np.arange(nm) // m) % 2 == 0, 1, -1)
    y = plan.delta_y * np.concatenate(([0], np.cumsum(heading[:-1])))
    bs = s.bs
    per_metre = plan.delta_y * m * (g.tan_2 - g.tan_1)

    best_cov, best_flat, n_feasible = -np.inf, None, 0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.stack(np.unravel_index(flat, shape), axis=1)
        z = zs[idx[:, :n]]
        p_sar = ps[idx[:, n:2 * n]]
        x = _x_positions(g.tan_1, g.tan_2, z)
        z_sl, x_sl = np.repeat(z, m, axis=1), np.repeat(x, m, axis=1)
        d2 = (x_sl - bs[0]) ** 2 + (y - bs[1]) ** 2 + (z_sl - bs[2]) ** 2
        if pcs is None:
            p_com = comm.link_gap(z_sl) * d2 / comm.gamma
        elif grid.tie_p_com:
            p_com = np.repeat(pcs[idx[:, 2 * n:]], nm, axis=1)
        else:
            p_com = pcs[idx[:, 2 * n:]]
        need = sar_data_rate(s.sar, g, z_sl) + comm.rate_overhead
        with np.errstate(divide="ignore"):
            have = throughput(comm, p_com, np.sqrt(d2))
        ok = np.all((z >= s.z_min) & (z <= s.z_max), axis=1)
        ok &= np.all(s.sar.beta * p_sar >= z ** 3, axis=1)
        ok &= np.all((p_sar >= 0) & (p_sar <= s.p_sar_max), axis=1)
        ok &= np.all((p_com >= 0) & (p_com <= s.p_com_max), axis=1)
        ok &= np.all(have >= need * (1 - rate_rtol), axis=1)
        # the battery level only falls, so the last one decides
        used = plan.delta_t * (m * p_sar.sum(axis=1) + p_com.sum(axis=1) + nm * s.p_prop)
        ok &= used <= s.q_start
        n_feasible += int(ok.sum())
        if not ok.any():
            continue
        cov = np.where(ok, per_metre * z.sum(axis=1), -np.inf)
        j = int(np.argmax(cov))
        if cov[j] > best_cov:
            best_cov, best_flat = float(cov[j]), int(flat[j])

    if best_flat is None:
        raise NoFeasiblePoint(f"none of the {total} grid points is feasible")
    idx = np.array(np.unravel_index(best_flat, shape))
    z = zs[idx[:n]]
    p_sar = ps[idx[n:2 * n]]
    if pcs is None:
        dv0 = make_decision_vector(s, plan, z, p_sar, np.zeros(nm))
        pos = dv0.positions(plan)
        p_com = comm.link_gap(pos[:, 2]) * np.sum((pos - bs) ** 2, axis=1) / comm.gamma
    elif grid.tie_p_com:
        p_com = np.full(nm, pcs[idx[2 * n]])
    else:
        p_com = pcs[idx[2 * n:]]
    dv = make_decision_vector(s, plan, z, p_sar, p_com)
    # one cell: every altitude one z step higher, plus the altitude one radar
    # power step buys at the chosen point (first order in z**3 = beta*p)
    dz = grid.z.step + s.sar.beta * grid.p_sar.step / (3 * float(np.min(z)) ** 2)
    slack = per_metre * n * dz
    return GridResult(best_cov, dv, total, n_feasible, slack)


def fd_check(f: Callable, grad: Callable, x, rel_step: float = 1e-4,
             floor: float = 1.0) -> float:
    """Worst error of ``grad`` against central differences of ``f`` at ``x``.

    ``f`` may be scalar or vector valued; ``grad`` returns the gradient
    (shape ``(n,)``) or Jacobian (``(m, n)``).  The step for coordinate i is
    ``rel_step * max(1, |x_i|)``.  Errors are divided by
    ``max(|analytic|, floor)``, so they are relative for large entries and
    absolute for entries near zero.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    jac = np.asarray(grad(x), dtype=float).reshape(-1, x.size)
    worst = 0.0
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)).ravel() / (2 * h)
        err = np.abs(fd - jac[:, i]) / np.maximum(np.abs(jac[:, i]), floor)
        worst = max(worst, float(np.max(err)))
    return worst
