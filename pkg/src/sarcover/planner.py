"""Successive convex approximation for a fixed sweep count, the search over the
sweep count, benchmark variants and summary metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Optional, Sequence

import numpy as np

from . import geometry as geo
from .convexify import InfeasibleReference, Iterate, Scheme, build_subproblem
from .geometry import SweepPlan
from .problem import (DecisionVector, FeasibilityReport, ScenarioParams, check_feasibility,
                      objective)
from .solver import SolveOptions, Status, phase_one, solve

log = logging.getLogger(__name__)


class AllInfeasible(RuntimeError):
    """No sweep count admits a feasible plan."""


@dataclass(frozen=True)
class ScaOptions:
    epsilon: float = 1e-3
    max_iterations: int = 100
    initial_policy: str = "constant_altitude"
    solver: SolveOptions = SolveOptions()
    balance: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.initial_policy != "constant_altitude":
            raise ValueError(f"unknown initial policy {self.initial_policy!r}")


@dataclass
class ScaResult:
    """Outcome of the SCA loop for one sweep count.

    ``trace`` starts with the coverage of the initial point and then lists
    the coverage of the accepted iterate after every convex subproblem;
    ``raw_trace`` holds what each subproblem solve actually returned.
    """

    n_sweeps: int
    status: Status
    coverage: float = float("nan")
    dv: Optional[DecisionVector] = None
    trace: list = field(default_factory=list)
    iterations: int = 0
    message: str = ""
    raw_trace: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is not Status.INFEASIBLE


@dataclass(frozen=True)
class NRow:
    n_sweeps: int
    coverage: float
    status: str
    iterations: int


@dataclass
class PlanResult:
    n_sweeps: int
    scheme: Scheme
    dv: DecisionVector
    plan: SweepPlan
    coverage: float
    trace: list
    table: list
    d_avg: float
    z_avg: float
    report: FeasibilityReport
    status: Status
    runs: dict = field(default_factory=dict)

    def coverage_by_n(self) -> dict:
        return {row.n_sweeps: row.coverage for row in self.table}


def n_upper_bound(s: ScenarioParams, plan: SweepPlan) -> int:
    """Largest sweep count whose propulsion energy alone fits in the battery."""
    bound = (s.q_start / (plan.delta_t * s.p_prop) + 1.0) / plan.slots_per_sweep
    return int(math.floor(bound * (1 + 1e-12)))


def metrics(dv: DecisionVector, plan: SweepPlan, bs) -> tuple:
    """Slot-averaged distance to the base station and altitude."""
    pos = dv.positions(plan)
    d = np.sqrt(np.sum((pos - np.asarray(bs, dtype=float)) ** 2, axis=1))
    return float(np.mean(d)), float(np.mean(pos[:, 2]))


def _c8_altitude(s: ScenarioParams, plan: SweepPlan) -> float:
    """Highest constant altitude at which full backhaul power covers every slot."""
    y = geo.y_positions(plan)
    bs = s.bs
    gamma, pmax = s.comm.gamma, s.p_com_max

    def worst(z):
        zs = np.full(plan.n_sweeps, z)
        x = geo.expand_per_slot(plan, geo.x_from_z(s.geom, zs))
        d2 = (x - bs[0]) ** 2 + (y - bs[1]) ** 2 + (z - bs[2]) ** 2
        return float(np.max(s.comm.link_gap(z) * d2)) - gamma * pmax

    lo, hi = s.z_min, s.z_max
    if worst(hi) <= 0:
        return hi
    if worst(lo) > 0:
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if worst(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _energy_altitude(s: ScenarioParams, plan: SweepPlan, scheme: Scheme) -> float:
    """Highest constant altitude whose minimal powers fit in the battery.

    Uses the smallest radar power meeting the SNR row and the smallest
    backhaul power meeting the rate row in every slot (their maximum when the
    scheme shares one backhaul power).  Returns ``z_min`` if even that is too
    much; the energy is not monotone in z in general, so this is a heuristic
    starting altitude rather than a bound.
    """
    y = geo.y_positions(plan)
    bs = s.bs
    m, nm, dt = plan.slots_per_sweep, plan.n_slots, plan.delta_t
    budget = s.q_start - nm * dt * s.p_prop

    def excess(z):
        zs = np.full(plan.n_sweeps, z)
        x = geo.expand_per_slot(plan, geo.x_from_z(s.geom, zs))
        d2 = (x - bs[0]) ** 2 + (y - bs[1]) ** 2 + (z - bs[2]) ** 2
        p_com = s.comm.link_gap(z) * d2 / s.comm.gamma
        com = nm * float(np.max(p_com)) if scheme is Scheme.FIXED_COMM_POWER else float(p_com.sum())
        return dt * (m * plan.n_sweeps * z ** 3 / s.sar.beta + com) - budget

    lo, hi = s.z_min, s.z_max
    if excess(hi) <= 0:
        return hi
    if excess(lo) > 0:
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _feasible_start(s, plan, z, scheme, opts: ScaOptions):
    """Strictly feasible subproblem point at constant altitude ``z``, or ``None``."""
    it = Iterate.from_z(s, np.full(plan.n_sweeps, z))
    try:
        sub = build_subproblem(s, plan, it, scheme, opts.balance)
    except InfeasibleReference:
        return None
    for theta in (1e-3, 1e-6):
        v = sub.strict_point(it.z_ref, theta=theta)
        if v is not None:
            return it, v
    p1 = phase_one(sub, sub.start_point(), opts.solver)
    if p1.ok:
        return Iterate.from_z(s, sub.unpack(p1.x)["z"]), sub.unpack(p1.x)
    return None


def initial_point(s: ScenarioParams, n_sweeps: int, opts: ScaOptions = ScaOptions(),
                  scheme: Scheme = Scheme.PROPOSED):
    """Constant-altitude starting iterate with a strictly feasible completion.

    Tries the lowest of the radar-limited, backhaul-limited and
    battery-limited altitudes, then ``z_min``, then bisects between them.  Returns ``(Iterate, point)`` where
    ``point`` is a solver vector of the subproblem built at the iterate or a
    dict of natural values, or ``None`` if nothing feasible was found.
    """
    plan = s.plan(n_sweeps)
    if plan.n_slots * plan.delta_t * s.p_prop >= s.q_start:
        return None
    z_radar = (s.sar.beta * s.p_sar_max) ** (1.0 / 3.0)
    z0 = min(z_radar, _c8_altitude(s, plan), _energy_altitude(s, plan, scheme))
    pad = 1e-6 * (s.z_max - s.z_min)
    z_hi = float(np.clip(z0 * (1 - 1e-9), s.z_min + pad, s.z_max - pad))
    z_lo = s.z_min + pad
    if z_hi < z_lo:
        return None
    found = _feasible_start(s, plan, z_hi, scheme, opts)
    if found is not None:
        return found
    found = _feasible_start(s, plan, z_lo, scheme, opts)
    if found is None:
        return None
    lo = z_lo
    for _ in range(30):
        if z_hi - lo <= 1e-6 * s.z_max:
            break
        mid = 0.5 * (lo + z_hi)
        cand = _feasible_start(s, plan, mid, scheme, opts)
        if cand is not None:
            lo, found = mid, cand
        else:
            z_hi = mid
    return found


def sca_solve(s: ScenarioParams, n_sweeps: int, opts: ScaOptions = ScaOptions(),
              scheme: Scheme = Scheme.PROPOSED) -> ScaResult:
    """Iterate convex restrictions from a constant-altitude start."""
    scheme = Scheme(scheme)
    plan = s.plan(n_sweeps)
    start = initial_point(s, n_sweeps, opts, scheme)
    if start is None:
        return ScaResult(n_sweeps, Status.INFEASIBLE, message="no feasible initial point")
    it, point = start
    sub = build_subproblem(s, plan, it, scheme, opts.balance)
    if isinstance(point, dict):
        point = sub.pack(point["z"], point["p_sar"], point["p_com"])
    best_v, best_sub = point, sub
    coverage = sub.coverage(point)
    trace, raw = [coverage], [coverage]
    status = Status.ITERATION_LIMIT
    message = "SCA iteration cap reached"
    iterations = 0
    for j in range(1, opts.max_iterations + 1):
        iterations = j
        prev = best_sub.unpack(best_v)
        x0 = sub.pack(prev["z"], prev["p_sar"], prev["p_com"])
        x0 = sub.warm_start(x0) if sub.strictly_feasible(x0) else None
        res = solve(sub, opts.solver, x0)
        if res.x is None:
            status, message = Status.ITERATION_LIMIT, f"subproblem failed: {res.message}"
            break
        new_cov = sub.coverage(res.x)
        raw.append(new_cov)
        log.debug("N=%d SCA %d coverage=%.12g (%s)", n_sweeps, j, new_cov, res.status.value)
        if new_cov < coverage:
            # the previous iterate was feasible for this restriction, so a lower
            # value is solver tolerance; keep the reference and stop
            trace.append(coverage)
            status, message = Status.OPTIMAL, f"converged after {j} iterations (no improvement)"
            break
        best_v, best_sub = res.x, sub
        change = (new_cov - coverage) / max(new_cov, 1e-300)
        coverage = new_cov
        trace.append(coverage)
        if change <= opts.epsilon:
            status, message = Status.OPTIMAL, f"converged after {j} iterations"
            break
        z_new = np.clip(sub.unpack(res.x)["z"], s.z_min, s.z_max)
        try:
            sub = build_subproblem(s, plan, Iterate.from_z(s, z_new), scheme, opts.balance)
        except InfeasibleReference as exc:
            status, message = Status.ITERATION_LIMIT, str(exc)
            break
    dv = best_sub.decision_vector(best_v)
    return ScaResult(n_sweeps, status, objective(s, plan, dv), dv, trace, iterations, message,
                     raw)


def _pick_best(rows: Sequence[NRow], rtol: float = 1e-3) -> Optional[int]:
    feasible = [r for r in rows if np.isfinite(r.coverage)]
    if not feasible:
        return None
    top = max(r.coverage for r in feasible)
    return min(r.n_sweeps for r in feasible if r.coverage >= top * (1 - rtol))


def search_optimal_n(s: ScenarioParams, opts: ScaOptions = ScaOptions(),
                     scheme: Scheme = Scheme.PROPOSED, n_values: Optional[Sequence[int]] = None,
                     max_n: Optional[int] = None, progress=None) -> PlanResult:
    """Solve N = 1, 2, ... until the first infeasible N or the energy bound.

    ``n_values`` replaces the sequence (it is still cut at the first
    infeasible entry); ``max_n`` caps it.  The chosen N is the smallest one
    within 0.1% of the best coverage.  ``runs`` maps every N tried to its
    :class:`ScaResult` without the plan, which keeps the traces at hand.
    """
    scheme = Scheme(scheme)
    bound = n_upper_bound(s, s.plan(1))
    last = bound if max_n is None else min(bound, int(max_n))
    seq = list(range(1, last + 1)) if n_values is None else [int(n) for n in n_values]
    rows, results, runs = [], {}, {}
    for n in seq:
        r = sca_solve(s, n, opts, scheme)
        rows.append(NRow(n, r.coverage if r.ok else float("nan"), r.status.value, r.iterations))
        if progress is not None:
            progress(rows[-1])
        runs[n] = replace(r, dv=None)
        if not r.ok:
            break
        results[n] = r
    best = _pick_best(rows)
    if best is None:
        raise AllInfeasible(f"no feasible plan for N in {seq[0]}..{rows[-1].n_sweeps}")
    r = results[best]
    plan = s.plan(best)
    d_avg, z_avg = metrics(r.dv, plan, s.bs)
    report = check_feasibility(s, plan, r.dv, 1e-6)
    return PlanResult(best, scheme, r.dv, plan, r.coverage, r.trace, rows, d_avg, z_avg,
                      report, r.status, runs)


def plan_fixed_n(s: ScenarioParams, n_sweeps: int, opts: ScaOptions = ScaOptions(),
                 scheme: Scheme = Scheme.PROPOSED) -> PlanResult:
    """Single-N plan packaged like a search result."""
    return search_optimal_n(s, opts, scheme, n_values=[n_sweeps])


def benchmark(s: ScenarioParams, opts: ScaOptions = ScaOptions(), scheme=1,
              **search_kwargs) -> PlanResult:
    """Search over N with one group of variables shared across the mission.

    ``scheme`` is 1 (one altitude), 2 (one backhaul power), 3 (one radar
    power) or a :class:`Scheme`.
    """
    if not isinstance(scheme, Scheme):
        scheme = Scheme.from_benchmark(scheme)
    return search_optimal_n(s, opts, scheme, **search_kwargs)
