"""Fixed-N coverage problem: scenario data, decision vector and constraint audit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .geometry import RadarGeometry, SweepPlan
from .linkbudget import CommParams, SarParams, sar_data_rate, throughput


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioParams:
    geom: RadarGeometry
    sar: SarParams
    comm: CommParams
    q_start: float
    p_prop: float
    p_sar_max: float
    z_min: float
    z_max: float
    speed: float
    aoi_length: float
    delta_y: float
    carrier_freq: float = 2e9
    slots_override: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.z_min < self.z_max:
            raise ValueError(f"need 0 < z_min < z_max, got {self.z_min}, {self.z_max}")
        if self.q_start <= 0 or self.p_prop <= 0 or self.p_sar_max <= 0:
            raise ValueError("q_start, p_prop and p_sar_max must be positive")

    @property
    def p_com_max(self) -> float:
        return self.comm.p_com_max

    @property
    def bs(self) -> np.ndarray:
        return np.asarray(self.comm.bs_position, dtype=float)

    def plan(self, n_sweeps: int) -> SweepPlan:
        if self.slots_override is not None:
            m = int(self.slots_override)
            # explicit M keeps delta_y, so the flown sweep length becomes M*delta_y
            return SweepPlan(int(n_sweeps), m, self.delta_y, self.delta_y / self.speed,
                             self.speed, m * self.delta_y)
        return geo.build_sweep_plan(self.aoi_length, self.delta_y, self.speed, n_sweeps)

    def replace(self, **changes) -> "ScenarioParams":
        """Copy with some fields changed; ``bs_position`` and ``p_com_max`` are routed to comm."""
        import dataclasses
        comm_changes = {k: changes.pop(k) for k in ("bs_position", "p_com_max", "gamma")
                        if k in changes}
        comm = self.comm
        if comm_changes:
            comm = CommParams.build(
                self.sar, self.geom,
                bandwidth_comm=comm.bandwidth_comm,
                gamma=comm_changes.get("gamma", comm.gamma),
                rate_overhead=comm.rate_overhead,
                bs_position=comm_changes.get("bs_position", comm.bs_position),
                p_com_max=comm_changes.get("p_com_max", comm.p_com_max))
        return dataclasses.replace(self, comm=comm, **changes)


@dataclass(frozen=True)
class DecisionVector:
    """Per-sweep trajectory and radar power, per-slot backhaul power and battery trace.

    ``q`` holds ``N*M + 1`` entries: the level before every slot plus the
    level left after the last one.
    """

    z: np.ndarray
    x: np.ndarray
    p_sar: np.ndarray
    p_com: np.ndarray
    q: np.ndarray

    def z_slots(self, plan: SweepPlan) -> np.ndarray:
        return geo.expand_per_slot(plan, self.z)

    def x_slots(self, plan: SweepPlan) -> np.ndarray:
        return geo.expand_per_slot(plan, self.x)

    def p_sar_slots(self, plan: SweepPlan) -> np.ndarray:
        return geo.expand_per_slot(plan, self.p_sar)

    def positions(self, plan: SweepPlan) -> np.ndarray:
        """(NM, 3) array of UAV positions."""
        return np.column_stack([self.x_slots(plan), geo.y_positions(plan), self.z_slots(plan)])


def energy_rollout(s: ScenarioParams, plan: SweepPlan, p_sar, p_com) -> np.ndarray:
    p_sar = np.asarray(p_sar, dtype=float)
    p_com = np.asarray(p_com, dtype=float)
    if p_sar.shape != (plan.n_sweeps,) or p_com.shape != (plan.n_slots,):
        raise DimensionMismatch("power vectors do not match the sweep plan")
    draw = plan.delta_t * (p_com + geo.expand_per_slot(plan, p_sar) + s.p_prop)
    return np.subtract.accumulate(np.concatenate(([s.q_start], draw)))


def make_decision_vector(s: ScenarioParams, plan: SweepPlan, z, p_sar, p_com) -> DecisionVector:
    z = np.asarray(z, dtype=float)
    if z.shape != (plan.n_sweeps,):
        raise DimensionMismatch(f"expected {plan.n_sweeps} altitudes, got {z.shape}")
    p_sar = np.asarray(p_sar, dtype=float)
    p_com = np.asarray(p_com, dtype=float)
    return DecisionVector(z=z, x=geo.x_from_z(s.geom, z), p_sar=p_sar, p_com=p_com,
                          q=energy_rollout(s, plan, p_sar, p_com))


def objective(s: ScenarioParams, plan: SweepPlan, dv: DecisionVector) -> float:
    return geo.coverage(s.geom, plan, dv.z_slots(plan))


@dataclass(frozen=True)
class FeasibilityReport:
    """Worst signed residual of every original constraint (positive = violated).

    Units: C1-C4, C6 in m; C5, C7, C9 in W; C8 in bit/s; C10, C11 in J.
    ``scales`` holds the per-family reference magnitude used for the relative
    tolerance test.
    """

    residuals: dict
    scales: dict
    tol: float
    feasible: bool = field(init=False)

    def __post_init__(self):
        ok = all(self.residuals[k] <= self.tol * self.scales[k] for k in self.residuals)
        object.__setattr__(self, "feasible", bool(ok))

    def violations(self) -> dict:
        return {k: v for k, v in self.residuals.items() if v > self.tol * self.scales[k]}

    def __str__(self):
        lines = [f"feasible={self.feasible} (rtol={self.tol:g})"]
        for k, v in self.residuals.items():
            flag = "ok" if v <= self.tol * self.scales[k] else "VIOLATED"
            lines.append(f"  {k:>3}: {v: .6e}  (scale {self.scales[k]:.3g})  {flag}")
        return "\n".join(lines)


def _worst(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(values)) if values.size else 0.0


def check_feasibility(s: ScenarioParams, plan: SweepPlan, dv: DecisionVector,
                      tol: float = 1e-6) -> FeasibilityReport:
    n, nm = plan.n_sweeps, plan.n_slots
    for name, arr, size in (("z", dv.z, n), ("x", dv.x, n), ("p_sar", dv.p_sar, n),
                            ("p_com", dv.p_com, nm), ("q", dv.q, nm + 1)):
        if np.shape(arr) != (size,):
            raise DimensionMismatch(f"{name} has shape {np.shape(arr)}, expected ({size},)")

    g = s.geom
    z_sl, x_sl, ps_sl = dv.z_slots(plan), dv.x_slots(plan), dv.p_sar_slots(plan)
    # within-sweep pairs (n, n+1): the second slot is not the first of a sweep
    cruise = np.asarray(geo.slot_index_sets(plan).cruise_slots, dtype=int) - 1
    nxt = cruise - 1

    res, scale = {}, {}
    res["C1"] = abs(dv.x[0] + g.tan_1 * dv.z[0])
    if n > 1:
        c2 = dv.x[1:] - dv.x[:-1] - dv.z[:-1] * g.tan_2 + dv.z[1:] * g.tan_1
        res["C2"] = _worst(np.abs(c2))
    else:
        res["C2"] = 0.0
    res["C3"] = _worst(np.abs(x_sl[nxt + 1] - x_sl[nxt]))
    res["C4"] = _worst(np.abs(z_sl[nxt + 1] - z_sl[nxt]))
    res["C5"] = _worst(np.abs(ps_sl[nxt + 1] - ps_sl[nxt]))
    for k in ("C1", "C2", "C3", "C4"):
        scale[k] = s.z_max
    scale["C5"] = s.p_sar_max

    res["C6"] = _worst(np.maximum(s.z_min - dv.z, dv.z - s.z_max))
    scale["C6"] = s.z_max

    # SNR requirement expressed as the missing radar power
    res["C7"] = _worst(dv.z ** 3 / s.sar.beta - dv.p_sar)
    scale["C7"] = s.p_sar_max

    pos = np.column_stack([x_sl, geo.y_positions(plan), z_sl])
    d = np.sqrt(np.sum((pos - s.bs) ** 2, axis=1))
    required = sar_data_rate(s.sar, g, z_sl) + s.comm.rate_overhead
    with np.errstate(divide="ignore"):
        achieved = throughput(s.comm, np.maximum(dv.p_com, 0.0), d)
    res["C8"] = _worst(required - achieved)
    scale["C8"] = float(np.max(required))

    res["C9"] = max(_worst(-dv.p_sar), _worst(dv.p_sar - s.p_sar_max),
                    _worst(-dv.p_com), _worst(dv.p_com - s.p_com_max))
    scale["C9"] = max(s.p_sar_max, s.p_com_max)

    res["C10"] = max(abs(dv.q[0] - s.q_start), _worst(-dv.q))
    scale["C10"] = s.q_start
    draw = plan.delta_t * (dv.p_com + ps_sl + s.p_prop)
    res["C11"] = _worst(np.abs(dv.q[1:] - (dv.q[:-1] - draw)))
    scale["C11"] = s.q_start
    return FeasibilityReport({k: float(v) for k, v in res.items()}, scale, tol)
