"""Convex restriction of the fixed-N coverage problem around a reference trajectory.

The radar SNR requirement ``beta*P_sar >= z**3`` is split with a slack
``psi``::

    z**2 <= psi                      (c7a)
    psi**2 / z <= beta * P_sar       (c7b, quadratic-over-linear)

The backhaul requirement ``f1(z) * d**2 <= P_com*gamma`` with
``f1(z) = A*2**(alpha*z) - 1`` is non-convex.  The products
``f1(z)*(x-x_b)**2`` and ``f1(z)*(z-z_b)**2`` are written as differences of
convex functions, ``a*b = ((k*a + b/k)**2 - k**2*a**2 - b**2/k**2) / 2``, and
the subtracted squares are replaced by their tangent lines at the reference.
Because tangent lines under-estimate convex functions, the result is an inner
(conservative) approximation that touches the exact constraint at the
reference.  With ``k = 1`` this is the plain decomposition; by default ``k``
is chosen per sweep so the two factors have equal size at the reference,
which keeps the linearisation error small when ``(x-x_b)**2`` is many orders
of magnitude larger than ``f1``.

The term ``f1(z)*(y-y_b)**2`` is convex in z for fixed y and is kept exactly.

Solver coordinates differ from the natural layout: altitudes enter as running
sums ``X_k = z_1 + ... + z_k`` so that ``z_k`` and the adjacency-constrained
``x_k = tan(theta_2)*X_{k-1} - tan(theta_1)*X_k`` both depend on two
neighbouring unknowns only.  All quantities are scaled to O(1).
"""

from __future__ import annotations

from dataclasses import dataclass
import enum
from typing import Optional

import numpy as np

from . import geometry as geo
from .geometry import SweepPlan
from .linkbudget import LN2, CommParams
from .problem import DecisionVector, ScenarioParams, make_decision_vector
from .solver import RowBlock


class InfeasibleReference(ValueError):
    pass


class Scheme(str, enum.Enum):
    """Which variables are shared across the mission."""

    PROPOSED = "proposed"
    FIXED_ALTITUDE = "fixed_altitude"
    FIXED_COMM_POWER = "fixed_comm_power"
    FIXED_RADAR_POWER = "fixed_radar_power"

    @classmethod
    def from_benchmark(cls, number: int) -> "Scheme":
        table = {0: cls.PROPOSED, 1: cls.FIXED_ALTITUDE, 2: cls.FIXED_COMM_POWER,
                 3: cls.FIXED_RADAR_POWER}
        if number not in table:
            raise ValueError(f"benchmark scheme must be 0..3, got {number!r}")
        return table[number]


@dataclass(frozen=True)
class Iterate:
    z_ref: np.ndarray
    x_ref: np.ndarray

    @classmethod
    def from_z(cls, s: ScenarioParams, z) -> "Iterate":
        z = np.asarray(z, dtype=float)
        return cls(z, geo.x_from_z(s.geom, z))


class DCTerms:
    """The four convex pieces of the backhaul constraint and their squares.

    ``f1 = f3 = A*2**(alpha z) - 1``, ``f2 = (x - x_b)**2``, ``f4 = (z - z_b)**2``
    and ``F_i = f_i**2``.  Attributes ``*_ref`` hold values at the reference.
    """

    def __init__(self, comm: CommParams, z_ref, x_ref):
        self.comm = comm
        self.xb, self.yb, self.zb = comm.bs_position
        self.z_ref = np.asarray(z_ref, dtype=float)
        self.x_ref = np.asarray(x_ref, dtype=float)
        self.rate = comm.alpha * LN2

    def f1(self, z):
        return self.comm.link_gap(z)

    def df1(self, z):
        return (self.comm.link_gap(z) + 1.0) * self.rate

    def d2f1(self, z):
        return (self.comm.link_gap(z) + 1.0) * self.rate ** 2

    f3, df3, d2f3 = f1, df1, d2f1

    def f2(self, x):
        return (np.asarray(x, dtype=float) - self.xb) ** 2

    def f4(self, z):
        return (np.asarray(z, dtype=float) - self.zb) ** 2

    def F1(self, z):
        return self.f1(z) ** 2

    F3 = F1

    def F2(self, x):
        return self.f2(x) ** 2

    def F4(self, z):
        return self.f4(z) ** 2

    def dF1(self, z):
        # 2*(A*2**(alpha z) - 1) * A*alpha*ln2*2**(alpha z)
        return 2.0 * self.f1(z) * self.df1(z)

    dF3 = dF1

    def dF2(self, x):
        return 4.0 * (np.asarray(x, dtype=float) - self.xb) ** 3

    def dF4(self, z):
        return 4.0 * (np.asarray(z, dtype=float) - self.zb) ** 3

    def lower_bounds(self, z, x):
        """Tangent-line under-estimators of F1..F4 at the reference."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        zr, xr = self.z_ref, self.x_ref
        l1 = self.F1(zr) + self.dF1(zr) * (z - zr)
        l2 = self.F2(xr) + self.dF2(xr) * (x - xr)
        l4 = self.F4(zr) + self.dF4(zr) * (z - zr)
        return l1, l2, l1, l4


def dc_terms(comm: CommParams, it: Iterate, k: int) -> DCTerms:
    return DCTerms(comm, it.z_ref[k], it.x_ref[k])


def reformulate_c7(beta: float, z, p_sar, psi):
    """Return ``(z**2 - psi, psi**2/z - beta*p_sar)``; both must be <= 0."""
    z = np.asarray(z, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return z ** 2 - psi, psi ** 2 / z - beta * np.asarray(p_sar, dtype=float)


def balance_weights(terms: DCTerms, floor: float = 1.0):
    """Per-reference weights equalising the two factors of each product."""
    f1 = terms.f1(terms.z_ref)
    k1 = np.sqrt(np.maximum(terms.f2(terms.x_ref), floor) / f1)
    k2 = np.sqrt(np.maximum(terms.f4(terms.z_ref), floor) / f1)
    return k1, k2


def linearized_c8(comm: CommParams, it: Iterate, k: int, y, z, x, p_com, t, u,
                  weights=(1.0, 1.0)):
    """Surrogate backhaul constraints for sweep ``k`` at azimuth ``y``.

    Returns ``(c8, c8a, c8b)`` as left side minus right side; the point is
    admissible when all three are <= 0.
    """
    terms = dc_terms(comm, it, k)
    return _c8_family(terms, weights[0], weights[1], comm.gamma, y, z, x, p_com, t, u)


def _c8_family(terms: DCTerms, k1, k2, gamma, y, z, x, p_com, t, u):
    l1, l2, l3, l4 = terms.lower_bounds(z, x)
    f1 = terms.f1(z)
    c8 = (0.5 * (np.square(t) + np.square(u) - k1 ** 2 * l1 - l2 / k1 ** 2
                 - k2 ** 2 * l3 - l4 / k2 ** 2)
          + f1 * (np.asarray(y, dtype=float) - terms.yb) ** 2 - np.asarray(p_com) * gamma)
    c8a = k1 * f1 + terms.f2(x) / k1 - t
    c8b = k2 * f1 + terms.f4(z) / k2 - u
    return c8, c8a, c8b


def exact_c8_lhs(comm: CommParams, z, x, y):
    xb, yb, zb = comm.bs_position
    d2 = (np.asarray(x) - xb) ** 2 + (np.asarray(y) - yb) ** 2 + (np.asarray(z) - zb) ** 2
    return comm.link_gap(z) * d2


class ConvexSubproblem:
    """Convex restriction at a reference, in the form expected by :mod:`sarcover.solver`.

    Natural variables: per sweep ``z`` and ``p_sar``, per slot ``p_com``, and
    the epigraph slacks ``psi, t, u``.  ``t`` and ``u`` bound sweep-level
    quantities and are shared by all slots of a sweep.  ``x`` and the battery
    levels are eliminated through the adjacency and energy recursions.

    With ``slacks=False`` (default) the slacks are substituted at their lower
    limits before solving: ``psi = z**2`` turns c7a/c7b into ``z**3 <= beta*p``
    and ``t, u`` at equality turn c8 into a convex function of ``(z, x, p_com)``
    alone.  The projected feasible set is the same, but the barrier no longer
    has to creep along thin curved epigraph boundaries.  ``slacks=True`` keeps
    them as explicit unknowns.
    """

    def __init__(self, s: ScenarioParams, plan: SweepPlan, it: Iterate,
                 scheme: Scheme = Scheme.PROPOSED, balance: bool = True,
                 slacks: bool = False):
        self.s, self.plan, self.it, self.scheme = s, plan, it, Scheme(scheme)
        n, m = plan.n_sweeps, plan.slots_per_sweep
        if np.shape(it.z_ref) != (n,):
            raise ValueError(f"reference has {np.shape(it.z_ref)} altitudes, plan needs {n}")
        tol = 1e-9 * s.z_max
        if np.any(it.z_ref < s.z_min - tol) or np.any(it.z_ref > s.z_max + tol):
            raise InfeasibleReference(
                f"reference altitudes {it.z_ref.min():.6g}..{it.z_ref.max():.6g} "
                f"outside [{s.z_min}, {s.z_max}]")
        tie_alt = self.scheme is Scheme.FIXED_ALTITUDE
        tie_pc = self.scheme is Scheme.FIXED_COMM_POWER
        tie_p = self.scheme is Scheme.FIXED_RADAR_POWER
        if tie_alt and np.ptp(it.z_ref) > tol:
            raise InfeasibleReference("fixed-altitude scheme needs a constant reference")
        self.slacks = bool(slacks)

        self.terms = DCTerms(s.comm, it.z_ref, it.x_ref)
        kk = plan.sweep_of_slot()
        self.sweep = kk
        self.slot_terms = DCTerms(s.comm, it.z_ref[kk], it.x_ref[kk])
        if balance:
            self.k1, self.k2 = balance_weights(self.terms)
        else:
            self.k1, self.k2 = np.ones(n), np.ones(n)
        self.balance = balance

        # global index layout, interleaved by sweep to keep the Newton matrix banded
        nxt = 0
        i_alt = np.zeros(n, int)
        i_p = np.zeros(n, int)
        i_sl = np.zeros((3, n), int)
        for k in range(n):
            if not tie_alt:
                i_alt[k] = nxt
                nxt += 1
            if not tie_p:
                i_p[k] = nxt
                nxt += 1
            if self.slacks:
                i_sl[:, k] = nxt + np.arange(3)
                nxt += 3
        if tie_alt:
            i_alt[:] = nxt
            nxt += 1
        if tie_p:
            i_p[:] = nxt
            nxt += 1
        if tie_pc:
            i_pc = np.full(plan.n_slots, nxt)
            nxt += 1
            self.n_local = 0
        else:
            i_pc = nxt + np.arange(plan.n_slots)
            self.n_local = plan.n_slots
        self.n_global = nxt
        self.i_alt, self.i_p, self.i_pc = i_alt, i_p, i_pc
        self.i_psi, self.i_t, self.i_u = (i_sl if self.slacks else (None, None, None))
        self.tie_alt, self.tie_p, self.tie_pc = tie_alt, tie_p, tie_pc

        # (z_k, x_k) = Q_k @ (v[ia_k], v[ib_k])
        S = s.z_max
        t1, t2 = s.geom.tan_1, s.geom.tan_2
        Q = np.zeros((n, 2, 2))
        if tie_alt:
            ia = ib = i_alt.copy()
            Q[:, 0, 1] = S
            Q[:, 1, 1] = S * ((t2 - t1) * np.arange(n) - t1)
        else:
            ib = i_alt.copy()
            ia = np.concatenate(([i_alt[0]], i_alt[:-1]))
            Q[:, 0, 0], Q[:, 0, 1] = -S, S
            Q[:, 1, 0], Q[:, 1, 1] = S * t2, -S * t1
            Q[0, :, 0] = 0.0
        self.ia, self.ib, self.Q = ia, ib, Q

        self.scale_p = s.p_sar_max
        self.scale_psi = s.z_max ** 2
        self.scale_pc = s.p_com_max
        self.t_ref, self.u_ref = self._tight_tu(it.z_ref, it.x_ref)
        self.y = geo.y_positions(plan)
        self.dy2 = (self.y - self.terms.yb) ** 2

        # objective: minimise -coverage / (N * L * swath_factor * z_max)
        sweep_len = plan.slots_per_sweep * plan.delta_y
        self.coverage_per_z = sweep_len * s.geom.swath_factor
        self.coverage_scale = n * self.coverage_per_z * s.z_max
        cost = np.zeros(self.n_vars)
        np.add.at(cost, ia, -self.coverage_per_z * Q[:, 0, 0] / self.coverage_scale)
        np.add.at(cost, ib, -self.coverage_per_z * Q[:, 0, 1] / self.coverage_scale)
        self.cost = cost

        # battery: dt * sum(P_com + P_sar + P_prop) <= q_start; the level is
        # non-increasing, so only the final one needs a row
        A = np.zeros(self.n_vars)
        dt = plan.delta_t
        np.add.at(A, i_pc, dt * self.scale_pc / s.q_start)
        np.add.at(A, i_p, m * dt * self.scale_p / s.q_start)
        self._energy = (A[None, :], np.array([(plan.n_slots * dt * s.p_prop - s.q_start)
                                              / s.q_start]))
        self._box_sweeps = np.array([0]) if tie_alt else np.arange(n)
        self._p_sweeps = np.array([0]) if tie_p else np.arange(n)
        self._pc_slots = np.array([0]) if tie_pc else np.arange(plan.n_slots)

    # ------------------------------------------------------------------ layout
    @property
    def n_global(self) -> int:
        return self._n_global

    @n_global.setter
    def n_global(self, value):
        self._n_global = int(value)

    @property
    def n_vars(self) -> int:
        return self.n_global + self.n_local

    def _tight_tu(self, z, x):
        T = self.terms
        f1 = T.f1(z)
        return self.k1 * f1 + T.f2(x) / self.k1, self.k2 * f1 + T.f4(z) / self.k2

    def altitudes(self, v):
        a, b = v[self.ia], v[self.ib]
        z = self.Q[:, 0, 0] * a + self.Q[:, 0, 1] * b
        x = self.Q[:, 1, 0] * a + self.Q[:, 1, 1] * b
        return z, x

    def unpack(self, v) -> dict:
        """Natural-unit values; in reduced mode the slacks are reported at their limits."""
        v = np.asarray(v, dtype=float)
        z, x = self.altitudes(v)
        if self.slacks:
            psi = v[self.i_psi] * self.scale_psi
            t = v[self.i_t] * self.t_ref
            u = v[self.i_u] * self.u_ref
        else:
            psi = z ** 2
            t, u = self._tight_tu(z, x)
        return dict(z=z, x=x, p_sar=v[self.i_p] * self.scale_p, psi=psi, t=t, u=u,
                    p_com=v[self.i_pc] * self.scale_pc)

    def pack(self, z, p_sar, p_com, psi=None, t=None, u=None) -> np.ndarray:
        """Solver vector from natural values; missing slacks are set at their limits."""
        v = np.zeros(self.n_vars)
        z = np.asarray(z, dtype=float)
        if self.tie_alt:
            v[self.i_alt[0]] = z[0] / self.s.z_max
        else:
            v[self.i_alt] = np.cumsum(z) / self.s.z_max
        v[self.i_p] = np.asarray(p_sar, dtype=float) / self.scale_p
        v[self.i_pc] = np.asarray(p_com, dtype=float) / self.scale_pc
        if self.slacks:
            x = geo.x_from_z(self.s.geom, z)
            tt, uu = self._tight_tu(z, x)
            v[self.i_psi] = (z ** 2 if psi is None else np.asarray(psi, float)) / self.scale_psi
            v[self.i_t] = (tt if t is None else np.asarray(t, float)) / self.t_ref
            v[self.i_u] = (uu if u is None else np.asarray(u, float)) / self.u_ref
        return v

    def coverage(self, v) -> float:
        z, _ = self.altitudes(np.asarray(v, dtype=float))
        return float(self.coverage_per_z * np.sum(z))

    def decision_vector(self, v) -> DecisionVector:
        d = self.unpack(v)
        return make_decision_vector(self.s, self.plan, d["z"], d["p_sar"], d["p_com"])

    # ------------------------------------------------------------- constraints
    def natural_values(self, v) -> dict:
        """Every constraint family in natural units (satisfied when <= 0)."""
        d = self.unpack(v)
        s = self.s
        z, x = d["z"], d["x"]
        c7a, c7b = reformulate_c7(s.sar.beta, z, d["p_sar"], d["psi"])
        k = self.sweep
        c8, _, _ = _c8_family(self.slot_terms, self.k1[k], self.k2[k], s.comm.gamma, self.y,
                              z[k], x[k], d["p_com"], d["t"][k], d["u"][k])
        _, c8a, c8b = _c8_family(self.terms, self.k1, self.k2, s.comm.gamma, 0.0,
                                 z, x, 0.0, d["t"], d["u"])
        return dict(z_low=s.z_min - z, z_high=z - s.z_max, p_sar_low=-d["p_sar"],
                    p_sar_high=d["p_sar"] - s.p_sar_max, c7a=c7a, c7b=c7b,
                    c8=c8, c8a=c8a, c8b=c8b,
                    p_com_low=-d["p_com"], p_com_high=d["p_com"] - s.p_com_max,
                    energy=np.array([self.plan.delta_t * np.sum(d["p_com"] + d["p_sar"][k]
                                                                 + s.p_prop) - s.q_start]))

    def dense_rows(self):
        return self._energy

    def rows(self, v, derivatives=True) -> list:
        v = np.asarray(v, dtype=float)
        z, x = self.altitudes(v)
        ab = np.stack([self.ia, self.ib], axis=1)
        if np.any(z <= 0):
            # outside the domain of the radar rows; report as infeasible
            return [RowBlock(np.full(len(z), np.inf), ab, shiftable=False, name="domain")]
        out = self._box_rows(v, z, derivatives)
        if self.slacks:
            out += self._slack_rows(v, z, x, derivatives)
        else:
            out += self._reduced_rows(v, z, x, derivatives)
        return out

    def _box_rows(self, v, z, derivatives):
        s, qz = self.s, self.Q[:, 0, :]
        ab = np.stack([self.ia, self.ib], axis=1)
        zm = s.z_max
        bs = self._box_sweeps
        out = [RowBlock((s.z_min - z[bs]) / zm, ab[bs],
                        -qz[bs] / zm if derivatives else None, None, False, "z_low"),
               RowBlock((z[bs] - zm) / zm, ab[bs],
                        qz[bs] / zm if derivatives else None, None, False, "z_high")]
        for name, index in (("p_sar", self.i_p[self._p_sweeps]),
                            ("p_com", self.i_pc[self._pc_slots])):
            val = v[index]
            one = np.ones((len(index), 1))
            out.append(RowBlock(-val, index[:, None], -one if derivatives else None, None,
                                False, name + "_low"))
            out.append(RowBlock(val - 1.0, index[:, None], one if derivatives else None, None,
                                False, name + "_high"))
        return out

    @staticmethod
    def _outer(q):
        return q[:, :, None] * q[:, None, :]

    def _reduced_rows(self, v, z, x, derivatives):
        s, T = self.s, self.terms
        qz, qx = self.Q[:, 0, :], self.Q[:, 1, :]
        ab = np.stack([self.ia, self.ib], axis=1)
        n = self.plan.n_sweeps
        beta = s.sar.beta
        p = v[self.i_p] * self.scale_p
        out = []

        # radar SNR: (z^3 - beta p) / (beta p_max)
        sc = beta * s.p_sar_max
        grad = hess = None
        if derivatives:
            grad = np.column_stack([3 * z[:, None] ** 2 * qz,
                                    -beta * self.scale_p * np.ones(n)]) / sc
            hess = np.zeros((n, 3, 3))
            hess[:, :2, :2] = (6 * z / sc)[:, None, None] * self._outer(qz)
        out.append(RowBlock((z ** 3 - beta * p) / sc, np.column_stack([ab, self.i_p]),
                            grad, hess, True, "c7"))

        # backhaul surrogate with t, u at equality, per slot
        k1, k2 = self.k1, self.k2
        f1 = T.f1(z)
        tt = k1 * f1 + T.f2(x) / k1
        uu = k2 * f1 + T.f4(z) / k2
        l1, l2, _, l4 = T.lower_bounds(z, x)
        base = 0.5 * (tt ** 2 + uu ** 2 - (k1 ** 2 + k2 ** 2) * l1 - l2 / k1 ** 2
                      - l4 / k2 ** 2)
        kk = self.sweep
        gamma = s.comm.gamma
        sc = gamma * s.p_com_max
        pc = v[self.i_pc] * self.scale_pc
        g = (base[kk] + f1[kk] * self.dy2 - gamma * pc) / sc
        idx = np.column_stack([ab[kk], self.i_pc])
        grad = hess = None
        if derivatives:
            df1, d2f1 = T.df1(z), T.d2f1(z)
            zr, xr = T.z_ref, T.x_ref
            tz, tx = k1 * df1, 2 * (x - T.xb) / k1
            uz = k2 * df1 + 2 * (z - T.zb) / k2
            # sweep-level parts in (z, x)
            bz = tt * tz + uu * uz - 0.5 * ((k1 ** 2 + k2 ** 2) * T.dF1(zr)
                                            + T.dF4(zr) / k2 ** 2)
            bx = tt * tx - 0.5 * T.dF2(xr) / k1 ** 2
            bzz = tz ** 2 + tt * k1 * d2f1 + uz ** 2 + uu * (k2 * d2f1 + 2 / k2)
            bzx = tz * tx
            bxx = tx ** 2 + tt * 2 / k1
            gz = bz[kk] + df1[kk] * self.dy2
            ns = len(kk)
            qzk, qxk = qz[kk], qx[kk]
            grad = np.empty((ns, 3))
            grad[:, :2] = gz[:, None] * qzk + bx[kk][:, None] * qxk
            grad[:, 2] = -gamma * self.scale_pc
            grad /= sc
            hzz = bzz[kk] + d2f1[kk] * self.dy2
            cross = qzk[:, :, None] * qxk[:, None, :]
            hess = np.zeros((ns, 3, 3))
            hess[:, :2, :2] = (hzz[:, None, None] * self._outer(qzk)
                               + bzx[kk][:, None, None] * (cross + cross.transpose(0, 2, 1))
                               + bxx[kk][:, None, None] * self._outer(qxk)) / sc
        out.append(RowBlock(g, idx, grad, hess, True, "c8"))
        return out

    def _slack_rows(self, v, z, x, derivatives):
        s, T = self.s, self.terms
        qz, qx = self.Q[:, 0, :], self.Q[:, 1, :]
        ab = np.stack([self.ia, self.ib], axis=1)
        n = self.plan.n_sweeps
        zm = s.z_max
        beta = s.sar.beta
        p = v[self.i_p] * self.scale_p
        psi = v[self.i_psi] * self.scale_psi
        t = v[self.i_t] * self.t_ref
        u = v[self.i_u] * self.u_ref
        out = []
        grad = hess = None

        # c7a: (z^2 - psi) / z_max^2
        if derivatives:
            grad = np.column_stack([2 * z[:, None] * qz,
                                    -self.scale_psi * np.ones(n)]) / zm ** 2
            hess = np.zeros((n, 3, 3))
            hess[:, :2, :2] = 2 * self._outer(qz) / zm ** 2
        out.append(RowBlock((z ** 2 - psi) / zm ** 2, np.column_stack([ab, self.i_psi]),
                            grad, hess, True, "c7a"))

        # c7b: (psi^2 / z - beta p) / (beta p_max)
        sc = beta * s.p_sar_max
        if derivatives:
            grad = np.column_stack([(-psi ** 2 / z ** 2)[:, None] * qz,
                                    2 * psi / z * self.scale_psi,
                                    -beta * self.scale_p * np.ones(n)]) / sc
            hess = np.zeros((n, 4, 4))
            hess[:, :2, :2] = (2 * psi ** 2 / z ** 3)[:, None, None] * self._outer(qz)
            cross = (-2 * psi / z ** 2)[:, None] * qz * self.scale_psi
            hess[:, :2, 2] = cross
            hess[:, 2, :2] = cross
            hess[:, 2, 2] = 2 / z * self.scale_psi ** 2
            hess /= sc
        out.append(RowBlock((psi ** 2 / z - beta * p) / sc,
                            np.column_stack([ab, self.i_psi, self.i_p]), grad, hess, True,
                            "c7b"))

        k1, k2 = self.k1, self.k2
        f1 = T.f1(z)
        df1, d2f1 = T.df1(z), T.d2f1(z)
        # c8a: (k1 f1 + f2/k1 - t) / t_ref
        if derivatives:
            gz, gx = k1 * df1, 2 * (x - T.xb) / k1
            grad = np.column_stack([gz[:, None] * qz + gx[:, None] * qx,
                                    -self.t_ref]) / self.t_ref[:, None]
            hess = np.zeros((n, 3, 3))
            hess[:, :2, :2] = ((k1 * d2f1)[:, None, None] * self._outer(qz)
                               + (2 / k1)[:, None, None] * self._outer(qx))
            hess /= self.t_ref[:, None, None]
        out.append(RowBlock((k1 * f1 + T.f2(x) / k1 - t) / self.t_ref,
                            np.column_stack([ab, self.i_t]), grad, hess, True, "c8a"))

        # c8b: (k2 f1 + f4/k2 - u) / u_ref
        if derivatives:
            gz = k2 * df1 + 2 * (z - T.zb) / k2
            grad = np.column_stack([gz[:, None] * qz, -self.u_ref]) / self.u_ref[:, None]
            hess = np.zeros((n, 3, 3))
            hess[:, :2, :2] = (k2 * d2f1 + 2 / k2)[:, None, None] * self._outer(qz)
            hess /= self.u_ref[:, None, None]
        out.append(RowBlock((k2 * f1 + T.f4(z) / k2 - u) / self.u_ref,
                            np.column_stack([ab, self.i_u]), grad, hess, True, "c8b"))

        # c8 per slot, normalised by gamma * p_com_max
        kk = self.sweep
        gamma = s.comm.gamma
        sc = gamma * s.p_com_max
        pc = v[self.i_pc] * self.scale_pc
        l1, l2, _, l4 = T.lower_bounds(z, x)
        base = 0.5 * (t ** 2 + u ** 2 - (k1 ** 2 + k2 ** 2) * l1 - l2 / k1 ** 2
                      - l4 / k2 ** 2)
        g = (base[kk] + f1[kk] * self.dy2 - gamma * pc) / sc
        idx = np.column_stack([ab[kk], self.i_t[kk], self.i_u[kk], self.i_pc])
        grad = hess = None
        if derivatives:
            zr, xr = T.z_ref, T.x_ref
            gz_s = -0.5 * ((k1 ** 2 + k2 ** 2) * T.dF1(zr) + T.dF4(zr) / k2 ** 2)
            gx_s = -0.5 * T.dF2(xr) / k1 ** 2
            gz = gz_s[kk] + df1[kk] * self.dy2
            ns = len(kk)
            grad = np.empty((ns, 5))
            grad[:, :2] = gz[:, None] * qz[kk] + gx_s[kk][:, None] * qx[kk]
            grad[:, 2] = (t * self.t_ref)[kk]
            grad[:, 3] = (u * self.u_ref)[kk]
            grad[:, 4] = -gamma * self.scale_pc
            grad /= sc
            hess = np.zeros((ns, 5, 5))
            hess[:, :2, :2] = (d2f1[kk] * self.dy2)[:, None, None] * self._outer(qz[kk])
            hess[:, 2, 2] = (self.t_ref ** 2)[kk]
            hess[:, 3, 3] = (self.u_ref ** 2)[kk]
            hess /= sc
        out.append(RowBlock(g, idx, grad, hess, True, "c8"))
        return out

    # ----------------------------------------------------------- start points
    def strictly_feasible(self, v) -> bool:
        if not all(np.all(b.g < 0) for b in self.rows(v, False)):
            return False
        A, b = self._energy
        return bool(np.all(A @ v + b < 0))

    def strict_point(self, z, p_sar=None, p_com=None, theta: float = 1e-3) -> Optional[np.ndarray]:
        """Try to build a strictly feasible point with trajectory ``z``.

        Missing powers are set a fraction ``theta`` of the way from their
        minimum to their cap; supplied powers are kept and the slacks are
        squeezed into whatever margin they leave.  Returns ``None`` when no
        strictly feasible completion is found this way.
        """
        s = self.s
        z = np.asarray(z, dtype=float)
        if self.tie_alt:
            z = np.full_like(z, z[0])
        if np.any(z <= s.z_min) or np.any(z >= s.z_max):
            return None
        x = geo.x_from_z(s.geom, z)
        beta = s.sar.beta
        p_min = z ** 3 / beta
        if p_sar is None:
            p_sar = p_min + theta * (s.p_sar_max - p_min)
            if self.tie_p:
                p_sar = np.full_like(p_sar, p_sar.max())
        p_sar = np.asarray(p_sar, dtype=float)
        if np.any(p_sar <= p_min) or np.any(p_sar >= s.p_sar_max):
            return None
        kk = self.sweep
        gamma = s.comm.gamma
        t0, u0 = self._tight_tu(z, x)
        exact = _c8_family(self.slot_terms, self.k1[kk], self.k2[kk], gamma, self.y,
                           z[kk], x[kk], 0.0, t0[kk], u0[kk])[0]
        if p_com is None:
            need = np.maximum(exact, 0.0) / gamma
            p_com = need + theta * (s.p_com_max - need)
            if self.tie_pc:
                p_com = np.full_like(p_com, p_com.max())
        p_com = np.asarray(p_com, dtype=float)
        if not self.slacks:
            v = self.pack(z, p_sar, p_com)
            return v if self.strictly_feasible(v) else None
        margin = gamma * p_com - exact
        if np.any(margin <= 0):
            return None
        per_sweep = np.minimum.reduceat(margin, np.arange(0, len(kk), self.plan.slots_per_sweep))
        # keeps 0.5*((t0+e)^2 - t0^2) + 0.5*((u0+e')^2 - u0^2) below half the margin
        et = np.minimum(per_sweep / (4 * t0), np.sqrt(per_sweep / 4))
        eu = np.minimum(per_sweep / (4 * u0), np.sqrt(per_sweep / 4))
        psi = np.sqrt(z ** 2 * np.sqrt(beta * p_sar * z))
        v = self.pack(z, p_sar, p_com, psi, t0 + et, u0 + eu)
        return v if self.strictly_feasible(v) else None

    def interior_point(self, shrinks=(0.02, 0.05, 0.1, 0.2, 0.4)) -> Optional[np.ndarray]:
        """A strictly feasible point with comfortable slack in every row, or ``None``.

        The reference trajectory is lowered by a few percent, which shortens
        the backhaul distances, and both powers are set part of the way from
        their minimum to their cap as far as the battery allows.
        """
        s, plan = self.s, self.plan
        pad = 0.01 * (s.z_max - s.z_min)
        for shrink in shrinks:
            z = np.clip(self.it.z_ref * (1 - shrink), s.z_min + pad, s.z_max - pad)
            if self.tie_alt:
                z = np.full_like(z, z.min())
            x = geo.x_from_z(s.geom, z)
            p_min = z ** 3 / s.sar.beta
            kk = self.sweep
            t0, u0 = self._tight_tu(z, x)
            need = np.maximum(_c8_family(self.slot_terms, self.k1[kk], self.k2[kk],
                                         s.comm.gamma, self.y, z[kk], x[kk], 0.0,
                                         t0[kk], u0[kk])[0], 0.0) / s.comm.gamma
            if np.any(p_min >= s.p_sar_max) or np.any(need >= s.p_com_max):
                continue
            dt, m = plan.delta_t, plan.slots_per_sweep
            fixed = dt * plan.n_slots * s.p_prop
            e_min = dt * (m * np.sum(p_min) + np.sum(need))
            e_max = dt * (m * plan.n_sweeps * s.p_sar_max + plan.n_slots * s.p_com_max)
            room = s.q_start - fixed - e_min
            if room <= 0:
                continue
            theta = min(0.5, 0.5 * room / (e_max - e_min))
            v = self.strict_point(z, theta=theta)
            if v is not None:
                return v
        return None

    def start_point(self):
        """Strictly feasible point if one is easy to find.

        Otherwise a point meeting the simple bounds strictly, for phase one.
        """
        v = self.interior_point()
        if v is not None:
            return v
        s = self.s
        pad = 1e-6 * (s.z_max - s.z_min)
        z = np.clip(self.it.z_ref, s.z_min + pad, s.z_max - pad)
        if self.tie_alt:
            z = np.full_like(z, z.mean())
        v = self.strict_point(z)
        if v is not None:
            return v
        return self.pack(z, np.full(self.plan.n_sweeps, 0.5 * s.p_sar_max),
                         np.full(self.plan.n_slots, 0.5 * s.p_com_max))

    def warm_start(self, v, weight: float = 0.1) -> Optional[np.ndarray]:
        """Blend a strictly feasible ``v`` with an interior point.

        By convexity the blend keeps at least ``weight`` times the interior
        point's slack in every row, which spares the barrier from starting on
        a curved boundary.
        """
        v = np.asarray(v, dtype=float)
        inner = self.interior_point()
        if inner is None:
            return v if self.strictly_feasible(v) else None
        w = (1 - weight) * v + weight * inner
        if self.strictly_feasible(w):
            return w
        return inner

    def dump(self, v=None) -> str:
        """Human-readable listing of the layout, constraint families and reference."""
        lines = [f"ConvexSubproblem scheme={self.scheme.value} N={self.plan.n_sweeps} "
                 f"M={self.plan.slots_per_sweep} balance={self.balance} "
                 f"slacks={'explicit' if self.slacks else 'eliminated'}",
                 f"  variables: {self.n_vars} ({self.n_global} global, {self.n_local} local)"]
        groups = [("altitude", self.i_alt), ("p_sar", self.i_p), ("p_com", self.i_pc)]
        if self.slacks:
            groups += [("psi", self.i_psi), ("t", self.i_t), ("u", self.i_u)]
        for name, arr in groups:
            lines.append(f"    {name:8s} {len(np.unique(arr))} entries")
        probe = self.start_point() if v is None else np.asarray(v, dtype=float)
        for b in self.rows(probe, False):
            lines.append(f"  {b.name:10s} {len(b.g):6d} rows  width {b.idx.shape[1]}  "
                         f"{'shiftable' if b.shiftable else 'bound':9s}  max g={np.max(b.g):.3e}")
        lines.append("  energy        1 row   dense")
        lines.append("  reference z: " + np.array2string(self.it.z_ref, precision=4))
        lines.append("  reference x: " + np.array2string(self.it.x_ref, precision=4))
        return "\n".join(lines)


def build_subproblem(s: ScenarioParams, plan: SweepPlan, it: Iterate,
                     scheme: Scheme = Scheme.PROPOSED, balance: bool = True,
                     slacks: bool = False) -> ConvexSubproblem:
    return ConvexSubproblem(s, plan, it, scheme, balance, slacks)
