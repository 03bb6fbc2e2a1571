"""Sweep discretization, footprint geometry and the coverage objective.

Slots are numbered from 1 in every public return value (``SlotIndexSets``);
arrays indexed by slot are ordinary 0-based numpy arrays of length ``N*M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


class NonIntegralSlotCount(ValueError):
    """Raised when the AoI length is not an integer multiple of the azimuth step."""


@dataclass(frozen=True)
class RadarGeometry:
    """Look angles of a side-looking stripmap antenna (radians)."""

    theta_d: float
    theta_3db: float
    theta_1: float = field(init=False)
    theta_2: float = field(init=False)
    omega: float = field(init=False)

    def __post_init__(self):
        t1 = self.theta_d - self.theta_3db / 2.0
        t2 = self.theta_d + self.theta_3db / 2.0
        if not (0.0 < t1 < t2 < math.pi / 2.0):
            raise ValueError(
                f"look angles must satisfy 0 < theta_1 < theta_2 < pi/2, got {t1}, {t2}"
            )
        object.__setattr__(self, "theta_1", t1)
        object.__setattr__(self, "theta_2", t2)
        c1, c2 = math.cos(t1), math.cos(t2)
        object.__setattr__(self, "omega", (c1 - c2) / (c1 * c2))

    @classmethod
    def from_degrees(cls, theta_d: float, theta_3db: float) -> "RadarGeometry":
        return cls(math.radians(theta_d), math.radians(theta_3db))

    @property
    def tan_1(self) -> float:
        return math.tan(self.theta_1)

    @property
    def tan_2(self) -> float:
        return math.tan(self.theta_2)

    @property
    def swath_factor(self) -> float:
        """Swath width per metre of altitude, ``tan(theta_2) - tan(theta_1)``."""
        return self.tan_2 - self.tan_1


@dataclass(frozen=True)
class SweepPlan:
    n_sweeps: int
    slots_per_sweep: int
    delta_y: float
    delta_t: float
    speed: float
    aoi_length: float

    @property
    def n_slots(self) -> int:
        return self.n_sweeps * self.slots_per_sweep

    def with_sweeps(self, n_sweeps: int) -> "SweepPlan":
        if n_sweeps < 1:
            raise ValueError("n_sweeps must be >= 1")
        return SweepPlan(n_sweeps, self.slots_per_sweep, self.delta_y,
                         self.delta_t, self.speed, self.aoi_length)

    def sweep_of_slot(self) -> np.ndarray:
        """0-based sweep index of every slot."""
        return np.repeat(np.arange(self.n_sweeps), self.slots_per_sweep)


@dataclass(frozen=True)
class SlotIndexSets:
    turn_slots: tuple[int, ...]
    cruise_slots: tuple[int, ...]
    direction: np.ndarray


def build_sweep_plan(aoi_length: float, delta_y: float, speed: float,
                     n_sweeps: int) -> SweepPlan:
    if aoi_length <= 0 or delta_y <= 0 or speed <= 0:
        raise ValueError("aoi_length, delta_y and speed must be positive")
    if n_sweeps < 1:
        raise ValueError("n_sweeps must be >= 1")
    ratio = aoi_length / delta_y
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        raise NonIntegralSlotCount(
            f"L/delta_y = {aoi_length}/{delta_y} = {ratio!r} is not an integer"
        )
    return SweepPlan(int(n_sweeps), int(m), float(delta_y), delta_y / speed,
                     float(speed), float(aoi_length))


def slot_index_sets(plan: SweepPlan) -> SlotIndexSets:
    n, m = plan.n_sweeps, plan.slots_per_sweep
    turns = tuple(k * m + 1 for k in range(n))
    turn_set = set(turns)
    cruise = tuple(i for i in range(1, n * m + 1) if i not in turn_set)
    direction = np.repeat(np.where(np.arange(n) % 2 == 0, 1.0, -1.0), m)
    return SlotIndexSets(turns, cruise, direction)


def y_positions(plan: SweepPlan) -> np.ndarray:
    """Azimuth coordinate of the UAV in every slot.

    Follows ``y(1) = 0, y(n+1) = y(n) + c(n) dy``.  The cumulative sum is
    done in integer step counts so the sweep ends land exactly on 0 and L.
    """
    c = slot_index_sets(plan).direction
    steps = np.concatenate(([0.0], np.cumsum(c[:-1])))
    return steps * plan.delta_y


def x_from_z(geom: RadarGeometry, z: np.ndarray) -> np.ndarray:
    """Per-sweep range positions that make consecutive footprints adjacent."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("altitudes must be positive")
    x = np.empty_like(z)
    x[0] = -geom.tan_1 * z[0]
    for k in range(1, len(z)):
        x[k] = x[k - 1] + z[k - 1] * geom.tan_2 - z[k] * geom.tan_1
    return x


def swath_width(geom: RadarGeometry, z):
    width = np.multiply(z, geom.tan_2 - geom.tan_1)
    return float(width) if np.ndim(width) == 0 else width


def expand_per_slot(plan: SweepPlan, per_sweep) -> np.ndarray:
    """Repeat a per-sweep quantity over the slots of each sweep."""
    per_sweep = np.asarray(per_sweep, dtype=float)
    if per_sweep.shape != (plan.n_sweeps,):
        raise ValueError(f"expected {plan.n_sweeps} per-sweep values, got {per_sweep.shape}")
    return np.repeat(per_sweep, plan.slots_per_sweep)


def coverage(geom: RadarGeometry, plan: SweepPlan, z_slots) -> float:
    z_slots = np.asarray(z_slots, dtype=float)
    if z_slots.shape != (plan.n_slots,):
        raise ValueError(f"expected {plan.n_slots} slot altitudes, got {z_slots.shape}")
    return float(plan.delta_y * geom.swath_factor * np.sum(z_slots))
