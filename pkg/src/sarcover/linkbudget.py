"""Radar and backhaul physical-layer formulas.

The backhaul requirement is kept in the closed form

    (A * 2**(alpha*z) - 1) * d**2 <= P_com * gamma

with the synchronisation/localisation overhead R_sl folded into ``A`` so that
the closed form is exactly equivalent to ``R(n) >= R_min(n) + R_sl``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from .geometry import RadarGeometry

SPEED_OF_LIGHT = 2.9979e8
BOLTZMANN = 1.380649e-23
LN2 = math.log(2.0)


def beta_from_primitives(*, gain_tx, gain_rx, wavelength, backscatter, pulse_duration,
                         prf, theta_d, noise_temp, noise_figure, bandwidth_radar,
                         losses, speed, snr_min, boltzmann=BOLTZMANN,
                         c=SPEED_OF_LIGHT) -> float:
    """Aggregate radar constant so that the SNR constraint reads ``P_sar*beta >= z**3``."""
    num = (gain_tx * gain_rx * wavelength ** 3 * backscatter * c * pulse_duration * prf
           * math.sin(theta_d) ** 2)
    den = ((4 * math.pi) ** 4 * boltzmann * noise_temp * noise_figure * bandwidth_radar
           * losses * speed * snr_min)
    return num / den


@dataclass(frozen=True)
class RadarPrimitives:
    """Individual link-budget constants from which beta can be recomputed."""

    gain_tx: float
    gain_rx: float
    wavelength: float
    backscatter: float
    noise_temp: float
    noise_figure: float
    losses: float
    boltzmann: float = BOLTZMANN


@dataclass(frozen=True)
class SarParams:
    bandwidth_radar: float
    pulse_duration: float
    prf: float
    snr_min: float
    beta: float
    primitives: Optional[RadarPrimitives] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def check_beta(self, geom: RadarGeometry, speed: float, rtol: float = 1e-6) -> float:
        """Recompute beta from the primitives and return the relative mismatch.

        Raises ``ValueError`` if it exceeds ``rtol``.
        """
        if self.primitives is None:
            raise ValueError("no radar primitives attached")
        pr = self.primitives
        ref = beta_from_primitives(
            gain_tx=pr.gain_tx, gain_rx=pr.gain_rx, wavelength=pr.wavelength,
            backscatter=pr.backscatter, pulse_duration=self.pulse_duration, prf=self.prf,
            theta_d=geom.theta_d, noise_temp=pr.noise_temp, noise_figure=pr.noise_figure,
            bandwidth_radar=self.bandwidth_radar, losses=pr.losses, speed=speed,
            snr_min=self.snr_min, boltzmann=pr.boltzmann)
        mismatch = abs(self.beta - ref) / ref
        if mismatch > rtol:
            raise ValueError(f"beta={self.beta} disagrees with primitives ({ref}) by {mismatch:.3g}")
        return mismatch


@dataclass(frozen=True)
class CommParams:
    """Backhaul link constants.

    ``A`` and ``alpha`` are derived from the radar primitives on construction.
    """

    bandwidth_comm: float
    gamma: float
    rate_overhead: float
    bs_position: tuple
    p_com_max: float
    bandwidth_radar: float
    pulse_duration: float
    prf: float
    omega: float
    A: float = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self):
        bs = tuple(float(v) for v in self.bs_position)
        if len(bs) != 3:
            raise ValueError("bs_position must have three coordinates")
        object.__setattr__(self, "bs_position", bs)
        if self.bandwidth_comm <= 0 or self.gamma <= 0 or self.p_com_max <= 0:
            raise ValueError("bandwidth, gamma and p_com_max must be positive")
        base_rate = self.bandwidth_radar * self.pulse_duration * self.prf + self.rate_overhead
        object.__setattr__(self, "A", 2.0 ** (base_rate / self.bandwidth_comm))
        object.__setattr__(self, "alpha", 2.0 * self.omega * self.bandwidth_radar * self.prf
                           / (SPEED_OF_LIGHT * self.bandwidth_comm))

    @classmethod
    def build(cls, sar: SarParams, geom: RadarGeometry, *, bandwidth_comm, gamma,
              rate_overhead, bs_position, p_com_max) -> "CommParams":
        return cls(bandwidth_comm=bandwidth_comm, gamma=gamma, rate_overhead=rate_overhead,
                   bs_position=tuple(bs_position), p_com_max=p_com_max,
                   bandwidth_radar=sar.bandwidth_radar, pulse_duration=sar.pulse_duration,
                   prf=sar.prf, omega=geom.omega)

    def link_gap(self, z):
        """``A * 2**(alpha*z) - 1``, the factor multiplying d**2 in the backhaul test.

        Evaluated with ``expm1`` since the exponent is of order 1e-4.
        """
        return np.expm1(LN2 * (math.log2(self.A) + self.alpha * np.asarray(z, dtype=float)))


def sar_data_rate(p: SarParams, geom: RadarGeometry, z):
    return p.bandwidth_radar * (2.0 * np.asarray(z, dtype=float) * geom.omega / SPEED_OF_LIGHT
                                + p.pulse_duration) * p.prf


def radar_snr_margin(p: SarParams, z, p_sar):
    """``p_sar * beta / z**3``; the SNR requirement holds iff this is >= 1."""
    z = np.asarray(z, dtype=float)
    return np.asarray(p_sar, dtype=float) * p.beta / z ** 3


def distance(uav, bs) -> np.ndarray:
    diff = np.asarray(uav, dtype=float) - np.asarray(bs, dtype=float)
    return np.sqrt(np.sum(diff ** 2, axis=-1))


def throughput(p: CommParams, p_com, d):
    d = np.asarray(d, dtype=float)
    return p.bandwidth_comm * np.log2(1.0 + np.asarray(p_com, dtype=float) * p.gamma / d ** 2)


def min_comm_power(p: CommParams, z, d2):
    """Smallest backhaul power meeting the rate requirement at altitude z and squared distance d2."""
    return p.link_gap(z) * np.asarray(d2, dtype=float) / p.gamma


def c8_satisfied(p: CommParams, sar: SarParams, geom: RadarGeometry, uav, p_com,
                 tol: float = 0.0):
    uav = np.asarray(uav, dtype=float)
    if np.any(uav[..., 2] <= 0):
        raise ValueError("UAV altitude must be positive")
    d2 = np.sum((uav - np.asarray(p.bs_position)) ** 2, axis=-1)
    return p.link_gap(uav[..., 2]) * d2 <= np.asarray(p_com, dtype=float) * p.gamma * (1.0 + tol)
