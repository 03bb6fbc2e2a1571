import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sarcover import linkbudget as lb
from sarcover.geometry import RadarGeometry

C = 2.9979e8
GEOM = RadarGeometry.from_degrees(45.0, 30.0)


def test_constants_from_primitives(nominal, nominal_plain):
    # exponent of A is (B_r tau_p PRF + R_sl) / B_c
    assert nominal.comm.A == pytest.approx(2 ** ((1e8 * 1e-6 * 100 + 1e3) / 1e8), rel=1e-15)
    assert nominal_plain.comm.A == pytest.approx(1.0000693, abs=1e-7)
    assert nominal.comm.alpha == pytest.approx(2 * GEOM.omega * 1e8 * 100 / (C * 1e8), rel=1e-14)
    assert nominal.comm.alpha == pytest.approx(5.639e-7, rel=1e-3)


def test_sar_data_rate(nominal):
    rate = lb.sar_data_rate(nominal.sar, GEOM, 50.0)
    assert rate == pytest.approx(1e8 * (2 * 50 * 0.845299 / C + 1e-6) * 100, rel=1e-6)
    assert rate == pytest.approx(1.2820e4, rel=1e-4)
    assert lb.sar_data_rate(nominal.sar, GEOM, 0.0) == pytest.approx(1e4)
    slope = lb.sar_data_rate(nominal.sar, GEOM, 11.0) - lb.sar_data_rate(nominal.sar, GEOM, 10.0)
    assert slope == pytest.approx(2 * 1e8 * GEOM.omega * 100 / C, rel=1e-9)


def test_radar_snr_margin(nominal):
    assert lb.radar_snr_margin(nominal.sar, 50.0, 12.5) == pytest.approx(1.0, rel=1e-15)
    assert lb.radar_snr_margin(nominal.sar, 50.0, 0.0) == 0.0
    assert lb.radar_snr_margin(nominal.sar, 100.0, 100.0) == pytest.approx(1.0)


def test_distance():
    assert lb.distance([0, 0, 0], [0, 0, 0]) == 0.0
    # (121.13, -25, 25) from the base station
    d = lb.distance([-28.87, 0, 50], [-150, 25, 25])
    assert d == pytest.approx(math.sqrt(121.13 ** 2 + 25 ** 2 + 25 ** 2), rel=1e-12)
    assert d == pytest.approx(126.18, abs=0.01)
    assert lb.distance([1, 2, 3], [4, 5, 7]) == lb.distance([4, 5, 7], [1, 2, 3])


def test_throughput(nominal):
    r = lb.throughput(nominal.comm, 1.0, 100.0)
    assert r == pytest.approx(1e8 * math.log2(1.01), rel=1e-14)
    assert r == pytest.approx(1.4355e6, rel=1e-4)
    assert lb.throughput(nominal.comm, 0.0, 100.0) == 0.0
    d = np.linspace(1, 1000, 50)
    assert np.all(np.diff(lb.throughput(nominal.comm, 2.0, d)) < 0)


def test_c8_example_without_overhead(nominal_plain):
    s = nominal_plain
    bs = np.array(s.comm.bs_position)
    # 50 m altitude and 150 m from the base station
    uav = np.array([bs[0] + math.sqrt(22500 - 25 ** 2), bs[1], 50.0])
    lhs = s.comm.link_gap(50.0) * 22500
    assert lhs == pytest.approx(2.00, abs=0.005)
    assert lb.c8_satisfied(s.comm, s.sar, GEOM, uav, 0.021)
    assert not lb.c8_satisfied(s.comm, s.sar, GEOM, uav, 0.019)


def test_c8_fails_far_away(nominal):
    far = np.array([1e9, 0.0, 50.0])
    assert not lb.c8_satisfied(nominal.comm, nominal.sar, GEOM, far, nominal.p_com_max)


def test_c8_rejects_ground_level(nominal):
    with pytest.raises(ValueError):
        lb.c8_satisfied(nominal.comm, nominal.sar, GEOM, [0, 0, 0.0], 1.0)


def test_min_comm_power_is_tight(nominal, rng):
    z = rng.uniform(5, 100, 200)
    d2 = rng.uniform(1, 4e6, 200)
    p = lb.min_comm_power(nominal.comm, z, d2)
    need = lb.sar_data_rate(nominal.sar, GEOM, z) + nominal.comm.rate_overhead
    have = lb.throughput(nominal.comm, p, np.sqrt(d2))
    assert np.max(np.abs(have - need) / need) < 1e-9


def test_form_equivalence_on_random_states(nominal, rng):
    z = rng.uniform(5, 100, 1000)
    d = rng.uniform(1, 3000, 1000)
    pc = rng.uniform(0, 10, 1000)
    uav = np.column_stack([np.array(nominal.comm.bs_position)[0] + d,
                           np.full(1000, nominal.comm.bs_position[1]), z])
    d = np.sqrt(np.sum((uav - np.array(nominal.comm.bs_position)) ** 2, axis=1))
    closed = nominal.comm.link_gap(z) * d ** 2 - pc * nominal.comm.gamma
    rate = (lb.throughput(nominal.comm, pc, d)
            - lb.sar_data_rate(nominal.sar, GEOM, z) - nominal.comm.rate_overhead)
    # both forms must agree in sign except within 1e-9 of the boundary
    clear = np.abs(closed) > 1e-9 * pc * nominal.comm.gamma
    assert np.all((closed[clear] <= 0) == (rate[clear] >= 0))
    flags = lb.c8_satisfied(nominal.comm, nominal.sar, GEOM, uav, pc)
    assert np.array_equal(flags[clear], rate[clear] >= 0)


@given(st.floats(5, 100), st.floats(1, 3000), st.floats(0, 10))
def test_outputs_finite_and_non_negative(z, d, pc):
    from sarcover.scenario import default_scenario
    s = default_scenario()
    vals = [lb.sar_data_rate(s.sar, GEOM, z), lb.throughput(s.comm, pc, d),
            lb.radar_snr_margin(s.sar, z, pc), s.comm.link_gap(z)]
    assert all(np.isfinite(v) and v >= 0 for v in vals)


def test_beta_recomputed_from_primitives(nominal):
    prim = lb.RadarPrimitives(gain_tx=10.0, gain_rx=10.0, wavelength=C / 2e9, backscatter=0.1,
                              noise_temp=290.0, noise_figure=2.0, losses=2.0)
    beta = lb.beta_from_primitives(
        gain_tx=10.0, gain_rx=10.0, wavelength=C / 2e9, backscatter=0.1,
        pulse_duration=1e-6, prf=100.0, theta_d=GEOM.theta_d, noise_temp=290.0,
        noise_figure=2.0, bandwidth_radar=1e8, losses=2.0, speed=5.0, snr_min=100.0)
    sar = lb.SarParams(1e8, 1e-6, 100.0, 100.0, beta, prim)
    assert sar.check_beta(GEOM, 5.0) <= 1e-12
    bad = lb.SarParams(1e8, 1e-6, 100.0, 100.0, beta * 1.01, prim)
    with pytest.raises(ValueError):
        bad.check_beta(GEOM, 5.0)


def test_link_gap_accuracy(nominal):
    # expm1 keeps full relative precision where A*2**(alpha z) - 1 would cancel
    z = 50.0
    exact = math.expm1(math.log(2) * (math.log2(nominal.comm.A) + nominal.comm.alpha * z))
    assert nominal.comm.link_gap(z) == pytest.approx(exact, rel=1e-15)
