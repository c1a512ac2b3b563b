from __future__ import annotations

import math

import numpy as np
import pytest

from inftdd.channel import (DEFAULT_SLOPE_DB, BlerCurve, PathlossParams, bler, build_link_matrix, los_decay_length,
                            los_probability, mcs_table, noise_dbm, pathloss_db, sinr_db, validate_curves)
from inftdd.config import NetworkConfig, TrafficConfig
from inftdd.topology import Topology, build_topology


def test_pathloss_unit_distance_and_frequency_is_a():
    p = PathlossParams(los_a=12.5, nlos_a=3.0)
    assert pathloss_db(1.0, 1.0, True, p) == 12.5
    # NLOS is floored by LOS
    assert pathloss_db(1.0, 1.0, False, p) == 12.5


def test_pathloss_los_20m_oracle():
    # 31.84 + 21.5*log10(20) + 19*log10(3.5), evaluated by hand
    assert pathloss_db(20.0, 3.5, True, PathlossParams()) == pytest.approx(70.1494, abs=1e-3)


def test_pathloss_clamps_below_one_metre():
    p = PathlossParams()
    assert pathloss_db(0.2, 3.5, True, p) == pathloss_db(1.0, 3.5, True, p)


def test_pathloss_vectorised_and_nlos_not_below_los():
    d = np.linspace(1, 200, 50)
    los = pathloss_db(d, 3.5, True, PathlossParams())
    nlos = pathloss_db(d, 3.5, False, PathlossParams())
    assert (np.diff(los) > 0).all()
    assert (nlos >= los).all()


def test_los_probability():
    assert los_probability(0.0, 5.0) == 1.0
    assert los_probability(1e6, 5.0) == pytest.approx(0.0, abs=1e-12)
    assert los_probability(10.0, 10.0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert los_probability(50.0, math.inf) == 1.0
    d = np.linspace(0, 100, 21)
    assert (np.diff(los_probability(d, 7.0)) <= 0).all()


def test_los_decay_length_geometry():
    p = PathlossParams(clutter_density=0.6, clutter_height_m=6.0, clutter_size_m=2.0)
    base = -2.0 / math.log(0.4)
    assert los_decay_length(p, 1.5, 1.5) == pytest.approx(base)
    assert los_decay_length(p, 10.0, 1.5) == pytest.approx(base * 8.5 / 4.5)
    assert los_decay_length(p, 10.0, 8.0) == math.inf


def _two_node_topology(distance: float) -> Topology:
    bs = np.array([[0.0, 0.0, 10.0]])
    ue = np.array([[distance, 0.0, 1.5]])
    return Topology(bs, ue, np.array([0]), np.array([0]))


def test_link_matrix_two_nodes_symmetric():
    lm = build_link_matrix(_two_node_topology(30.0), PathlossParams(), np.random.default_rng(1), 3.5)
    assert lm.num_nodes == 2
    assert lm.gain_db[0, 1] == lm.gain_db[1, 0]
    assert np.isneginf(lm.gain_db[0, 0]) and np.isneginf(lm.gain_db[1, 1])


def test_link_matrix_zero_sigma_is_minus_pathloss():
    p = PathlossParams(shadowing_sigma_los=0.0, shadowing_sigma_nlos=0.0)
    lm = build_link_matrix(_two_node_topology(30.0), p, np.random.default_rng(1), 3.5)
    d3d = math.hypot(30.0, 8.5)
    assert lm.gain_db[0, 1] == pytest.approx(-pathloss_db(d3d, 3.5, bool(lm.los[0, 1]), p), abs=1e-12)


def test_link_matrix_full_layout_properties():
    topo = build_topology(NetworkConfig(), np.random.default_rng(2), TrafficConfig())
    a = build_link_matrix(topo, PathlossParams(), np.random.default_rng(9), 3.5)
    b = build_link_matrix(topo, PathlossParams(), np.random.default_rng(9), 3.5)
    assert np.array_equal(a.gain_db, b.gain_db)
    assert np.array_equal(a.gain_db, a.gain_db.T)
    off = ~np.eye(a.num_nodes, dtype=bool)
    assert (a.gain_db[off] < 0).all()
    # BS pairs sit above the clutter: always LOS
    assert a.los[:18, :18].all()


@pytest.mark.parametrize("desired, interferers, noise, expected", [
    (-60.0, [], -90.0, 30.0),
    (-60.0, [-60.0], -400.0, 0.0),
    (-60.0, [-70.0, -70.0], -100.0, 10 * math.log10(1e-9 / (2e-10 + 1e-13))),
])
def test_sinr_examples(desired, interferers, noise, expected):
    assert sinr_db(desired, interferers, noise) == pytest.approx(expected, abs=1e-9)


def test_sinr_third_example_value():
    assert sinr_db(-60.0, [-70.0, -70.0], -100.0) == pytest.approx(6.9875, abs=1e-3)


def test_bler_curve_points():
    c = BlerCurve(4, 1.0, 1.0)
    assert bler(1.0, c) == 0.5
    assert bler(1e3, c) == pytest.approx(0.0, abs=1e-12)
    assert bler(-1e3, c) == pytest.approx(1.0, abs=1e-12)
    # slope calibrated so that 1 dB above the midpoint gives 10 %
    assert bler(2.0, c) == pytest.approx(0.10, abs=1e-12)
    assert c.slope_db == DEFAULT_SLOPE_DB
    assert bler(c.sinr_for_bler(0.01), c) == pytest.approx(0.01, abs=1e-12)


def test_mcs_table_monotone():
    table = mcs_table()
    validate_curves(table)
    assert len(table) == 15
    assert table[4].spectral_eff == 1.0 and table[4].sinr_50pct_db == pytest.approx(1.0)
    with pytest.raises(ValueError):
        validate_curves([table[3], table[2]])


@pytest.mark.parametrize("bw, nf, expected", [(1.0, 0.0, -174.0), (20e6, 9.0, -91.99), (5e6, 5.0, -102.01)])
def test_noise(bw, nf, expected):
    assert noise_dbm(bw, nf) == pytest.approx(expected, abs=0.005)
