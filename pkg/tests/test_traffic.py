from __future__ import annotations

import math

import numpy as np
import pytest

from inftdd.config import offered_load
from inftdd.traffic import (DL, UL, URLLC, Packet, UeBuffer, cbr_arrivals, enqueue, extract_bits, poisson_arrivals,
                            to_symbols, write_packet_trace)


def _buffer(*sizes: int) -> tuple[UeBuffer, list[Packet]]:
    buf = UeBuffer()
    pkts = [Packet(i, 0, DL, URLLC, s, i) for i, s in enumerate(sizes)]
    for p in pkts:
        enqueue(buf, p)
    return buf, pkts


def test_poisson_zero_rate_is_empty():
    assert len(poisson_arrivals(0.0, 10.0, np.random.default_rng(0))) == 0


@pytest.mark.parametrize("seed", range(10))
def test_poisson_count_within_three_sigma(seed):
    t = poisson_arrivals(50.0, 100.0, np.random.default_rng(seed))
    assert abs(len(t) - 5000) <= 3 * math.sqrt(5000)
    assert (np.diff(t) >= 0).all()
    assert t.min() >= 0 and t.max() < 100.0


def test_poisson_rejects_negative_rate():
    with pytest.raises(ValueError):
        poisson_arrivals(-1.0, 1.0, np.random.default_rng(0))


def test_empirical_ftp3_load_matches_offered_load():
    rng = np.random.default_rng(7)
    k, f, lam, horizon = 8, 256, 50.0, 100.0
    bits = sum(len(poisson_arrivals(lam, horizon, rng)) * f for _ in range(k))
    assert bits / horizon == pytest.approx(offered_load(k, f, lam), rel=0.02)


def test_cbr_period():
    t = cbr_arrivals(16000, 0.5e6, 1.0, phase=0.0)
    assert np.allclose(np.diff(t), 0.032)
    assert len(t) == 32


def test_cbr_unit_period_and_empty_cases():
    assert np.allclose(cbr_arrivals(1000, 1000, 5.0, phase=0.0), [0, 1, 2, 3, 4])
    assert len(cbr_arrivals(1000, 1000, 0.0)) == 0
    assert len(cbr_arrivals(1000, 0, 5.0)) == 0


def test_extract_whole_packet():
    buf, _ = _buffer(256)
    taken, buf = extract_bits(buf, 256)
    assert [b for _, b in taken] == [256]
    assert len(buf) == 0 and buf.total_buffered_bits == 0
    buf.check()


def test_extract_splits_only_last_packet():
    buf, pkts = _buffer(256, 256)
    taken, buf = extract_bits(buf, 300)
    assert [(p.id, b) for p, b in taken] == [(0, 256), (1, 44)]
    assert pkts[1].remaining_bits == 212
    assert buf.total_buffered_bits == 212
    buf.check()


def test_extract_zero_is_noop():
    buf, _ = _buffer(256, 100)
    taken, buf = extract_bits(buf, 0)
    assert taken == [] and buf.total_buffered_bits == 356 and len(buf) == 2


def test_extract_respects_ready_time():
    buf = UeBuffer()
    enqueue(buf, Packet(0, 0, UL, URLLC, 100, 0, ready_time=6))
    assert extract_bits(buf, 100, now=5)[0] == []
    assert buf.ready_bits(5) == 0 and buf.ready_bits(6) == 100


def test_enqueue_order_enforced():
    buf, _ = _buffer(10, 10)
    with pytest.raises(ValueError):
        enqueue(buf, Packet(9, 0, DL, URLLC, 10, 0))


def test_remove_keeps_accounting():
    buf, pkts = _buffer(256, 256)
    extract_bits(buf, 100)
    buf.remove(pkts[0])
    buf.check()
    assert buf.total_buffered_bits == 256


def test_to_symbols_rounds_up():
    sym = 1e-2 / 280
    assert to_symbols(np.array([0.0, sym, 1.5 * sym, 2 * sym + 1e-15]), sym).tolist() == [0, 1, 2, 2]


def test_packet_trace(tmp_path):
    _, pkts = _buffer(256)
    pkts[0].delivered_time = 12
    path = tmp_path / "trace.csv"
    write_packet_trace(pkts, path)
    assert path.read_text().splitlines() == ["pkt_id,ue,dir,service,bits,arrival_sym,delivered_sym",
                                             "0,0,DL,URLLC,256,0,12"]
