from __future__ import annotations

import math

import numpy as np
import pytest

from inftdd.tdd import (DL, QOS_AWARE, QOS_UNAWARE, UL, BlerEstimator, BufferObservation, BufferRatioSelector,
                        FixedSelector, average_ratio, build_frame, buffered_ratio, dl_count, frame_for_count,
                        pooled_iota, qos_filter, select_frame, slot_ratios, update_iota, write_frame_log)


@pytest.mark.parametrize("z_dl, z_ul, iota, expected", [(256, 0, 1.0, 1.0), (256, 256, 1.0, 0.5),
                                                         (256, 256, 0.5, 1 / 3)])
def test_buffered_ratio(z_dl, z_ul, iota, expected):
    assert buffered_ratio(z_dl, z_ul, iota) == pytest.approx(expected, abs=1e-9)


def test_buffered_ratio_empty_is_neutral():
    assert buffered_ratio(0, 0, 0.3) == 0.5
    with pytest.raises(ValueError):
        buffered_ratio(1, 1, 0.0)
    with pytest.raises(ValueError):
        buffered_ratio(-1, 1, 1.0)


OBS = BufferObservation(1, z_dl_urllc=256, z_dl_embb=16000, z_ul_urllc=256)


def test_qos_filter():
    assert qos_filter(OBS, QOS_AWARE) == (256, 256)
    assert qos_filter(OBS, QOS_UNAWARE) == (16256, 256)
    embb_only = BufferObservation(1, z_dl_embb=16000, z_ul_embb=300)
    assert qos_filter(embb_only, QOS_AWARE) == (16000, 300)
    # a URLLC cell keeps using URLLC components even while they are empty
    assert qos_filter(embb_only, QOS_AWARE, urllc_configured=True) == (0, 0)
    with pytest.raises(ValueError):
        qos_filter(OBS, "other")


def test_observation_validation():
    with pytest.raises(ValueError):
        BufferObservation(0)
    with pytest.raises(ValueError):
        BufferObservation(1, z_dl_urllc=-1)


@pytest.mark.parametrize("mus, expected", [([0.5] * 20, 0.5), ([0.0, 1.0], 0.5), ([0.1, 0.2, 0.3, 0.4], 0.25)])
def test_average_ratio(mus, expected):
    assert average_ratio(mus, len(mus)) == pytest.approx(expected, abs=1e-9)


def test_average_ratio_length_check():
    with pytest.raises(ValueError):
        average_ratio([0.5], 2)


def test_build_frame_all_dl():
    f = build_frame(1.0, 70, min_dl=0, min_ul=0)
    assert f.pattern == "D" * 70 and f.guard_symbols == frozenset() and f.dl_fraction == 1.0
    f.validate()


def test_build_frame_ninety_percent_ul():
    f = build_frame(0.1, 70)
    assert f.tti_directions.count(DL) == 7 and f.tti_directions.count(UL) == 63
    f.validate()


def test_build_frame_dudu_wraps():
    f = build_frame(0.5, 4)
    assert f.pattern == "DUDU"
    assert f.guard_symbols == frozenset({3, 7, 11, 15})
    assert [f.data_symbols(j) for j in range(4)] == [3, 3, 3, 3]
    f.validate()


def test_build_frame_min_guarantees():
    assert build_frame(0.0, 70).tti_directions.count(DL) == 1
    assert build_frame(1.0, 70).tti_directions.count(UL) == 1
    assert dl_count(0.5, 1, 1, 1) == 0  # contradictory guarantees fall back to half
    with pytest.raises(ValueError):
        build_frame(1.2, 70)


@pytest.mark.parametrize("n", range(1, 11))
def test_even_interleave_exhaustive(n):
    for n_dl in range(1, n + 1):
        f = frame_for_count(n_dl, n)
        f.validate()
        pos = [i for i, d in enumerate(f.tti_directions) if d == DL]
        assert len(pos) == n_dl and pos[0] == 0
        gaps = [(pos[(k + 1) % n_dl] - pos[k]) % n or n for k in range(n_dl)]
        assert max(gaps) <= math.ceil(n / n_dl) and min(gaps) >= n // n_dl
        # symbol identity: data symbols + guards == frame symbols
        assert sum(f.data_symbols(j) for j in range(n)) + len(f.guard_symbols) == f.symbols


def test_iota_window():
    est = BlerEstimator(capacity=4, iota_min=0.01)
    assert est.iota == 1.0
    for failed in (True, True, False, False):
        update_iota(est, failed)
    assert est.iota == 0.5
    update_iota(est, False)  # evicts the oldest failure
    assert list(est.window) == [True, False, False, False]
    assert est.iota == 0.25
    for _ in range(4):
        update_iota(est, False)
    assert est.iota == 0.01


def test_pooled_iota():
    a, b = BlerEstimator(4), BlerEstimator(4)
    for x in (True, False):
        update_iota(a, x)
    for x in (False, False):
        update_iota(b, x)
    assert pooled_iota([a, b], 0.01) == 0.25
    assert pooled_iota([], 0.01) == 1.0
    assert pooled_iota([BlerEstimator(4)], 0.01) == 1.0


def _obs(rows):
    return np.array(rows, dtype=float)


def test_select_frame_dl_only():
    f, mu = select_frame(_obs([[256, 0, 0, 0]] * 20), QOS_AWARE, 1.0, 70)
    assert mu == 1.0 and f.dl_fraction >= 1 - 1 / 70


def test_select_frame_symmetric():
    f, mu = select_frame(_obs([[256, 0, 256, 0]] * 20), QOS_AWARE, 1.0, 70)
    assert mu == 0.5 and f.dl_fraction == 0.5


def test_select_frame_qos_bias():
    rows = _obs([[256, 16000, 256, 0]] * 20)
    aware, mu_a = select_frame(rows, QOS_AWARE, 1.0, 70)
    unaware, mu_u = select_frame(rows, QOS_UNAWARE, 1.0, 70)
    assert aware.dl_fraction == 0.5
    assert mu_u == pytest.approx(16256 / 16512)
    assert unaware.dl_fraction == 69 / 70


def test_select_frame_empty_is_neutral():
    f, mu = select_frame(_obs([[0, 0, 0, 0]] * 20), QOS_UNAWARE, 1.0, 70)
    assert mu == 0.5 and f.dl_fraction == 0.5
    f, mu = select_frame([], QOS_AWARE, 1.0, 70)
    assert mu == 0.5


def test_slot_ratios_accept_observations():
    obs = [BufferObservation(1, 256, 0, 256, 0), BufferObservation(2, 256, 0, 0, 0)]
    assert slot_ratios(obs, QOS_AWARE, 0.5).tolist() == pytest.approx([1 / 3, 1.0])


def test_selectors():
    sel = BufferRatioSelector(QOS_AWARE, 70, urllc_configured=[True])
    f, mu = sel.select(0, _obs([[0, 16000, 256, 0]] * 20), 1.0)
    assert mu == 0.0 and f.tti_directions.count(DL) == 1
    fixed = FixedSelector(build_frame(0.3, 70))
    assert fixed.select(5, _obs([[1, 0, 0, 0]]), 1.0)[0] is fixed.frame


def test_frame_log_csv(tmp_path):
    path = tmp_path / "frames.csv"
    write_frame_log([(1, 0, 0.5, 0.5, "DUDU")], path)
    assert path.read_text().splitlines() == ["frame_idx,bs,mu_bar,dl_fraction,pattern",
                                             "1,0,0.500000,0.500000,DUDU"]
