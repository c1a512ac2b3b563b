"""Per-TTI MAC decisions.

* UL: open-loop power control and configured-grant (CG) transmissions on one
  random sub-band at a fixed MCS.
* DL: weighted proportional-fair and min-HoLD schedulers, CQI-based MCS
  selection.
* HARQ state machines shared by both directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import BlerCurve

URLLC, EMBB = "URLLC", "eMBB"


# --- UL power control / CG ---------------------------------------------------

@dataclass(frozen=True)
class PowerControlConfig:
    p0_dbm: float = -61.0
    alpha: float = 1.0
    sigma_max_dbm: float = 23.0
    retx_boost_db: float = 3.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")


def ul_tx_power(pc: PowerControlConfig, prbs: int, pathloss_db: float) -> float:
    """Open-loop UL power in dBm, capped at the UE maximum."""
    if prbs < 1:
        raise ValueError("prbs must be >= 1")
    return min(pc.sigma_max_dbm, pc.p0_dbm + 10 * math.log10(prbs) + pc.alpha * pathloss_db)


def retx_power(pc: PowerControlConfig, previous_dbm: float) -> float:
    return min(pc.sigma_max_dbm, previous_dbm + pc.retx_boost_db)


@dataclass(frozen=True)
class CgConfig:
    mcs: int = 4
    subband_count: int = 4
    subband_prbs: int = 12
    first_prb: int = 3

    @property
    def subband_fraction(self) -> float:
        return 1.0 / self.subband_count

    def subband_range(self, subband: int) -> tuple[int, int]:
        lo = self.first_prb + subband * self.subband_prbs
        return lo, lo + self.subband_prbs


def tb_capacity_bits(prbs: int, data_symbols: int, spectral_eff: float, re_overhead: float) -> int:
    """Transport-block size for ``prbs`` PRBs over ``data_symbols`` OFDM symbols."""
    return int(prbs * 12 * data_symbols * spectral_eff * (1.0 - re_overhead))


def bits_per_prb(data_symbols: int, spectral_eff: float, re_overhead: float) -> float:
    return 12 * data_symbols * spectral_eff * (1.0 - re_overhead)


@dataclass(slots=True)
class UlTransmission:
    ue_id: int
    packet: object
    subband: int
    prb_lo: int
    prb_hi: int
    power_dbm: float
    mcs: int
    tx_count: int


def cg_transmit(ue_id: int, packet, pathloss_db: float, pc: PowerControlConfig, cg: CgConfig,
                rng: np.random.Generator, retx_of: UlTransmission | None = None) -> UlTransmission:
    """Build one CG transmission.

    A first transmission draws a sub-band uniformly and sets power by
    :func:`ul_tx_power`; a retransmission reuses the sub-band and MCS of
    ``retx_of`` with the power boosted and re-capped.
    """
    if retx_of is None:
        sb = int(rng.integers(cg.subband_count))
        power = ul_tx_power(pc, cg.subband_prbs, pathloss_db)
        count = 1
    else:
        sb = retx_of.subband
        power = retx_power(pc, retx_of.power_dbm)
        count = retx_of.tx_count + 1
    lo, hi = cg.subband_range(sb)
    return UlTransmission(ue_id, packet, sb, lo, hi, power, cg.mcs, count)


def check_cg_capacity(cg: CgConfig, curves: Sequence[BlerCurve], min_data_symbols: int, re_overhead: float,
                      packet_bits: int) -> int:
    """Raise if a URLLC packet cannot go out in one CG shot; returns the capacity."""
    cap = tb_capacity_bits(cg.subband_prbs, min_data_symbols, curves[cg.mcs].spectral_eff, re_overhead)
    if packet_bits > cap:
        raise ValueError(f"UL packet of {packet_bits} bits exceeds the {cap}-bit single-shot CG capacity")
    return cap


# --- link adaptation -------------------------------------------------------

def select_mcs(sinr_estimate_db: float, target_bler: float, curves: Sequence[BlerCurve]) -> int:
    """Highest-efficiency MCS whose BLER at the estimate is within target (inclusive)."""
    if not curves:
        raise ValueError("empty MCS table")
    best = 0
    for c in curves:
        if sinr_estimate_db >= c.sinr_for_bler(target_bler):
            best = c.mcs_id
    return best


# --- DL scheduling ---------------------------------------------------------

@dataclass
class DlCandidate:
    """Scheduler view of one DL UE with buffered, ready data."""

    ue_id: int
    service: str
    packet_bits: list[int]  # remaining bits of the ready packets, FIFO order
    bits_per_prb: float
    mcs: int = 0
    avg_throughput: float = 1.0
    hold: float = 0.0
    weight: float = 1.0

    @property
    def ready_bits(self) -> int:
        return sum(self.packet_bits)


@dataclass(frozen=True)
class Allocation:
    ue_id: int
    prb_start: int
    prb_count: int
    mcs: int
    bits: int
    segmented: bool
    service: str


@dataclass
class SchedDecision:
    tti_index: int
    allocations: list[Allocation] = field(default_factory=list)
    control_overhead_prbs: int = 0

    def used_prbs(self) -> int:
        return sum(a.prb_count for a in self.allocations) + self.control_overhead_prbs


def _prbs_for(bits: int, bpp: float) -> int:
    return max(1, math.ceil(bits / bpp - 1e-9)) if bits > 0 else 0


def _ends_mid_packet(packet_bits: Sequence[int], bits: int) -> bool:
    acc = 0
    for b in packet_bits:
        acc += b
        if acc == bits:
            return False
        if acc > bits:
            return True
    return False


@dataclass
class _Grant:
    cand: DlCandidate
    prbs: int = 0


def _layout(tti: int, grants: list[_Grant], prb_start: int, overhead: int) -> SchedDecision:
    dec = SchedDecision(tti)
    p = prb_start
    for g in grants:
        if g.prbs == 0:
            continue
        c = g.cand
        bits = min(c.ready_bits, int(g.prbs * c.bits_per_prb))
        p += overhead
        dec.allocations.append(Allocation(c.ue_id, p, g.prbs, c.mcs, bits,
                                          _ends_mid_packet(c.packet_bits, bits), c.service))
        dec.control_overhead_prbs += overhead
        p += g.prbs
    return dec


def _pf_fill(cands: Sequence[DlCandidate], pool: int, grants: dict[int, _Grant], order: list[_Grant],
             rbg: int, overhead: int, beta: float, tti_s: float) -> int:
    """Grant RBG-sized chunks to the best PF metric until demand or PRBs run out.

    The running average is updated after every chunk so PRBs spread across
    UEs within the TTI.  Returns the PRBs left in the pool.
    """
    need = {c.ue_id: _prbs_for(c.ready_bits, c.bits_per_prb) for c in cands}
    for c in cands:
        g = grants.get(c.ue_id)
        if g is not None:
            need[c.ue_id] = max(0, need[c.ue_id] - g.prbs)
    while pool > 0:
        best, best_metric = None, -1.0
        for c in cands:
            if need[c.ue_id] <= 0:
                continue
            g = grants.get(c.ue_id)
            if g is None and pool <= overhead:
                continue
            granted = g.prbs if g is not None else 0
            avg = (1 - beta) * c.avg_throughput + beta * granted * c.bits_per_prb / tti_s
            metric = c.weight * c.bits_per_prb / max(avg, 1e-9)
            if metric > best_metric or (metric == best_metric and c.ue_id < best.ue_id):
                best, best_metric = c, metric
        if best is None:
            break
        g = grants.get(best.ue_id)
        if g is None:
            g = grants[best.ue_id] = _Grant(best)
            order.append(g)
            pool -= overhead
        chunk = min(rbg, need[best.ue_id], pool)
        g.prbs += chunk
        need[best.ue_id] -= chunk
        pool -= chunk
    return pool


def schedule_pf(active: Sequence[DlCandidate], prbs_available: int, tti: int, *, prb_start: int = 0,
                rbg_size: int = 4, overhead_prbs: int = 1, forgetting: float = 0.01,
                tti_s: float = 4 / 28000) -> SchedDecision:
    """Weighted PF: URLLC UEs first, then eMBB, each class filled by PF chunks."""
    grants: dict[int, _Grant] = {}
    order: list[_Grant] = []
    pool = prbs_available
    for service in (URLLC, EMBB):
        cands = sorted((c for c in active if c.service == service and c.ready_bits > 0), key=lambda c: c.ue_id)
        pool = _pf_fill(cands, pool, grants, order, rbg_size, overhead_prbs, forgetting, tti_s)
    return _layout(tti, order, prb_start, overhead_prbs)


def schedule_min_hold(active: Sequence[DlCandidate], prbs_available: int, tti: int, *, prb_start: int = 0,
                      rbg_size: int = 4, overhead_prbs: int = 1, forgetting: float = 0.01,
                      tti_s: float = 4 / 28000) -> SchedDecision:
    """URLLC by descending head-of-line delay with whole packets; at most one segmented.

    Each URLLC UE gets as many whole ready packets as fit.  If PRBs remain and
    some packet did not fit, exactly one packet is segmented: the one costing
    the least extra control overhead (extending an existing allocation is
    free), then the one delivering most bits, then the oldest.  eMBB UEs share
    the rest by PF.
    """
    urllc = sorted((c for c in active if c.service == URLLC and c.ready_bits > 0),
                   key=lambda c: (-c.hold, c.ue_id))
    grants: dict[int, _Grant] = {}
    order: list[_Grant] = []
    pool = prbs_available
    served_pkts: dict[int, int] = {}
    for c in urllc:
        if pool <= overhead_prbs:
            break
        acc, k = 0, 0
        for b in c.packet_bits:
            if _prbs_for(acc + b, c.bits_per_prb) + overhead_prbs > pool:
                break
            acc += b
            k += 1
        if k:
            prbs = _prbs_for(acc, c.bits_per_prb)
            g = grants[c.ue_id] = _Grant(c, prbs)
            order.append(g)
            pool -= prbs + overhead_prbs
            served_pkts[c.ue_id] = k

    best, best_key = None, None
    for rank, c in enumerate(urllc):
        k = served_pkts.get(c.ue_id, 0)
        if k >= len(c.packet_bits):
            continue
        extra = 0 if c.ue_id in grants else overhead_prbs
        room = pool - extra
        if room <= 0:
            continue
        # bits the partial allocation can still carry for this UE's next packet
        if c.ue_id in grants:
            g = grants[c.ue_id]
            spare = int((g.prbs + room) * c.bits_per_prb) - sum(c.packet_bits[:k])
        else:
            spare = int(room * c.bits_per_prb)
        bits = min(spare, c.packet_bits[k])
        if bits <= 0:
            continue
        key = (extra, -bits, rank)
        if best_key is None or key < best_key:
            best, best_key = c, key
    if best is not None:
        extra = best_key[0]
        k = served_pkts.get(best.ue_id, 0)
        target_bits = sum(best.packet_bits[:k]) - best_key[1]
        g = grants.get(best.ue_id)
        if g is None:
            g = grants[best.ue_id] = _Grant(best)
            order.append(g)
        add = min(pool - extra, _prbs_for(target_bits, best.bits_per_prb) - g.prbs)
        g.prbs += add
        pool -= add + extra

    embb = sorted((c for c in active if c.service == EMBB and c.ready_bits > 0), key=lambda c: c.ue_id)
    _pf_fill(embb, pool, grants, order, rbg_size, overhead_prbs, forgetting, tti_s)
    return _layout(tti, order, prb_start, overhead_prbs)


SCHEDULERS = {"pf": schedule_pf, "min_hold": schedule_min_hold}


# --- HARQ --------------------------------------------------------------------

IDLE, AWAITING_DECODE, AWAITING_FEEDBACK, AWAITING_RETX = "Idle", "AwaitingDecode", "AwaitingFeedback", "AwaitingRetx"
TX_DONE, DECODE_OK, DECODE_FAIL = "tx_done", "decode_ok", "decode_fail"
FEEDBACK_DELIVERED, GRANT_DELIVERED = "feedback_delivered", "grant_delivered"


class HarqError(AssertionError):
    """Illegal HARQ transition: a simulator bug, not a radio event."""


@dataclass(slots=True, eq=False)
class HarqProcess:
    direction: str
    max_retx: int = 4
    state: str = IDLE
    tx_count: int = 0
    outcome: str | None = None  # "delivered" | "dropped"
    next_action_time: int = 0
    sinr_acc: float = 0.0  # accumulated linear SINR (chase combining)
    payload: object = None

    @property
    def finished(self) -> bool:
        return self.outcome is not None


def _harq_step(proc: HarqProcess, event: str, feedback_event: str, fail_action: str) -> str:
    s = proc.state
    if proc.outcome is not None:
        raise HarqError(f"event {event!r} on a finished process")
    if event == TX_DONE and s in (IDLE, AWAITING_RETX):
        if proc.tx_count >= proc.max_retx + 1:
            raise HarqError("transmission beyond max_retx")
        proc.tx_count += 1
        proc.state = AWAITING_DECODE
        return "await_decode"
    if event == DECODE_OK and s == AWAITING_DECODE:
        proc.state = IDLE
        proc.outcome = "delivered"
        return "deliver"
    if event == DECODE_FAIL and s == AWAITING_DECODE:
        if proc.tx_count >= proc.max_retx + 1:
            proc.state = IDLE
            proc.outcome = "dropped"
            return "drop"
        proc.state = AWAITING_FEEDBACK
        return fail_action
    if event == feedback_event and s == AWAITING_FEEDBACK:
        proc.state = AWAITING_RETX
        return "schedule_retx"
    raise HarqError(f"{proc.direction} HARQ: illegal event {event!r} in state {s}")


def harq_dl_step(proc: HarqProcess, event: str) -> str:
    """DL: a failed decode makes the UE send a NACK; its delivery lets the BS retransmit."""
    return _harq_step(proc, event, FEEDBACK_DELIVERED, "send_nack")


def harq_ul_step(proc: HarqProcess, event: str) -> str:
    """UL: a failed decode makes the BS send a grant; its delivery lets the UE retransmit."""
    return _harq_step(proc, event, GRANT_DELIVERED, "send_grant")


def combine_sinr(acc_linear: float, sinr_db_value: float, mode: str = "chase") -> float:
    """Accumulate one attempt; returns the new linear effective SINR."""
    lin = 10.0 ** (sinr_db_value / 10.0)
    return acc_linear + lin if mode == "chase" else lin
