"""Symbol-clocked system simulator.

Every OFDM symbol the engine runs, in this order: decode completions, the
slot-end buffer sample, frame selection (at frame boundaries), the TTI's
transmissions (at TTI starts), and packet arrivals.  All transmissions of a
TTI are decided first; SINRs are then resolved together against the full set
of concurrent transmitters, cross-link pairs included.

Timing on the symbol grid (fractional delays rounded up):

* DL: arrival ``a`` -> ready ``a + ceil(pdsch_prep)`` -> DL TTI start ``s``
  -> decoded at ``s + tti + ceil(pdsch_decode)``.
* UL: arrival ``a`` -> ready ``a + ceil(pusch_prep)`` -> UL TTI start ``s``
  -> decoded at ``s + tti + ceil(pusch_decode)``.
* DL failure: NACK in the first UL TTI at or after ``decode + ceil(pusch_prep)``;
  retransmission in a DL TTI at or after ``nack + ceil(pdsch_prep)``.
* UL failure: grant in the first DL TTI at or after ``decode + ceil(pdsch_prep)``;
  retransmission in a UL TTI at or after ``grant + ceil(pusch_prep)``.
"""
from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import mac
from .channel import LinkMatrix, PathlossParams, build_link_matrix, mcs_table, noise_dbm, validate_curves
from .config import ConfigError, SimConfig
from .mac import (DECODE_FAIL, DECODE_OK, EMBB, GRANT_DELIVERED, FEEDBACK_DELIVERED, TX_DONE, URLLC, CgConfig,
                  DlCandidate, HarqProcess, PowerControlConfig)
from .metrics import COUNTER_NAMES, SimReport
from .tdd import DL as D, UL as U, BlerEstimator, BufferRatioSelector, FrameSelector, build_frame, pooled_iota, update_iota
from .topology import DL_EMBB, DL_URLLC, UL_URLLC, Topology, build_topology
from .traffic import DL as DIR_DL, UL as DIR_UL, Packet, UeBuffer, cbr_arrivals, enqueue, extract_bits, poisson_arrivals, to_symbols

SYMBOLS_PER_SLOT = 14
# observation columns
Z_DL_URLLC, Z_DL_EMBB, Z_UL_URLLC, Z_UL_EMBB = 0, 1, 2, 3


@dataclass(frozen=True)
class Clock:
    symbols_per_slot: int
    slots_per_frame: int
    symbol_duration_us: float

    @property
    def symbols_per_frame(self) -> int:
        return self.symbols_per_slot * self.slots_per_frame


@dataclass(frozen=True)
class ProcessingDelays:
    pdsch_prep: float = 2.5
    pusch_prep: float = 5.5
    pdsch_decode: float = 4.5
    pusch_decode: float = 5.5

    def __post_init__(self):
        if min(self.pdsch_prep, self.pusch_prep, self.pdsch_decode, self.pusch_decode) < 0:
            raise ValueError("processing delays must be >= 0")

    def symbols(self) -> tuple[int, int, int, int]:
        """Delays rounded up to whole symbols: (pdsch_prep, pusch_prep, pdsch_decode, pusch_decode)."""
        return (math.ceil(self.pdsch_prep), math.ceil(self.pusch_prep),
                math.ceil(self.pdsch_decode), math.ceil(self.pusch_decode))


class Transmitter(NamedTuple):
    node: int
    cell: int
    direction: str  # "DL" for a BS transmitting, "UL" for a UE transmitting
    prb_lo: int
    prb_hi: int


class Link(NamedTuple):
    tx_node: int
    rx_node: int
    cell: int
    direction: str
    prb_lo: int
    prb_hi: int


def cross_link_interferers(tti_directions_per_bs: Sequence[str], link: Link,
                           transmitters: Sequence[Transmitter]) -> list[tuple[int, str]]:
    """Interferers of one reception, each tagged ``same_link``, ``cli`` or ``intra_cell``.

    DL reception at a UE: other-cell BSs in DL and other-cell UEs in UL (UE-UE
    CLI).  UL reception at a BS: other-cell UEs in UL, other-cell BSs in DL
    (BS-BS CLI), and same-cell UEs on the same resources (CG collisions).
    Transmitters whose PRBs do not overlap the link's PRBs are ignored.
    """
    out = []
    for t in transmitters:
        if t.node == link.tx_node or t.node == link.rx_node:
            continue
        if t.prb_hi <= link.prb_lo or t.prb_lo >= link.prb_hi:
            continue
        if tti_directions_per_bs[t.cell] != (D if t.direction == DIR_DL else U):
            continue
        if t.cell == link.cell:
            if link.direction == DIR_UL and t.direction == DIR_UL:
                out.append((t.node, "intra_cell"))
            continue
        out.append((t.node, "same_link" if t.direction == link.direction else "cli"))
    return out


class DlTb:
    __slots__ = ("proc", "ue", "cell", "segments", "bits", "mcs", "service")

    def __init__(self, proc, ue, cell, segments, bits, mcs, service):
        self.proc, self.ue, self.cell, self.segments = proc, ue, cell, segments
        self.bits, self.mcs, self.service = bits, mcs, service


class UlProc:
    __slots__ = ("proc", "ue", "cell", "packet", "tx", "visible")

    def __init__(self, proc, ue, cell, packet, tx):
        self.proc, self.ue, self.cell, self.packet, self.tx = proc, ue, cell, packet, tx
        self.visible = False


class Simulator:
    """One simulation run.  Deterministic for a given config and seed.

    ``topology``/``links`` replace the drawn layout and gains; ``arrivals``
    (``[(ue, symbol), ...]``) replaces generated traffic.  With
    ``check_invariants`` every TTI re-verifies buffer accounting and every
    delivery checks the minimum processing chain.
    """

    def __init__(self, cfg: SimConfig, seed: int = 1, selector: FrameSelector | None = None, *,
                 topology: Topology | None = None, links: LinkMatrix | None = None,
                 arrivals: Sequence[tuple[int, int]] | None = None, check_invariants: bool = False,
                 trace: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.check_invariants = check_invariants
        self.trace = trace
        net, tr, ch, mc, td, run = cfg.network, cfg.traffic, cfg.channel, cfg.mac, cfg.tdd, cfg.run
        topo_ss, chan_ss, traffic_ss, mac_ss, dec_ss = np.random.SeedSequence(seed).spawn(5)
        self.mac_rng = np.random.default_rng(mac_ss)
        self.decode_rng = np.random.default_rng(dec_ss)

        self.clock = Clock(SYMBOLS_PER_SLOT, net.slots_per_frame, net.symbol_duration_s * 1e6)
        self.spf = self.clock.symbols_per_frame
        self.tti_sym = net.tti_symbols
        self.n_ttis = net.ttis_per_frame
        self.sym_s = net.symbol_duration_s
        self.tti_s = self.tti_sym * self.sym_s
        self.delays = ProcessingDelays(run.pdsch_prep_symbols, run.pusch_prep_symbols,
                                       run.pdsch_decode_symbols, run.pusch_decode_symbols)
        self.d_pdsch_prep, self.d_pusch_prep, self.d_pdsch_dec, self.d_pusch_dec = self.delays.symbols()
        self.end_symbol = int(round(run.duration_s / self.sym_s))
        self.warm_symbol = run.warmup_frames * self.spf
        if self.warm_symbol >= self.end_symbol:
            raise ConfigError("warm-up covers the whole horizon", "run.warmup_frames")

        self.topology = topology if topology is not None else build_topology(net, np.random.default_rng(topo_ss), tr)
        if links is None:
            links = build_link_matrix(self.topology, PathlossParams.from_config(ch), np.random.default_rng(chan_ss),
                                      net.carrier_freq_ghz)
        self.links = links
        C, Uc = self.topology.num_cells, self.topology.num_ues
        self.C, self.U = C, Uc
        self.gain_lin = links.linear()
        self.ue_cell = self.topology.cell_of_ue.tolist()
        self.ue_role = self.topology.ue_role.tolist()
        self.ue_service = [EMBB if r == DL_EMBB else URLLC for r in self.ue_role]
        self.cell_dl_ues = [[u for u in range(Uc) if self.ue_cell[u] == c and self.ue_role[u] != UL_URLLC]
                            for c in range(C)]
        self.cell_ul_ues = [[u for u in range(Uc) if self.ue_cell[u] == c and self.ue_role[u] == UL_URLLC]
                            for c in range(C)]
        # coupling loss to the serving BS (pathloss plus shadowing), the power-control input
        self.ue_pl_db = [float(-links.gain_db[self.ue_cell[u], C + u]) for u in range(Uc)]

        # radio
        self.curves = mcs_table(ch.mcs_gap_db)
        validate_curves(self.curves)
        self.s50 = np.array([c.sinr_50pct_db for c in self.curves])
        self.slope = np.array([c.slope_db for c in self.curves])
        self.num_prbs = net.num_prbs
        self.bf_lin = 10 ** ((ch.bf_gain_bs_db + ch.bf_gain_ue_db) / 10)
        self.irc_lin = 10 ** (-ch.irc_suppression_db / 10)
        self.bs_psd_mw = 10 ** ((net.bs_power_dbm - 10 * math.log10(net.num_prbs)) / 10)
        self.noise_ue_mw = 10 ** (noise_dbm(net.prb_bandwidth_hz, ch.ue_noise_figure_db) / 10)
        self.noise_bs_mw = 10 ** (noise_dbm(net.prb_bandwidth_hz, ch.bs_noise_figure_db) / 10)
        self.bpp = {ds: [mac.bits_per_prb(ds, c.spectral_eff, ch.re_overhead) for c in self.curves]
                    for ds in range(1, self.tti_sym + 1)}
        self.pc = PowerControlConfig(mc.p0_dbm, mc.alpha, net.ue_max_power_dbm, mc.retx_boost_db)
        self.cg = CgConfig(mc.cg_mcs, mc.cg_subbands, mc.cg_subband_prbs, net.num_prbs - mc.cg_subbands * mc.cg_subband_prbs)
        if not 0 <= mc.cg_mcs < len(self.curves):
            raise ConfigError(f"{mc.cg_mcs} is outside the MCS table", "mac.cg_mcs")
        if tr.k_ul and tr.lambda_ul > 0:
            try:
                mac.check_cg_capacity(self.cg, self.curves, self.tti_sym - 1, ch.re_overhead, tr.urllc_pkt_ul_bits)
            except ValueError as exc:
                raise ConfigError(str(exc), "traffic.urllc_pkt_ul_bits") from None
        self.scheduler = mac.SCHEDULERS[mc.scheduler]
        self.sched_kw = dict(rbg_size=mc.rbg_size, overhead_prbs=mc.overhead_prbs_per_alloc,
                             forgetting=mc.pf_forgetting, tti_s=self.tti_s)
        self.beta = mc.pf_forgetting
        self.weight = [mc.urllc_weight if s == URLLC else 1.0 for s in self.ue_service]

        # link adaptation: start from the geometry SINR with every other BS at full power
        self.thresholds = {t: np.array([c.sinr_for_bler(t) for c in self.curves])
                           for t in (mc.target_bler_urllc, mc.target_bler_embb)}
        # CQI saturates at the top MCS, as a finite CQI table would
        self.cqi_cap_db = float(self.thresholds[mc.target_bler_urllc][-1])
        self.ue_target = [mc.target_bler_embb if s == EMBB else mc.target_bler_urllc for s in self.ue_service]
        g = self.gain_lin[:C, C:]
        own = g[self.topology.cell_of_ue, np.arange(Uc)] if Uc else np.zeros(0)
        geo = own * self.bf_lin * self.bs_psd_mw / ((g.sum(axis=0) - own) * self.bs_psd_mw * self.irc_lin
                                                    + self.noise_ue_mw)
        self.cqi_db = (10 * np.log10(geo)).tolist() if Uc else []
        self.olla = [0.0] * Uc
        self.olla_up = [mc.olla_step_db * t / (1 - t) for t in self.ue_target]
        self.mcs = [self._mcs_for(u) for u in range(Uc)]
        # CQI accumulators: desired power and interference-plus-noise, linear
        self.cqi_sig = [0.0] * Uc
        self.cqi_in = [0.0] * Uc
        self.cqi_period = max(1, int(round(mc.cqi_period_ms * 1e-3 / self.sym_s)))
        self.cqi_pending: deque = deque()

        # PF averages, lazily decayed by the number of DL TTIs of the UE's cell
        self.avg = [1.0] * Uc
        self.avg_mark = [0] * Uc
        self.dl_ttis_done = [0] * C

        # per-UE state
        self.buffers = [UeBuffer() for _ in range(Uc)]
        self.ul_retx: list[deque] = [deque() for _ in range(Uc)]
        self.bler_est = [BlerEstimator(td.iota_window, td.iota_min) for _ in range(Uc)]
        self.dl_active = [set() for _ in range(C)]
        self.ul_active = [set() for _ in range(C)]

        # per-cell state
        self.dl_retx: list[list] = [[] for _ in range(C)]
        self.pending_nack: list[list] = [[] for _ in range(C)]
        self.pending_grant: list[list] = [[] for _ in range(C)]
        self.z = [[0.0, 0.0, 0.0, 0.0] for _ in range(C)]
        self.obs = np.zeros((C, net.slots_per_frame, 4))
        self.urllc_configured = [
            any(self.ue_role[u] == DL_URLLC for u in self.cell_dl_ues[c]) and tr.lambda_dl > 0
            or bool(self.cell_ul_ues[c]) and tr.lambda_ul > 0
            for c in range(C)]
        if selector is None:
            selector = BufferRatioSelector(td.selection_mode, self.n_ttis, self.tti_sym, td.min_dl_ttis,
                                           td.min_ul_ttis, td.neutral_mu, self.urllc_configured)
        self.selector = selector
        first = build_frame(td.neutral_mu, self.n_ttis, td.min_dl_ttis, td.min_ul_ttis, self.tti_sym)
        self.frames = [first] * C
        self._ds_cache: dict[str, tuple[int, ...]] = {}
        self.frame_ds = [self._frame_ds(first)] * C
        self.frame_log: list[tuple[int, int, float, float, str]] = []
        if run.record_frames:
            self.frame_log += [(0, c, td.neutral_mu, first.dl_fraction, first.pattern) for c in range(C)]
        self.ul_detected = td.ul_visibility == "detected"

        # traffic
        self._build_arrivals(np.random.default_rng(traffic_ss), arrivals)
        self.next_pkt_id = 0

        # events and statistics
        self.pending: dict[int, list] = defaultdict(list)
        # per-TTI reception columns: rx node, tx row, prb lo, prb hi, psd, noise, HARQ owner, mcs, combined SINR
        self._rx: tuple[list, ...] = tuple([] for _ in range(9))
        self._tx_nodes: list[int] = []
        self.symbol = 0
        self.counters = {k: 0 for k in COUNTER_NAMES}
        self.samples: list[tuple[int, str, str, bool]] = []
        self.embb_ues = [u for u in range(Uc) if self.ue_service[u] == EMBB]
        n_frames = math.ceil(self.end_symbol / self.spf)
        self.embb_bits = {u: [0] * n_frames for u in self.embb_ues}
        self.embb_window_bits = {u: 0 for u in self.embb_ues}
        self.powers_dbm: list[float] = []
        self.min_chain = {DIR_DL: self.d_pdsch_prep + self.tti_sym + self.d_pdsch_dec,
                          DIR_UL: self.d_pusch_prep + self.tti_sym + self.d_pusch_dec}

    # ------------------------------------------------------------------ setup
    def _mcs_for(self, u: int) -> int:
        th = self.thresholds[self.ue_target[u]]
        est = min(self.cqi_db[u], self.cqi_cap_db) + self.olla[u]
        return max(0, int(np.searchsorted(th, est, side="right")) - 1)

    def _build_arrivals(self, rng: np.random.Generator, fixed: Sequence[tuple[int, int]] | None) -> None:
        tr = self.cfg.traffic
        horizon = self.end_symbol * self.sym_s
        times, ues = [], []
        if fixed is not None:
            for u, sym in sorted(fixed, key=lambda x: (x[1], x[0])):
                times.append(np.array([sym], dtype=np.int64))
                ues.append(np.array([u]))
        else:
            for u in range(self.U):
                role = self.ue_role[u]
                if role == DL_URLLC:
                    t = poisson_arrivals(tr.lambda_dl, horizon, rng)
                elif role == UL_URLLC:
                    t = poisson_arrivals(tr.lambda_ul, horizon, rng)
                else:
                    period = tr.embb_pkt_bits / tr.embb_rate_bps if tr.embb_rate_bps > 0 else 0.0
                    t = cbr_arrivals(tr.embb_pkt_bits, tr.embb_rate_bps, horizon, phase=rng.uniform(0, period))
                times.append(to_symbols(t, self.sym_s))
                ues.append(np.full(len(t), u))
        t_all = np.concatenate(times) if times else np.zeros(0, dtype=np.int64)
        u_all = np.concatenate(ues) if ues else np.zeros(0, dtype=int)
        order = np.lexsort((u_all, t_all))
        keep = t_all[order] < self.end_symbol
        self.arr_time = t_all[order][keep].tolist()
        self.arr_ue = u_all[order][keep].tolist()
        self.arr_ptr = 0
        self.pkt_bits = {DL_URLLC: tr.urllc_pkt_dl_bits, UL_URLLC: tr.urllc_pkt_ul_bits, DL_EMBB: tr.embb_pkt_bits}

    # --------------------------------------------------------------- main loop
    def run(self) -> SimReport:
        while self.symbol < self.end_symbol:
            self.advance_symbol()
        return self.report()

    def advance_symbol(self) -> list[tuple]:
        """Process everything scheduled at the current symbol, then tick the clock."""
        s = self.symbol
        events: list[tuple] = []
        due = self.pending.pop(s, None)
        if due:
            for ev in due:
                self._decode_done(ev, s, events)
        if s and s % SYMBOLS_PER_SLOT == 0:
            slot = (s // SYMBOLS_PER_SLOT - 1) % self.clock.slots_per_frame
            self.obs[:, slot, :] = self.z
        if s % self.spf == 0:
            self._frame_boundary(s, events)
        if s % self.tti_sym == 0:
            self._tti(s, events)
        self._arrivals(s)
        self.symbol = s + 1
        return events

    # ------------------------------------------------------------ components
    def _arrivals(self, s: int) -> None:
        times, ptr = self.arr_time, self.arr_ptr
        n = len(times)
        while ptr < n and times[ptr] == s:
            u = self.arr_ue[ptr]
            ptr += 1
            role = self.ue_role[u]
            bits = self.pkt_bits[role]
            c = self.ue_cell[u]
            if role == UL_URLLC:
                p = Packet(self.next_pkt_id, u, DIR_UL, URLLC, bits, s, s + self.d_pusch_prep)
                self.ul_active[c].add(u)
            else:
                svc = self.ue_service[u]
                p = Packet(self.next_pkt_id, u, DIR_DL, svc, bits, s, s + self.d_pdsch_prep)
                self.z[c][Z_DL_URLLC if svc == URLLC else Z_DL_EMBB] += bits
                self.dl_active[c].add(u)
            self.next_pkt_id += 1
            enqueue(self.buffers[u], p)
            self.counters["arrivals"] += 1
            if s >= self.warm_symbol:
                self.counters["measured_arrivals"] += 1
        self.arr_ptr = ptr

    def _frame_boundary(self, s: int, events: list) -> None:
        if s == 0:
            return
        frame_idx = s // self.spf
        for c in range(self.C):
            iota = pooled_iota((self.bler_est[u] for u in self.cell_ul_ues[c]), self.cfg.tdd.iota_min)
            frame, mu_bar = self.selector.select(c, self.obs[c], iota)
            if self.check_invariants:
                frame.validate()
            self.frames[c] = frame
            self.frame_ds[c] = self._frame_ds(frame)
            if self.cfg.run.record_frames:
                self.frame_log.append((frame_idx, c, float(mu_bar), frame.dl_fraction, frame.pattern))
            events.append(("frame", c, frame.pattern))
        self.obs[:] = 0.0

    def _deliver(self, p: Packet, t: int, events: list) -> None:
        p.delivered_time = t
        self.counters["deliveries"] += 1
        lat = t - p.arrival_time
        if self.check_invariants:
            assert lat >= self.min_chain[p.direction], f"causality: packet {p.id} latency {lat} symbols"
        if p.arrival_time >= self.warm_symbol:
            self.samples.append((lat, p.service, p.direction, False))
        if self.trace:
            events.append(("deliver", p.id, lat))

    def _drop(self, p: Packet, t: int, events: list) -> None:
        p.dropped = True
        self.counters["drops"] += 1
        if p.direction == DIR_DL and p.remaining_bits:
            removed = p.remaining_bits
            self.buffers[p.ue_id].remove(p)
            self.z[self.ue_cell[p.ue_id]][Z_DL_URLLC if p.service == URLLC else Z_DL_EMBB] -= removed
        if p.arrival_time >= self.warm_symbol:
            self.samples.append((t - p.arrival_time, p.service, p.direction, True))
        if self.trace:
            events.append(("drop", p.id))

    def _decode_done(self, ev, t: int, events: list) -> None:
        kind, obj, ok = ev
        if kind == DIR_DL:
            tb: DlTb = obj
            if tb.proc.tx_count == 1 and self.cfg.mac.olla_step_db:
                self._olla_update(tb.ue, ok)
            action = mac.harq_dl_step(tb.proc, DECODE_OK if ok else DECODE_FAIL)
            if action == "deliver":
                in_window = self.warm_symbol <= t < self.end_symbol
                for p, bits in tb.segments:
                    p.inflight -= 1
                    if tb.service == EMBB:
                        self.embb_bits[tb.ue][t // self.spf] += bits
                        if in_window:
                            self.embb_window_bits[tb.ue] += bits
                    if not p.done and p.remaining_bits == 0 and p.inflight == 0:
                        self._deliver(p, t, events)
            elif action == "send_nack":
                self.pending_nack[tb.cell].append((t + self.d_pusch_prep, tb))
                self.z[tb.cell][Z_DL_URLLC if tb.service == URLLC else Z_DL_EMBB] += tb.bits
            else:
                for p, _ in tb.segments:
                    p.inflight -= 1
                    if not p.done:
                        self._drop(p, t, events)
        else:
            up: UlProc = obj
            if up.proc.tx_count == 1:
                update_iota(self.bler_est[up.ue], not ok)
            action = mac.harq_ul_step(up.proc, DECODE_OK if ok else DECODE_FAIL)
            bits = up.packet.size_bits
            if action == "send_grant":
                self.pending_grant[up.cell].append((t + self.d_pdsch_prep, up))
                if not up.visible:
                    up.visible = True
                    self.z[up.cell][Z_UL_URLLC] += bits
                return
            if up.visible:
                up.visible = False
                self.z[up.cell][Z_UL_URLLC] -= bits
            if action == "deliver":
                self._deliver(up.packet, t, events)
            else:
                self._drop(up.packet, t, events)

    def _olla_update(self, u: int, ok: bool) -> None:
        if ok:
            self.olla[u] = min(0.0, self.olla[u] + self.olla_up[u])
        else:
            self.olla[u] = max(self.cfg.mac.olla_min_db, self.olla[u] - self.cfg.mac.olla_step_db)
        self.mcs[u] = self._mcs_for(u)

    def _frame_ds(self, frame) -> tuple[int, ...]:
        key = frame.pattern
        ds = self._ds_cache.get(key)
        if ds is None:
            ds = self._ds_cache[key] = tuple(frame.data_symbols(j) for j in range(frame.n_ttis))
        return ds

    def _avg(self, u: int) -> float:
        c = self.ue_cell[u]
        k = self.dl_ttis_done[c] - self.avg_mark[u]
        if k:
            self.avg[u] *= (1 - self.beta) ** k
            self.avg_mark[u] = self.dl_ttis_done[c]
        return max(self.avg[u], 1.0)

    def _tti(self, s: int, events: list) -> None:
        j = (s % self.spf) // self.tti_sym
        if s % self.cqi_period == 0 and s:
            self._cqi_report(s)
        while self.cqi_pending and self.cqi_pending[0][0] <= s:
            _, report = self.cqi_pending.popleft()
            for u, val in report:
                self.cqi_db[u] = val
                self.mcs[u] = self._mcs_for(u)

        # transmit decisions for every cell, then one joint SINR pass
        rx = self._rx
        for col in rx:
            col.clear()
        self._tx_nodes.clear()
        for c, frame in enumerate(self.frames):
            if frame.tti_directions[j] == U:
                if self.pending_nack[c]:
                    self._ul_feedback(c, s)
                if self.ul_active[c]:
                    self._ul_transmit(c, s)
            else:
                if self.pending_grant[c]:
                    self._dl_feedback(c, s)
                if self.dl_active[c] or self.dl_retx[c]:
                    self._dl_transmit(c, s, j, self.frame_ds[c][j], events)
                self.dl_ttis_done[c] += 1
        if rx[0]:
            self._resolve(s)
        if self.check_invariants:
            for b in self.buffers:
                b.check()
            for c in range(self.C):
                assert all(z >= -1e-9 for z in self.z[c])

    # ---------------------------------------------------------------- DL side
    def _dl_feedback(self, c: int, s: int) -> None:
        grants = self.pending_grant[c]
        if not grants:
            return
        keep = []
        for ready, up in grants:
            if ready <= s:
                mac.harq_ul_step(up.proc, GRANT_DELIVERED)
                self.ul_retx[up.ue].append((s + self.d_pusch_prep, up))
                self.ul_active[c].add(up.ue)
            else:
                keep.append((ready, up))
        self.pending_grant[c] = keep

    def _dl_transmit(self, c, s, j, ds, events) -> None:
        mc = self.cfg.mac
        pool_start = mc.control_prbs
        pool = self.num_prbs - mc.control_prbs
        ovh = mc.overhead_prbs_per_alloc
        allocs = []  # (tb, lo, hi, sinr_acc)
        bpp = self.bpp[ds]
        if self.dl_retx[c]:
            keep = []
            for ready, tb in self.dl_retx[c]:
                if ready > s:
                    keep.append((ready, tb))
                    continue
                prbs = max(1, math.ceil(tb.bits / bpp[tb.mcs] - 1e-9))
                if prbs + ovh > pool:
                    keep.append((ready, tb))
                    continue
                lo = pool_start + ovh
                allocs.append((tb, lo, lo + prbs))
                pool_start = lo + prbs
                pool -= prbs + ovh
                mac.harq_dl_step(tb.proc, TX_DONE)
                self.z[c][Z_DL_URLLC if tb.service == URLLC else Z_DL_EMBB] -= tb.bits
                self.counters["retx"] += 1
            self.dl_retx[c] = keep

        active = self.dl_active[c]
        if active and pool > ovh:
            cands = []
            for u in sorted(active):
                q = self.buffers[u].queue
                if not q or q[0].ready_time > s:
                    continue
                pk = []
                for p in q:
                    if p.ready_time > s:
                        break
                    pk.append(p.remaining_bits)
                m = self.mcs[u]
                cands.append(DlCandidate(u, self.ue_service[u], pk, bpp[m], m, self._avg(u),
                                         (s - q[0].arrival_time) * self.sym_s, self.weight[u]))
            if cands:
                dec = self.scheduler(cands, pool, j, prb_start=pool_start, **self.sched_kw)
                if self.check_invariants:
                    assert dec.used_prbs() <= pool
                for a in dec.allocations:
                    u = a.ue_id
                    segs, _ = extract_bits(self.buffers[u], a.bits, now=s)
                    for p, _b in segs:
                        p.inflight += 1
                        p.first_tx_done = True
                    proc = HarqProcess(DIR_DL, mc.max_retx)
                    tb = DlTb(proc, u, c, segs, a.bits, a.mcs, a.service)
                    mac.harq_dl_step(proc, TX_DONE)
                    self.z[c][Z_DL_URLLC if a.service == URLLC else Z_DL_EMBB] -= a.bits
                    allocs.append((tb, a.prb_start, a.prb_start + a.prb_count))
                    self.avg[u] = self._avg(u) + self.beta * a.bits / self.tti_s
                    if a.segmented and a.service == URLLC:
                        self.counters["segmentations"] += 1
                    if not self.buffers[u].queue:
                        active.discard(u)
                events.append(("dl_sched", c, dec))
        if not allocs:
            return
        row = len(self._tx_nodes)
        self._tx_nodes.append(c)
        for tb, lo, hi in allocs:
            self._add_rx(self.C + tb.ue, row, lo, hi, self.bs_psd_mw, self.noise_ue_mw, tb, tb.mcs)

    # ---------------------------------------------------------------- UL side
    def _ul_feedback(self, c: int, s: int) -> None:
        nacks = self.pending_nack[c]
        if not nacks:
            return
        keep = []
        for ready, tb in nacks:
            if ready <= s:
                mac.harq_dl_step(tb.proc, FEEDBACK_DELIVERED)
                self.dl_retx[c].append((s + self.d_pdsch_prep, tb))
            else:
                keep.append((ready, tb))
        self.pending_nack[c] = keep

    def _ul_transmit(self, c, s) -> None:
        active = self.ul_active[c]
        if not active:
            return
        done = []
        for u in sorted(active):
            q = self.ul_retx[u]
            buf = self.buffers[u]
            if q and q[0][0] <= s:
                _, up = q.popleft()
                up.tx = mac.cg_transmit(u, up.packet, self.ue_pl_db[u], self.pc, self.cg, self.mac_rng, retx_of=up.tx)
                self.counters["retx"] += 1
            elif buf.queue and buf.queue[0].ready_time <= s:
                head = buf.queue[0]
                extract_bits(buf, head.remaining_bits, now=s)
                head.first_tx_done = True
                tx = mac.cg_transmit(u, head, self.ue_pl_db[u], self.pc, self.cg, self.mac_rng)
                up = UlProc(HarqProcess(DIR_UL, self.cfg.mac.max_retx), u, c, head, tx)
                if self.ul_detected:
                    up.visible = True
                    self.z[c][Z_UL_URLLC] += head.size_bits
            else:
                if not q and not buf.queue:
                    done.append(u)
                continue
            mac.harq_ul_step(up.proc, TX_DONE)
            if not q and not buf.queue:
                done.append(u)
            tx = up.tx
            if self.check_invariants:
                assert -100 <= tx.power_dbm <= self.pc.sigma_max_dbm + 1e-9
            psd = 10 ** ((tx.power_dbm - 10 * math.log10(tx.prb_hi - tx.prb_lo)) / 10)
            row = len(self._tx_nodes)
            self._tx_nodes.append(self.C + u)
            self._add_rx(c, row, tx.prb_lo, tx.prb_hi, psd, self.noise_bs_mw, up, tx.mcs)
        for u in done:
            active.discard(u)

    # ------------------------------------------------------------ resolution
    def _add_rx(self, rx_node, tx_row, lo, hi, psd_mw, noise_mw, obj, mcs) -> None:
        for col, v in zip(self._rx, (rx_node, tx_row, lo, hi, psd_mw, noise_mw, obj, mcs, obj.proc.sinr_acc)):
            col.append(v)
        self.counters["transmissions"] += 1

    def _resolve(self, s: int) -> None:
        rx_node, rows, los, his, levels, noises, objs, mcss, accs = self._rx
        R = len(rx_node)
        tx_idx = np.array(self._tx_nodes)[rows]
        rx_idx = np.array(rx_node)
        lo = np.array(los)
        hi = np.array(his)
        level = np.array(levels)
        # every reception is also exactly one transmitted PRB segment, so
        # interference is a segment-by-reception overlap sum
        overlap = np.minimum(hi[:, None], hi[None, :]) - np.maximum(lo[:, None], lo[None, :])
        np.maximum(overlap, 0, out=overlap)
        G = self.gain_lin[tx_idx[:, None], rx_idx[None, :]]  # (segment, reception)
        width = hi - lo
        own_g = G.diagonal()
        total = (level @ (G * overlap))
        interference = np.maximum(total - own_g * level * width, 0.0) / width * self.irc_lin
        sinr_lin = own_g * self.bf_lin * level / (interference + np.array(noises))
        mcs = np.array(mcss)
        eff = sinr_lin + np.array(accs) if self.cfg.mac.harq_combining == "chase" else sinr_lin
        x = (10 * np.log10(eff) - self.s50[mcs]) / self.slope[mcs]
        ok = self.decode_rng.random(R) >= 0.5 * (1.0 - np.tanh(0.5 * x))

        # receptions overlapping an opposite-direction transmission
        is_dl = np.array([o.__class__ is DlTb for o in objs])
        opp = ((overlap > 0) & (is_dl[:, None] != is_dl[None, :])).any(axis=0)
        self.counters["cli_receptions"] += int(opp.sum())
        self.counters["receptions"] += R

        end_dl = self.pending[s + self.tti_sym + self.d_pdsch_dec]
        end_ul = self.pending[s + self.tti_sym + self.d_pusch_dec]
        sig = (own_g * self.bf_lin * level).tolist()
        i_n = (interference + np.array(noises)).tolist()
        for o, dl, e, good, a, b in zip(objs, is_dl.tolist(), eff.tolist(), ok.tolist(), sig, i_n):
            o.proc.sinr_acc = e
            if dl:
                u = o.ue
                self.cqi_sig[u] += a
                self.cqi_in[u] += b
                end_dl.append((DIR_DL, o, good))
            else:
                end_ul.append((DIR_UL, o, good))

    def _cqi_report(self, s: int) -> None:
        report = []
        # ratio of averages: a few interfered TTIs pull the estimate down,
        # unlike a mean of dB values dominated by the clean TTIs
        for u in range(self.U):
            i_n = self.cqi_in[u]
            if i_n:
                report.append((u, 10 * math.log10(self.cqi_sig[u] / i_n)))
                self.cqi_sig[u] = 0.0
                self.cqi_in[u] = 0.0
        if report:
            self.cqi_pending.append((s + self.cfg.mac.cqi_delay_ttis * self.tti_sym, report))

    # ---------------------------------------------------------------- report
    def report(self) -> SimReport:
        c = self.counters
        c["in_flight"] = c["arrivals"] - c["deliveries"] - c["drops"]
        if self.samples:
            lat, svc, dirs, drop = zip(*self.samples)
        else:
            lat, svc, dirs, drop = (), (), (), ()
        window_s = (self.end_symbol - self.warm_symbol) * self.sym_s
        thr = np.array([self.embb_window_bits[u] / window_s for u in self.embb_ues], dtype=float)
        return SimReport(
            symbol_duration_s=self.sym_s,
            latency_symbols=np.array(lat, dtype=np.int64),
            service=np.array(svc, dtype="<U5"),
            direction=np.array(dirs, dtype="<U2"),
            dropped=np.array(drop, dtype=bool),
            embb_throughput_bps=thr,
            embb_bits_per_frame=[self.embb_bits[u] for u in self.embb_ues],
            counters=dict(c),
            config=self.cfg.to_dict(),
            seeds=[self.seed],
            frames=list(self.frame_log),
        )

    def in_flight_packets(self) -> int:
        return self.counters["arrivals"] - self.counters["deliveries"] - self.counters["drops"]


def run(cfg: SimConfig, seed: int = 1, **kwargs) -> SimReport:
    """Build a :class:`Simulator` and run it to the configured horizon."""
    return Simulator(cfg, seed, **kwargs).run()
