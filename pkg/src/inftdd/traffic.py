"""Packet sources (FTP3 Poisson for URLLC, CBR for eMBB) and per-UE FIFO buffers."""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DL, UL = "DL", "UL"
URLLC, EMBB = "URLLC", "eMBB"


@dataclass(slots=True, eq=False)
class Packet:
    id: int
    ue_id: int
    direction: str
    service: str
    size_bits: int
    arrival_time: int
    ready_time: int = 0
    remaining_bits: int = -1
    first_tx_done: bool = False
    delivered_time: int | None = None
    dropped: bool = False
    # transport blocks carrying parts of this packet that are not yet acknowledged
    inflight: int = 0

    def __post_init__(self):
        if self.remaining_bits < 0:
            self.remaining_bits = self.size_bits

    @property
    def done(self) -> bool:
        return self.delivered_time is not None or self.dropped


class UeBuffer:
    """FIFO of packets with an exact running bit count."""

    __slots__ = ("queue", "total_buffered_bits", "enqueued_bits", "extracted_bits", "removed_bits")

    def __init__(self):
        self.queue: deque[Packet] = deque()
        self.total_buffered_bits = 0
        self.enqueued_bits = 0
        self.extracted_bits = 0
        self.removed_bits = 0

    def __len__(self) -> int:
        return len(self.queue)

    def __bool__(self) -> bool:
        return bool(self.queue)

    def head(self) -> Packet | None:
        return self.queue[0] if self.queue else None

    def ready_bits(self, now: int | None = None) -> int:
        """Buffered bits of the FIFO prefix whose preparation is complete at ``now``."""
        if now is None:
            return self.total_buffered_bits
        total = 0
        for p in self.queue:
            if p.ready_time > now:
                break
            total += p.remaining_bits
        return total

    def ready_packets(self, now: int | None = None) -> list[Packet]:
        out = []
        for p in self.queue:
            if now is not None and p.ready_time > now:
                break
            out.append(p)
        return out

    def remove(self, packet: Packet) -> None:
        """Drop a packet's unsent bits (used when HARQ gives up on it)."""
        try:
            self.queue.remove(packet)
        except ValueError:
            return
        self.total_buffered_bits -= packet.remaining_bits
        self.removed_bits += packet.remaining_bits
        packet.remaining_bits = 0

    def check(self) -> None:
        assert self.total_buffered_bits == sum(p.remaining_bits for p in self.queue)
        assert self.enqueued_bits == self.extracted_bits + self.removed_bits + self.total_buffered_bits


def enqueue(buffer: UeBuffer, packet: Packet) -> UeBuffer:
    if buffer.queue and buffer.queue[-1].arrival_time > packet.arrival_time:
        raise ValueError("packets must be enqueued in arrival order")
    buffer.queue.append(packet)
    buffer.total_buffered_bits += packet.remaining_bits
    buffer.enqueued_bits += packet.remaining_bits
    return buffer


def extract_bits(buffer: UeBuffer, max_bits: int, now: int | None = None) -> tuple[list[tuple[Packet, int]], UeBuffer]:
    """Serve up to ``max_bits`` in FIFO order; only the last served packet may be split.

    When ``now`` is given, packets whose ``ready_time`` is later are not served.
    """
    if max_bits < 0:
        raise ValueError("max_bits must be >= 0")
    taken: list[tuple[Packet, int]] = []
    budget = int(max_bits)
    q = buffer.queue
    while budget > 0 and q:
        p = q[0]
        if now is not None and p.ready_time > now:
            break
        bits = min(budget, p.remaining_bits)
        p.remaining_bits -= bits
        budget -= bits
        taken.append((p, bits))
        if p.remaining_bits == 0:
            q.popleft()
    served = int(max_bits) - budget
    buffer.total_buffered_bits -= served
    buffer.extracted_bits += served
    return taken, buffer


def poisson_arrivals(lam: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times (s) in ``[0, horizon)`` with exponential gaps of mean ``1/lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0 or horizon <= 0:
        return np.zeros(0)
    mean = lam * horizon
    chunks, t = [], 0.0
    while t < horizon:
        n = int(mean + 6 * math.sqrt(mean) + 16)
        times = t + np.cumsum(rng.exponential(1.0 / lam, size=n))
        chunks.append(times)
        t = times[-1]
    times = np.concatenate(chunks)
    return times[times < horizon]


def cbr_arrivals(pkt_bits: float, rate_bps: float, horizon: float, phase: float | None = None) -> np.ndarray:
    """Periodic arrivals every ``pkt_bits / rate_bps`` seconds, first at ``phase``.

    ``phase`` defaults to one period.
    """
    if rate_bps <= 0 or pkt_bits <= 0 or horizon <= 0:
        return np.zeros(0)
    period = pkt_bits / rate_bps
    start = period if phase is None else phase
    n = max(0, math.ceil((horizon - start) / period))
    times = start + period * np.arange(n)
    return times[times < horizon]


def write_packet_trace(packets: Iterable[Packet], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pkt_id", "ue", "dir", "service", "bits", "arrival_sym", "delivered_sym"])
        for p in packets:
            w.writerow([p.id, p.ue_id, p.direction, p.service, p.size_bits, p.arrival_time,
                        "" if p.delivered_time is None else p.delivered_time])


@dataclass
class ArrivalStream:
    """Pre-drawn arrivals of one UE, in symbols."""

    ue_id: int
    direction: str
    service: str
    size_bits: int
    symbols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def to_symbols(times_s: np.ndarray, symbol_duration_s: float) -> np.ndarray:
    """Quantize arrival times to the next OFDM-symbol boundary."""
    return np.ceil(np.round(times_s / symbol_duration_s, 9)).astype(np.int64)
