"""Latency and throughput statistics and the run report.

Quantiles are nearest-rank (``sorted[ceil(q*n)]``, 1-indexed) without
interpolation.  Dropped packets sit in the latency tail as ``+inf``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

EXCEEDS_HORIZON = "exceeds_horizon"
NO_DATA = "no_data"
REPORT_QUANTILES = {"p50": 0.5, "p99": 0.99, "p999": 0.999, "p99999": 0.99999}


def quantile(samples: Sequence[float], q: float) -> float | None:
    """Nearest-rank quantile; ``None`` when there are no samples."""
    if not 0 < q < 1:
        raise ValueError("q must be in (0, 1)")
    n = len(samples)
    if n == 0:
        return None
    s = np.sort(np.asarray(samples, dtype=float))
    rank = max(1, math.ceil(q * n - 1e-9))
    return float(s[rank - 1])


def ccdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    """``P(X > x)`` at each distinct sample value."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = len(s)
    if n == 0:
        raise ValueError("ccdf of an empty sample")
    values, counts = np.unique(s, return_counts=True)
    below = np.cumsum(counts)
    return [(float(v), float((n - b) / n)) for v, b in zip(values, below)]


def ecdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    """``P(X <= x)`` at each distinct sample value."""
    s = np.asarray(samples, dtype=float)
    n = len(s)
    if n == 0:
        raise ValueError("ecdf of an empty sample")
    values, counts = np.unique(s, return_counts=True)
    return [(float(v), float(c / n)) for v, c in zip(values, np.cumsum(counts))]


def min_samples_for(reliability: float) -> int:
    return math.ceil(10 / (1 - reliability))


def outage_latency(samples: Sequence[float], reliability: float, dropped: Sequence[bool] | None = None) -> float | None:
    """Latency at the ``reliability`` quantile with drops counted as ``+inf``.

    ``inf`` means the target is not reached within the horizon; ``None``
    means no samples at all.
    """
    x = np.asarray(samples, dtype=float)
    if dropped is not None:
        x = np.where(np.asarray(dropped, dtype=bool), np.inf, x)
    return quantile(x, reliability)


def is_low_confidence(n: int, reliability: float) -> bool:
    return n < min_samples_for(reliability)


def embb_ecdf(delivered_bits: Sequence[float], window_s: float) -> list[tuple[float, float]]:
    """ECDF of per-UE throughput in Mbps."""
    if window_s <= 0:
        raise ValueError("window must be > 0")
    return ecdf(np.asarray(delivered_bits, dtype=float) / window_s / 1e6)


def _fmt_latency(value: float | None) -> float | str:
    if value is None:
        return NO_DATA
    if math.isinf(value):
        return EXCEEDS_HORIZON
    return round(value * 1e3, 6)


COUNTER_NAMES = ("arrivals", "deliveries", "drops", "in_flight", "transmissions", "retx", "segmentations",
                 "cli_receptions", "receptions", "measured_arrivals")


@dataclass
class SimReport:
    symbol_duration_s: float
    latency_symbols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    service: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype="<U5"))
    direction: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype="<U2"))
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    embb_throughput_bps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    embb_bits_per_frame: list[list[int]] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=lambda: {k: 0 for k in COUNTER_NAMES})
    config: dict[str, Any] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    frames: list[tuple[int, int, float, float, str]] = field(default_factory=list)

    # --- selections -----------------------------------------------------
    def latencies_s(self, service: str | None = "URLLC", direction: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        mask = np.ones(len(self.latency_symbols), dtype=bool)
        if service is not None:
            mask &= self.service == service
        if direction is not None:
            mask &= self.direction == direction
        return self.latency_symbols[mask] * self.symbol_duration_s, self.dropped[mask]

    def outage(self, reliability: float, service: str | None = "URLLC", direction: str | None = None) -> float | None:
        lat, drop = self.latencies_s(service, direction)
        return outage_latency(lat, reliability, drop)

    def embb_median_mbps(self) -> float | None:
        if len(self.embb_throughput_bps) == 0:
            return None
        return float(np.median(self.embb_throughput_bps)) / 1e6

    # --- aggregation ----------------------------------------------------
    def merge(self, other: "SimReport") -> "SimReport":
        if not math.isclose(self.symbol_duration_s, other.symbol_duration_s):
            raise ValueError("cannot merge reports with different symbol durations")
        return SimReport(
            self.symbol_duration_s,
            np.concatenate([self.latency_symbols, other.latency_symbols]),
            np.concatenate([self.service, other.service]),
            np.concatenate([self.direction, other.direction]),
            np.concatenate([self.dropped, other.dropped]),
            np.concatenate([self.embb_throughput_bps, other.embb_throughput_bps]),
            self.embb_bits_per_frame + other.embb_bits_per_frame,
            {k: self.counters.get(k, 0) + other.counters.get(k, 0) for k in {*self.counters, *other.counters}},
            self.config or other.config,
            self.seeds + other.seeds,
            self.frames + other.frames,
        )

    # --- serialization --------------------------------------------------
    def summary(self) -> dict[str, Any]:
        groups = {
            "urllc_pooled": ("URLLC", None),
            "urllc_dl": ("URLLC", "DL"),
            "urllc_ul": ("URLLC", "UL"),
            "embb_dl": ("eMBB", "DL"),
        }
        out: dict[str, Any] = {}
        for name, (svc, d) in groups.items():
            lat, drop = self.latencies_s(svc, d)
            entry: dict[str, Any] = {"n": int(len(lat)), "dropped": int(drop.sum())}
            for qname, q in REPORT_QUANTILES.items():
                entry[f"{qname}_ms"] = _fmt_latency(outage_latency(lat, q, drop))
                entry[f"{qname}_low_confidence"] = is_low_confidence(len(lat), q)
            out[name] = entry
        return out

    def to_dict(self) -> dict[str, Any]:
        med = self.embb_median_mbps()
        return {
            "seeds": list(self.seeds),
            "symbol_duration_s": self.symbol_duration_s,
            "counters": dict(sorted(self.counters.items())),
            "latency": self.summary(),
            "embb": {
                "n_ues": int(len(self.embb_throughput_bps)),
                "median_mbps": NO_DATA if med is None else round(med, 9),
                "throughput_mbps": [round(float(x) / 1e6, 9) for x in self.embb_throughput_bps],
                "bits_per_frame": [list(map(int, row)) for row in self.embb_bits_per_frame],
            },
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def write_latency_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["latency_ms", "service", "direction", "dropped"])
            scale = self.symbol_duration_s * 1e3
            for n, s, d, x in zip(self.latency_symbols, self.service, self.direction, self.dropped):
                w.writerow([f"{n * scale:.6f}", s, d, int(x)])


def read_latency_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :meth:`SimReport.write_latency_csv`: (latency_ms, service, direction, dropped)."""
    lat, svc, dirs, drop = [], [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            lat.append(float(row["latency_ms"]))
            svc.append(row["service"])
            dirs.append(row["direction"])
            drop.append(row["dropped"] == "1")
    return np.array(lat), np.array(svc), np.array(dirs), np.array(drop, dtype=bool)


def merge_reports(reports: Iterable[SimReport]) -> SimReport:
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to merge")
    out = reports[0]
    for r in reports[1:]:
        out = out.merge(r)
    return out
