"""Per-BS TDD frame selection from buffered traffic.

Each BS samples its DL and UL buffers once per slot.  At the frame boundary
the slot samples are turned into DL shares ``mu``, averaged into ``mu_bar``,
and the next frame gets ``round(mu_bar * n_ttis)`` DL TTIs spread evenly over
the frame, with one guard symbol stolen at every direction switch.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

DL, UL = "D", "U"
QOS_AWARE, QOS_UNAWARE = "qos_aware", "qos_unaware"


@dataclass(frozen=True)
class BufferObservation:
    """Buffered bits seen by a BS at the end of slot ``slot_index`` (1-based)."""

    slot_index: int
    z_dl_urllc: float = 0.0
    z_dl_embb: float = 0.0
    z_ul_urllc: float = 0.0
    z_ul_embb: float = 0.0

    def __post_init__(self):
        if self.slot_index < 1:
            raise ValueError("slot_index is 1-based")
        if min(self.z_dl_urllc, self.z_dl_embb, self.z_ul_urllc, self.z_ul_embb) < 0:
            raise ValueError("buffer sizes must be >= 0")

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.z_dl_urllc, self.z_dl_embb, self.z_ul_urllc, self.z_ul_embb)


@dataclass(frozen=True)
class FrameConfig:
    tti_directions: tuple[str, ...]
    guard_symbols: frozenset[int]
    dl_fraction: float
    tti_symbols: int = 4

    @property
    def n_ttis(self) -> int:
        return len(self.tti_directions)

    @property
    def pattern(self) -> str:
        return "".join(self.tti_directions)

    @property
    def symbols(self) -> int:
        return self.n_ttis * self.tti_symbols

    def data_symbols(self, tti: int) -> int:
        """Usable symbols of TTI ``tti`` after removing its guard symbol, if any."""
        last = tti * self.tti_symbols + self.tti_symbols - 1
        return self.tti_symbols - (last in self.guard_symbols)

    def validate(self) -> None:
        n = self.n_ttis
        switches = {i * self.tti_symbols + self.tti_symbols - 1 for i in range(n)
                    if n > 1 and self.tti_directions[i] != self.tti_directions[(i + 1) % n]}
        assert self.guard_symbols == switches, "one guard symbol at every direction switch"
        assert math.isclose(self.dl_fraction, self.tti_directions.count(DL) / n)


# --- equations --------------------------------------------------------------

def buffered_ratio(z_dl: float, z_ul: float, iota: float, neutral: float = 0.5) -> float:
    """DL share of buffered traffic with the UL part inflated by ``1/iota``.

    Returns ``neutral`` when both buffers are empty.
    """
    if not 0 < iota <= 1:
        raise ValueError("iota must be in (0, 1]")
    if z_dl < 0 or z_ul < 0:
        raise ValueError("buffer sizes must be >= 0")
    if z_dl == 0 and z_ul == 0:
        return neutral
    return z_dl / (z_dl + z_ul / iota)


def qos_filter(obs: BufferObservation, mode: str, urllc_configured: bool | None = None) -> tuple[float, float]:
    """Pick the buffer components that drive selection.

    QoS-aware: the URLLC components when the cell serves URLLC, else eMBB.
    QoS-unaware: URLLC plus eMBB.  ``urllc_configured=None`` infers it from
    the observation.
    """
    if mode == QOS_UNAWARE:
        return obs.z_dl_urllc + obs.z_dl_embb, obs.z_ul_urllc + obs.z_ul_embb
    if mode != QOS_AWARE:
        raise ValueError(f"unknown selection mode {mode!r}")
    if urllc_configured is None:
        urllc_configured = obs.z_dl_urllc > 0 or obs.z_ul_urllc > 0
    if urllc_configured:
        return obs.z_dl_urllc, obs.z_ul_urllc
    return obs.z_dl_embb, obs.z_ul_embb


def average_ratio(mus: Sequence[float], xi: int) -> float:
    if len(mus) != xi:
        raise ValueError(f"expected {xi} slot ratios, got {len(mus)}")
    return float(sum(mus)) / xi


def dl_count(mu_bar: float, n_ttis: int, min_dl: int = 0, min_ul: int = 0) -> int:
    n_dl = math.floor(mu_bar * n_ttis + 0.5)
    lo, hi = min(min_dl, n_ttis), max(n_ttis - min_ul, 0)
    if lo > hi:
        lo = hi = n_ttis // 2
    return min(max(n_dl, lo), hi)


@lru_cache(maxsize=None)
def frame_for_count(n_dl: int, n_ttis: int, tti_symbols: int = 4) -> FrameConfig:
    """Frame with ``n_dl`` DL TTIs at positions ``ceil(k * n / n_dl)``.

    A mixed frame always opens with DL, so the wrap-around guard of one frame
    is also correct against the next frame's first TTI.
    """
    dirs = tuple(DL if (i * n_dl) // n_ttis != ((i - 1) * n_dl) // n_ttis else UL for i in range(n_ttis))
    guards = frozenset(i * tti_symbols + tti_symbols - 1 for i in range(n_ttis)
                       if n_ttis > 1 and dirs[i] != dirs[(i + 1) % n_ttis])
    return FrameConfig(dirs, guards, n_dl / n_ttis, tti_symbols)


def build_frame(mu_bar: float, n_ttis: int, min_dl: int = 1, min_ul: int = 1, tti_symbols: int = 4) -> FrameConfig:
    if not 0 <= mu_bar <= 1:
        raise ValueError("mu_bar must be in [0, 1]")
    if n_ttis < 1:
        raise ValueError("n_ttis must be >= 1")
    return frame_for_count(dl_count(mu_bar, n_ttis, min_dl, min_ul), n_ttis, tti_symbols)


# --- UL BLER estimate -------------------------------------------------------

@dataclass
class BlerEstimator:
    """Sliding window of first-transmission outcomes of one UE (True = failure)."""

    capacity: int = 100
    iota_min: float = 0.01
    window: deque = field(default_factory=deque)
    failures: int = 0

    @property
    def iota(self) -> float:
        if not self.window:
            return 1.0
        return min(1.0, max(self.iota_min, self.failures / len(self.window)))


def update_iota(est: BlerEstimator, failed: bool) -> BlerEstimator:
    if len(est.window) == est.capacity:
        est.failures -= est.window.popleft()
    est.window.append(bool(failed))
    est.failures += bool(failed)
    return est


def pooled_iota(estimators: Iterable[BlerEstimator], iota_min: float) -> float:
    """Failure fraction over all UEs' windows, clamped to ``[iota_min, 1]``; 1 with no data."""
    fails = total = 0
    for est in estimators:
        fails += est.failures
        total += len(est.window)
    if total == 0:
        return 1.0
    return min(1.0, max(iota_min, fails / total))


# --- selection --------------------------------------------------------------

def slot_ratios(observations, mode: str, iota: float, urllc_configured: bool | None = None,
                neutral: float = 0.5) -> np.ndarray:
    """Per-slot DL shares for an array ``(xi, 4)`` or a sequence of observations."""
    if len(observations) == 0:
        return np.zeros(0)
    if isinstance(observations, np.ndarray):
        rows = observations
    else:
        rows = np.array([o.as_row() for o in observations], dtype=float)
    if mode == QOS_UNAWARE:
        z_dl, z_ul = rows[:, 0] + rows[:, 1], rows[:, 2] + rows[:, 3]
    elif mode == QOS_AWARE:
        if urllc_configured is None:
            use_urllc = (rows[:, 0] > 0) | (rows[:, 2] > 0)
        else:
            use_urllc = np.full(len(rows), bool(urllc_configured))
        z_dl = np.where(use_urllc, rows[:, 0], rows[:, 1])
        z_ul = np.where(use_urllc, rows[:, 2], rows[:, 3])
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    denom = z_dl + z_ul / iota
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(denom > 0, z_dl / np.where(denom > 0, denom, 1.0), neutral)
    return mu


def select_frame(observations, mode: str, iota: float, n_ttis: int, *, min_dl: int = 1, min_ul: int = 1,
                 tti_symbols: int = 4, urllc_configured: bool | None = None,
                 neutral: float = 0.5) -> tuple[FrameConfig, float]:
    """Filter, ratio per slot, frame average, then frame synthesis.

    Returns the frame and its ``mu_bar``.  No observations gives the neutral frame.
    """
    mus = slot_ratios(observations, mode, iota, urllc_configured, neutral)
    mu_bar = average_ratio(list(mus), len(mus)) if len(mus) else neutral
    return build_frame(min(1.0, max(0.0, mu_bar)), n_ttis, min_dl, min_ul, tti_symbols), mu_bar


class FrameSelector(Protocol):
    """Anything that picks a BS's next frame from the elapsed frame's samples."""

    def select(self, cell: int, observations: np.ndarray, iota: float) -> tuple[FrameConfig, float]:
        ...


@dataclass
class BufferRatioSelector:
    mode: str
    n_ttis: int
    tti_symbols: int = 4
    min_dl: int = 1
    min_ul: int = 1
    neutral: float = 0.5
    urllc_configured: Sequence[bool] | None = None

    def select(self, cell: int, observations: np.ndarray, iota: float) -> tuple[FrameConfig, float]:
        configured = None if self.urllc_configured is None else self.urllc_configured[cell]
        return select_frame(observations, self.mode, iota, self.n_ttis, min_dl=self.min_dl, min_ul=self.min_ul,
                            tti_symbols=self.tti_symbols, urllc_configured=configured, neutral=self.neutral)


@dataclass
class FixedSelector:
    """Always returns the same frame (static TDD); handy for controlled experiments."""

    frame: FrameConfig

    def select(self, cell: int, observations: np.ndarray, iota: float) -> tuple[FrameConfig, float]:
        return self.frame, self.frame.dl_fraction


def write_frame_log(rows: Iterable[tuple[int, int, float, float, str]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_idx", "bs", "mu_bar", "dl_fraction", "pattern"])
        for frame_idx, bs, mu_bar, dl_fraction, pattern in rows:
            w.writerow([frame_idx, bs, f"{mu_bar:.6f}", f"{dl_fraction:.6f}", pattern])
