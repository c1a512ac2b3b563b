"""Static link gains, wideband SINR, and the SINR-to-BLER abstraction.

Pathloss follows the InF-DH closed form ``A + B*log10(d3d) + C*log10(fc)``
with the NLOS value floored by LOS.  Gains are frozen for a run: one LOS draw
and one log-normal shadowing sample per node pair.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import ChannelConfig
from .topology import Topology

THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class PathlossParams:
    los_a: float = 31.84
    los_b: float = 21.50
    los_c: float = 19.00
    nlos_a: float = 33.63
    nlos_b: float = 21.90
    nlos_c: float = 20.00
    shadowing_sigma_los: float = 4.3
    shadowing_sigma_nlos: float = 4.0
    clutter_density: float = 0.6
    clutter_height_m: float = 6.0
    clutter_size_m: float = 2.0

    def __post_init__(self):
        if self.shadowing_sigma_los < 0 or self.shadowing_sigma_nlos < 0:
            raise ValueError("shadowing sigmas must be >= 0")
        if not 0 < self.clutter_density < 1:
            raise ValueError("clutter_density must be in (0, 1)")

    @classmethod
    def from_config(cls, cfg: ChannelConfig) -> "PathlossParams":
        return cls(**{name: getattr(cfg, name) for name in cls.__dataclass_fields__})


def pathloss_db(d3d, fc_ghz: float, los, p: PathlossParams):
    """Pathloss in dB; distances below 1 m are evaluated at 1 m.

    Works elementwise on arrays; ``los`` may be a bool or a bool array.
    """
    d = np.maximum(np.asarray(d3d, dtype=float), 1.0)
    lf = math.log10(fc_ghz)
    pl_los = p.los_a + p.los_b * np.log10(d) + p.los_c * lf
    pl_nlos = np.maximum(pl_los, p.nlos_a + p.nlos_b * np.log10(d) + p.nlos_c * lf)
    out = np.where(los, pl_los, pl_nlos)
    return float(out) if out.ndim == 0 else out


def los_decay_length(p: PathlossParams, h_a: float, h_b: float) -> float:
    """Decay length ``k`` of the LOS probability for antennas at heights ``h_a``, ``h_b``.

    Both antennas above the clutter: infinite (always LOS).  Both at or below
    it: the clutter-only length ``-d_clutter / ln(1 - r)``.  Otherwise that
    length stretched by ``(h_hi - h_lo) / (h_c - h_lo)``.
    """
    base = -p.clutter_size_m / math.log(1.0 - p.clutter_density)
    hi, lo = max(h_a, h_b), min(h_a, h_b)
    if lo >= p.clutter_height_m:
        return math.inf
    if hi <= p.clutter_height_m:
        return base
    return base * (hi - lo) / (p.clutter_height_m - lo)


def los_probability(d2d, k_dh: float):
    """``exp(-d2d / k_dh)``; 1 at zero distance, non-increasing in distance."""
    d = np.maximum(np.asarray(d2d, dtype=float), 0.0)
    if math.isinf(k_dh):
        out = np.ones_like(d)
    elif k_dh <= 0:
        out = (d == 0).astype(float)
    else:
        out = np.exp(-d / k_dh)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinkMatrix:
    """Symmetric coupling gains (dB, excluding array gains) between all nodes.

    The diagonal holds ``-inf`` so a node never couples to itself.
    """

    gain_db: np.ndarray
    los: np.ndarray
    clamped_pairs: int = 0

    @property
    def num_nodes(self) -> int:
        return self.gain_db.shape[0]

    def linear(self) -> np.ndarray:
        return 10.0 ** (self.gain_db / 10.0)

    def to_csv(self, path: str | Path) -> None:
        n = self.num_nodes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_a", "node_b", "gain_db", "los"])
            for a in range(n):
                for b in range(a + 1, n):
                    w.writerow([a, b, f"{self.gain_db[a, b]:.4f}", int(self.los[a, b])])


def build_link_matrix(topology: Topology, params: PathlossParams, rng: np.random.Generator,
                      fc_ghz: float) -> LinkMatrix:
    pos = topology.node_positions
    n = len(pos)
    n_bs = topology.num_cells
    diff = pos[:, None, :] - pos[None, :, :]
    d2d = np.sqrt((diff[..., :2] ** 2).sum(-1))
    d3d = np.sqrt((diff ** 2).sum(-1))

    heights = pos[:, 2]
    is_bs = np.arange(n) < n_bs
    # one decay length per (BS?, BS?) pair type; heights are uniform per type
    h_bs = heights[0] if n_bs else 0.0
    h_ue = heights[n_bs] if n > n_bs else 0.0
    k_table = {
        (True, True): los_decay_length(params, h_bs, h_bs),
        (True, False): los_decay_length(params, h_bs, h_ue),
        (False, False): los_decay_length(params, h_ue, h_ue),
    }
    iu, ju = np.triu_indices(n, k=1)
    k_pair = np.array([k_table[(bool(a) or bool(b), bool(a) and bool(b))] for a, b in
                       zip(is_bs[iu], is_bs[ju])]) if len(iu) else np.zeros(0)
    p_los = np.empty(len(iu))
    for k in set(k_pair.tolist()):
        sel = k_pair == k
        p_los[sel] = los_probability(d2d[iu[sel], ju[sel]], k)
    los_u = rng.random(len(iu)) < p_los
    sigma = np.where(los_u, params.shadowing_sigma_los, params.shadowing_sigma_nlos)
    shadow = rng.standard_normal(len(iu)) * sigma
    pl = pathloss_db(d3d[iu, ju], fc_ghz, los_u, params)

    gain = np.full((n, n), -np.inf)
    gain[iu, ju] = -(pl + shadow)
    gain[ju, iu] = gain[iu, ju]
    los = np.zeros((n, n), dtype=bool)
    los[iu, ju] = los_u
    los[ju, iu] = los_u
    np.fill_diagonal(los, True)
    clamped = int((d3d[iu, ju] < 1.0).sum())
    return LinkMatrix(gain, los, clamped)


def noise_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10 * math.log10(bandwidth_hz) + noise_figure_db


def dbm_to_mw(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def sinr_db(rx_desired_dbm: float, interferer_rx_dbm: Iterable[float], noise: float) -> float:
    values = list(interferer_rx_dbm)
    interference = float(np.sum(dbm_to_mw(values))) if values else 0.0
    return 10 * math.log10(dbm_to_mw(rx_desired_dbm) / (interference + dbm_to_mw(noise)))


# --- link-level abstraction -------------------------------------------------

# slope such that BLER drops from 50 % to 10 % over 1 dB
DEFAULT_SLOPE_DB = 1.0 / math.log(9.0)

# (modulation order, code rate) from QPSK 1/8 to 64QAM 5/6
MCS_FORMATS: tuple[tuple[int, float], ...] = (
    (2, 1 / 8), (2, 1 / 5), (2, 1 / 4), (2, 1 / 3), (2, 1 / 2), (2, 2 / 3), (2, 3 / 4),
    (4, 1 / 2), (4, 2 / 3), (4, 3 / 4),
    (6, 3 / 5), (6, 2 / 3), (6, 3 / 4), (6, 4 / 5), (6, 5 / 6),
)


@dataclass(frozen=True)
class BlerCurve:
    """Logistic BLER curve of one MCS: 50 % at ``sinr_50pct_db``."""

    mcs_id: int
    spectral_eff: float
    sinr_50pct_db: float
    slope_db: float = DEFAULT_SLOPE_DB

    def __post_init__(self):
        if self.spectral_eff <= 0 or self.slope_db <= 0:
            raise ValueError("spectral_eff and slope_db must be > 0")

    def sinr_for_bler(self, target: float) -> float:
        """SINR (dB) at which this curve reaches ``target`` BLER."""
        return self.sinr_50pct_db + self.slope_db * math.log(1.0 / target - 1.0)


def bler(sinr, curve: BlerCurve):
    x = (np.asarray(sinr, dtype=float) - curve.sinr_50pct_db) / curve.slope_db
    out = 0.5 * (1.0 - np.tanh(0.5 * x))
    return float(out) if out.ndim == 0 else out


def mcs_table(gap_db: float = 1.0, slope_db: float = DEFAULT_SLOPE_DB) -> tuple[BlerCurve, ...]:
    """15-entry MCS table with 50 % points on a Shannon-gap fit.

    ``sinr_50 = gap + 10*log10(2**SE - 1)``; QPSK 1/2 lands at ``gap``.
    """
    curves = []
    for i, (m, r) in enumerate(MCS_FORMATS):
        se = m * r
        curves.append(BlerCurve(i, se, gap_db + 10 * math.log10(2.0 ** se - 1.0), slope_db))
    return tuple(curves)


def validate_curves(curves: Sequence[BlerCurve]) -> None:
    if not curves:
        raise ValueError("empty MCS table")
    for a, b in zip(curves, curves[1:]):
        if not (b.spectral_eff > a.spectral_eff and b.sinr_50pct_db > a.sinr_50pct_db):
            raise ValueError(f"MCS {b.mcs_id} is not monotone over MCS {a.mcs_id}")
