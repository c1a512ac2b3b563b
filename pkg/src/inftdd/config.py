"""Experiment configuration: typed sections, TOML loading, overrides.

A configuration file is a TOML document with up to six tables
(``network``, ``traffic``, ``channel``, ``mac``, ``tdd``, ``run``).  Every key
is optional; missing keys take the defaults defined on the dataclasses below.
See ``docs/config.md`` for the full key list.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

SUPPORTED_SCS_KHZ = (15, 30, 60, 120)
SYMBOLS_PER_SLOT = 14


class ConfigError(ValueError):
    """Raised for unparsable files or invariant violations.

    ``field`` names the offending key (``section.key``) when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


def _check(cond: bool, section: str, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(message, f"{section}.{name}")


@dataclass(frozen=True)
class NetworkConfig:
    num_cells: int = 18
    bs_antennas: int = 4
    ue_antennas: int = 4
    carrier_freq_ghz: float = 3.5
    bandwidth_mhz: float = 20.0
    scs_khz: int = 30
    num_prbs: int = 51
    tti_symbols: int = 4
    frame_ms: float = 10.0
    bs_power_dbm: float = 30.0
    ue_max_power_dbm: float = 23.0
    bs_height_m: float = 10.0
    ue_height_m: float = 1.5
    hall_length_m: float = 120.0
    hall_width_m: float = 60.0
    grid_rows: int = 3
    grid_cols: int = 6
    ue_drop: str = "cell_patch"

    def __post_init__(self):
        s = "network"
        _check(self.num_cells >= 1, s, "num_cells", "must be >= 1")
        _check(self.grid_rows * self.grid_cols == self.num_cells, s, "grid_rows",
               f"grid mismatch: {self.grid_rows} x {self.grid_cols} != num_cells={self.num_cells}")
        _check(self.scs_khz in SUPPORTED_SCS_KHZ, s, "scs_khz", f"must be one of {SUPPORTED_SCS_KHZ}")
        _check(self.frame_ms > 0, s, "frame_ms", "must be > 0")
        _check(self.bs_antennas >= 1 and self.ue_antennas >= 1, s, "bs_antennas", "antenna counts must be >= 1")
        _check(self.num_prbs >= 1, s, "num_prbs", "must be >= 1")
        _check(self.bandwidth_mhz > 0 and self.carrier_freq_ghz > 0, s, "bandwidth_mhz", "must be > 0")
        for name in ("bs_power_dbm", "ue_max_power_dbm"):
            _check(math.isfinite(getattr(self, name)), s, name, "must be finite")
        _check(self.hall_length_m > 0 and self.hall_width_m > 0, s, "hall_length_m", "hall must have positive size")
        _check(self.bs_height_m > 0 and self.ue_height_m > 0, s, "bs_height_m", "heights must be > 0")
        spf = self.symbols_per_frame
        _check(abs(spf - round(spf)) < 1e-9 and spf >= 1, s, "frame_ms",
               "frame must hold an integer number of OFDM symbols")
        _check(self.tti_symbols >= 2 and int(round(spf)) % self.tti_symbols == 0, s, "tti_symbols",
               f"must divide the {int(round(spf))} symbols per frame")
        _check(self.ue_drop in ("cell_patch", "hall"), s, "ue_drop", "must be 'cell_patch' or 'hall'")

    @property
    def slots_per_frame(self) -> int:
        return int(round(self.frame_ms * self.scs_khz / 15))

    @property
    def symbols_per_frame(self) -> float:
        return self.frame_ms * self.scs_khz / 15 * SYMBOLS_PER_SLOT

    @property
    def ttis_per_frame(self) -> int:
        return int(round(self.symbols_per_frame)) // self.tti_symbols

    @property
    def symbol_duration_s(self) -> float:
        return self.frame_ms * 1e-3 / round(self.symbols_per_frame)

    @property
    def prb_bandwidth_hz(self) -> float:
        return 12 * self.scs_khz * 1e3


@dataclass(frozen=True)
class TrafficConfig:
    k_dl: int = 8
    k_ul: int = 8
    k_embb_dl: int = 0
    urllc_pkt_dl_bits: int = 256
    urllc_pkt_ul_bits: int = 256
    lambda_dl: float = 50.0
    lambda_ul: float = 50.0
    embb_pkt_bits: int = 16000
    embb_rate_bps: float = 0.5e6

    def __post_init__(self):
        s = "traffic"
        for name in ("k_dl", "k_ul", "k_embb_dl", "urllc_pkt_dl_bits", "urllc_pkt_ul_bits",
                     "lambda_dl", "lambda_ul", "embb_pkt_bits", "embb_rate_bps"):
            v = getattr(self, name)
            _check(math.isfinite(v) and v >= 0, s, name, "must be >= 0")
        _check(self.k_embb_dl <= self.k_dl, s, "k_embb_dl", "eMBB UEs are a subset of the DL UEs (k_embb_dl <= k_dl)")

    @property
    def k_urllc_dl(self) -> int:
        return self.k_dl - self.k_embb_dl


@dataclass(frozen=True)
class ChannelConfig:
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
    bs_noise_figure_db: float = 5.0
    ue_noise_figure_db: float = 9.0
    bf_gain_bs_db: float = 10 * math.log10(4)
    bf_gain_ue_db: float = 10 * math.log10(4)
    irc_suppression_db: float = 0.0
    re_overhead: float = 0.25
    mcs_gap_db: float = 1.0

    def __post_init__(self):
        s = "channel"
        for f in dataclasses.fields(self):
            _check(math.isfinite(getattr(self, f.name)), s, f.name, "must be finite")
        _check(self.shadowing_sigma_los >= 0 and self.shadowing_sigma_nlos >= 0, s,
               "shadowing_sigma_los", "must be >= 0")
        _check(0 < self.clutter_density < 1, s, "clutter_density", "must be in (0, 1)")
        _check(0 <= self.re_overhead < 1, s, "re_overhead", "must be in [0, 1)")
        _check(self.irc_suppression_db >= 0, s, "irc_suppression_db", "must be >= 0")


@dataclass(frozen=True)
class MacConfig:
    p0_dbm: float = -61.0
    alpha: float = 1.0
    retx_boost_db: float = 3.0
    max_retx: int = 4
    scheduler: str = "min_hold"
    control_prbs: int = 3
    overhead_prbs_per_alloc: int = 1
    rbg_size: int = 4
    pf_forgetting: float = 0.01
    urllc_weight: float = 1000.0
    target_bler_urllc: float = 0.01
    target_bler_embb: float = 0.1
    cqi_period_ms: float = 5.0
    cqi_delay_ttis: int = 2
    cg_subbands: int = 4
    cg_subband_prbs: int = 12
    cg_mcs: int = 4
    harq_combining: str = "chase"
    # outer-loop link adaptation: dB taken off the CQI per first-transmission NACK
    # (0 disables); each ACK gives back step * target / (1 - target)
    olla_step_db: float = 1.0
    olla_min_db: float = -40.0

    def __post_init__(self):
        s = "mac"
        _check(0 <= self.alpha <= 1, s, "alpha", "must be in [0, 1]")
        _check(self.max_retx >= 0, s, "max_retx", "must be >= 0")
        _check(self.scheduler in ("pf", "min_hold"), s, "scheduler", "must be 'pf' or 'min_hold'")
        _check(self.control_prbs >= 0 and self.overhead_prbs_per_alloc >= 0, s, "control_prbs", "must be >= 0")
        _check(self.rbg_size >= 1, s, "rbg_size", "must be >= 1")
        _check(0 < self.pf_forgetting <= 1, s, "pf_forgetting", "must be in (0, 1]")
        _check(self.urllc_weight > 0, s, "urllc_weight", "must be > 0")
        _check(0 < self.target_bler_urllc < 1 and 0 < self.target_bler_embb < 1, s,
               "target_bler_urllc", "must be in (0, 1)")
        _check(self.cqi_period_ms > 0 and self.cqi_delay_ttis >= 0, s, "cqi_period_ms", "must be > 0")
        _check(self.cg_subbands >= 1 and self.cg_subband_prbs >= 1, s, "cg_subbands", "must be >= 1")
        _check(self.harq_combining in ("chase", "none"), s, "harq_combining", "must be 'chase' or 'none'")
        _check(self.olla_step_db >= 0, s, "olla_step_db", "must be >= 0")
        _check(self.olla_min_db <= 0, s, "olla_min_db", "must be <= 0")


@dataclass(frozen=True)
class TddConfig:
    selection_mode: str = "qos_aware"
    iota_min: float = 0.01
    iota_window: int = 100
    min_dl_ttis: int = 1
    min_ul_ttis: int = 1
    neutral_mu: float = 0.5
    ul_visibility: str = "failed"

    def __post_init__(self):
        s = "tdd"
        _check(self.selection_mode in ("qos_aware", "qos_unaware"), s, "selection_mode",
               "must be 'qos_aware' or 'qos_unaware'")
        _check(0 < self.iota_min <= 1, s, "iota_min", "must be in (0, 1]")
        _check(self.iota_window >= 1, s, "iota_window", "must be >= 1")
        _check(self.min_dl_ttis >= 0 and self.min_ul_ttis >= 0, s, "min_dl_ttis", "must be >= 0")
        _check(0 <= self.neutral_mu <= 1, s, "neutral_mu", "must be in [0, 1]")
        _check(self.ul_visibility in ("failed", "detected"), s, "ul_visibility",
               "must be 'failed' or 'detected'")


@dataclass(frozen=True)
class RunOptions:
    duration_s: float = 20.0
    warmup_frames: int = 5
    pdsch_prep_symbols: float = 2.5
    pusch_prep_symbols: float = 5.5
    pdsch_decode_symbols: float = 4.5
    pusch_decode_symbols: float = 5.5
    record_frames: bool = True

    def __post_init__(self):
        s = "run"
        _check(self.duration_s > 0, s, "duration_s", "must be > 0")
        _check(self.warmup_frames >= 0, s, "warmup_frames", "must be >= 0")
        for name in ("pdsch_prep_symbols", "pusch_prep_symbols", "pdsch_decode_symbols", "pusch_decode_symbols"):
            _check(getattr(self, name) >= 0, s, name, "must be >= 0")


_SECTIONS = {
    "network": NetworkConfig,
    "traffic": TrafficConfig,
    "channel": ChannelConfig,
    "mac": MacConfig,
    "tdd": TddConfig,
    "run": RunOptions,
}


@dataclass(frozen=True)
class SimConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    tdd: TddConfig = field(default_factory=TddConfig)
    run: RunOptions = field(default_factory=RunOptions)

    def __post_init__(self):
        n = self.network
        sb = self.mac.cg_subbands * self.mac.cg_subband_prbs
        _check(sb + self.mac.control_prbs <= n.num_prbs, "mac", "cg_subband_prbs",
               f"{self.mac.cg_subbands} sub-bands of {self.mac.cg_subband_prbs} PRBs plus "
               f"{self.mac.control_prbs} control PRBs exceed the {n.num_prbs}-PRB carrier")
        _check(self.mac.control_prbs < n.num_prbs, "mac", "control_prbs", "leaves no data PRBs")

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}

    def replace(self, **sections: Mapping[str, Any]) -> "SimConfig":
        """Copy with per-section key patches, e.g. ``replace(mac={"p0_dbm": -90})``."""
        data = self.to_dict()
        for name, patch in sections.items():
            if name not in data:
                raise ConfigError(f"unknown section {name!r}", name)
            data[name].update(patch)
        return from_dict(data)


def _coerce(cls, name: str, value: Any, section: str) -> Any:
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    try:
        if ftype == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if ftype == "float":
            return float(value)
        if ftype == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError
                return value.lower() in ("true", "1")
            return bool(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot interpret {value!r} as {ftype}", f"{section}.{name}") from None


def from_dict(data: Mapping[str, Mapping[str, Any]]) -> SimConfig:
    sections = {}
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section {key!r}", key)
    for name, cls in _SECTIONS.items():
        raw = dict(data.get(name, {}))
        known = {f.name for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError("unknown key", f"{name}.{key}")
        sections[name] = cls(**{k: _coerce(cls, k, v, name) for k, v in raw.items()})
    return SimConfig(**sections)


def parse_override(text: str) -> tuple[str, str, Any]:
    """Split ``section.key=value``; the value is parsed as a TOML literal when possible."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    lhs, rhs = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {rhs.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = rhs.strip()
    return section, key, value


def apply_overrides(data: dict[str, dict[str, Any]], overrides: list[str]) -> dict[str, dict[str, Any]]:
    out = {k: dict(v) for k, v in data.items()}
    for text in overrides:
        section, key, value = parse_override(text)
        out.setdefault(section, {})[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> SimConfig:
    """Read a TOML config file (or defaults when ``path`` is None) and apply overrides."""
    data: dict[str, dict[str, Any]] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"parse failure in {path}: {exc}") from exc
        for key, value in data.items():
            if not isinstance(value, dict):
                raise ConfigError("top-level entries must be tables", key)
    return from_dict(apply_overrides(data, overrides or []))


def dumps_config(cfg: SimConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def save_config(cfg: SimConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(cfg))


def offered_load(k: float, pkt_bits: float, lam: float) -> float:
    """URLLC offered load in bits/s for ``k`` UEs of ``pkt_bits`` packets at ``lam`` packets/s."""
    return k * pkt_bits * lam


def total_urllc_load(traffic: TrafficConfig) -> float:
    """Per-cell URLLC load, DL plus UL, in bits/s."""
    return (offered_load(traffic.k_urllc_dl, traffic.urllc_pkt_dl_bits, traffic.lambda_dl)
            + offered_load(traffic.k_ul, traffic.urllc_pkt_ul_bits, traffic.lambda_ul))


def lambda_for_load(traffic: TrafficConfig, omega_bps: float) -> float:
    """Common per-UE arrival rate giving a total per-cell URLLC load of ``omega_bps``.

    The UE counts stay fixed; only the arrival rate is scaled.
    """
    per_lambda = (traffic.k_urllc_dl * traffic.urllc_pkt_dl_bits + traffic.k_ul * traffic.urllc_pkt_ul_bits)
    if per_lambda == 0:
        raise ConfigError("no URLLC UEs to carry the requested load", "traffic.k_dl")
    return omega_bps / per_lambda
