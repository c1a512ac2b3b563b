"""Symbol-level simulator of dynamic-TDD factory networks carrying URLLC and eMBB traffic."""
from __future__ import annotations

from .config import ConfigError, SimConfig, load_config
from .engine import Simulator, run
from .metrics import SimReport, merge_reports

__all__ = ["ConfigError", "SimConfig", "SimReport", "Simulator", "load_config", "merge_reports", "run"]
__version__ = "0.1.0"
