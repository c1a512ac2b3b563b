"""UL URLLC tail latency against the power-control target P0.

Small P0 leaves cell-edge UEs below the noise and pushes packets into HARQ
retransmissions.  Large P0 lets UL packets dominate BS-BS cross-link
interference.  Usage: ``python demos/p0_sweep.py [seeds] [seconds]``.
"""
from __future__ import annotations

import sys

from inftdd import SimConfig, merge_reports, run

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
seconds = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
base = SimConfig().replace(run={"duration_s": seconds})
print(f"{'P0 [dBm]':>9} {'UL p50 [ms]':>12} {'UL p99 [ms]':>12} {'UL retx':>8}")
for p0 in (-90, -75, -61, -45, -30):
    rep = merge_reports(run(base.replace(mac={"p0_dbm": float(p0)}), s) for s in range(1, seeds + 1))
    p50, p99 = rep.outage(0.5, "URLLC", "UL"), rep.outage(0.99, "URLLC", "UL")
    print(f"{p0:9d} {p50 * 1e3:12.3f} {p99 * 1e3:12.3f} {rep.counters['retx']:8d}")
