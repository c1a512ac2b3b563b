"""Walk one DL and one UL packet through an otherwise empty cell.

Shows the processing chain on the symbol grid: the DL packet is ready exactly
at a DL TTI start and the UL packet exactly at a UL TTI start, so neither
waits for alignment.
"""
from __future__ import annotations

from inftdd import SimConfig, Simulator

cfg = SimConfig().replace(
    network={"num_cells": 1, "grid_rows": 1, "grid_cols": 1},
    traffic={"k_dl": 1, "k_ul": 1},
    run={"duration_s": 0.02, "warmup_frames": 0},
)
# UE 0 is the DL UE, UE 1 the UL UE; arrivals are (ue, symbol)
sim = Simulator(cfg, seed=1, arrivals=[(0, 5), (1, 6)], trace=True)
print("first frame:", sim.frames[0].pattern[:12], "...")
while sim.symbol < 40:
    s = sim.symbol
    for event in sim.advance_symbol():
        if event[0] in ("deliver", "dl_sched"):
            print(f"symbol {s:3d}: {event[0]} {event[1:]}")
report = sim.report()
for d, n in zip(report.direction, report.latency_symbols):
    print(f"{d}: {n} symbols = {n * report.symbol_duration_s * 1e3:.3f} ms")
