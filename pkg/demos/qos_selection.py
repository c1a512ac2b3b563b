"""QoS-aware versus aggregate-buffer TDD frame selection with eMBB in the mix.

With eMBB DL traffic present, aggregate buffers pull frames towards DL; the
QoS-aware rule looks at URLLC buffers only.  Prints URLLC tail latency, eMBB
throughput and the mean DL share of the selected frames.
"""
from __future__ import annotations

import sys

import numpy as np

from inftdd import SimConfig, merge_reports, run
from inftdd.config import lambda_for_load

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
base = SimConfig().replace(traffic={"k_embb_dl": 3}, run={"duration_s": 1.0})
lam = lambda_for_load(base.traffic, 2e6)
base = base.replace(traffic={"lambda_dl": lam, "lambda_ul": lam})
for mode in ("qos_aware", "qos_unaware"):
    for sched in ("min_hold", "pf"):
        cfg = base.replace(tdd={"selection_mode": mode}, mac={"scheduler": sched})
        rep = merge_reports(run(cfg, s) for s in range(1, seeds + 1))
        dl_share = np.mean([row[3] for row in rep.frames if row[0] >= 5])
        print(f"{mode:12s} {sched:9s} URLLC p99={rep.outage(0.99) * 1e3:6.3f} ms  "
              f"eMBB median={rep.embb_median_mbps():.3f} Mbps  mean DL share={dl_share:.3f}")
