"""Command-line runner: single runs and parameter sweeps.

Exit codes: 0 success, 1 configuration or I/O error, 2 runtime assertion.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .config import ConfigError, lambda_for_load, load_config
from .engine import run as run_sim
from .metrics import NO_DATA, SimReport, merge_reports
from .tdd import write_frame_log

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
AXES = ("p0_dbm", "offered_load", "scheduler", "selection_mode", "seeds")
SUMMARY_FIELDS = ("axis_value", "p50_ms", "p99_ms", "p999_ms", "embb_median_mbps", "drop_rate")
AXIS_NOTES = {
    "p0_dbm": "mac.p0_dbm in dBm",
    "offered_load": "total URLLC load per cell in Mbps; lambda_dl and lambda_ul scaled jointly, UE counts fixed",
    "scheduler": "mac.scheduler",
    "selection_mode": "tdd.selection_mode",
    "seeds": "one single-seed run per listed seed",
}


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def summary_line(report: SimReport) -> str:
    lat = report.summary()["urllc_pooled"]
    med = report.embb_median_mbps()
    return ("URLLC latency p50={} p99={} p99.9={} ms (n={}, dropped={}); eMBB median={} Mbps"
            .format(_fmt(lat["p50_ms"]), _fmt(lat["p99_ms"]), _fmt(lat["p999_ms"]), lat["n"], lat["dropped"],
                    NO_DATA if med is None else f"{med:.3f}"))


def write_outputs(report: SimReport, out: Path, frames: bool = True) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_latency_csv(out / "latency.csv")
    if frames:
        write_frame_log(report.frames, out / "frames.csv")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.override)
    report = run_sim(cfg, args.seed)
    write_outputs(report, Path(args.out))
    print(summary_line(report))
    return EXIT_OK


def point_overrides(axis: str, value: str, base_cfg) -> tuple[list[str], list[int] | None]:
    """Config overrides (and an explicit seed list for the ``seeds`` axis) for one sweep point."""
    if axis in ("p0_dbm", "offered_load"):
        try:
            x = float(value)
        except ValueError:
            raise ConfigError(f"{value!r} is not a number", axis) from None
        if axis == "p0_dbm":
            return [f"mac.p0_dbm={x}"], None
        lam = lambda_for_load(base_cfg.traffic, x * 1e6)
        return [f"traffic.lambda_dl={lam!r}", f"traffic.lambda_ul={lam!r}"], None
    if axis == "scheduler":
        return [f'mac.scheduler="{value}"'], None
    if axis == "selection_mode":
        return [f'tdd.selection_mode="{value}"'], None
    if axis == "seeds":
        try:
            return [], [int(value)]
        except ValueError:
            raise ConfigError(f"{value!r} is not a seed id", axis) from None
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}", "axis")


def _one_run(job: tuple[str | None, list[str], int]) -> tuple[str, Any]:
    config_path, overrides, seed = job
    try:
        return "ok", run_sim(load_config(config_path, overrides), seed)
    except ConfigError as exc:
        return "config", str(exc)
    except AssertionError:
        return "runtime", traceback.format_exc()


def drop_rate(report: SimReport) -> float | str:
    _, dropped = report.latencies_s("URLLC")
    return NO_DATA if len(dropped) == 0 else float(dropped.mean())


def cmd_sweep(args: argparse.Namespace) -> int:
    base_cfg = load_config(args.config, args.override)
    if args.axis not in AXES:
        raise ConfigError(f"unknown sweep axis {args.axis!r}; expected one of {', '.join(AXES)}", "axis")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values given", "values")
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1", "seeds")
    # validate every point before spending time; an invalid point is recorded and skipped
    points, invalid = [], {}
    for v in values:
        try:
            ov, seeds = point_overrides(args.axis, v, base_cfg)
            overrides = list(args.override) + ov
            load_config(args.config, overrides)
        except ConfigError as exc:
            invalid[len(points)] = str(exc)
            points.append((v, [], []))
            continue
        points.append((v, overrides, seeds or list(range(1, args.seeds + 1))))

    jobs = [(p, s) for p in range(len(points)) for s in points[p][2]]
    payload = [(args.config, points[p][1], s) for p, s in jobs]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, payload))
    else:
        results = [_one_run(j) for j in payload]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    worst = EXIT_OK
    rows = []
    for p, (value, _, seeds) in enumerate(points):
        mine = sorted((s, r) for (pp, s), r in zip(jobs, results) if pp == p)
        bad = [(s, r) for s, r in mine if r[0] != "ok"]
        point_dir = out / f"{args.axis}={value}"
        if p in invalid:
            failures.append(f"{args.axis}={value}: config: {invalid[p]}")
            worst = max(worst, EXIT_CONFIG)
            rows.append([value] + ["error"] * (len(SUMMARY_FIELDS) - 1))
            continue
        if bad:
            for s, (kind, msg) in bad:
                failures.append(f"{args.axis}={value} seed={s}: {kind}: {msg.strip()}")
                worst = max(worst, EXIT_RUNTIME if kind == "runtime" else EXIT_CONFIG)
            rows.append([value] + ["error"] * (len(SUMMARY_FIELDS) - 1))
            continue
        reports = [r[1] for _, r in mine]
        merged = merge_reports(reports)
        write_outputs(merged, point_dir, frames=False)
        for s, rep in zip(seeds, reports):
            write_frame_log(rep.frames, point_dir / f"frames_seed{s}.csv")
        lat = merged.summary()["urllc_pooled"]
        med = merged.embb_median_mbps()
        rows.append([value, lat["p50_ms"], lat["p99_ms"], lat["p999_ms"],
                     NO_DATA if med is None else round(med, 6), drop_rate(merged)])
        print(f"{args.axis}={value}: {summary_line(merged)}")

    with open(out / "summary.csv", "w", newline="") as fh:
        fh.write(f"# axis={args.axis} ({AXIS_NOTES[args.axis]}); seeds per point={args.seeds}\n")
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        w.writerows(rows)
    if failures:
        (out / "failures.txt").write_text("\n".join(failures) + "\n")
        print(f"{len(failures)} run(s) failed; see {out / 'failures.txt'}", file=sys.stderr)
    return worst


def read_summary(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inftdd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("--config", default=None, help="TOML config file (defaults when omitted)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="section.key=value, repeatable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one axis over several seeds")
    p.add_argument("--config", default=None)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=1, help="seeds 1..N per point")
    p.add_argument("--out", required=True)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        print(f"runtime assertion failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
