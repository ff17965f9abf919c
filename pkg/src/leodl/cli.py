"""Command line entry point: run, compare, sweep and list presets.

Exit status is 0 on success, 2 on a configuration error and 3 when a run that
requires completion stops short of it.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .scenario import SCHEDULERS, ConfigError, ScenarioConfig, execute, load_preset, prepare, preset_names
from .simulator import MetricsLog

OUT_ENV = "LEODL_OUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_INCOMPLETE = 0, 2, 3

COMPARE_COLUMNS = [
    "scheduler", "completed", "progress", "t_download_s", "throughput_mean_mbps", "steady_throughput_mbps",
    "latency_p50_s", "latency_p95_s", "q1_s", "q2_s", "q3_s", "q4_s", "replans",
]
SWEEP_COLUMNS = ["gsl_gbps", "isl_gbps"] + COMPARE_COLUMNS

log = logging.getLogger("leodl")


def _load(args) -> ScenarioConfig:
    if args.config is None:
        raise ConfigError("--config is required (a file path or a preset name)")
    path = Path(args.config)
    cfg = ScenarioConfig.load(path) if path.exists() else load_preset(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "scheduler", None):
        cfg.scheduler = args.scheduler
    if args.slot_cap is not None:
        cfg.slot_cap = args.slot_cap
    cfg.validate()
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _row(summary: dict) -> dict:
    q = summary["quartile_times_s"]
    row = {k: summary.get(k) for k in COMPARE_COLUMNS if k in summary}
    row.update({"q1_s": q[0], "q2_s": q[1], "q3_s": q[2], "q4_s": q[3]})
    return row


def _write_table(out: Path, stem: str, columns: list[str], rows: list[dict]) -> None:
    with (out / f"{stem}.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if r.get(k) is None else r[k] for k in columns})
    doc = {"schema_version": 1, "columns": columns, "rows": rows}
    (out / f"{stem}.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _report(name: str, log_: MetricsLog) -> None:
    s = log_.summary()
    state = "complete" if s["completed"] else f"INCOMPLETE at {100 * s['progress']:.2f}%"
    t = "-" if s["t_download_s"] is None else f"{s['t_download_s']:g} s"
    print(f"{name:14s} {state:24s} T_download={t}")


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    (out / "config.json").write_text(cfg.to_json())
    metrics = execute(prepare(cfg))
    metrics.export(out)
    _report(cfg.scheduler, metrics)
    if cfg.require_completion and not metrics.completed:
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    names = _scheduler_list(args.schedulers)
    (out / "config.json").write_text(cfg.to_json())
    prep = prepare(cfg)
    rows = []
    incomplete = False
    for name in names:
        metrics = execute(prep, name)
        metrics.export(out / name)
        _report(name, metrics)
        rows.append(_row(metrics.summary()))
        incomplete |= not metrics.completed
    _write_table(out, "comparison", COMPARE_COLUMNS, rows)
    return EXIT_INCOMPLETE if cfg.require_completion and incomplete else EXIT_OK


def _sweep_cell(cfg: ScenarioConfig, gsl: float, isl: float, names: list[str], out: Path) -> list[dict]:
    cell = replace(cfg, gsl_bandwidth_gbps=gsl, isl_bandwidth_gbps=isl)
    prep = prepare(cell)
    rows = []
    for name in names:
        metrics = execute(prep, name)
        metrics.export(out / f"gsl{gsl:g}_isl{isl:g}" / name)
        row = _row(metrics.summary())
        row.update({"gsl_gbps": gsl, "isl_gbps": isl})
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    names = _scheduler_list(args.schedulers) if args.schedulers else [cfg.scheduler]
    gsl = _floats(args.gsl or args.grid)
    isl = _floats(args.isl or args.grid)
    (out / "config.json").write_text(cfg.to_json())
    cells = [(g, i) for g in gsl for i in isl]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_sweep_cell, *zip(*[(cfg, g, i, names, out) for g, i in cells])))
    else:
        parts = [_sweep_cell(cfg, g, i, names, out) for g, i in cells]
    rows = [r for part in parts for r in part]
    for r in rows:
        state = "ok" if r["completed"] else "INCOMPLETE"
        print(f"gsl={r['gsl_gbps']:g} isl={r['isl_gbps']:g} {r['scheduler']:14s} {state:10s} T_download={r['t_download_s']}")
    _write_table(out, "sweep", SWEEP_COLUMNS, rows)
    incomplete = any(not r["completed"] for r in rows)
    return EXIT_INCOMPLETE if cfg.require_completion and incomplete else EXIT_OK


def cmd_presets(args) -> int:
    if args.name:
        sys.stdout.write(load_preset(args.name).to_json())
        return EXIT_OK
    for name in preset_names():
        cfg = load_preset(name)
        print(f"{name:16s} shell={cfg.shell} stations={cfg.stations} generation={cfg.generation.kind}")
    return EXIT_OK


def _scheduler_list(text: str | None) -> list[str]:
    names = list(SCHEDULERS) if not text else [s.strip() for s in text.split(",") if s.strip()]
    bad = [n for n in names if n not in SCHEDULERS]
    if bad:
        raise ConfigError(f"unknown scheduler {bad[0]!r} (choose from {', '.join(SCHEDULERS)})")
    return names


def _floats(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad bandwidth list {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise ConfigError(f"bandwidth list {text!r} must hold positive numbers")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leodl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", help="scenario JSON file or preset name")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--slot-cap", type=int)

    sp = sub.add_parser("run", help="one scheduler on one scenario")
    common(sp)
    sp.add_argument("--scheduler", choices=SCHEDULERS)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="several schedulers on the same scenario")
    common(sp)
    sp.add_argument("--schedulers", help="comma-separated list (default: all)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="bandwidth grid")
    common(sp)
    sp.add_argument("--scheduler", choices=SCHEDULERS)
    sp.add_argument("--schedulers", help="comma-separated list (default: the config's scheduler)")
    sp.add_argument("--grid", default="1,5,10", help="Gbps values used for both links")
    sp.add_argument("--gsl", help="GSL Gbps values (overrides --grid)")
    sp.add_argument("--isl", help="ISL Gbps values (overrides --grid)")
    sp.add_argument("--jobs", type=int, default=1, help="cells run in parallel processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("presets", help="list built-in scenarios or print one")
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
