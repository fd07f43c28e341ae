"""``simulate`` command: run a scenario grid and write tables, series and traces."""
from __future__ import annotations

import argparse
import csv
import gzip
import os
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, apply_overrides, parse_config, preset
from .engine import EVENT_ORDERS, LEARNING_SCOPES, run_grid
from .landscape import InterdependenceMatrix
from .metrics import TESTS, emit_tables, write_series

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description=__doc__)
    p.add_argument("--preset", choices=PRESETS, help="built-in scenario grid")
    p.add_argument("--config", type=Path, help="INI scenario file (implies --preset custom)")
    p.add_argument("--seed", type=int, help="master seed for every scenario")
    p.add_argument("-o", "--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--emit-traces", action="store_true",
                   help="write per-replication traces and auction logs for each scenario")
    p.add_argument("--emit-knowledge", action="store_true",
                   help="add knowledge-set bitmasks to the trace files (implies --emit-traces)")
    p.add_argument("--gzip", action="store_true", help="compress trace files")
    p.add_argument("--emit-svg", action="store_true", help="draw the mean series of each scenario as SVG")
    p.add_argument("--matrix-file", type=Path, help="interdependence pattern replacing the structure")
    p.add_argument("--event-order", choices=EVENT_ORDERS)
    p.add_argument("--learning-scope", choices=LEARNING_SCOPES)
    p.add_argument("--test", choices=TESTS, default="welch", help="significance test")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def resolve_scenarios(args) -> list:
    if args.config is not None:
        if args.preset not in (None, "custom"):
            raise ConfigError("--config cannot be combined with a built-in preset")
        scenarios = parse_config(args.config)
    elif args.preset is None:
        raise ConfigError("give --preset or --config")
    else:
        scenarios = preset(args.preset)
    matrix = None
    if args.matrix_file is not None:
        try:
            matrix = InterdependenceMatrix.load(args.matrix_file, scenarios[0].m_subtasks)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"--matrix-file: {exc}") from None
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return apply_overrides(scenarios, seed=args.seed, matrix=matrix, event_order=args.event_order,
                           learning_scope=args.learning_scope)


def _open(path: Path, compress: bool):
    if compress:
        return gzip.open(path.with_suffix(path.suffix + ".gz"), "wt", newline="")
    return open(path, "w", newline="")


def write_traces(report, directory: Path, compress: bool = False) -> None:
    with_knowledge = bool(report.traces) and report.traces[0].knowledge is not None
    with _open(directory / "traces.csv", compress) as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["replication", "period", "raw_performance", "normalized_performance", "auction_flag"]
        w.writerow(header + (["knowledge_masks"] if with_knowledge else []))
        for tr in report.traces:
            for t in range(len(tr.raw)):
                row = [tr.replication, t + 1, repr(float(tr.raw[t])), repr(float(tr.normalized[t])),
                       int(tr.auctions[t])]
                if with_knowledge:
                    row.append(" ".join(f"{int(m):x}" for m in tr.knowledge[t]))
                w.writerow(row)
    with _open(directory / "auctions.csv", compress) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replication", "period", "slot", "winner", "winning_bid", "price"])
        for tr in report.traces:
            for t in range(len(tr.raw)):
                if tr.auctions[t]:
                    for m in range(tr.winners.shape[1]):
                        w.writerow([tr.replication, t + 1, m, int(tr.winners[t, m]),
                                    repr(float(tr.winning_bids[t, m])), repr(float(tr.prices[t, m]))])


def series_svg(report, width: int = 640, height: int = 360) -> str:
    """Plain SVG line chart of the mean normalized series."""
    ys = [float(v) for v in report.series]
    lo = min(0.5, min(ys))
    pad = 40
    span_x = max(len(ys) - 1, 1)

    def px(i, v):
        x = pad + (width - 2 * pad) * i / span_x
        y = height - pad - (height - 2 * pad) * (v - lo) / (1.0 - lo)
        return f"{x:.2f},{y:.2f}"

    points = " ".join(px(i, v) for i, v in enumerate(ys))
    ticks = "".join(
        f'<text x="{pad - 6}" y="{height - pad - (height - 2 * pad) * (v - lo) / (1.0 - lo) + 4:.2f}" '
        f'font-size="10" text-anchor="end">{v:.2f}</text>'
        for v in (lo, (lo + 1.0) / 2, 1.0)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{width / 2}" y="20" font-size="13" text-anchor="middle">{report.label}</text>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'{ticks}\n'
        f'<text x="{width / 2}" y="{height - 8}" font-size="11" text-anchor="middle">period</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{points}"/>\n'
        f'</svg>\n'
    )


def _write_scenario_dir(report, out: Path, args) -> None:
    directory = out / report.label
    directory.mkdir(parents=True, exist_ok=True)
    write_series(report, directory / "series.csv")
    if report.traces is not None:
        write_traces(report, directory, args.gzip)
        report.traces = None
    if args.emit_svg:
        (directory / "series.svg").write_text(series_svg(report))


def run(args) -> list:
    scenarios = resolve_scenarios(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    traces = args.emit_traces or args.emit_knowledge
    workers = args.workers or os.cpu_count() or 1
    reports = []
    # with traces each scenario runs alone so only one batch of traces is held in memory
    batches = [[sc] for sc in scenarios] if traces else [scenarios]
    for batch in batches:
        for report in run_grid(batch, workers, keep_traces=traces, record_knowledge=args.emit_knowledge,
                               progress=not args.quiet):
            _write_scenario_dir(report, out, args)
            reports.append(report)
    try:
        emit_tables(reports, out, args.test)
    except ValueError as exc:
        if "incomplete grid" not in str(exc):
            raise
        print(f"note: tables skipped ({exc})", file=sys.stderr)
        series = out / "series"
        series.mkdir(exist_ok=True)
        for r in reports:
            write_series(r, series / f"{r.label}.csv")
    return reports


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        reports = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # surfaced with scenario/replication coordinates when available
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    width = max(len(r.label) for r in reports)
    print(f"{'scenario':<{width}}  {'mean':>6}  {'final':>6}")
    for r in reports:
        print(f"{r.label:<{width}}  {r.mean:.4f}  {r.final:.4f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
