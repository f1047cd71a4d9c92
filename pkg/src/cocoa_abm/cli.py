"""Command-line front end: ``cocoa-abm {simulate,sweep,analyze,render,calibrate}``.

Probabilities on the command line are percentages, like in config files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .analysis import (aggregate, heatmap_csv, heatmaps, read_summary_csv, summary_csv, w_csv)
from .appmodel import write_event_log
from .domain import ConfigError, ScenarioConfig, config_to_dict, load_config, validate_config
from .engine import format_p, run_simulation
from .render import render_all
from .sweep import (CalibrationError, SweepError, SweepPlan, calibrate_beta, default_parallelism,
                    enumerate_scenarios, load_runs, plan_from_manifest, read_manifest,
                    run_sweep)

log = logging.getLogger("cocoa_abm")


class UsageError(ValueError):
    pass


def parse_progression(text: str) -> list[float]:
    """``"0,20,...,100"`` -> ``[0, 20, 40, 60, 80, 100]``; plain lists pass through."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise UsageError(f"empty list: {text!r}")
    if "..." not in parts:
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise UsageError(f"bad number list: {text!r}") from None
    i = parts.index("...")
    if i < 2 or i != len(parts) - 2:
        raise UsageError(f"progression needs two leading terms and one final term: {text!r}")
    try:
        head = [float(p) for p in parts[:i]]
        last = float(parts[-1])
    except ValueError:
        raise UsageError(f"bad progression: {text!r}") from None
    step = head[1] - head[0]
    if step <= 0 or (last - head[0]) < 0:
        raise UsageError(f"progression must increase: {text!r}")
    n = round((last - head[0]) / step)
    if abs(head[0] + n * step - last) > 1e-9 * max(1.0, abs(last)):
        raise UsageError(f"{last:g} is not on the progression {text!r}")
    # integer multiples avoid accumulating float error
    return [head[0] + k * step for k in range(n + 1)]


def parse_percent_list(text: str) -> tuple[float, ...]:
    vals = parse_progression(text)
    if any(not 0.0 <= v <= 100.0 for v in vals):
        raise UsageError(f"percentages must lie in [0,100]: {text!r}")
    return tuple(sorted({round(v, 9) / 100.0 for v in vals}))


def parse_seeds(text: str) -> tuple[int, ...]:
    try:
        if ".." in text and "..." not in text:
            a, b = text.split("..")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise UsageError(f"empty seed range: {text!r}")
            return tuple(range(lo, hi + 1))
        return tuple(int(round(v)) for v in parse_progression(text))
    except ValueError:
        raise UsageError(f"bad seeds: {text!r}") from None


def parse_band(text: str) -> tuple[float, float]:
    vals = parse_progression(text)
    if len(vals) != 2 or not 0.0 <= vals[0] <= vals[1] <= 100.0:
        raise UsageError(f"band must be 'lo,hi' percentages: {text!r}")
    return vals[0] / 100.0, vals[1] / 100.0


def _config(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    if getattr(args, "beta", None) is not None:
        config = replace(config, beta=args.beta / 100.0)
    if getattr(args, "max_days", None) is not None:
        config = replace(config, max_days=args.max_days)
    return validate_config(config)


def _parallelism(args) -> int:
    return args.parallelism if args.parallelism is not None else default_parallelism()


def cmd_simulate(args) -> int:
    config = _config(args)
    if any(v is not None for v in (args.p1, args.p2, args.p3)):
        p = [v / 100.0 if v is not None else cur
             for v, cur in zip((args.p1, args.p2, args.p3), config.app.as_tuple())]
        config = validate_config(config.with_app(*p))
    result = run_simulation(config, args.seed, record_events=bool(args.events))
    text = result.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.events:
        write_event_log(result.events, args.events)
    return 0


def cmd_sweep(args) -> int:
    config = _config(args)
    plan = SweepPlan(args.grid_p1, args.grid_p2, args.grid_p3, args.seeds, config)
    report = run_sweep(plan, _parallelism(args), args.out)
    print(f"executed {report.executed} runs, skipped {report.skipped} present, "
          f"{len(report.errors)} failed; excluded seeds: {report.excluded_seeds}")
    if report.errors:
        key, seed, msg = report.errors[0]
        raise SweepError(f"{len(report.errors)} runs failed, first {key} seed {seed}: {msg}")
    return 0


def cmd_analyze(args) -> int:
    doc = read_manifest(args.results)
    plan = plan_from_manifest(doc)
    runs = load_runs(args.results, enumerate_scenarios(plan), plan.seeds, plan.config.max_days)
    excluded = doc.get("excluded_seeds")
    if excluded is None:
        raise SweepError("manifest has no exclusion list (baseline scenario missing)")
    summary = aggregate(runs, excluded, plan.config.slope_epsilon)
    out = Path(args.out or args.results)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(summary))
    for hm in heatmaps(summary):
        (out / f"heatmap_p3-{format_p(hm.p3)}.csv").write_text(heatmap_csv(hm))
    (out / "w.csv").write_text(w_csv(summary))
    print(f"{len(summary)} scenarios, {len(plan.seeds) - len(excluded)} seeds included, "
          f"excluded {excluded}")
    return 0


def cmd_render(args) -> int:
    src = Path(args.summary)
    path = src / "summary.csv" if src.is_dir() else src
    summary = read_summary_csv(path.read_text())
    if not len(summary):
        raise UsageError(f"{path} has no scenarios")
    out = Path(args.out or path.parent)
    out.mkdir(parents=True, exist_ok=True)
    files = render_all(summary)
    for name, text in files.items():
        (out / name).write_text(text)
    print(f"wrote {len(files)} figures to {out}")
    return 0


def cmd_calibrate(args) -> int:
    config = _config(args)
    lo, hi = args.range
    result = calibrate_beta(config, args.band, args.seeds, (lo / 100.0, hi / 100.0),
                            _parallelism(args))
    flag = "" if result.converged else " (band not reached; closest probe)"
    print(f"beta = {result.beta!r} ({result.beta * 100:.6g}%), mean final n_ip = "
          f"{result.mean_final:g}, fraction = {result.fraction:.4f}{flag}")
    if args.out:
        doc = config_to_dict(replace(config, beta=result.beta))
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0 if result.converged else 3


def _percent_pair(text: str) -> tuple[float, float]:
    vals = parse_progression(text)
    if len(vals) != 2 or not 0.0 <= vals[0] <= vals[1] <= 100.0:
        raise UsageError(f"range must be 'lo,hi' percentages: {text!r}")
    return vals[0], vals[1]


def _arg_type(fn):
    def wrapped(text):
        try:
            return fn(text)
        except UsageError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    wrapped.__name__ = fn.__name__
    return wrapped


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cocoa-abm",
                                 description="Agent-based simulation of a contact-tracing app.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seeds=False):
        p.add_argument("--config", help="JSON scenario config (defaults to the built-in one)")
        p.add_argument("--beta", type=float, help="infection probability per step, percent")
        p.add_argument("--max-days", type=int, dest="max_days")
        if seeds:
            p.add_argument("--seeds", type=_arg_type(parse_seeds), default=tuple(range(1, 31)),
                           help="A..B or a comma list (default 1..30)")
            p.add_argument("--parallelism", type=int,
                           help="worker processes (default $COCOA_ABM_THREADS or CPU count)")

    p = sub.add_parser("simulate", help="one run, daily CSV")
    common(p)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--p1", type=float, help="app usage rate, percent")
    p.add_argument("--p2", type=float, help="outing reduction when notified, percent")
    p.add_argument("--p3", type=float, help="positive registration rate, percent")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--events", help="also write app-user contact events to this CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the scenario grid")
    common(p, seeds=True)
    grid = _arg_type(parse_percent_list)
    default_grid = parse_percent_list("0,20,...,100")
    p.add_argument("--grid-p1", type=grid, default=default_grid, dest="grid_p1")
    p.add_argument("--grid-p2", type=grid, default=default_grid, dest="grid_p2")
    p.add_argument("--grid-p3", type=grid, default=default_grid, dest="grid_p3")
    p.add_argument("--out", default="results", help="result store directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="summary.csv, heatmap CSVs and w.csv from a store")
    p.add_argument("results", help="result store directory")
    p.add_argument("--out", help="output directory (default: the store)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("render", help="SVG heatmaps and w charts from summary.csv")
    p.add_argument("summary", help="summary.csv or the directory holding it")
    p.add_argument("--out", help="output directory (default: next to summary.csv)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("calibrate", help="find beta for a target infected fraction")
    common(p, seeds=True)
    p.add_argument("--band", type=_arg_type(parse_band), default=(0.05, 0.10),
                   help="target fraction of the population, 'lo,hi' percent (default 5,10)")
    p.add_argument("--range", type=_arg_type(_percent_pair), default=(0.0, 0.1),
                   help="beta search range, 'lo,hi' percent (default 0,0.1)")
    p.add_argument("--out", help="write the calibrated config as JSON here")
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SweepError, CalibrationError, UsageError, OSError, ValueError) as exc:
        print(f"cocoa-abm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
