"""Scenario grids, parallel execution, result store and beta calibration.

A store is a directory holding ``manifest.json`` and one CSV per scenario
under ``runs/``. Rows are sorted by seed then day. A (scenario, seed) run is
present iff its CSV holds exactly ``max_days`` rows for that seed, so an
interrupted sweep resumes by running only what is missing.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import DEFAULT_EXCLUSION_THRESHOLD, exclusion_set
from .domain import AppParams, ScenarioConfig, config_from_dict, config_to_dict, validate_config
from .engine import CSV_COLUMNS, format_p, run_simulation

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_SEEDS = tuple(range(1, 31))
MANIFEST = "manifest.json"
RUNS_DIR = "runs"
THREADS_ENV = "COCOA_ABM_THREADS"


class SweepError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepPlan:
    p1: tuple = DEFAULT_GRID
    p2: tuple = DEFAULT_GRID
    p3: tuple = DEFAULT_GRID
    seeds: tuple = DEFAULT_SEEDS
    config: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("p1", "p2", "p3"):
            vals = getattr(self, name)
            if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError(f"grid {name} must be non-empty probabilities")
            if len(set(vals)) != len(vals):
                raise ValueError(f"grid {name} has duplicates")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")

    @property
    def n_scenarios(self) -> int:
        return len(self.p1) * len(self.p2) * len(self.p3)

    @property
    def n_runs(self) -> int:
        return self.n_scenarios * len(self.seeds)


def enumerate_scenarios(plan: SweepPlan) -> list[AppParams]:
    return [AppParams(a, b, c) for a, b, c in
            itertools.product(sorted(plan.p1), sorted(plan.p2), sorted(plan.p3))]


def default_parallelism() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise SweepError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise SweepError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def config_hash(config: ScenarioConfig) -> str:
    """sha256 of the canonical JSON form of ``config`` without the app triple."""
    doc = config_to_dict(config)
    doc.pop("app", None)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def scenario_filename(app: AppParams) -> str:
    p1, p2, p3 = app.as_tuple()
    return f"p1-{format_p(p1)}_p2-{format_p(p2)}_p3-{format_p(p3)}.csv"


# ---- running

def _run_rows(config: ScenarioConfig, app: tuple, seed: int) -> str:
    return run_simulation(config.with_app(*app), seed).to_csv(header=False)


_WORKER_CONFIG: Optional[ScenarioConfig] = None


def _init_worker(config: ScenarioConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _worker(app: tuple, seed: int) -> str:
    return _run_rows(_WORKER_CONFIG, app, seed)


def _execute(config: ScenarioConfig, jobs: Sequence[tuple], parallelism: int):
    """Yield ``(job, csv_rows, error)`` for each ``(app_tuple, seed)`` job, in
    completion order."""
    if parallelism <= 1 or len(jobs) <= 1:
        for job in jobs:
            try:
                yield job, _run_rows(config, *job), None
            except Exception as exc:  # reported per run
                yield job, None, exc
        return
    with ProcessPoolExecutor(max_workers=parallelism, initializer=_init_worker,
                             initargs=(config,)) as pool:
        futures = {pool.submit(_worker, *job): job for job in jobs}
        try:
            for fut in as_completed(futures):
                job = futures[fut]
                try:
                    yield job, fut.result(), None
                except Exception as exc:
                    yield job, None, exc
        finally:
            for fut in futures:
                fut.cancel()


# ---- the store

@dataclass
class StoredRun:
    app: AppParams
    seed: int
    table: np.ndarray  # columns day,S,E,I,R,D,n_ip,new_infections,notifications_issued,hospitalized

    @property
    def n_ip(self) -> np.ndarray:
        return self.table[:, 6]

    @property
    def final_n_ip(self) -> int:
        return int(self.table[-1, 6])


def _parse_rows(text: str) -> dict[int, list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise SweepError("unexpected CSV header")
    by_seed: dict[int, list] = {}
    for row in rows[1:]:
        if len(row) != len(CSV_COLUMNS):
            raise SweepError("malformed CSV row")
        by_seed.setdefault(int(row[0]), []).append(row)
    return by_seed


def _complete(rows: list, max_days: int) -> bool:
    return len(rows) == max_days and [int(r[4]) for r in rows] == list(range(1, max_days + 1))


def read_scenario(path: Path, max_days: int) -> dict[int, list[list[str]]]:
    """Complete runs in one scenario file as ``{seed: rows}``; partial runs are dropped."""
    try:
        text = path.read_text()
    except FileNotFoundError:
        return {}
    try:
        by_seed = _parse_rows(text)
    except (SweepError, ValueError):
        log.warning("ignoring unreadable %s", path)
        return {}
    return {s: rows for s, rows in by_seed.items() if _complete(rows, max_days)}


def _write_scenario(path: Path, by_seed: dict[int, list[list[str]]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for seed in sorted(by_seed):
        w.writerows(sorted(by_seed[seed], key=lambda r: int(r[4])))
    tmp = path.with_suffix(".csv.tmp")
    tmp.write_text(buf.getvalue())
    os.replace(tmp, path)


def manifest_doc(plan: SweepPlan, excluded: Optional[list[int]],
                 threshold: int = DEFAULT_EXCLUSION_THRESHOLD) -> dict:
    cfg = config_to_dict(plan.config)
    cfg.pop("app", None)
    return {
        "tool": "cocoa_abm",
        "version": __version__,
        "config": cfg,
        "beta": repr(float(plan.config.beta)),
        "config_hash": config_hash(plan.config),
        "grid": {"p1": [float(v) for v in sorted(plan.p1)],
                 "p2": [float(v) for v in sorted(plan.p2)],
                 "p3": [float(v) for v in sorted(plan.p3)]},
        "seeds": [int(s) for s in plan.seeds],
        "exclusion_threshold": threshold,
        "excluded_seeds": excluded,
    }


def write_manifest(out_dir: Path, doc: dict) -> None:
    path = Path(out_dir) / MANIFEST
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise SweepError(f"no {MANIFEST} in {out_dir}") from None
    except json.JSONDecodeError as exc:
        raise SweepError(f"corrupt {path}: {exc}") from None


@dataclass
class SweepReport:
    executed: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)  # (app tuple, seed, message)
    excluded_seeds: Optional[list] = None

    @property
    def ok(self) -> bool:
        return not self.errors


def run_sweep(plan: SweepPlan, parallelism: Optional[int] = None, out_dir="results",
              threshold: int = DEFAULT_EXCLUSION_THRESHOLD) -> SweepReport:
    """Run every (scenario, seed) of ``plan`` missing from ``out_dir``.

    Each scenario file is rewritten once all of its pending runs are done
    (and, on interruption, with whatever finished). Failures are collected
    per run in the report instead of aborting the sweep.
    """
    config = validate_config(plan.config)
    plan = replace(plan, config=config)
    parallelism = default_parallelism() if parallelism is None else int(parallelism)
    if parallelism < 1:
        raise SweepError("parallelism must be >= 1")
    out = Path(out_dir)
    runs_dir = out / RUNS_DIR
    runs_dir.mkdir(parents=True, exist_ok=True)

    if (out / MANIFEST).exists():
        old = read_manifest(out)
        if old.get("config_hash") != config_hash(config):
            raise SweepError(f"{out} holds results for a different configuration")
    write_manifest(out, manifest_doc(plan, None, threshold))

    report = SweepReport()
    stored: dict[tuple, dict] = {}
    pending: dict[tuple, set] = {}
    jobs = []
    for app in enumerate_scenarios(plan):
        key = app.as_tuple()
        have = read_scenario(runs_dir / scenario_filename(app), config.max_days)
        stored[key] = have
        missing = [s for s in plan.seeds if s not in have]
        report.skipped += len(plan.seeds) - len(missing)
        if missing:
            pending[key] = set(missing)
            jobs.extend((key, s) for s in missing)

    dirty: set = set()

    def flush(key):
        app = AppParams(*key)
        try:
            _write_scenario(runs_dir / scenario_filename(app), stored[key])
        except OSError as exc:
            for seed in sorted(stored[key]):
                report.errors.append((key, seed, f"write failed: {exc}"))
        dirty.discard(key)

    try:
        for (key, seed), text, exc in _execute(config, jobs, parallelism):
            pending[key].discard(seed)
            if exc is not None:
                report.errors.append((key, seed, f"{type(exc).__name__}: {exc}"))
            else:
                stored[key][seed] = list(csv.reader(io.StringIO(text)))
                report.executed += 1
                dirty.add(key)
            if not pending[key] and key in dirty:
                flush(key)
    finally:
        for key in sorted(dirty):
            flush(key)

    baseline = (0.0, 0.0, 0.0)
    if baseline in stored and all(s in stored[baseline] for s in plan.seeds):
        try:
            runs = load_runs(out, [AppParams(*baseline)], plan.seeds, config.max_days)
        except SweepError:
            runs = None  # baseline not on disk, e.g. its write failed
        if runs is not None:
            report.excluded_seeds = exclusion_set(runs, threshold)
    write_manifest(out, manifest_doc(plan, report.excluded_seeds, threshold))
    for key, seed, msg in report.errors:
        log.error("run %s seed %d: %s", key, seed, msg)
    return report


def _table(rows: list[list[str]]) -> np.ndarray:
    return np.array([[int(v) for v in r[4:]] for r in rows], dtype=np.int64)


def load_runs(out_dir, scenarios: Iterable[AppParams], seeds: Iterable[int],
              max_days: int) -> list[StoredRun]:
    """Stored runs for every (scenario, seed); raises :class:`SweepError` listing
    the pairs that are missing."""
    runs_dir = Path(out_dir) / RUNS_DIR
    seeds = list(seeds)
    out, missing = [], []
    for app in scenarios:
        have = read_scenario(runs_dir / scenario_filename(app), max_days)
        for s in seeds:
            if s in have:
                out.append(StoredRun(app, int(s), _table(have[s])))
            else:
                missing.append((app.as_tuple(), s))
    if missing:
        shown = ", ".join(f"({format_p(a)},{format_p(b)},{format_p(c)}) seed {s}"
                          for (a, b, c), s in missing[:20])
        more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
        raise SweepError(f"{len(missing)} runs missing: {shown}{more}")
    return out


def plan_from_manifest(doc: dict, base: Optional[ScenarioConfig] = None) -> SweepPlan:
    cfg = config_from_dict(dict(doc["config"]), base)
    cfg = replace(cfg, beta=float(doc["beta"]))
    g = doc["grid"]
    return SweepPlan(tuple(g["p1"]), tuple(g["p2"]), tuple(g["p3"]), tuple(doc["seeds"]), cfg)


# ---- calibration

@dataclass(frozen=True)
class CalibrationResult:
    beta: float
    fraction: float
    mean_final: float
    iterations: int
    converged: bool
    history: tuple  # (beta, fraction) per probe, in probe order


def mean_final_n_ip(config: ScenarioConfig, seeds: Sequence[int],
                    parallelism: int = 1) -> float:
    jobs = [((0.0, 0.0, 0.0), int(s)) for s in seeds]
    finals = {}
    for (_, seed), text, exc in _execute(config, jobs, parallelism):
        if exc is not None:
            raise exc
        finals[seed] = int(text.strip().splitlines()[-1].split(",")[10])
    return sum(finals[int(s)] for s in seeds) / len(seeds)


def calibrate_beta(config: ScenarioConfig, band: tuple = (0.05, 0.10),
                   seeds: Sequence[int] = DEFAULT_SEEDS, search_range: tuple = (0.0, 1e-3),
                   parallelism: int = 1, max_iter: int = 20) -> CalibrationResult:
    """Bisect beta until the seed-mean infected fraction lands in ``band``.

    The app is switched off and no seeds are excluded. The low end of
    ``search_range`` is probed first, then the high end; the response is
    assumed to increase with beta. After ``max_iter`` bisection steps
    without a hit the probe closest to the band is returned with
    ``converged=False``.
    """
    lo_f, hi_f = (float(v) for v in band)
    if not 0.0 <= lo_f <= hi_f <= 1.0:
        raise ValueError("band must satisfy 0 <= lo <= hi <= 1")
    b_lo, b_hi = (float(v) for v in search_range)
    if not 0.0 <= b_lo <= b_hi <= 1.0:
        raise ValueError("search range must satisfy 0 <= lo <= hi <= 1")
    base = validate_config(replace(config, app=AppParams()))
    pop = base.population
    history = []

    def probe(beta):
        m = mean_final_n_ip(replace(base, beta=beta), seeds, parallelism)
        history.append((beta, m / pop))
        return m

    def done(beta, m, it, ok=True):
        return CalibrationResult(beta, m / pop, m, it, ok, tuple(history))

    m_lo = probe(b_lo)
    if lo_f <= m_lo / pop <= hi_f:
        return done(b_lo, m_lo, 0)
    if m_lo / pop > hi_f:
        raise CalibrationError(f"band unreachable: beta={b_lo!r} already gives mean "
                               f"{m_lo:g} ({m_lo / pop:.2%})")
    m_hi = probe(b_hi)
    if lo_f <= m_hi / pop <= hi_f:
        return done(b_hi, m_hi, 0)
    if m_hi / pop < lo_f:
        raise CalibrationError(f"band unreachable in [{b_lo!r}, {b_hi!r}]: endpoint means "
                               f"{m_lo:g} ({m_lo / pop:.2%}) and {m_hi:g} ({m_hi / pop:.2%})")

    target = 0.5 * (lo_f + hi_f)
    best = min(((b_lo, m_lo), (b_hi, m_hi)), key=lambda bm: abs(bm[1] / pop - target))
    for it in range(1, max_iter + 1):
        mid = 0.5 * (b_lo + b_hi)
        m = probe(mid)
        f = m / pop
        if abs(f - target) < abs(best[1] / pop - target):
            best = (mid, m)
        if lo_f <= f <= hi_f:
            return done(mid, m, it)
        if f < lo_f:
            b_lo = mid
        else:
            b_hi = mid
    log.warning("calibration did not reach the band after %d iterations", max_iter)
    return done(best[0], best[1], max_iter, ok=False)
