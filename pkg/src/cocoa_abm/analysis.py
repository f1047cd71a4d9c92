"""Post-run analytics: increments of N_IP, OLS trend, growth labels, seed
exclusion and per-scenario aggregation."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .engine import format_p

DEFAULT_EXCLUSION_THRESHOLD = 30
DEFAULT_SLOPE_EPSILON = 0.01


class GrowthLabel(str, enum.Enum):
    EXPONENTIAL = "Exponential"
    LINEAR = "Linear"
    LOGARITHMIC = "Logarithmic"


@dataclass(frozen=True)
class TrendFit:
    w: float
    b: float
    label: GrowthLabel


@dataclass(frozen=True)
class ScenarioSummary:
    p1: float
    p2: float
    p3: float
    mean_total_infected: float
    std_total_infected: float
    mean_w: float
    label: GrowthLabel
    n_seeds_included: int
    excluded_seeds: tuple = ()

    @property
    def key(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)


@dataclass
class SweepSummary:
    """Scenario summaries keyed by ``(p1, p2, p3)``, in lexicographic order."""

    scenarios: dict = field(default_factory=dict)
    excluded_seeds: tuple = ()

    def __len__(self) -> int:
        return len(self.scenarios)

    def __getitem__(self, key) -> ScenarioSummary:
        return self.scenarios[tuple(float(v) for v in key)]

    def __iter__(self):
        return iter(self.scenarios.values())


def daily_increments(series: Sequence[int]) -> np.ndarray:
    """``series[t] - series[t-1]`` for every consecutive pair."""
    a = np.asarray(series)
    if a.ndim != 1 or a.size < 2:
        raise ValueError("need a series of length >= 2")
    return np.diff(a)


def increment_days(n: int) -> np.ndarray:
    """Day index of each of ``n`` increments of a series starting on day 1."""
    return np.arange(2, n + 2, dtype=np.float64)


def fit_slope(increments: Sequence[float], t: Sequence[float] | None = None) -> tuple[float, float]:
    """Least-squares line ``w*t + b`` through the increments.

    The abscissa defaults to the day index of each increment (2, 3, ...).
    """
    y = np.asarray(increments, dtype=np.float64)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("need at least 2 points")
    x = increment_days(y.size) if t is None else np.asarray(t, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("t and increments differ in length")
    # centred normal equations keep the slope exact for small integer data
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise ValueError("all abscissae are equal")
    w = float(np.dot(dx, y - ym)) / sxx
    b = float(ym - w * xm)
    return w, b


def classify_growth(w: float, epsilon: float = DEFAULT_SLOPE_EPSILON) -> GrowthLabel:
    if not epsilon >= 0:
        raise ValueError("epsilon must be >= 0")
    if w > epsilon:
        return GrowthLabel.EXPONENTIAL
    if w < -epsilon:
        return GrowthLabel.LOGARITHMIC
    return GrowthLabel.LINEAR


def trend_of(n_ip: Sequence[int], epsilon: float = DEFAULT_SLOPE_EPSILON) -> TrendFit:
    w, b = fit_slope(daily_increments(n_ip))
    return TrendFit(w, b, classify_growth(w, epsilon))


def _final(run) -> int:
    if hasattr(run, "final_n_ip"):
        return int(run.final_n_ip)
    return int(run["n_ip"][-1])


def _seed(run) -> int:
    return int(run.seed if hasattr(run, "seed") else run["seed"])


def _series(run) -> np.ndarray:
    if hasattr(run, "n_ip"):
        return np.asarray(run.n_ip)
    return np.asarray(run["n_ip"])


def _app(run) -> tuple[float, float, float]:
    if hasattr(run, "app"):
        return tuple(float(v) for v in run.app.as_tuple())
    return tuple(float(v) for v in run["app"])


def exclusion_set(baseline_runs: Iterable, threshold: int = DEFAULT_EXCLUSION_THRESHOLD) -> list[int]:
    """Seeds whose baseline run ends with fewer than ``threshold`` ever infected."""
    return sorted({_seed(r) for r in baseline_runs if _final(r) < threshold})


def aggregate(results: Iterable, excluded: Iterable[int] = (),
              epsilon: float = DEFAULT_SLOPE_EPSILON) -> SweepSummary:
    """Summarize runs per scenario over the seeds not in ``excluded``.

    ``results`` holds run results (or mappings with ``app``, ``seed`` and
    ``n_ip`` entries). The std is the population std (ddof 0). Every
    scenario must end up with at least one included seed.
    """
    excluded = frozenset(int(s) for s in excluded)
    groups: dict = {}
    for r in results:
        groups.setdefault(_app(r), []).append(r)
    seed_sets = {frozenset(_seed(r) for r in runs) for runs in groups.values()}
    if len(seed_sets) > 1:
        raise ValueError("scenarios do not share one seed set")

    out = SweepSummary(excluded_seeds=tuple(sorted(excluded)))
    for key in sorted(groups):
        runs = sorted(groups[key], key=_seed)
        kept = [r for r in runs if _seed(r) not in excluded]
        if not kept:
            raise ValueError(f"no included seeds for scenario {key}")
        finals = np.array([_final(r) for r in kept], dtype=np.float64)
        ws = np.array([trend_of(_series(r), epsilon).w for r in kept])
        mean_w = float(math.fsum(ws) / ws.size)
        out.scenarios[key] = ScenarioSummary(
            *key, mean_total_infected=float(math.fsum(finals) / finals.size),
            std_total_infected=float(np.std(finals)), mean_w=mean_w,
            label=classify_growth(mean_w, epsilon), n_seeds_included=len(kept),
            excluded_seeds=tuple(sorted(excluded & {_seed(r) for r in runs})))
    return out


SUMMARY_COLUMNS = ("p1", "p2", "p3", "mean_total_infected", "std_total_infected", "mean_w",
                   "label", "n_seeds")


def _num(v: float) -> str:
    return repr(float(v))


def summary_csv(summary: SweepSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summary:
        w.writerow((format_p(s.p1), format_p(s.p2), format_p(s.p3), _num(s.mean_total_infected),
                    _num(s.std_total_infected), _num(s.mean_w), s.label.value,
                    s.n_seeds_included))
    return buf.getvalue()


def read_summary_csv(text: str) -> SweepSummary:
    out = SweepSummary()
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(SUMMARY_COLUMNS) - set(rows[0]):
        raise ValueError("summary.csv is missing columns")
    for row in rows:
        key = (float(row["p1"]), float(row["p2"]), float(row["p3"]))
        out.scenarios[key] = ScenarioSummary(
            *key, mean_total_infected=float(row["mean_total_infected"]),
            std_total_infected=float(row["std_total_infected"]),
            mean_w=float(row["mean_w"]), label=GrowthLabel(row["label"]),
            n_seeds_included=int(row["n_seeds"]))
    return out


@dataclass(frozen=True)
class Heatmap:
    """Values for one fixed p3: ``values[r, c]`` is at ``p2 = rows[r]``, ``p1 = cols[c]``.

    Rows run p2 descending and columns p1 ascending.
    """

    p3: float
    rows: tuple
    cols: tuple
    values: np.ndarray


def heatmaps(summary: SweepSummary, attr: str = "mean_total_infected") -> list[Heatmap]:
    p1s = sorted({s.p1 for s in summary})
    p2s = sorted({s.p2 for s in summary}, reverse=True)
    out = []
    for p3 in sorted({s.p3 for s in summary}):
        vals = np.full((len(p2s), len(p1s)), np.nan)
        for r, p2 in enumerate(p2s):
            for c, p1 in enumerate(p1s):
                s = summary.scenarios.get((p1, p2, p3))
                if s is not None:
                    vals[r, c] = getattr(s, attr)
        out.append(Heatmap(p3, tuple(p2s), tuple(p1s), vals))
    return out


def heatmap_csv(hm: Heatmap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p2\\p1"] + [format_p(p) for p in hm.cols])
    for r, p2 in enumerate(hm.rows):
        w.writerow([format_p(p2)] + ["" if math.isnan(v) else _num(v) for v in hm.values[r]])
    return buf.getvalue()


W_COLUMNS = ("p1", "p2", "p3", "mean_w", "label")


def w_csv(summary: SweepSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(W_COLUMNS)
    for s in summary:
        w.writerow((format_p(s.p1), format_p(s.p2), format_p(s.p3), _num(s.mean_w),
                    s.label.value))
    return buf.getvalue()


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation (average ranks for ties)."""
    return float(spearmanr(a, b).statistic)
