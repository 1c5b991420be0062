"""Trial records, paired signed-rank tests, sweep surfaces and report export."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np


class UndefinedTestError(ValueError):
    """Raised when every paired difference is zero."""


@dataclass(frozen=True)
class TrialResult:
    scene_seed: int
    strategy_kind: str
    success: bool
    d_goal: float
    t_comp: float
    norm_distance: float
    norm_time: float
    excavates: int = 0
    burrow_episodes: int = 0
    pushed_out: int = 0
    faulted: bool = False
    max_penetration: float = 0.0
    events: tuple = ()

    CSV_FIELDS = ("scene_seed", "strategy_kind", "success", "d_goal", "t_comp", "norm_distance",
                  "norm_time", "excavates", "burrow_episodes", "pushed_out", "faulted",
                  "max_penetration")

    def row(self) -> dict:
        out = {}
        for k in self.CSV_FIELDS:
            v = getattr(self, k)
            out[k] = repr(float(v)) if isinstance(v, float) else (int(v) if isinstance(v, bool) else v)
        return out

    @classmethod
    def from_row(cls, row: dict) -> "TrialResult":
        conv = {"scene_seed": int, "strategy_kind": str, "excavates": int, "burrow_episodes": int,
                "pushed_out": int}
        kw = {}
        for k in cls.CSV_FIELDS:
            raw = row[k]
            if k in ("success", "faulted"):
                kw[k] = raw.strip().lower() in ("1", "true")
            else:
                kw[k] = conv.get(k, float)(raw)
        return cls(**kw)


def write_results_csv(results, path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TrialResult.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_results_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return [TrialResult.from_row(r) for r in csv.DictReader(fh)]


# -- Wilcoxon signed-rank -------------------------------------------------

EXACT_MAX_N = 25


def _signed_ranks(diffs):
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0.0]
    if d.size == 0:
        raise UndefinedTestError("identical samples: every paired difference is zero")
    a = np.abs(d)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(d.size)
    sa = a[order]
    i = 0
    while i < d.size:
        j = i
        while j + 1 < d.size and sa[j + 1] == sa[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return d, ranks


def _exact_p(ranks, w_plus):
    """Two-sided exact p by counting sign assignments (DP over doubled ranks)."""
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in r2:
        counts[r:] = counts[r:] + counts[:total + 1 - r].copy()
    w2 = int(round(2.0 * w_plus))
    n_all = 2 ** len(r2)
    lo = sum(counts[: w2 + 1])
    hi = sum(counts[w2:])
    return min(1.0, 2.0 * min(lo, hi) / n_all)


def _normal_p(ranks, w_plus, ties_sizes):
    n = ranks.size
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - sum(t ** 3 - t for t in ties_sizes) / 48.0
    if var <= 0:
        return 1.0
    dev = abs(w_plus - mean) - 0.5
    z = max(dev, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(pairs, exact_max_n: int = EXACT_MAX_N):
    """Paired two-sided Wilcoxon test on ``(a, b)`` pairs (differences a - b).

    Returns ``(W, p)`` where W is the positive-rank sum.  Zero differences
    are dropped; ties receive average ranks.
    """
    pairs = list(pairs)
    diffs = [float(a) - float(b) for a, b in pairs]
    d, ranks = _signed_ranks(diffs)
    w_plus = float(ranks[d > 0].sum())
    if d.size <= exact_max_n:
        return w_plus, float(_exact_p(ranks, w_plus))
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    return w_plus, _normal_p(ranks, w_plus, tie_counts[tie_counts > 1])


def significance_marker(p: float) -> str:
    if p < 0.0001:
        return "****"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


# -- sweep surfaces ---------------------------------------------------------

@dataclass
class SweepSurface:
    x_name: str
    x_values: tuple
    y_name: str
    y_values: tuple
    values: np.ndarray  # shape (len(x_values), len(y_values))
    metric: str
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{self.x_name}\\{self.y_name}"] + [repr(float(y)) for y in self.y_values])
        for x, row in zip(self.x_values, self.values):
            w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"metric": self.metric, "x_name": self.x_name, "x_values": list(self.x_values),
                "y_name": self.y_name, "y_values": list(self.y_values),
                "values": self.values.tolist(), "meta": self.meta}


def gaussian_kernel(sigma: float, truncate: float = 4.0) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _smooth_axis(a, kernel, axis):
    r = kernel.size // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    # 'symmetric' repeats the edge sample, i.e. half-sample reflection
    padded = np.pad(a, pad, mode="symmetric")
    out = np.zeros_like(a, dtype=float)
    n = a.shape[axis]
    for i, w in enumerate(kernel):
        out += w * np.take(padded, range(i, i + n), axis=axis)
    return out


def smooth_array(values: np.ndarray, sigma: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return values.copy()
    k = gaussian_kernel(sigma)
    out = values
    for axis in range(values.ndim):
        out = _smooth_axis(out, k, axis)
    return out


def gaussian_smooth(surface: SweepSurface, sigma: float = 1.0) -> SweepSurface:
    """Separable Gaussian blur in grid-index units, truncated at 4 sigma."""
    meta = dict(surface.meta, smoothing_sigma=sigma)
    return SweepSurface(surface.x_name, surface.x_values, surface.y_name, surface.y_values,
                        smooth_array(surface.values, sigma), surface.metric, meta)


METRICS = {"distance": "norm_distance", "time": "norm_time"}


def build_sweep_surface(results: dict, baseline_results, metric: str, x_name: str, x_values,
                        y_name: str, y_values) -> SweepSurface:
    """Ratio of baseline mean to per-cell mean (values above 1 beat the baseline).

    ``results`` maps ``(x, y)`` cell keys to lists of :class:`TrialResult`.
    """
    attr = METRICS[metric]
    missing = [(x, y) for x in x_values for y in y_values if not results.get((x, y))]
    if missing:
        raise KeyError(f"sweep cells missing results: {missing}")
    base = _mean([getattr(r, attr) for r in baseline_results if not r.faulted])
    vals = np.empty((len(x_values), len(y_values)))
    for i, x in enumerate(x_values):
        for j, y in enumerate(y_values):
            cell = _mean([getattr(r, attr) for r in results[(x, y)] if not r.faulted])
            vals[i, j] = _ratio(base, cell)
    meta = {"orientation": "baseline_mean / cell_mean; > 1 is better than baseline",
            "baseline_mean": base}
    return SweepSurface(x_name, tuple(x_values), y_name, tuple(y_values), vals, metric, meta)


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else math.nan


def _ratio(base, cell):
    if cell == 0.0:
        return 1.0 if base == 0.0 else math.inf
    return base / cell


# -- batch summaries ----------------------------------------------------------

def summarize_strategy(results) -> dict:
    ok = [r for r in results if not r.faulted]
    if not ok:
        return {"trials": len(results), "faulted": len(results)}
    nd = np.array([r.norm_distance for r in ok])
    nt = np.array([r.norm_time for r in ok])
    return {
        "trials": len(results),
        "faulted": len(results) - len(ok),
        "success_rate": float(np.mean([r.success for r in ok])),
        "mean_norm_distance": float(nd.mean()),
        "median_norm_distance": float(np.median(nd)),
        "mean_norm_time": float(nt.mean()),
        "median_norm_time": float(np.median(nt)),
        "excavates": int(sum(r.excavates for r in ok)),
        "pushed_out": int(sum(r.pushed_out for r in ok)),
    }


def paired_comparison(a_results, b_results, metric: str) -> dict:
    """Wilcoxon test on the scenes where both strategies ran without fault."""
    attr = METRICS[metric]
    b_by_seed = {r.scene_seed: r for r in b_results}
    pairs = [(getattr(r, attr), getattr(b_by_seed[r.scene_seed], attr)) for r in a_results
             if r.scene_seed in b_by_seed and not r.faulted and not b_by_seed[r.scene_seed].faulted]
    try:
        w, p = wilcoxon_signed_rank(pairs)
    except UndefinedTestError as exc:
        return {"n": len(pairs), "W": None, "p": None, "marker": "identical samples", "error": str(exc)}
    return {"n": len(pairs), "W": w, "p": p, "marker": significance_marker(p)}


def compare_strategies(by_strategy: dict) -> dict:
    names = list(by_strategy)
    summary = {name: summarize_strategy(rs) for name, rs in by_strategy.items()}
    tests = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            tests[f"{a} vs {b}"] = {m: paired_comparison(by_strategy[a], by_strategy[b], m)
                                    for m in METRICS}
    return {"strategies": summary, "tests": tests}


def markdown_report(report: dict, title: str = "Strategy comparison") -> str:
    lines = [f"# {title}", "", "| strategy | trials | faulted | success | mean dist | median dist | mean time | median time |",
             "|---|---|---|---|---|---|---|---|"]
    for name, s in report["strategies"].items():
        if "success_rate" not in s:
            lines.append(f"| {name} | {s['trials']} | {s['faulted']} | - | - | - | - | - |")
            continue
        lines.append(f"| {name} | {s['trials']} | {s['faulted']} | {100 * s['success_rate']:.1f}% | "
                     f"{s['mean_norm_distance']:.3f} | {s['median_norm_distance']:.3f} | "
                     f"{s['mean_norm_time']:.3f} | {s['median_norm_time']:.3f} |")
    if report["tests"]:
        lines += ["", "| pair | metric | n | W | p | |", "|---|---|---|---|---|---|"]
        for pair, by_metric in report["tests"].items():
            for m, t in by_metric.items():
                p = "-" if t["p"] is None else f"{t['p']:.3g}"
                w = "-" if t["W"] is None else f"{t['W']:g}"
                lines.append(f"| {pair} | {m} | {t['n']} | {w} | {p} | {t['marker']} |")
    return "\n".join(lines) + "\n"


def json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)
