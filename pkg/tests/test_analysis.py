import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage, stats

from clutterreach.analysis import (SweepSurface, TrialResult, UndefinedTestError,
                                   build_sweep_surface, compare_strategies, gaussian_kernel,
                                   gaussian_smooth, markdown_report, read_results_csv,
                                   significance_marker, smooth_array, wilcoxon_signed_rank,
                                   write_results_csv)
from oracles import wilcoxon_bruteforce


def _pairs(diffs):
    return [(d, 0.0) for d in diffs]


def test_wilcoxon_all_positive_five():
    w, p = wilcoxon_signed_rank(_pairs([1, 2, 3, 4, 5]))
    assert w == 15
    assert p == 0.0625


def test_wilcoxon_symmetric_pair():
    assert wilcoxon_signed_rank(_pairs([1, -1]))[1] == 1.0


def test_wilcoxon_all_zero_raises():
    with pytest.raises(UndefinedTestError, match="identical"):
        wilcoxon_signed_rank([(1.0, 1.0), (2.0, 2.0)])


def test_wilcoxon_zero_differences_dropped():
    assert wilcoxon_signed_rank(_pairs([0, 1, 2, 3, 4, 5])) == wilcoxon_signed_rank(_pairs([1, 2, 3, 4, 5]))


def test_wilcoxon_exact_matches_bruteforce_random():
    rng = np.random.default_rng(3)
    for _ in range(300):
        n = int(rng.integers(1, 11))
        # small integer values force ties and zeros
        d = rng.integers(-4, 5, size=n).astype(float)
        if not np.any(d):
            continue
        assert wilcoxon_signed_rank(_pairs(d)) == pytest.approx(wilcoxon_bruteforce(d), abs=0, rel=1e-12)


def test_wilcoxon_exact_matches_scipy_without_ties():
    rng = np.random.default_rng(5)
    for n in (6, 12, 20):
        d = rng.normal(size=n)
        _, p = wilcoxon_signed_rank(_pairs(d))
        assert p == pytest.approx(stats.wilcoxon(d, method="exact").pvalue, rel=1e-9)


def test_wilcoxon_normal_path_matches_scipy():
    rng = np.random.default_rng(7)
    for n in (30, 60, 200):
        d = np.round(rng.normal(0.3, 1.0, size=n), 1)  # rounding produces ties
        _, p = wilcoxon_signed_rank(_pairs(d))
        ref = stats.wilcoxon(d, zero_method="wilcox", correction=True, method="approx").pvalue
        assert p == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("p,marker", [(0.00005, "****"), (0.0005, "***"), (0.005, "**"),
                                      (0.03, "*"), (0.2, "ns"), (0.05, "ns"), (1.0, "ns")])
def test_significance_marker(p, marker):
    assert significance_marker(p) == marker


@given(st.floats(0, 1), st.floats(0, 1))
def test_marker_monotone(p, q):
    lo, hi = sorted((p, q))
    stars = lambda m: 0 if m == "ns" else len(m)
    assert stars(significance_marker(lo)) >= stars(significance_marker(hi))


def _surface(values):
    values = np.asarray(values, dtype=float)
    return SweepSurface("x", tuple(range(values.shape[0])), "y", tuple(range(values.shape[1])),
                        values, "distance")


def test_smooth_constant_unchanged():
    s = gaussian_smooth(_surface(np.full((10, 10), 2.5)), 1.0)
    assert np.max(np.abs(s.values - 2.5)) <= 1e-12


def test_smooth_sigma_zero_identity():
    v = np.random.default_rng(0).random((6, 7))
    assert np.array_equal(gaussian_smooth(_surface(v), 0.0).values, v)


def test_smooth_impulse_center_weight():
    v = np.zeros((9, 9))
    v[4, 4] = 1.0
    k = gaussian_kernel(1.0)
    assert gaussian_smooth(_surface(v), 1.0).values[4, 4] == pytest.approx(k[k.size // 2] ** 2, abs=1e-15)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 3.5])
def test_smooth_matches_scipy_reflect(sigma):
    v = np.random.default_rng(1).random((10, 10))
    ref = ndimage.gaussian_filter(v, sigma, mode="reflect", truncate=4.0)
    assert np.allclose(smooth_array(v, sigma), ref, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.0, 3.0), st.integers(0, 2 ** 31))
def test_smooth_preserves_mean(nx, ny, sigma, seed):
    v = np.random.default_rng(seed).random((nx, ny))
    assert abs(smooth_array(v, sigma).mean() - v.mean()) <= 1e-9


def _tr(seed, kind, nd, nt, success=False):
    return TrialResult(seed, kind, success, nd * 0.38, nt * 120.0, nd, nt)


def test_sweep_ratio_examples():
    base = [_tr(0, "straight_line", 0.098, 0.761)]
    cells = {(1, 1): [_tr(0, "burrow", 0.098 / 3.0, 0.609)], (1, 2): [_tr(0, "burrow", 0.098, 0.761)]}
    d = build_sweep_surface(cells, base, "distance", "A", (1,), "f", (1, 2))
    t = build_sweep_surface(cells, base, "time", "A", (1,), "f", (1, 2))
    assert d.values[0, 0] == pytest.approx(3.0)
    assert d.values[0, 1] == 1.0
    assert t.values[0, 0] == pytest.approx(0.761 / 0.609)
    assert "baseline" in d.meta["orientation"]


def test_sweep_missing_cells_listed():
    with pytest.raises(KeyError, match=r"\(2, 1\)"):
        build_sweep_surface({(1, 1): [_tr(0, "b", 0.1, 0.5)]}, [_tr(0, "s", 0.1, 0.5)], "time",
                            "A", (1, 2), "f", (1,))


def test_sweep_deterministic():
    base = [_tr(i, "s", 0.1 + i / 100, 0.5) for i in range(5)]
    cells = {(a, b): [_tr(i, "b", 0.05 * a + i / 50, 0.4 + b / 10) for i in range(5)]
             for a in (1, 2) for b in (1, 2, 3)}
    s1 = build_sweep_surface(cells, base, "distance", "A", (1, 2), "f", (1, 2, 3))
    s2 = build_sweep_surface(cells, base, "distance", "A", (1, 2), "f", (1, 2, 3))
    assert s1.to_csv() == s2.to_csv()


def test_csv_roundtrip(tmp_path):
    rs = [TrialResult(1, "burrow", True, 0.005, 12.3, 0.005 / 0.38, 12.3 / 120, 2, 1, 0, False, 1e-4),
          TrialResult(2, "excavate", False, 0.1, 120.0, 0.1 / 0.38, 1.0, 4, 0, 1, False, 2e-4)]
    path = tmp_path / "t.csv"
    write_results_csv(rs, path)
    back = read_results_csv(path)
    assert [dataclass_tuple(r) for r in back] == [dataclass_tuple(r) for r in rs]


def dataclass_tuple(r):
    return tuple(getattr(r, k) for k in TrialResult.CSV_FIELDS)


def test_compare_identical_strategy_reports_identical_samples():
    rs = [_tr(i, "a", 0.1 * i, 0.5) for i in range(5)]
    rep = compare_strategies({"a": rs, "a2": list(rs)})
    t = rep["tests"]["a vs a2"]["distance"]
    assert t["marker"] == "identical samples" and t["p"] is None
    assert "identical samples" in markdown_report(rep)
