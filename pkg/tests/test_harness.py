import copy
import json
import math
from pathlib import Path

import pytest

from clutterreach.analysis import (UndefinedTestError, compare_strategies, read_results_csv,
                                   wilcoxon_signed_rank)
from clutterreach.config import ExperimentConfig, PhysicsConfig
from clutterreach.harness import SWEEP_AXES, run_batch, run_sweep, run_trial
from clutterreach.physics import create_world
from clutterreach.scene import SceneObject, SceneSpec, empty_scene, scene_seeds
from oracles import straight_reach_time

FIXTURES = Path(__file__).parent / "fixtures"


def short_config(t_tot=20.0, **kw):
    cfg = ExperimentConfig(**kw)
    cfg.t_tot = t_tot
    return cfg


def jam_scene():
    # heavy block pinned against the back wall across the whole width, covering the goal
    block = SceneObject(0.529, 0.12, 0.57, 0.265, 0.38 - 0.0605)
    sc = empty_scene()
    sc.objects = [block]
    return sc


def test_empty_scene_straight_reach_matches_kinematics():
    cfg = ExperimentConfig()
    sc = empty_scene()
    x0, y0, _ = create_world(sc, cfg.physics, cfg.effector).effector_pose()
    dist = math.hypot(sc.goal[0] - x0, sc.goal[1] - y0)
    expect = straight_reach_time(dist, cfg.strategy.v_max, cfg.effector.taper_radius,
                                 cfg.effector.taper_floor, cfg.goal_radius)
    r = run_trial(sc, "straight_line", cfg)
    assert r.success and r.d_goal <= cfg.goal_radius
    # motor spin-up and control-tick quantisation
    assert r.t_comp == pytest.approx(expect, rel=0.02)
    assert r.norm_time == pytest.approx(r.t_comp / cfg.t_tot)
    assert r.excavates == 0 and r.pushed_out == 0 and not r.faulted


def test_wall_pinned_jam_fails_straight():
    cfg = short_config(15.0)
    r = run_trial(jam_scene(), "straight_line", cfg)
    assert not r.success
    assert r.d_goal > cfg.goal_radius
    assert r.t_comp == cfg.t_tot and r.norm_time == 1.0
    assert r.norm_distance == pytest.approx(r.d_goal / 0.38)


@pytest.mark.parametrize("kind", ["hybrid_event", "hybrid_clock", "excavate"])
def test_trial_deterministic(kind):
    cfg = short_config(25.0)
    sc = SceneSpec.from_json((FIXTURES / "pushed_out_scene.json").read_text())
    a, b = run_trial(sc, kind, cfg), run_trial(sc, kind, cfg)
    assert a == b


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError, match="unknown strategy"):
        run_trial(empty_scene(), "zigzag")


def test_physics_fault_flags_trial():
    cfg = short_config(15.0)
    cfg.physics = PhysicsConfig(fault_penetration=1e-7)
    with pytest.warns(RuntimeWarning, match="physics fault"):
        r = run_trial(jam_scene(), "straight_line", cfg)
    assert r.faulted and not r.success and r.norm_time == 1.0


def test_pushed_out_fixture_hybrid_clock():
    sc = SceneSpec.from_json((FIXTURES / "pushed_out_scene.json").read_text())
    r = run_trial(sc, "hybrid_clock", short_config(30.0))
    assert r.pushed_out >= 1
    outs = [e for e in r.events if e[1] == "pushed_out"]
    assert len(outs) == r.pushed_out
    # the expulsion happens during a clock excavate
    t_out = outs[0][0]
    starts = [e[0] for e in r.events if e[1] == "excavate"]
    assert any(s <= t_out <= s + 5.0 for s in starts)


def test_tactile_log_ndjson():
    import io
    buf = io.StringIO()
    run_trial(jam_scene(), "straight_line", short_config(8.0), tactile_log=buf)
    lines = buf.getvalue().splitlines()
    # 15 Hz over 8 s, contact from about 6 s
    assert 118 <= len(lines) <= 121
    docs = [json.loads(x) for x in lines]
    assert all({"peak_force", "tip_force", "peak_region"} <= d.keys() for d in docs)
    assert max(d["peak_force"] for d in docs) > 5.0


def test_trace_collects_ticks():
    tr = []
    run_trial(empty_scene(), "burrow", short_config(1.0), trace=tr)
    assert len(tr) == 20
    assert all(p[4] == "burrow" for p in tr)


def test_batch_pairing_and_outputs(tmp_path):
    cfg = short_config(6.0, scenes=10, seed=3)
    b = run_batch(cfg, ["straight_line", "burrow"], output_dir=tmp_path)
    assert len(b.results) == 20
    seeds = scene_seeds(3, 10)
    assert [r.scene_seed for r in b.by_strategy["straight_line"]] == seeds
    assert [r.scene_seed for r in b.by_strategy["burrow"]] == seeds
    assert [r.strategy_kind for r in b.results[:2]] == ["straight_line", "burrow"]
    assert all(r.norm_time == 1.0 for r in b.results if not r.success)
    back = read_results_csv(b.paths["csv"])
    assert [(r.scene_seed, r.strategy_kind, r.d_goal) for r in back] == \
        [(r.scene_seed, r.strategy_kind, r.d_goal) for r in b.results]
    summary = json.loads(b.paths["json"].read_text())
    assert summary["scenes"] == 10 and summary["faulted_trials"] == 0
    assert "straight_line" in b.paths["markdown"].read_text()


def test_batch_same_strategy_identical_samples():
    cfg = short_config(3.0, scenes=3)
    b = run_batch(cfg, ["burrow"], write=False)
    with pytest.raises(UndefinedTestError, match="identical samples"):
        wilcoxon_signed_rank([(r.norm_distance, r.norm_distance) for r in b.results])
    report = compare_strategies({"a": b.results, "b": list(b.results)})
    assert all(t["marker"] == "identical samples" for t in report["tests"]["a vs b"].values())


def test_batch_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        run_batch(short_config(), ["nope"], write=False)


def test_sweep_default_grid_shape():
    (xn, xv), (yn, yv) = SWEEP_AXES["burrow"]
    assert (xn, yn) == ("A_bur", "f_bur")
    assert len(xv) == 10 and len(yv) == 10
    assert xv[0] == 0.45 and xv[-1] == 0.9 and yv[0] == 0.5 and yv[-1] == 1.625
    (xn, xv), (yn, yv) = SWEEP_AXES["excavate"]
    assert len(xv) == len(yv) == 10 and xv[0] == 1.875 and xv[-1] == 7.5


def test_sweep_empty_scenes_no_advantage(tmp_path):
    cfg = ExperimentConfig()
    cfg.scene.continuous_count_min = cfg.scene.continuous_count_max = 0
    sw = run_sweep(cfg, "burrow", x_values=(0.45, 0.9), y_values=(0.5, 1.625), scenes=3,
                   output_dir=tmp_path)
    assert all(r.success for r in sw.baseline)
    assert all(r.success for rs in sw.cells.values() for r in rs)
    # every trial ends inside the goal circle, so distance ratios hover at one
    assert sw.distance.values == pytest.approx(1.0, abs=0.01)
    # oscillating around a clear path can only slow the reach
    assert (sw.time.values <= 1.0 + 1e-9).all()
    assert sw.distance_smoothed.values.mean() == pytest.approx(sw.distance.values.mean(), abs=1e-9)
    assert sw.time_smoothed.values.mean() == pytest.approx(sw.time.values.mean(), abs=1e-9)
    for name in ("distance", "time", "distance_smoothed", "time_smoothed", "json"):
        assert sw.paths[name].exists()


def test_sweep_rejects_straight():
    with pytest.raises(ValueError):
        run_sweep(ExperimentConfig(), "straight_line", write=False)


def test_config_not_mutated_by_sweep():
    cfg = short_config(2.0)
    before = copy.deepcopy(cfg)
    run_sweep(cfg, "excavate", x_values=(1.875,), y_values=(1.875,), scenes=1, write=False)
    assert cfg == before
