"""Trial loop and batch/sweep engines."""

from __future__ import annotations

import copy
import dataclasses
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import TrialResult
from .config import ExperimentConfig, StrategyParams
from .effector import (TactileSensor, WrenchLimits, apply_command, effector_state,
                       world_contact_loads)
from .physics import create_world
from .scene import SceneSpec, generate_scene, scene_seeds
from .strategies import STRATEGY_CODES, STRATEGY_KINDS, initial_mode, policy_step

log = logging.getLogger(__name__)

BASELINE = "straight_line"

SWEEP_AXES = {
    "burrow": (("A_bur", tuple(np.round(np.arange(0.45, 0.9001, 0.05), 10))),
               ("f_bur", tuple(np.round(np.arange(0.5, 1.6251, 0.125), 10)))),
    "excavate": (("t_excv", tuple(np.round(np.arange(1.875, 7.5001, 0.625), 10))),
                 ("t_trig", tuple(np.round(np.arange(1.875, 7.5001, 0.625), 10)))),
}


def _rngs(scene_seed: int, kind: str):
    ss = np.random.SeedSequence([int(scene_seed) & 0xFFFFFFFF, STRATEGY_CODES[kind]])
    sensor_ss, policy_ss = ss.spawn(2)
    return np.random.default_rng(sensor_ss), np.random.default_rng(policy_ss)


def run_trial(scene: SceneSpec, strategy_kind: str, config: ExperimentConfig | None = None,
              tactile_log=None, trace=None) -> TrialResult:
    """Simulate one reach until the tip enters the goal circle or t_tot elapses.

    ``tactile_log`` is an optional text stream receiving NDJSON summaries;
    ``trace`` an optional list that collects ``(t, x, y, theta, primitive)``.
    """
    if strategy_kind not in STRATEGY_CODES:
        raise ValueError(f"unknown strategy {strategy_kind!r}; expected one of {STRATEGY_KINDS}")
    config = config or ExperimentConfig()
    sp, ev, eff = config.strategy, config.events, config.effector
    world = create_world(scene, config.physics, eff)
    dt = world.dt
    n_total = int(round(config.t_tot / dt))
    sub = max(1, int(round(sp.control_dt / dt)))
    goal = tuple(scene.goal)
    limits = WrenchLimits(eff.F_max, eff.M_max)
    sensor_rng, policy_rng = _rngs(scene.seed, strategy_kind)
    sensing = strategy_kind == "hybrid_event" or tactile_log is not None
    sensor = TactileSensor(eff, sensor_rng, log=tactile_log)

    wrench = (0.0, 0.0, 0.0)
    state = effector_state(world, wrench)
    mode = initial_mode(strategy_kind, sp, state, goal)
    summary = sensor.summary
    success = faulted = False
    while world.step_count < n_total:
        t = world.step_count * dt
        state = effector_state(world, wrench)
        if sensing:
            summary = sensor.update(t, state, world_contact_loads(world, state))
        cmd, mode = policy_step(strategy_kind, mode, state, summary, goal, t, sp, ev, policy_rng)
        cmd = apply_command(state, cmd, limits, goal, eff.taper_radius, v_max=sp.v_max,
                            omega_max=sp.omega_max, taper_floor=eff.taper_floor)
        if trace is not None:
            trace.append((t, state.tip_position[0], state.tip_position[1], state.theta, mode.primitive))
        res = world.advance(cmd, min(sub, n_total - world.step_count), stop_point=goal,
                            stop_radius=config.goal_radius)
        wrench = res.wrench
        if res.fault:
            faulted = True
            break
        x, y, _ = world.effector_pose()
        if math.hypot(goal[0] - x, goal[1] - y) <= config.goal_radius:
            success = True
            break

    x, y, _ = world.effector_pose()
    d_goal = math.hypot(goal[0] - x, goal[1] - y)
    t_comp = world.time if success else config.t_tot
    events = list(mode.events) + [(round(t_out, 9), "pushed_out", body, None)
                                  for body, t_out in world.pushed_out]
    events.sort(key=lambda e: e[0])
    if faulted:
        warnings.warn(f"physics fault in scene {scene.seed} ({strategy_kind}); trial excluded",
                      RuntimeWarning, stacklevel=2)
    return TrialResult(
        scene_seed=int(scene.seed), strategy_kind=strategy_kind, success=success,
        d_goal=d_goal, t_comp=t_comp, norm_distance=d_goal / scene.d_scene,
        norm_time=1.0 if not success else min(1.0, t_comp / config.t_tot),
        excavates=mode.excavates, burrow_episodes=mode.burrow_episodes,
        pushed_out=len(world.pushed_out), faulted=faulted,
        max_penetration=world.max_penetration, events=tuple(events))


# -- batch ------------------------------------------------------------------

def _trial_task(task):
    seed, kind, config, log_dir = task
    scene = generate_scene(seed, config.scene)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if log_dir is None:
            return run_trial(scene, kind, config)
        with open(Path(log_dir) / f"{seed}_{kind}.ndjson", "w", encoding="utf-8") as fh:
            return run_trial(scene, kind, config, tactile_log=fh)


def run_tasks(tasks, workers: int = 1) -> list:
    """Run trial tasks, returning results in task order regardless of workers."""
    if workers <= 1 or len(tasks) <= 1:
        return [_trial_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=chunk))


@dataclass
class BatchResult:
    results: list
    by_strategy: dict
    report: dict
    paths: dict = field(default_factory=dict)

    @property
    def fault_rate(self) -> float:
        return sum(r.faulted for r in self.results) / max(1, len(self.results))


def run_batch(config: ExperimentConfig, strategies=STRATEGY_KINDS, *, seeds=None,
              workers: int | None = None, output_dir=None, write: bool = True) -> BatchResult:
    """Paired design: every strategy runs on every scene, scene-major order."""
    strategies = list(strategies)
    for k in strategies:
        if k not in STRATEGY_CODES:
            raise ValueError(f"unknown strategy {k!r}")
    seeds = list(seeds) if seeds is not None else scene_seeds(config.seed, config.scenes)
    workers = workers or config.workers
    out = Path(output_dir) if output_dir is not None else config.resolved_output_dir()
    log_dir = None
    if write and config.tactile_log:
        log_dir = out / "tactile"
        log_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(s, k, config, log_dir) for s in seeds for k in strategies]
    results = run_tasks(tasks, workers)
    by_strategy = {k: [r for r in results if r.strategy_kind == k] for k in strategies}
    report = analysis.compare_strategies(by_strategy)
    report["faulted_trials"] = sum(r.faulted for r in results)
    report["fault_rate"] = report["faulted_trials"] / max(1, len(results))
    report["scenes"] = len(seeds)
    if report["faulted_trials"]:
        warnings.warn(f"{report['faulted_trials']} faulted trials excluded from statistics",
                      RuntimeWarning, stacklevel=2)
    batch = BatchResult(results, by_strategy, report)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        batch.paths = {"csv": out / "trials.csv", "json": out / "summary.json",
                       "markdown": out / "report.md"}
        analysis.write_results_csv(results, batch.paths["csv"])
        batch.paths["json"].write_text(analysis.json_dump(report), encoding="utf-8")
        batch.paths["markdown"].write_text(analysis.markdown_report(report), encoding="utf-8")
    return batch


# -- sweeps ------------------------------------------------------------------

@dataclass
class SweepResult:
    strategy: str
    distance: analysis.SweepSurface
    time: analysis.SweepSurface
    distance_smoothed: analysis.SweepSurface
    time_smoothed: analysis.SweepSurface
    cells: dict
    baseline: list
    paths: dict = field(default_factory=dict)


def _with_strategy(config: ExperimentConfig, **params) -> ExperimentConfig:
    cfg = copy.deepcopy(config)
    cfg.strategy = dataclasses.replace(cfg.strategy, **params)
    cfg.strategy.validate()
    return cfg


def run_sweep(config: ExperimentConfig, strategy: str, *, x_values=None, y_values=None,
              scenes: int = 50, seeds=None, workers: int | None = None, sigma: float = 1.0,
              output_dir=None, write: bool = True) -> SweepResult:
    """Grid sweep of one primitive's parameters against the straight-line baseline."""
    if strategy not in SWEEP_AXES:
        raise ValueError(f"sweep strategy must be one of {sorted(SWEEP_AXES)}")
    (x_name, x_def), (y_name, y_def) = SWEEP_AXES[strategy]
    x_values = tuple(x_def if x_values is None else x_values)
    y_values = tuple(y_def if y_values is None else y_values)
    seeds = list(seeds) if seeds is not None else scene_seeds(config.seed, scenes)
    workers = workers or config.workers

    tasks = [(s, BASELINE, config, None) for s in seeds]
    keys = []
    for x in x_values:
        for y in y_values:
            cfg = _with_strategy(config, **{x_name: float(x), y_name: float(y)})
            tasks.extend((s, strategy, cfg, None) for s in seeds)
            keys.append((x, y))
    results = run_tasks(tasks, workers)
    n = len(seeds)
    baseline = results[:n]
    cells = {k: results[n * (i + 1): n * (i + 2)] for i, k in enumerate(keys)}
    surfaces = {m: analysis.build_sweep_surface(cells, baseline, m, x_name, x_values, y_name, y_values)
                for m in analysis.METRICS}
    sweep = SweepResult(strategy, surfaces["distance"], surfaces["time"],
                        analysis.gaussian_smooth(surfaces["distance"], sigma),
                        analysis.gaussian_smooth(surfaces["time"], sigma), cells, baseline)
    if write:
        out = Path(output_dir) if output_dir is not None else config.resolved_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        for name in ("distance", "time", "distance_smoothed", "time_smoothed"):
            p = out / f"sweep_{strategy}_{name}.csv"
            p.write_text(getattr(sweep, name).to_csv(), encoding="utf-8")
            sweep.paths[name] = p
        p = out / f"sweep_{strategy}.json"
        p.write_text(analysis.json_dump({name: getattr(sweep, name).to_dict() for name in
                                         ("distance", "time", "distance_smoothed", "time_smoothed")}),
                     encoding="utf-8")
        sweep.paths["json"] = p
        analysis.write_results_csv(baseline + [r for k in keys for r in cells[k]],
                                   out / f"sweep_{strategy}_trials.csv")
    return sweep
