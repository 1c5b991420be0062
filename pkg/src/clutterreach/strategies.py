"""Reaching strategies: straight line, burrow, excavate and the two hybrids.

Headings follow the effector convention (clockwise from +y).  All command
builders return a :class:`VelocityCmd` whose linear speed is at most v_max.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .config import EventThresholds, StrategyParams
from .effector import LEFT, RIGHT, ContactSummary, EffectorState, normalize_angle
from .physics import VelocityCmd

STRAIGHT, BURROW, EXCAVATE = "straight", "burrow", "excavate"
CW, CCW = "cw", "ccw"

STRATEGY_KINDS = ("straight_line", "burrow", "excavate", "hybrid_clock", "hybrid_event")
STRATEGY_CODES = {k: i for i, k in enumerate(STRATEGY_KINDS)}

_EPS = 1e-9


def _goal_dir(state: EffectorState, goal):
    dx = goal[0] - state.tip_position[0]
    dy = goal[1] - state.tip_position[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return 0.0, 0.0, 0.0
    return dx / d, dy / d, d


def _clamp_speed(vx, vy, v_max):
    s = math.hypot(vx, vy)
    if s > v_max:
        return vx * v_max / s, vy * v_max / s
    return vx, vy


def straight_line_command(state: EffectorState, goal, params: StrategyParams) -> VelocityCmd:
    ux, uy, d = _goal_dir(state, goal)
    if d == 0.0:
        return VelocityCmd()
    err = normalize_angle(math.atan2(ux, uy) - state.theta)
    w = 0.0 if abs(err) < params.theta_deadband else math.copysign(params.omega_max, err)
    return VelocityCmd(params.v_max * ux, params.v_max * uy, w)


def burrow_phase(t: float, params: StrategyParams) -> float:
    if params.burrow_freq_units == "hz":
        return math.sin(2.0 * math.pi * params.f_bur * t)
    return math.sin(params.f_bur * t)


def burrow_command(state: EffectorState, goal, t: float, params: StrategyParams) -> VelocityCmd:
    """Goal-directed motion plus a lateral oscillation, renormalised to v_max."""
    ux, uy, d = _goal_dir(state, goal)
    if d == 0.0:
        return VelocityCmd()
    straight = straight_line_command(state, goal, params)
    gain = params.A_bur / (1.0 - params.A_bur) * burrow_phase(t, params)
    if gain == 0.0:
        return straight
    # d x z-hat = (dy, -dx)
    vx, vy = ux + gain * uy, uy - gain * ux
    n = math.hypot(vx, vy)
    return VelocityCmd(params.v_max * vx / n, params.v_max * vy / n, straight.angular)


def body_to_world(theta: float, bx: float, by: float):
    """Rotate a link-frame vector (x right, y forward) into the world frame."""
    c, s = math.cos(theta), math.sin(theta)
    return c * bx + s * by, -s * bx + c * by


def excavate_command(state: EffectorState, t_frac: float, direction: str,
                     params: StrategyParams) -> VelocityCmd:
    """Scoop primitive: rotate out and back while retracting along the link.

    ``t_frac`` runs over [0, 1] across the excavate duration; ``direction``
    is "ccw" or "cw" (the mirror image).
    """
    if direction not in (CW, CCW):
        raise ValueError(f"excavate direction must be 'cw' or 'ccw', got {direction!r}")
    s = params.s_excv
    k = (1.0 + (s - 1.0) * t_frac) / s
    w = -k * params.omega_max * math.sin(2.0 * math.pi * t_frac)
    bx = math.sin(1.5 * math.pi * t_frac) - state.L * w
    by = -math.cos(1.5 * math.pi * t_frac)
    if direction == CW:
        bx, w = -bx, -w
    vx, vy = body_to_world(state.theta, k * params.v_max * bx, k * params.v_max * by)
    vx, vy = _clamp_speed(vx, vy, params.v_max)
    return VelocityCmd(vx, vy, w)


@dataclass
class StrategyMode:
    primitive: str = STRAIGHT
    direction: str | None = None
    excv_tick: int = 0
    excv_ticks: int = 0
    next_trigger: float = math.inf
    push_since: float | None = None
    best_distance: float = math.inf
    last_progress: float = 0.0
    excavates: int = 0
    burrow_episodes: int = 0
    events: list = field(default_factory=list)


def initial_mode(kind: str, params: StrategyParams, state: EffectorState | None = None,
                 goal=None) -> StrategyMode:
    if kind not in STRATEGY_CODES:
        raise ValueError(f"unknown strategy {kind!r}")
    mode = StrategyMode()
    if kind in ("excavate", "hybrid_clock"):
        mode.next_trigger = params.t_trig
    if kind == "burrow" or kind == "hybrid_clock":
        mode.primitive = BURROW
        mode.burrow_episodes = 1
    if state is not None and goal is not None:
        mode.best_distance = _goal_dir(state, goal)[2]
    return mode


def update_progress(mode: StrategyMode, state: EffectorState, goal, t: float,
                    params: StrategyParams) -> None:
    d = _goal_dir(state, goal)[2]
    if d <= mode.best_distance - params.progress_quantum:
        mode.best_distance = d
        mode.last_progress = t


def check_push_trigger(mode: StrategyMode, summary: ContactSummary, t: float,
                       thresholds: EventThresholds, rng: np.random.Generator):
    """Excavate direction once the tip load has sat inside the push band long enough."""
    if thresholds.F_push_min <= summary.tip_force <= thresholds.F_push_max:
        if mode.push_since is None:
            mode.push_since = t
        if t - mode.push_since >= thresholds.t_push - _EPS:
            mode.push_since = None
            return CW if rng.random() < 0.5 else CCW
        return None
    mode.push_since = None
    return None


def check_jam_trigger(mode: StrategyMode, summary: ContactSummary, t: float,
                      thresholds: EventThresholds, rng: np.random.Generator):
    """Excavate away from the loaded side when progress has stalled under load.

    Progress is tracked by :func:`update_progress`: the best goal distance
    must shrink by the progress quantum within t_prog.
    """
    if t - mode.last_progress < thresholds.t_prog - _EPS:
        return None
    if not summary.peak_force >= thresholds.F_excv:
        return None
    if summary.peak_region == LEFT:
        return CCW
    if summary.peak_region == RIGHT:
        return CW
    return CW if rng.random() < 0.5 else CCW


def _enter_excavate(mode, direction, t, params, trigger):
    mode.primitive = EXCAVATE
    mode.direction = direction
    mode.excv_tick = 0
    mode.excv_ticks = max(1, math.ceil(params.t_excv / params.control_dt - 1e-9))
    mode.excavates += 1
    mode.push_since = None
    mode.events.append((round(t, 9), "excavate", direction, trigger))


def _set_base(mode, primitive, t):
    if primitive == BURROW and mode.primitive != BURROW:
        mode.burrow_episodes += 1
        mode.events.append((round(t, 9), "burrow", None, "force"))
    mode.primitive = primitive


def policy_step(kind: str, mode: StrategyMode, state: EffectorState, summary: ContactSummary,
                goal, t: float, params: StrategyParams, thresholds: EventThresholds,
                rng: np.random.Generator):
    """One control tick.  Returns ``(command, mode)``; ``mode`` is a new object."""
    mode = dataclasses.replace(mode, events=list(mode.events))
    if kind == "hybrid_event":
        update_progress(mode, state, goal, t, params)

    if mode.primitive != EXCAVATE:
        direction, trigger = None, None
        if kind in ("excavate", "hybrid_clock"):
            if t >= mode.next_trigger - _EPS:
                direction, trigger = (CW if rng.random() < 0.5 else CCW), "clock"
        elif kind == "hybrid_event":
            direction = check_push_trigger(mode, summary, t, thresholds, rng)
            trigger = "push"
            if direction is None:
                direction = check_jam_trigger(mode, summary, t, thresholds, rng)
                trigger = "jam"
        if direction is not None:
            _enter_excavate(mode, direction, t, params, trigger)

    if mode.primitive == EXCAVATE:
        t_frac = mode.excv_tick * params.control_dt / params.t_excv
        cmd = excavate_command(state, min(t_frac, 1.0), mode.direction, params)
        mode.excv_tick += 1
        if mode.excv_tick >= mode.excv_ticks:
            end = t + params.control_dt
            mode.primitive = BURROW if kind == "hybrid_clock" else STRAIGHT
            if kind == "hybrid_clock":
                mode.burrow_episodes += 1
            mode.next_trigger = end + params.t_trig if kind in ("excavate", "hybrid_clock") else math.inf
            mode.last_progress = end
            mode.best_distance = _goal_dir(state, goal)[2]
            mode.direction = None
        return cmd, mode

    if kind == "hybrid_event":
        _set_base(mode, BURROW if summary.peak_force >= thresholds.F_bur else STRAIGHT, t)
    if mode.primitive == BURROW:
        return burrow_command(state, goal, t, params), mode
    return straight_line_command(state, goal, params), mode
