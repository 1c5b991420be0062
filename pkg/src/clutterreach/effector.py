"""Sensorised finger: command clamping, synthetic taxels, bulk-field
compensation and contact summaries for the event-driven policy.

Taxel arrays run along both long sides of the link.  Columns are indexed from
the tip (column 0 nearest the tip), rows across the link height.  Each taxel
reports a triaxial force in its own frame: x shear along the link, y shear
across the height, z normal.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._accel import jit
from .config import EffectorConfig
from .physics import Contact, VelocityCmd, World

LEFT, RIGHT, TIP = "left", "right", "tip"


class DegenerateFitWarning(RuntimeWarning):
    """RANSAC found no non-degenerate sample; a least-squares plane was used."""


@dataclass(frozen=True)
class EffectorState:
    tip_position: tuple
    theta: float
    L: float
    linear_velocity: tuple = (0.0, 0.0)
    angular_velocity: float = 0.0
    net_wrench: tuple = (0.0, 0.0, 0.0)

    @property
    def forward(self):
        return math.sin(self.theta), math.cos(self.theta)

    @property
    def right(self):
        return math.cos(self.theta), -math.sin(self.theta)


@dataclass(frozen=True)
class WrenchLimits:
    F_max: float = 15.0
    M_max: float = 4.5

    def __post_init__(self):
        if not (self.F_max > 0 and self.M_max > 0):
            raise ValueError("wrench limits must be positive")


@dataclass
class TaxelGrid:
    side: str
    forces: np.ndarray  # (rows, cols, 3)
    pitch: float
    timestamp: float = 0.0

    @property
    def shape(self):
        return self.forces.shape[:2]

    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.forces, axis=2)

    def column_distance(self) -> np.ndarray:
        """Distance of each column centre from the tip, metres."""
        return (np.arange(self.forces.shape[1]) + 0.5) * self.pitch

    def copy(self, forces=None) -> "TaxelGrid":
        return TaxelGrid(self.side, self.forces.copy() if forces is None else forces,
                         self.pitch, self.timestamp)


@dataclass(frozen=True)
class ContactSummary:
    peak_force: float = 0.0
    peak_region: str = LEFT
    peak_location_along_link: float = 0.0
    tip_force: float = 0.0
    timestamp: float = 0.0

    def to_json(self) -> str:
        return json.dumps({"t": self.timestamp, "peak_force": self.peak_force,
                           "peak_region": self.peak_region,
                           "peak_location": self.peak_location_along_link,
                           "tip_force": self.tip_force}, sort_keys=True)


def normalize_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def effector_state(world: World, wrench=(0.0, 0.0, 0.0)) -> EffectorState:
    x, y, theta = world.effector_pose()
    vx, vy, w = world.effector_velocity()
    return EffectorState((x, y), normalize_angle(theta), world.effector_config.link_length,
                         (vx, vy), w, tuple(wrench))


# -- command shaping ---------------------------------------------------

def taper_factor(distance: float, taper_radius: float, floor: float = 0.2) -> float:
    if taper_radius <= 0 or distance >= taper_radius:
        return 1.0
    return floor + (1.0 - floor) * max(distance, 0.0) / taper_radius


def apply_command(state: EffectorState, cmd: VelocityCmd, limits: WrenchLimits, goal,
                  taper_radius: float = 0.05, *, v_max: float = 0.045, omega_max: float = 0.1,
                  taper_floor: float = 0.2) -> VelocityCmd:
    """Proportional wrench backoff followed by the goal-proximity speed taper.

    Never increases the magnitude of any velocity component.
    """
    vx, vy, w = cmd.vx, cmd.vy, cmd.angular
    fx, fy, mz = state.net_wrench
    if abs(fx) > limits.F_max:
        vx *= limits.F_max / abs(fx)
    if abs(fy) > limits.F_max:
        vy *= limits.F_max / abs(fy)
    if abs(mz) > limits.M_max:
        w *= limits.M_max / abs(mz)

    d = math.hypot(goal[0] - state.tip_position[0], goal[1] - state.tip_position[1])
    k = taper_factor(d, taper_radius, taper_floor)
    v_cap, w_cap = k * v_max, k * omega_max
    speed = math.hypot(vx, vy)
    if speed > v_cap:
        vx *= v_cap / speed
        vy *= v_cap / speed
    if abs(w) > w_cap:
        w = math.copysign(w_cap, w)
    return VelocityCmd(vx, vy, w)


# -- taxel synthesis -----------------------------------------------------

@dataclass
class ContactLoads:
    """Contacts on the link expressed in the link frame."""

    s: np.ndarray  # distance from the tip along the link, m
    lateral: np.ndarray  # signed offset, + = right side
    normal: np.ndarray  # N
    tangent: np.ndarray  # N

    def __len__(self):
        return self.s.size


def contact_loads(state: EffectorState, contacts) -> ContactLoads:
    if not contacts:
        z = np.zeros(0)
        return ContactLoads(z, z, z, z)
    pts = np.array([c.point for c in contacts], dtype=float)
    fn = np.array([c.normal_force for c in contacts], dtype=float)
    ft = np.array([c.tangent_force for c in contacts], dtype=float)
    return _loads_from_points(state, pts, fn, ft)


def _loads_from_points(state, pts, fn, ft):
    rel = pts - np.asarray(state.tip_position)
    fwd = np.asarray(state.forward)
    rgt = np.asarray(state.right)
    s = np.clip(-(rel @ fwd), 0.0, state.L)
    return ContactLoads(s, rel @ rgt, fn, ft)


def world_contact_loads(world: World, state: EffectorState) -> ContactLoads:
    """Fast path used by the trial loop: read the solver buffers directly."""
    from .physics import _kernels as K

    cint, cf = world.contact_arrays()
    e = world.effector_id
    mask = (cint[:, K.CI_BA] == e) | (cint[:, K.CI_BB] == e)
    if not mask.any():
        z = np.zeros(0)
        return ContactLoads(z, z, z, z)
    rows = cf[mask]
    inv_dt = 1.0 / world.dt
    return _loads_from_points(state, rows[:, [K.C_PX, K.C_PY]], rows[:, K.C_PN] * inv_dt,
                              rows[:, K.C_PT] * inv_dt)


def _bulk_plane(theta, side, rows, cols, amplitude):
    """Smooth orientation-dependent offset standing in for the earth-field drift."""
    r = np.arange(rows)[:, None]
    c = np.arange(cols)[None, :]
    phase = 0.0 if side == LEFT else 1.3
    out = np.empty((rows, cols, 3))
    for k in range(3):
        ph = phase + 2.1 * k
        offset = amplitude * math.sin(theta + ph)
        slope_c = 0.05 * amplitude * math.cos(theta + ph)
        slope_r = 0.03 * amplitude * math.sin(2.0 * theta + ph)
        out[:, :, k] = offset + slope_c * c + slope_r * r
    return out


def sample_taxels(state: EffectorState, contacts, config: EffectorConfig | None = None,
                  rng: np.random.Generator | None = None, timestamp: float = 0.0,
                  noise_std: float | None = None, bulk_field: float | None = None):
    """Project contact forces onto the left/right taxel grids.

    ``contacts`` is a list of :class:`Contact` on the effector or a
    :class:`ContactLoads`.  Each contact spreads a normalised Gaussian
    footprint (sigma = one pitch) over its side, so every grid conserves
    the total contact force.  Noise and the bulk plane default to zero
    unless given explicitly or via ``rng``.
    """
    config = config or EffectorConfig()
    loads = contacts if isinstance(contacts, ContactLoads) else contact_loads(state, contacts)
    rows, cols = config.taxel_rows, config.taxel_cols
    pitch = state.L / cols
    grids = {LEFT: np.zeros((rows, cols, 3)), RIGHT: np.zeros((rows, cols, 3))}
    if len(loads):
        rr = np.arange(rows)[:, None]
        cc = np.arange(cols)[None, :]
        row0 = 0.5 * (rows - 1)
        for s, lat, fn, ft in zip(loads.s, loads.lateral, loads.normal, loads.tangent):
            col0 = s / pitch - 0.5
            w = np.exp(-0.5 * ((cc - col0) ** 2 + (rr - row0) ** 2))
            w /= w.sum()
            g = grids[RIGHT if lat > 0.0 else LEFT]
            g[:, :, 0] += w * ft
            g[:, :, 2] += w * fn
    if noise_std is None:
        noise_std = config.noise_std if rng is not None else 0.0
    if bulk_field is None:
        bulk_field = config.bulk_field if rng is not None else 0.0
    for side, g in grids.items():
        if bulk_field:
            g += _bulk_plane(state.theta, side, rows, cols, bulk_field)
        if noise_std:
            g += rng.normal(0.0, noise_std, size=g.shape)
    return (TaxelGrid(LEFT, grids[LEFT], pitch, timestamp),
            TaxelGrid(RIGHT, grids[RIGHT], pitch, timestamp))


# -- bulk-field compensation -----------------------------------------------

@jit
def _plane3(x1, y1, z1, x2, y2, z2, x3, y3, z3):
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    if abs(det) < 1e-12:
        return 0.0, 0.0, 0.0, False
    a = ((z2 - z1) * (y3 - y1) - (z3 - z1) * (y2 - y1)) / det
    b = ((x2 - x1) * (z3 - z1) - (x3 - x1) * (z2 - z1)) / det
    return a, b, z1 - a * x1 - b * y1, True


@jit
def _lsq_plane(xs, ys, zs, mask):
    sxx = sxy = sx = syy = sy = n = 0.0
    sxz = syz = sz = 0.0
    for i in range(xs.size):
        if not mask[i]:
            continue
        x, y, z = xs[i], ys[i], zs[i]
        sxx += x * x
        sxy += x * y
        sx += x
        syy += y * y
        sy += y
        n += 1.0
        sxz += x * z
        syz += y * z
        sz += z
    # Cramer's rule on the 3x3 normal equations
    det = (sxx * (syy * n - sy * sy) - sxy * (sxy * n - sy * sx) + sx * (sxy * sy - syy * sx))
    if abs(det) < 1e-12:
        return 0.0, 0.0, 0.0, False
    da = (sxz * (syy * n - sy * sy) - sxy * (syz * n - sy * sz) + sx * (syz * sy - syy * sz))
    db = (sxx * (syz * n - sz * sy) - sxz * (sxy * n - sy * sx) + sx * (sxy * sz - syz * sx))
    dc = (sxx * (syy * sz - syz * sy) - sxy * (sxy * sz - syz * sx) + sxz * (sxy * sy - syy * sx))
    return da / det, db / det, dc / det, True


@jit
def ransac_plane(xs, ys, zs, samples, threshold, guard=0.0):
    """Best-consensus plane z = a x + b y + c, refit to its inliers.

    ``samples`` holds index triples, one row per iteration.  Inliers lying
    within ``guard`` (Chebyshev distance in x, y) of an outlier are left out
    of the least-squares refit, since a contact footprint's faint tail sits
    under the threshold.  Returns (a, b, c, inlier count, ok); ok is False
    when every sample was degenerate.
    """
    n = xs.size
    best_n = -1
    best_err = np.inf
    ba = bb = bc = 0.0
    for it in range(samples.shape[0]):
        i, j, k = samples[it, 0], samples[it, 1], samples[it, 2]
        a, b, c, ok = _plane3(xs[i], ys[i], zs[i], xs[j], ys[j], zs[j], xs[k], ys[k], zs[k])
        if not ok:
            continue
        cnt = 0
        err = 0.0
        for m in range(n):
            r = abs(zs[m] - (a * xs[m] + b * ys[m] + c))
            if r < threshold:
                cnt += 1
                err += r
        if cnt > best_n or (cnt == best_n and err < best_err):
            best_n = cnt
            best_err = err
            ba, bb, bc = a, b, c
    if best_n < 3:
        return 0.0, 0.0, 0.0, 0, False
    inl = np.zeros(n, dtype=np.bool_)
    mask = np.zeros(n, dtype=np.bool_)
    for _ in range(3):
        cnt = 0
        for m in range(n):
            inl[m] = abs(zs[m] - (ba * xs[m] + bb * ys[m] + bc)) < threshold
            if inl[m]:
                cnt += 1
        if cnt < 3:
            break
        kept = 0
        for m in range(n):
            mask[m] = inl[m]
            if inl[m] and guard > 0.0:
                for q in range(n):
                    if not inl[q] and abs(xs[q] - xs[m]) <= guard and abs(ys[q] - ys[m]) <= guard:
                        mask[m] = False
                        break
            if mask[m]:
                kept += 1
        a, b, c, ok = _lsq_plane(xs, ys, zs, mask)
        if kept < max(4, n // 8) or not ok:
            a, b, c, ok = _lsq_plane(xs, ys, zs, inl)
        if not ok:
            break
        ba, bb, bc = a, b, c
        best_n = cnt
    return ba, bb, bc, best_n, True


def _taxel_coords(rows, cols):
    rr, cc = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float), indexing="ij")
    return cc.ravel(), rr.ravel()


def fit_bulk_planes(grid: TaxelGrid, iterations: int = 100, threshold: float = 0.2,
                    rng: np.random.Generator | None = None, guard: float = 2.0) -> np.ndarray:
    """Per-component plane coefficients (3 x [a, b, c]) over taxel index space."""
    rows, cols = grid.shape
    n = rows * cols
    if n < 3:
        raise ValueError("plane compensation needs at least 3 taxels")
    rng = rng if rng is not None else np.random.default_rng(0)
    xs, ys = _taxel_coords(rows, cols)
    samples = np.argsort(rng.random((iterations, n)), axis=1)[:, :3].astype(np.int64)
    planes = np.zeros((3, 3))
    for k in range(3):
        zs = np.ascontiguousarray(grid.forces[:, :, k].ravel())
        a, b, c, _, ok = ransac_plane(xs, ys, zs, samples, threshold, guard)
        if not ok:
            warnings.warn("degenerate taxel geometry; subtracting least-squares plane",
                          DegenerateFitWarning, stacklevel=2)
            A = np.column_stack([xs, ys, np.ones(n)])
            a, b, c = np.linalg.lstsq(A, zs, rcond=None)[0]
        planes[k] = (a, b, c)
    return planes


def subtract_planes(grid: TaxelGrid, planes: np.ndarray) -> TaxelGrid:
    rows, cols = grid.shape
    xs, ys = _taxel_coords(rows, cols)
    out = grid.forces.copy()
    for k in range(3):
        a, b, c = planes[k]
        out[:, :, k] -= (a * xs + b * ys + c).reshape(rows, cols)
    return grid.copy(out)


def ransac_plane_compensate(grid: TaxelGrid, iterations: int = 100, threshold: float = 0.2,
                            rng: np.random.Generator | None = None) -> TaxelGrid:
    """Fit and subtract a bulk plane from each force component independently."""
    return subtract_planes(grid, fit_bulk_planes(grid, iterations, threshold, rng))


# -- summarisation ---------------------------------------------------------

def summarize_taxels(records, L: float, pitch: float, tip_band: float = 0.15,
                     window: int = 2, timestamp: float = 0.0) -> ContactSummary:
    """Summarise taxel records ``(side, row, col, fx, fy, fz)`` given in any order.

    The peak taxel is the one with the largest force magnitude (ties go to
    the lowest (side, col, row)).  Its force is reported as the magnitude of
    the force summed over the contact footprint: all rows of the columns
    within ``window`` of the peak column on the same side.
    """
    recs = sorted(records, key=lambda r: (r[0] != LEFT, r[2], r[1]))
    if not recs:
        return ContactSummary(timestamp=timestamp)
    side = np.array([r[0] == RIGHT for r in recs])
    col = np.array([r[2] for r in recs])
    f = np.array([r[3:6] for r in recs], dtype=float)
    mag = np.linalg.norm(f, axis=1)
    i = int(np.argmax(mag))
    band = tip_band * L
    dist = (col + 0.5) * pitch
    near = (side == side[i]) & (np.abs(col - col[i]) <= window)
    peak = float(np.linalg.norm(f[near].sum(axis=0))) if mag[i] > 0 else 0.0
    in_tip = dist <= band + 1e-12
    tip = 0.0
    for sd in (False, True):
        sel = in_tip & (side == sd)
        if sel.any():
            tip = max(tip, float(np.linalg.norm(f[sel].sum(axis=0))))
    loc = float(min(dist[i], L))
    region = TIP if dist[i] <= band + 1e-12 else (RIGHT if side[i] else LEFT)
    return ContactSummary(peak, region, loc, tip, timestamp)


def grid_records(*grids):
    out = []
    for g in grids:
        rows, cols = g.shape
        for r in range(rows):
            for c in range(cols):
                out.append((g.side, r, c, *g.forces[r, c]))
    return out


def summarize_contacts(left: TaxelGrid, right: TaxelGrid, state: EffectorState,
                       tip_band: float = 0.15, window: int = 2) -> ContactSummary:
    return summarize_taxels(grid_records(left, right), state.L, left.pitch, tip_band, window,
                            timestamp=max(left.timestamp, right.timestamp))


def _summarize_fast(left: TaxelGrid, right: TaxelGrid, L: float, tip_band: float, window: int,
                    timestamp: float) -> ContactSummary:
    """Array form of :func:`summarize_taxels` for the control loop."""
    f = np.stack([left.forces, right.forces])  # (2, rows, cols, 3)
    mag = np.linalg.norm(f, axis=3)
    # canonical order (side, col, row) for tie-breaking
    canon = mag.transpose(0, 2, 1).ravel()
    k = int(np.argmax(canon))
    rows, cols = mag.shape[1], mag.shape[2]
    sd, c = k // (rows * cols), (k // rows) % cols
    pitch = left.pitch
    lo, hi = max(0, c - window), min(cols, c + window + 1)
    peak = float(np.linalg.norm(f[sd, :, lo:hi].sum(axis=(0, 1)))) if canon[k] > 0 else 0.0
    dist = (np.arange(cols) + 0.5) * pitch
    ntip = int(np.sum(dist <= tip_band * L + 1e-12))
    tip = 0.0
    if ntip:
        tip = float(max(np.linalg.norm(f[s, :, :ntip].sum(axis=(0, 1))) for s in (0, 1)))
    region = TIP if c < ntip else (RIGHT if sd else LEFT)
    return ContactSummary(peak, region, float(min(dist[c], L)), tip, timestamp)


class TactileSensor:
    """Decimated sensing pipeline run synchronously inside the trial loop.

    Samples at ``sensor_rate``; refits the bulk planes at
    ``compensation_rate`` and subtracts the cached planes in between.
    """

    def __init__(self, config: EffectorConfig, rng: np.random.Generator, log=None):
        self.config = config
        self.rng = rng
        self.period = 1.0 / config.sensor_rate
        self.refit_period = 1.0 / config.compensation_rate
        self.next_sample = 0.0
        self.next_refit = 0.0
        self.planes = {LEFT: np.zeros((3, 3)), RIGHT: np.zeros((3, 3))}
        self.summary = ContactSummary()
        self.log = log
        self.samples = 0

    def update(self, t: float, state: EffectorState, loads: ContactLoads) -> ContactSummary:
        if t + 1e-9 < self.next_sample:
            return self.summary
        cfg = self.config
        self.next_sample += self.period
        self.samples += 1
        left, right = sample_taxels(state, loads, cfg, self.rng, timestamp=t)
        if t + 1e-9 >= self.next_refit:
            self.next_refit += self.refit_period
            for g in (left, right):
                self.planes[g.side] = fit_bulk_planes(g, cfg.ransac_iterations, cfg.ransac_threshold,
                                                      self.rng)
        left = subtract_planes(left, self.planes[LEFT])
        right = subtract_planes(right, self.planes[RIGHT])
        self.summary = _summarize_fast(left, right, state.L, cfg.tip_band, 2, t)
        if self.log is not None:
            self.log.write(self.summary.to_json() + "\n")
        return self.summary
