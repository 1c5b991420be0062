"""Planar rigid-body world for top-down clutter reaching.

Gravity points out of the plane; its only in-plane effect is Coulomb floor
friction on the movable objects.  The effector is a dynamic body driven by a
force-limited velocity motor, so it stalls instead of tunnelling when the
clutter jams.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ..config import EffectorConfig, PhysicsConfig
from ..scene import SceneObject, SceneSpec, inside_bounds, separation
from . import _kernels as K

WALL, OBJECT, EFFECTOR = "wall", "object", "effector"
_KIND_CODE = {WALL: K.KIND_WALL, OBJECT: K.KIND_OBJECT, EFFECTOR: K.KIND_EFFECTOR}


class SceneOverlapError(ValueError):
    def __init__(self, a, b):
        super().__init__(f"scene objects {a} and {b} overlap")
        self.pair = (a, b)


class SceneBoundsError(ValueError):
    pass


class PhysicsFault(RuntimeError):
    pass


@dataclass(frozen=True)
class VelocityCmd:
    """Planar twist of the effector tip.  ``angular`` follows the effector's
    clockwise-from-+y heading convention."""

    vx: float = 0.0
    vy: float = 0.0
    angular: float = 0.0

    @property
    def linear(self):
        return (self.vx, self.vy)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class Body:
    id: int
    kind: str
    shape: str
    half_extents: tuple
    radius: float
    mass: float
    moment: float
    floor_friction_coeff: float
    body_friction_coeff: float
    position: tuple
    angle: float
    velocity: tuple
    angular_velocity: float
    active: bool


@dataclass(frozen=True)
class Contact:
    body_a: int
    body_b: int
    point: tuple
    normal: tuple
    penetration_depth: float
    normal_force: float
    tangent_force: float
    friction_coeff: float


@dataclass
class AdvanceResult:
    steps: int
    max_penetration: float
    fault: int
    wrench: tuple
    pushed_out: list


def _rect_mean_radius(w, h, n=48):
    u = (np.arange(n) + 0.5) / n - 0.5
    xx, yy = np.meshgrid(u * w, u * h)
    return float(np.mean(np.hypot(xx, yy)))


class World:
    """Fixed-timestep world.  Not thread-safe; one instance per trial."""

    def __init__(self, config: PhysicsConfig, bounds, rng_seed=0):
        self.config = config
        self.dt = config.dt
        self.d_scene, self.w_scene = bounds
        self.rng_seed = rng_seed
        self.step_count = 0
        self._bodies = []  # (kind, shape, mass, moment, mu_floor, mu_body, r_floor, pose)
        self._shapes = []  # (body, type, ox, oy, hx, hy, r)
        self.effector_id = -1
        self.pushed_out = []
        self.max_penetration = 0.0
        self._n_contacts = 0
        self._built = False

    # -- construction -------------------------------------------------
    def _add_body(self, kind, mass, moment, pose, mu_floor, mu_body, r_floor=0.0):
        self._bodies.append(dict(kind=kind, mass=mass, moment=moment, pose=pose,
                                 mu_floor=mu_floor, mu_body=mu_body, r_floor=r_floor))
        return len(self._bodies) - 1

    def _add_box(self, body, hx, hy, ox=0.0, oy=0.0):
        self._shapes.append((body, K.SHAPE_BOX, ox, oy, hx, hy, 0.0))

    def _add_circle(self, body, r, ox=0.0, oy=0.0):
        self._shapes.append((body, K.SHAPE_CIRCLE, ox, oy, 0.0, 0.0, r))

    def add_wall(self, cx, cy, hx, hy):
        b = self._add_body(WALL, math.inf, math.inf, (cx, cy, 0.0), 0.0, self.config.mu_body)
        self._add_box(b, hx, hy)
        return b

    def add_object(self, obj: SceneObject):
        m = obj.mass
        moment = m * (obj.width ** 2 + obj.height ** 2) / 12.0
        b = self._add_body(OBJECT, m, moment, (obj.x, obj.y, obj.yaw), self.config.mu_floor,
                           self.config.mu_body, _rect_mean_radius(obj.width, obj.height))
        self._add_box(b, 0.5 * obj.width, 0.5 * obj.height)
        return b

    def add_effector(self, tip, theta, eff: EffectorConfig):
        """Link body whose origin is the tip-cap centre; the link extends backwards."""
        L, r = eff.link_length, eff.half_width
        moment = eff.mass * L * L / 3.0
        b = self._add_body(EFFECTOR, eff.mass, moment, (tip[0], tip[1], -theta), 0.0, eff.mu)
        self._add_box(b, r, 0.5 * L, 0.0, -0.5 * L)
        self._add_circle(b, r)
        self.effector_id = b
        self.effector_config = eff
        return b

    def build(self):
        nb, ns = len(self._bodies), len(self._shapes)
        self.bstate = np.zeros((nb, 6))
        self.bprops = np.zeros((nb, 6))
        self.bflags = np.zeros((nb, 2), dtype=np.int64)
        for i, b in enumerate(self._bodies):
            self.bstate[i, :3] = b["pose"]
            finite = math.isfinite(b["mass"])
            self.bprops[i] = (1.0 / b["mass"] if finite else 0.0,
                              1.0 / b["moment"] if finite else 0.0,
                              b["mass"] if finite else 0.0,
                              b["mu_floor"], b["mu_body"], b["r_floor"])
            self.bflags[i] = (_KIND_CODE[b["kind"]], 1)
        self.sint = np.array([(s[0], s[1]) for s in self._shapes], dtype=np.int64).reshape(ns, 2)
        self.sgeo = np.array([s[2:] for s in self._shapes], dtype=np.float64).reshape(ns, 5)
        cap = self.config.max_contacts
        self.cint = np.zeros((cap, 5), dtype=np.int64)
        self.cf = np.zeros((cap, K.N_CF))
        self.prev_keys = np.zeros(cap, dtype=np.int64)
        self.prev_imp = np.zeros((cap, 2))
        self.aabb = np.zeros((ns, 4))
        self.floor_acc = np.zeros((nb, 3))
        self.motor_target = np.zeros(3)
        self.motor_acc = np.zeros(3)
        eff = getattr(self, "effector_config", None)
        self.motor_limits = np.array([eff.F_max, eff.M_max]) if eff else np.zeros(2)
        c = self.config
        self.prm = np.zeros(K.N_PRM)
        self.prm[K.PRM_DT] = c.dt
        self.prm[K.PRM_ITERS] = c.iterations
        self.prm[K.PRM_BETA] = c.baumgarte
        self.prm[K.PRM_SLOP] = c.slop
        self.prm[K.PRM_G] = c.gravity
        self.prm[K.PRM_WARM] = 1.0 if c.warm_starting else 0.0
        self.prm[K.PRM_FRONT_Y] = 0.0
        self.prm[K.PRM_FAULT_PEN] = c.fault_penetration
        self.prm[K.PRM_REST] = c.restitution
        self._wall_pose = self.bstate[self.bflags[:, 0] == K.KIND_WALL, :3].copy()
        self._built = True
        return self

    # -- state access -------------------------------------------------
    @property
    def time(self) -> float:
        return self.step_count * self.dt

    @property
    def n_bodies(self) -> int:
        return self.bstate.shape[0]

    def body(self, i) -> Body:
        b = self._bodies[i]
        shapes = [s for s in self._shapes if s[0] == i]
        box = next((s for s in shapes if s[1] == K.SHAPE_BOX), None)
        circ = next((s for s in shapes if s[1] == K.SHAPE_CIRCLE), None)
        shape = "+".join(n for n, s in (("rectangle", box), ("circle", circ)) if s)
        return Body(id=i, kind=b["kind"], shape=shape,
                    half_extents=(box[4], box[5]) if box else (0.0, 0.0),
                    radius=circ[6] if circ else 0.0, mass=b["mass"], moment=b["moment"],
                    floor_friction_coeff=b["mu_floor"], body_friction_coeff=b["mu_body"],
                    position=(float(self.bstate[i, 0]), float(self.bstate[i, 1])),
                    angle=float(self.bstate[i, 2]),
                    velocity=(float(self.bstate[i, 3]), float(self.bstate[i, 4])),
                    angular_velocity=float(self.bstate[i, 5]),
                    active=bool(self.bflags[i, 1]))

    def bodies(self):
        return [self.body(i) for i in range(self.n_bodies)]

    def ids(self, kind):
        return [i for i, b in enumerate(self._bodies) if b["kind"] == kind]

    def set_velocity(self, i, vx, vy, w=0.0):
        self.bstate[i, 3:6] = (vx, vy, w)

    def effector_pose(self):
        """(tip x, tip y, theta) with theta measured clockwise from +y."""
        e = self.effector_id
        return float(self.bstate[e, 0]), float(self.bstate[e, 1]), -float(self.bstate[e, 2])

    def effector_velocity(self):
        e = self.effector_id
        return float(self.bstate[e, 3]), float(self.bstate[e, 4]), -float(self.bstate[e, 5])

    def walls_pose(self):
        return self.bstate[self.bflags[:, 0] == K.KIND_WALL, :3].copy()

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.bstate, self.bflags, self.floor_acc, self.motor_acc):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(np.int64(self.step_count).tobytes())
        return h.hexdigest()

    # -- stepping -------------------------------------------------------
    def advance(self, cmd: VelocityCmd, nsteps: int, stop_point=None, stop_radius=-1.0) -> AdvanceResult:
        """Run ``nsteps`` fixed steps holding ``cmd`` as the motor target."""
        self.motor_target[:] = (cmd.vx, cmd.vy, -cmd.angular)
        wrench = np.zeros(3)
        sp = np.asarray(stop_point if stop_point is not None else (0.0, 0.0), dtype=np.float64)
        active_before = self.bflags[:, 1].copy()
        steps, nc, pen, fault = K.advance(
            nsteps, self.bstate, self.bprops, self.bflags, self.sint, self.sgeo, self.floor_acc,
            self.effector_id, self.motor_target, self.motor_limits, self.motor_acc, self.prm,
            self.cint, self.cf, self.prev_keys, self.prev_imp, self._n_contacts, self.aabb,
            wrench, sp, float(stop_radius))
        self.step_count += int(steps)
        self._n_contacts = int(nc)
        self.max_penetration = max(self.max_penetration, float(pen))
        gone = np.flatnonzero(active_before & (self.bflags[:, 1] == 0))
        events = [(int(i), self.time) for i in gone]
        self.pushed_out.extend(events)
        w = wrench / max(int(steps), 1)
        # moment reported in the effector's clockwise convention
        return AdvanceResult(int(steps), float(pen), int(fault), (float(w[0]), float(w[1]), -float(w[2])), events)

    def step(self, cmd: VelocityCmd = VelocityCmd()) -> "World":
        res = self.advance(cmd, 1)
        if res.fault:
            raise PhysicsFault(f"solver fault code {res.fault} at t={self.time:.4f}s")
        return self

    def contacts(self):
        out = []
        inv_dt = 1.0 / self.dt
        for k in range(self._n_contacts):
            ci, cf = self.cint[k], self.cf[k]
            out.append(Contact(
                body_a=int(ci[K.CI_BA]), body_b=int(ci[K.CI_BB]),
                point=(float(cf[K.C_PX]), float(cf[K.C_PY])),
                normal=(float(cf[K.C_NX]), float(cf[K.C_NY])),
                penetration_depth=max(0.0, -float(cf[K.C_SEP])),
                normal_force=float(cf[K.C_PN]) * inv_dt,
                tangent_force=float(cf[K.C_PT]) * inv_dt,
                friction_coeff=float(cf[K.C_MU])))
        return out

    def contacts_on_body(self, i):
        if not 0 <= i < self.n_bodies:
            raise KeyError(f"unknown body id {i}")
        return [c for c in self.contacts() if i in (c.body_a, c.body_b)]

    def contact_arrays(self):
        """Raw views of the last step's contacts (int columns, float columns)."""
        n = self._n_contacts
        return self.cint[:n], self.cf[:n]


def create_world(scene: SceneSpec, config: PhysicsConfig | None = None,
                 effector: EffectorConfig | None = None) -> World:
    """Three walls (left, right, back; front open), the scene objects at rest
    and the effector with its tip just outside the front edge."""
    config = config or PhysicsConfig()
    effector = effector or EffectorConfig()
    objs = list(scene.objects)
    for i, o in enumerate(objs):
        if not inside_bounds(o, scene.d_scene, scene.w_scene):
            raise SceneBoundsError(f"scene object {i} lies outside the scene bounds")
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            if separation(objs[i], objs[j]) < 0.0:
                raise SceneOverlapError(i, j)

    world = World(config, (scene.d_scene, scene.w_scene), rng_seed=scene.seed)
    t = config.wall_thickness
    d, w = scene.d_scene, scene.w_scene
    world.add_wall(-0.5 * t, 0.5 * (d + t), 0.5 * t, 0.5 * (d + t))
    world.add_wall(w + 0.5 * t, 0.5 * (d + t), 0.5 * t, 0.5 * (d + t))
    world.add_wall(0.5 * w, d + 0.5 * t, 0.5 * w + t, 0.5 * t)
    for o in objs:
        world.add_object(o)
    tip = (scene.start_x, -(effector.half_width + effector.start_gap))
    world.add_effector(tip, 0.0, effector)
    return world.build()
