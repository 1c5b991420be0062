"""Seeded generation of lateral-access clutter scenes.

Coordinates: x across the scene width, y along the depth.  The open front is
at y = 0 and the back wall at y = d_scene.  Object yaw is counter-clockwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import SceneGenParams

SCHEMA = "clutterreach.scene/1"


class SceneGenerationError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectType:
    width: float
    height: float
    mass: float


@dataclass(frozen=True)
class SceneObject:
    width: float
    height: float
    mass: float
    x: float
    y: float
    yaw: float = 0.0

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hw, hh = 0.5 * self.width, 0.5 * self.height
        local = np.array([[hw, -hh], [hw, hh], [-hw, hh], [-hw, -hh]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x, self.y])


@dataclass
class SceneSpec:
    seed: int
    style: str
    objects: list
    start_x: float
    goal: tuple
    d_scene: float
    w_scene: float
    mass_range: tuple = (0.143, 0.570)
    meta: dict = field(default_factory=dict)

    def darkness(self, obj: SceneObject) -> float:
        lo, hi = self.mass_range
        if hi <= lo:
            return 1.0
        return min(1.0, max(0.0, (obj.mass - lo) / (hi - lo)))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "seed": self.seed,
            "style": self.style,
            "bounds": {"d_scene": self.d_scene, "w_scene": self.w_scene},
            "start_x": self.start_x,
            "goal": list(self.goal),
            "mass_range": list(self.mass_range),
            "objects": [dict(asdict(o), darkness=self.darkness(o)) for o in self.objects],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneSpec":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported scene schema {doc.get('schema')!r}")
        objects = [SceneObject(o["width"], o["height"], o["mass"], o["x"], o["y"], o["yaw"])
                   for o in doc["objects"]]
        return cls(seed=doc["seed"], style=doc["style"], objects=objects,
                   start_x=doc["start_x"], goal=tuple(doc["goal"]),
                   d_scene=doc["bounds"]["d_scene"], w_scene=doc["bounds"]["w_scene"],
                   mass_range=tuple(doc["mass_range"]), meta=doc.get("meta", {}))

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


def default_catalog(params: SceneGenParams) -> list:
    """Rectangles spanning the footprint and mass ranges.

    The short side is capped so every type fits a grid cell with clearance.
    """
    n = params.catalog_size
    cell_w = params.w_scene / params.grid_cols
    cell_h = params.d_scene / params.grid_rows
    short_cap = min(params.footprint_max, min(cell_w, cell_h) - params.clearance - 1e-6)
    long_cap = min(params.footprint_max, max(cell_w, cell_h) - params.clearance - 1e-6)
    long_side = np.linspace(params.footprint_min, max(params.footprint_min, long_cap), n)
    short_side = np.linspace(params.footprint_min, max(params.footprint_min, short_cap), n)
    masses = np.linspace(params.mass_min, params.mass_max, n)
    wide = cell_w >= cell_h
    return [ObjectType(float(l if wide else s), float(s if wide else l), float(m))
            for l, s, m in zip(long_side, short_side, masses)]


def _axes(yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, s], [-s, c]])


def separation(a: SceneObject, b: SceneObject) -> float:
    """Largest gap along the four box axes (negative when the boxes overlap)."""
    axes = np.vstack([_axes(a.yaw), _axes(b.yaw)])
    d = np.array([b.x - a.x, b.y - a.y])
    ha = np.array([0.5 * a.width, 0.5 * a.height])
    hb = np.array([0.5 * b.width, 0.5 * b.height])
    ra = np.abs(axes @ _axes(a.yaw).T) @ ha
    rb = np.abs(axes @ _axes(b.yaw).T) @ hb
    return float(np.max(np.abs(axes @ d) - ra - rb))


def _extent(obj: SceneObject):
    c, s = abs(math.cos(obj.yaw)), abs(math.sin(obj.yaw))
    return 0.5 * (c * obj.width + s * obj.height), 0.5 * (s * obj.width + c * obj.height)


def inside_bounds(obj: SceneObject, d_scene: float, w_scene: float, margin: float = 0.0) -> bool:
    ex, ey = _extent(obj)
    return (obj.x - ex >= margin and obj.x + ex <= w_scene - margin
            and obj.y - ey >= margin and obj.y + ey <= d_scene - margin)


def _endpoints(rng, params: SceneGenParams):
    lo, hi = params.start_margin, params.w_scene - params.start_margin
    start_x = float(rng.uniform(lo, hi))
    goal_x = float(rng.uniform(lo, hi))
    goal_y = params.d_scene - 0.5 * params.footprint_max
    return start_x, (goal_x, goal_y)


def generate_grid_scene(seed: int, params: SceneGenParams | None = None) -> SceneSpec:
    """Objects on distinct cells of a cols x rows lattice, centred in their cells."""
    params = params or SceneGenParams()
    params.validate()
    rng = np.random.default_rng(seed)
    catalog = default_catalog(params)
    cols, rows = params.grid_cols, params.grid_rows
    cell_w, cell_h = params.w_scene / cols, params.d_scene / rows
    for t in catalog:
        if t.width + params.clearance > cell_w or t.height + params.clearance > cell_h:
            raise SceneGenerationError(
                f"footprint {t.width:.3f}x{t.height:.3f} m exceeds grid cell {cell_w:.3f}x{cell_h:.3f} m")
    n_cells = cols * rows
    count = int(rng.integers(params.count_min, min(params.count_max, n_cells) + 1))
    cells = np.sort(rng.permutation(n_cells)[:count])
    kinds = rng.integers(0, len(catalog), size=count)
    objects = []
    for cell, kind in zip(cells, kinds):
        col, row = int(cell) % cols, int(cell) // cols
        t = catalog[int(kind)]
        objects.append(SceneObject(t.width, t.height, t.mass, (col + 0.5) * cell_w, (row + 0.5) * cell_h))
    start_x, goal = _endpoints(rng, params)
    return SceneSpec(seed=seed, style="grid", objects=objects, start_x=start_x, goal=goal,
                     d_scene=params.d_scene, w_scene=params.w_scene,
                     mass_range=(params.mass_min, params.mass_max))


def generate_continuous_scene(seed: int, params: SceneGenParams | None = None,
                              count: int | None = None) -> SceneSpec:
    """Rejection-sampled poses (random yaw) with a per-object attempt budget."""
    params = params or SceneGenParams()
    params.validate()
    rng = np.random.default_rng(seed)
    catalog = default_catalog(params)
    if count is None:
        count = int(rng.integers(params.continuous_count_min, params.continuous_count_max + 1))
    area = params.d_scene * params.w_scene
    objects: list = []
    for k in range(count):
        t = catalog[int(rng.integers(0, len(catalog)))]
        for _ in range(params.attempts_per_object):
            yaw = float(rng.uniform(0.0, math.pi))
            probe = SceneObject(t.width, t.height, t.mass, 0.0, 0.0, yaw)
            ex, ey = _extent(probe)
            lo_x, hi_x = ex + params.clearance, params.w_scene - ex - params.clearance
            lo_y, hi_y = ey + params.clearance, params.d_scene - ey - params.clearance
            cand = SceneObject(t.width, t.height, t.mass,
                               float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)), yaw)
            if all(_clear(cand, o, params.clearance) for o in objects):
                objects.append(cand)
                break
        else:
            density = sum(o.area for o in objects) / area
            raise SceneGenerationError(
                f"attempt budget exhausted after placing {k} of {count} objects "
                f"(area density {density:.3f})")
    start_x, goal = _endpoints(rng, params)
    return SceneSpec(seed=seed, style="continuous", objects=objects, start_x=start_x, goal=goal,
                     d_scene=params.d_scene, w_scene=params.w_scene,
                     mass_range=(params.mass_min, params.mass_max))


def _clear(a: SceneObject, b: SceneObject, clearance: float) -> bool:
    # cheap bounding-circle reject first
    ra = 0.5 * math.hypot(a.width, a.height)
    rb = 0.5 * math.hypot(b.width, b.height)
    if math.hypot(a.x - b.x, a.y - b.y) >= ra + rb + clearance:
        return True
    return separation(a, b) >= clearance


def generate_scene(seed: int, params: SceneGenParams | None = None) -> SceneSpec:
    params = params or SceneGenParams()
    if params.style == "grid":
        return generate_grid_scene(seed, params)
    return generate_continuous_scene(seed, params)


def scene_seeds(master_seed: int, n: int) -> list:
    """Independent per-scene seeds derived from one experiment seed."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n, dtype=np.uint32)]


def empty_scene(start_x=0.265, goal=(0.265, 0.336), d_scene=0.38, w_scene=0.53, seed=0) -> SceneSpec:
    return SceneSpec(seed=seed, style="fixture", objects=[], start_x=start_x, goal=tuple(goal),
                     d_scene=d_scene, w_scene=w_scene)
