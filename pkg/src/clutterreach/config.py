"""Parameter records shared across the simulator, controllers and harness.

Defaults marked "rig" describe the physical setup and "nominal" the tuned
strategy values; everything else is a simulator choice.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass
class PhysicsConfig:
    dt: float = 1.0 / 240.0
    iterations: int = 20
    baumgarte: float = 0.2
    slop: float = 0.0002
    gravity: float = 9.81
    mu_floor: float = 0.3
    mu_body: float = 0.5
    restitution: float = 0.0
    penetration_tolerance: float = 0.001
    fault_penetration: float = 0.01
    warm_starting: bool = True
    wall_thickness: float = 0.05
    max_contacts: int = 1024

    def validate(self):
        if self.dt <= 0 or self.iterations < 1:
            raise ConfigError("physics.dt must be > 0 and physics.iterations >= 1")
        if self.mu_floor < 0 or self.mu_body < 0:
            raise ConfigError("friction coefficients must be non-negative")
        if not 0.0 <= self.restitution <= 1.0:
            raise ConfigError("physics.restitution must lie in [0, 1]")


@dataclass
class EffectorConfig:
    link_length: float = 0.30
    half_width: float = 0.01
    mass: float = 1.0
    mu: float = 0.5
    start_gap: float = 0.002
    F_max: float = 15.0  # rig
    M_max: float = 4.5  # rig
    taper_radius: float = 0.05
    taper_floor: float = 0.2
    taxel_rows: int = 4
    taxel_cols: int = 10
    sensor_rate: float = 15.0
    compensation_rate: float = 3.0
    ransac_iterations: int = 100
    ransac_threshold: float = 0.2
    tip_band: float = 0.15
    noise_std: float = 0.02
    bulk_field: float = 0.3

    def validate(self):
        if self.link_length <= 0 or self.half_width <= 0 or self.mass <= 0:
            raise ConfigError("effector geometry and mass must be positive")
        if self.F_max <= 0 or self.M_max <= 0:
            raise ConfigError("F_max and M_max must be positive")
        if self.taxel_rows < 1 or self.taxel_cols < 3:
            raise ConfigError("taxel grid needs at least 1 row and 3 columns")
        if not 0.0 < self.taper_floor <= 1.0:
            raise ConfigError("effector.taper_floor must lie in (0, 1]")


@dataclass
class SceneGenParams:
    d_scene: float = 0.38  # rig
    w_scene: float = 0.53  # rig
    mass_min: float = 0.143  # rig
    mass_max: float = 0.570  # rig
    footprint_min: float = 0.043  # rig
    footprint_max: float = 0.088  # rig
    count_min: int = 12  # grid style
    count_max: int = 35
    # continuous packing with random yaw saturates near 22-29 objects, so the
    # continuous style draws from its own range
    continuous_count_min: int = 15
    continuous_count_max: int = 19
    grid_cols: int = 5
    grid_rows: int = 7
    catalog_size: int = 8
    clearance: float = 0.001
    attempts_per_object: int = 2000
    start_margin: float = 0.06
    style: str = "continuous"

    def validate(self):
        if self.count_min < 0 or self.count_max < self.count_min:
            raise ConfigError("scene count range must satisfy 0 <= count_min <= count_max")
        if self.continuous_count_min < 0 or self.continuous_count_max < self.continuous_count_min:
            raise ConfigError("continuous count range must satisfy 0 <= min <= max")
        if self.style not in ("grid", "continuous"):
            raise ConfigError(f"unknown scene style {self.style!r}")
        if not 0 < self.mass_min <= self.mass_max:
            raise ConfigError("scene mass range invalid")
        if not 0 < self.footprint_min <= self.footprint_max:
            raise ConfigError("scene footprint range invalid")


@dataclass
class StrategyParams:
    v_max: float = 0.045  # rig
    omega_max: float = 0.1  # rig
    A_bur: float = 0.83  # nominal
    f_bur: float = 1.0  # nominal, Hz
    t_excv: float = 5.0  # nominal
    t_trig: float = 5.0  # nominal
    s_excv: float = 2.0
    theta_deadband: float = 0.02
    burrow_freq_units: str = "hz"
    control_rate: float = 20.0
    progress_quantum: float = 0.005

    def validate(self):
        if not 0.0 <= self.A_bur < 1.0:
            raise ConfigError("A_bur must lie in [0, 1)")
        if self.f_bur <= 0 or self.t_excv <= 0 or self.t_trig <= 0:
            raise ConfigError("f_bur, t_excv and t_trig must be positive")
        if self.s_excv < 1.0:
            raise ConfigError("s_excv must be >= 1")
        if self.v_max <= 0 or self.omega_max <= 0 or self.control_rate <= 0:
            raise ConfigError("v_max, omega_max and control_rate must be positive")
        if self.burrow_freq_units not in ("hz", "rad"):
            raise ConfigError("burrow_freq_units must be 'hz' or 'rad'")

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass
class EventThresholds:
    F_bur: float = 5.0  # nominal
    F_excv: float = 10.0  # nominal
    F_push_min: float = 0.5  # nominal
    F_push_max: float = 7.5  # nominal
    t_push: float = 2.0  # nominal
    t_prog: float = 3.0  # nominal

    def validate(self):
        if not self.F_push_min < self.F_push_max:
            raise ConfigError("F_push_min must be below F_push_max")
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"events.{f.name} must be positive")

    @classmethod
    def disabled(cls) -> "EventThresholds":
        inf = math.inf
        return cls(F_bur=inf, F_excv=inf, F_push_min=inf, F_push_max=inf, t_push=inf, t_prog=inf)


@dataclass
class ExperimentConfig:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    effector: EffectorConfig = field(default_factory=EffectorConfig)
    scene: SceneGenParams = field(default_factory=SceneGenParams)
    strategy: StrategyParams = field(default_factory=StrategyParams)
    events: EventThresholds = field(default_factory=EventThresholds)
    t_tot: float = 120.0
    goal_radius: float = 0.0075
    scenes: int = 300
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    max_fault_rate: float = 0.05
    tactile_log: bool = False

    def validate(self):
        if self.t_tot <= 0:
            raise ConfigError("t_tot must be positive")
        if self.goal_radius <= 0:
            raise ConfigError("goal_radius must be positive")
        if self.scenes < 1 or self.workers < 1:
            raise ConfigError("scenes and workers must be >= 1")
        self.physics.validate()
        self.effector.validate()
        self.scene.validate()
        self.strategy.validate()
        self.events.validate()
        return self

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get("CLUTTERREACH_OUTPUT_DIR") or self.output_dir)

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)


SECTIONS = {
    "physics": PhysicsConfig,
    "effector": EffectorConfig,
    "scene": SceneGenParams,
    "strategy": StrategyParams,
    "events": EventThresholds,
}
_TOP_LEVEL = ("t_tot", "goal_radius", "scenes", "seed", "output_dir", "workers",
              "max_fault_rate", "tactile_log")

RELAXED_PRESET = {"goal_radius": 0.03}


def _coerce(raw: str, proto, where: str):
    try:
        if isinstance(proto, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(proto, int):
            return int(raw)
        if isinstance(proto, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(proto).__name__}") from exc


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys such as A_bur are case-sensitive
    return parser


def apply_overrides(config: ExperimentConfig, items) -> ExperimentConfig:
    """Apply ``section.key=value`` (or bare top-level ``key=value``) overrides."""
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, name = key.split(".", 1)
        else:
            section, name = None, key
        _set(config, section, name, raw)
    return config


def _set(config: ExperimentConfig, section, name, raw):
    if section in (None, "experiment"):
        if name not in _TOP_LEVEL:
            raise ConfigError(f"unknown experiment key {name!r}")
        setattr(config, name, _coerce(raw, getattr(config, name), name))
        return
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section {section!r}")
    target = getattr(config, section)
    if name not in {f.name for f in fields(target)}:
        raise ConfigError(f"unknown key {section}.{name}")
    setattr(target, name, _coerce(raw, getattr(target, name), f"{section}.{name}"))


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read an INI-style config file; missing keys keep their defaults."""
    config = ExperimentConfig()
    if path is not None:
        parser = _parser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in parser.sections():
            for name, raw in parser.items(section):
                _set(config, section, name, raw)
    apply_overrides(config, overrides)
    return config.validate()


def dump_config(config: ExperimentConfig) -> str:
    parser = _parser()
    parser["experiment"] = {k: str(getattr(config, k)) for k in _TOP_LEVEL}
    for section in SECTIONS:
        obj = getattr(config, section)
        parser[section] = {f.name: repr(v) if isinstance(v, float) else str(v)
                           for f in fields(obj) for v in [getattr(obj, f.name)]}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
