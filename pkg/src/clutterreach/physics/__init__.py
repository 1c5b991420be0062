from .world import (
    AdvanceResult,
    Body,
    Contact,
    PhysicsFault,
    SceneBoundsError,
    SceneOverlapError,
    VelocityCmd,
    World,
    create_world,
)

__all__ = [
    "AdvanceResult",
    "Body",
    "Contact",
    "PhysicsFault",
    "SceneBoundsError",
    "SceneOverlapError",
    "VelocityCmd",
    "World",
    "create_world",
]
