from ._core import (
    HipError,
    costmap,
    default_settings,
    directive_cost,
    generate_world,
    grad_check,
    lidar,
    sigma_floor,
    traj_cost,
)

__all__ = [
    "HipError",
    "costmap",
    "default_settings",
    "directive_cost",
    "generate_world",
    "grad_check",
    "lidar",
    "sigma_floor",
    "traj_cost",
]
