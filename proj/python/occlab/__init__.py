"""Python access to the occlab C++ core."""

import json

from ._core import (
    exact_occupancy,
    exact_q,
    gridworld_occupancy,
    gridworld_transition,
    occupancy_error,
    run_cli,
)
from ._core import default_config as _default_config_json


def default_config():
    """Full config schema with defaults, as a dict."""
    return json.loads(_default_config_json())


__all__ = [
    "default_config",
    "exact_occupancy",
    "exact_q",
    "gridworld_occupancy",
    "gridworld_transition",
    "occupancy_error",
    "run_cli",
]
