"""Built-in benchmark environments, selectable by name."""

from __future__ import annotations

from functools import partial

from ..errors import ConfigError
from .gravity import build_gravity
from .hallway import build_hallway
from .recall import build_four_action_recall, build_recall, build_variant_recall

ENVIRONMENTS = {
    "gravity": build_gravity,
    "recall": build_recall,
    "variant_recall": build_variant_recall,
    "four_action_recall": build_four_action_recall,
    "hallway_cookie": partial(build_hallway, "cookie"),
    "hallway_keys": partial(build_hallway, "keys"),
}


def make_environment(name: str, **kwargs):
    """Build an environment from its registry name."""
    try:
        builder = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigError(
            f"unknown environment {name!r} (expected one of {', '.join(sorted(ENVIRONMENTS))})",
            "environment",
        ) from None
    return builder(**kwargs)


__all__ = [
    "ENVIRONMENTS",
    "build_four_action_recall",
    "build_gravity",
    "build_hallway",
    "build_recall",
    "build_variant_recall",
    "make_environment",
]
