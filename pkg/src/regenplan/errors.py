"""Exception types raised across the package."""

from __future__ import annotations


class InvalidArgument(ValueError):
    """An argument is outside the domain of the requested computation."""


class NoSolution(ArithmeticError):
    """A block-count search exceeded its ceiling without meeting the target."""


class InfeasibleDegree(ValueError):
    """The repair degree cannot be realized with the available block count."""


class ZeroObjects(ValueError):
    """A utilization target is too small to store even a single object."""


class ConfigError(ValueError):
    """A simulator or sweep configuration document is invalid."""
