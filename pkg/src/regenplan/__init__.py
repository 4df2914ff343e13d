"""Redundancy planning for churn-prone distributed storage.

Analytic cost models for replication and regenerating codes, plus a
discrete-event simulator of proactive repair under node churn.
"""

from regenplan.errors import ConfigError, InfeasibleDegree, InvalidArgument, NoSolution, ZeroObjects
from regenplan.reliability import blocks_required, replicas_required, retrieve_probability

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InfeasibleDegree",
    "InvalidArgument",
    "NoSolution",
    "ZeroObjects",
    "blocks_required",
    "replicas_required",
    "retrieve_probability",
]
