"""Discrete-event churn and repair simulator."""

from regenplan.churn_sim.config import CodeSpec, SimConfig, config_from_dict, load_config
from regenplan.churn_sim.engine import SimResult, Simulator, run

__all__ = ["CodeSpec", "SimConfig", "SimResult", "Simulator", "config_from_dict", "load_config", "run"]
