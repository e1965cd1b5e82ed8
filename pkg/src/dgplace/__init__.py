"""Distributed-generation benefit indices and GA-based DG placement for distribution feeders."""

__version__ = "0.1.0"

from .network import (Branch, Bus, DGPlan, DGUnit, Network, apply_dg, load_network, load_sample,
                      parse_plan, serialize, validate)
from .powerflow import PowerFlowSolution, SolverOptions, solve, total_losses, voltage_regulation
from .indices import IndexReport, IndexWeights, benefit_index, index_report
from .ga import GaConfig, GaResult, optimize
from .oracle import SearchSpace, exhaustive_search

__all__ = [
    "Branch", "Bus", "DGPlan", "DGUnit", "Network", "apply_dg", "load_network", "load_sample",
    "parse_plan", "serialize", "validate", "PowerFlowSolution", "SolverOptions", "solve",
    "total_losses", "voltage_regulation", "IndexReport", "IndexWeights", "benefit_index",
    "index_report", "GaConfig", "GaResult", "optimize", "SearchSpace", "exhaustive_search",
]
