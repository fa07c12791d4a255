"""Quantized, event-triggered finite-time data allocation over dynamic networks."""

from .engine import TrialResult, World, run, simulate, step
from .graph import DynamicGraphSequence, NominalGraph, diameter, generate_sequence
from .problem import ProblemInstance, optimal_workload, optimal_z

__all__ = [
    "DynamicGraphSequence",
    "NominalGraph",
    "ProblemInstance",
    "TrialResult",
    "World",
    "diameter",
    "generate_sequence",
    "optimal_workload",
    "optimal_z",
    "run",
    "simulate",
    "step",
]
