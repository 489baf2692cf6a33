"""Exact fair division of indivisible goods under feasibility constraints.

Computes constrained maximum-Nash-welfare allocations with exact rational
arithmetic, verifies fairness/efficiency properties against brute-force
oracles, and implements the competitive-equilibrium lottery pipeline for
goods with copies and balancedness.
"""

from . import bobw, errors, fairness, feasibility, fixtures, fuzz, instance, mnw
from .feasibility import FeasibilitySet, enumerate_feasible, load_problem
from .instance import Allocation, Instance, UtilityProfile, load_instance, utilities
from .mnw import MnwResult, reduce_to_unconstrained, round_robin, solve_mnw

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "FeasibilitySet",
    "Instance",
    "MnwResult",
    "UtilityProfile",
    "bobw",
    "enumerate_feasible",
    "errors",
    "fairness",
    "feasibility",
    "fixtures",
    "fuzz",
    "instance",
    "load_instance",
    "load_problem",
    "mnw",
    "reduce_to_unconstrained",
    "round_robin",
    "solve_mnw",
    "utilities",
]
