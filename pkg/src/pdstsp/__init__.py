"""Exact branch-and-cut solver for the parallel drone scheduling TSP."""
from .bnc import Params, SolveResult, solve
from .instance import Instance, Solution, evaluate

__version__ = "0.1.0"

__all__ = ["Instance", "Params", "Solution", "SolveResult", "evaluate", "solve"]
