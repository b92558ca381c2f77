"""levinlab: witnessed reductions between decision-with-witness problems over
finitely described infinite objects, verified by brute-force oracles."""

from . import core, descriptions, problems, generic, paper_reductions, reductions, harness

__all__ = [
    "core",
    "descriptions",
    "problems",
    "generic",
    "paper_reductions",
    "reductions",
    "harness",
]

__version__ = "0.1.0"
