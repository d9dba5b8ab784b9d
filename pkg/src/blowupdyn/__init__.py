"""Equilibria of Hamiltonian systems and blow-up of the degenerate ones."""

__version__ = "0.1.0"

from .expr import parse, differentiate, evaluate, to_string  # noqa: E402
from .hamsys import (  # noqa: E402
    HamiltonianSystem,
    analyze_equilibrium,
    build_system,
    find_equilibria,
    load_system,
)
from .blowup import angular_equilibria, hyperspherical_chart, polar_chart, recursive_blowup  # noqa: E402
from .flow import integrate, linear_flow, portrait  # noqa: E402

__all__ = [
    "parse",
    "differentiate",
    "evaluate",
    "to_string",
    "HamiltonianSystem",
    "analyze_equilibrium",
    "build_system",
    "find_equilibria",
    "load_system",
    "angular_equilibria",
    "hyperspherical_chart",
    "polar_chart",
    "recursive_blowup",
    "integrate",
    "linear_flow",
    "portrait",
]
