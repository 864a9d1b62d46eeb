"""Benchmark problems assembled as split ODEs."""

from .bratu import BratuProblem, bratu_build
from .burgers import BurgersProblem, burgers_build
from .heat import HeatProblem, heat_build

__all__ = ["BratuProblem", "BurgersProblem", "HeatProblem", "bratu_build", "burgers_build", "heat_build"]
