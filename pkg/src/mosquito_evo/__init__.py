"""Mosquito population map, its evolution algebras and their linear operators."""

__version__ = "0.1.0"

from . import algebra, dynamics, evolution_operator, numerics  # noqa: E402,F401
from .dynamics import BASELINE, BASELINE_RAW, ParameterSet, RawRates  # noqa: E402,F401
