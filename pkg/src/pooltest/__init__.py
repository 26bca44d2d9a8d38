"""Adaptive pool-testing: strategy trees, exact cost analysis, simulation,
and a live session service."""

from .costs import (closed_form_cost, cutoff, dorfman_opt_int, entropy,
                    find_99, select_best)
from .mixed import mixed_performance, mixed_select
from .risk import homogeneous, two_group
from .strategy import build_mixed, get_strategy, parse_id, validate
from .treewalk import analyze

__version__ = "0.1.0"

__all__ = [
    "analyze", "build_mixed", "closed_form_cost", "cutoff",
    "dorfman_opt_int", "entropy", "find_99", "get_strategy", "homogeneous",
    "mixed_performance", "mixed_select", "parse_id", "select_best",
    "two_group", "validate",
]
