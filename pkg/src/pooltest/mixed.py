"""Two-group (high-risk x, low-risk y) strategy performance and selection.

Performance is resolved entropy per test: each resolved member
contributes the entropy of its stratum's rate, and the run cost counts
pool tests plus the idealized phi(z) stream cost of sub-solved members.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional, Tuple, Union

from .costs import best_family_cost, entropy
from .errors import AnalysisError, DomainError
from .risk import two_group
from .strategy import StrategyId, Stratum, build_mixed, parse_id
from .treewalk import _halve_stats, analyze

Phi = Callable[[float], float]


def _default_phi(z: float) -> float:
    return best_family_cost(z, 16)


def _analyzer_ratio(sid: StrategyId, x: float, y: float, phi: Phi) -> float:
    strategy = build_mixed(sid.name)
    res = analyze(strategy, two_group(x, y), solver_cost=phi)
    info = 0.0
    for stratum, rate in ((Stratum.HIGH_RISK_UPPER, x),
                          (Stratum.LOW_RISK_LOWER, y)):
        resolved = res.pos.get(stratum, 0.0) + res.neg.get(stratum, 0.0)
        info += resolved * entropy(rate)
    return info / res.tests_per_run


def _m1_ratio(x: float, y: float, phi: Phi) -> float:
    p = x + y - x * y
    z = y / p
    return ((1 - y) * entropy(x) + entropy(y)) / (1 + p * phi(z))


def _m3_ratio(x: float, y: float) -> float:
    num = (1 - y) ** 2 * entropy(x) + (1 + x - x * y) * entropy(y)
    return num / ((1 + y) * (1 + x - x * y))


def m3_run_cost(x: float, y: float) -> float:
    """Expected tests per run of the low-risk loop construction."""
    return (1 + y) * (1 + x - x * y) / (1 - y)


def _m1_grouped_ratio(x: float, y: float, n: int, phi: Phi) -> float:
    """M1 with the low-risk member replaced by a pooled group of 2^n;
    a positive group is resolved by halving."""
    Y = 1 - (1 - y) ** (2 ** n)
    p = x + Y - x * Y
    Z = min(Y / p, 1.0)  # float drift can land a hair above 1
    tests = 1 + p * phi(Z) + Y * n
    halved = _halve_stats(n, Fraction(y))
    lows_resolved = (1 - Y) * 2 ** n + Y * (halved.total("pos")
                                            + halved.total("neg"))
    info = (1 - Y) * entropy(x) + lows_resolved * entropy(y)
    return info / tests


def mixed_performance(sid: Union[StrategyId, str], x: float, y: float,
                      sub: Optional[Phi] = None) -> float:
    """Optimality ratio (resolved entropy per test) of a two-group
    strategy at rates (x, y)."""
    if not (0 < x < 1 and 0 < y < 1):
        raise DomainError(f"rates out of range: x={x}, y={y}")
    if isinstance(sid, str):
        sid = parse_id(sid)
    if sid.kind != "M":
        raise AnalysisError(f"{sid.name} is not a two-group strategy")
    phi = sub if sub is not None else _default_phi
    if sid.m == 1 and sid.arity:
        return _m1_grouped_ratio(x, y, sid.arity, phi)
    if sid.m == 1:
        return _m1_ratio(x, y, phi)
    if sid.m == 3:
        return _m3_ratio(x, y)
    return _analyzer_ratio(sid, x, y, phi)


_CANDIDATES: Tuple[str, ...] = (
    "M1", "M2", "M3",
    "M1G1", "M1G2", "M1G3", "M1G4", "M1G5", "M1G6",
    "M4:2", "M4:3", "M4:4", "M4:5", "M4:6", "M4:7", "M4:8",
)


def mixed_select(x: float, y: float,
                 sub: Optional[Phi] = None) -> StrategyId:
    """Best two-group candidate by computed ratio.  When y > x the group
    roles are swapped (the selected strategy is applied with the larger
    rate as the high-risk one)."""
    if y > x:
        x, y = y, x
    best, best_ratio = None, -math.inf
    for name in _CANDIDATES:
        ratio = mixed_performance(name, x, y, sub)
        if ratio > best_ratio:
            best, best_ratio = parse_id(name), ratio
    return best
