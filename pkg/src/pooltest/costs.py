"""Closed-form expected costs, cutoffs, strategy selection, and the
Dorfman two-stage baseline.

Costs are tests per resolved person.  Family members of size 2^n * k
evaluate through the halving recurrence f_2n(x) = (x2 + f_n(x2))/(2 - x)
with x2 = 2x - x^2; the base sizes 1..5 have explicit rational forms.
All rational evaluation is exact when x is a Fraction.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import BracketError, DomainError, InvalidStrategy
from .rational import Poly, RationalFn
from .strategy import StrategyId, a_id, enumerate_family, parse_id

F1 = RationalFn(Poly([1]), Poly([1]))
F2 = RationalFn(Poly([-1, -2, 1]), Poly([-2, 1]))
F3 = RationalFn(Poly([1, 6, 2, -6, 2]), Poly([3, 1, -3, 1]))
F4 = RationalFn(Poly([-1, -8, 12, -8, 2]), Poly([-4, 6, -4, 1]))
F5 = RationalFn(Poly([1, 13, -8, -24, 36, -18, 3]),
                Poly([5, -3, -8, 12, -6, 1]))
_BASE = {1: F1, 2: F2, 3: F3, 4: F4, 5: F5}

# Numerators of the consecutive cost differences; each has exactly one
# root in (0, 1/2) — the point where the smaller pool takes over.
CUTOFF_POLYS = {
    1: Poly([1, -3, 1]),
    2: Poly([-1, 5, -4, 1]),
    3: Poly([-1, 7, -7, 2]),
    4: Poly([1, -9, 14, 21, -91, 127, -96, 42, -10, 1]),
    5: Poly([1, -8, -16, 98, -178, 179, -112, 44, -10, 1]),
}

Number = Union[float, Fraction]


def entropy(x: Number) -> float:
    if not 0 <= x <= 1:
        raise DomainError(f"probability out of range: {x}")
    x = float(x)
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def closed_form_cost(sid: Union[StrategyId, str], x: Number) -> Number:
    if isinstance(sid, str):
        sid = parse_id(sid)
    if sid.kind != "A":
        raise InvalidStrategy(f"no closed form for {sid.name}")
    if x == 1 and sid.size > 1:
        raise DomainError(f"cost undefined at x=1 for pool size {sid.size}")
    return _family_cost(sid.size, x)


def _family_cost(size: int, x: Number) -> Number:
    # the recurrence may push x2 to exactly 1.0 in floats; the explicit
    # rational forms stay finite there, so only [0,1] is enforced here
    if not 0 <= x <= 1:
        raise DomainError(f"risk out of range: {x}")
    if size in _BASE:
        return _BASE[size](x)
    if size == 15:
        return _a15_cost(x)
    if size % 2 == 0:
        x2 = 2 * x - x * x
        return (x2 + _family_cost(size // 2, x2)) / (2 - x)
    raise InvalidStrategy(f"pool size {size} outside the family")


def _a15_cost(x: Number) -> float:
    from .risk import homogeneous
    from .strategy import get_strategy
    from .treewalk import analyze
    res = analyze(get_strategy("A15"), homogeneous(Fraction(x)))
    return res.tests_per_person


def best_family_cost(x: Number, max_pool_size: int = 16,
                     improved: bool = False) -> float:
    return min(float(_family_cost(sid.size, x))
               for sid in enumerate_family(max_pool_size, improved))


def select_best(x: Number, improved: bool = False,
                max_pool_size: int = 64) -> StrategyId:
    if not 0 < x < 1:
        raise DomainError(f"risk out of range: {x}")
    best, best_cost = None, None
    for sid in enumerate_family(max_pool_size, improved):
        c = float(_family_cost(sid.size, x))
        if best_cost is None or c < best_cost - 1e-15:
            best, best_cost = sid, c
    return best


class NoCoverage:
    """Sentinel: no family member reaches 99% optimality at this risk."""

    def __repr__(self) -> str:
        return "NoCoverage"

    def __eq__(self, other) -> bool:
        return isinstance(other, NoCoverage)

    def __hash__(self) -> int:
        return hash("NoCoverage")


NO_COVERAGE = NoCoverage()


def find_99(x: Number, max_pool_size: int = 64,
            improved: bool = False) -> Union[StrategyId, NoCoverage]:
    if not 0 < x < 1:
        raise DomainError(f"risk out of range: {x}")
    h = entropy(x)
    best, best_ratio = None, 0.0
    for sid in enumerate_family(max_pool_size, improved):
        ratio = h / float(_family_cost(sid.size, x))
        if ratio >= 0.99 and ratio > best_ratio:
            best, best_ratio = sid, ratio
    return best if best is not None else NO_COVERAGE


# ---------------------------------------------------------------------------
# Root finding

_BISECT_ITERS = 200


def bisect(fn: Callable[[float], float], lo: float, hi: float,
           tol: float = 1e-12) -> float:
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    for _ in range(_BISECT_ITERS):
        mid = (lo + hi) / 2
        fmid = fn(mid)
        if fmid == 0 or hi - lo < tol:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return (lo + hi) / 2


def cutoff(i: int) -> float:
    """Risk below which the pool of size i+1 beats the pool of size i."""
    if i not in CUTOFF_POLYS:
        raise DomainError(f"cutoff index out of range: {i}")
    poly = CUTOFF_POLYS[i]
    roots = _roots_in(poly, 0.0, 0.5)
    if len(roots) == 1:
        return roots[0]
    # several roots: keep the one where the two costs actually cross

    def diff(x: float) -> float:
        return float(_family_cost(i, x)) - float(_family_cost(i + 1, x))

    return min(roots, key=lambda r: abs(diff(r)))


def _roots_in(poly: Poly, lo: float, hi: float, grid: int = 2048) -> List[float]:
    roots = []
    prev_x, prev_f = lo, float(poly(lo))
    for k in range(1, grid + 1):
        x = lo + (hi - lo) * k / grid
        f = float(poly(x))
        if prev_f == 0:
            roots.append(prev_x)
        elif f != 0 and (prev_f > 0) != (f > 0):
            roots.append(bisect(lambda t: float(poly(t)), prev_x, x))
        prev_x, prev_f = x, f
    return roots


def generic_cutoff(id_a: Union[StrategyId, str], id_b: Union[StrategyId, str],
                   bracket: Tuple[float, float]) -> float:
    def diff(x: float) -> float:
        return float(closed_form_cost(id_a, x)) - float(closed_form_cost(id_b, x))

    return bisect(diff, bracket[0], bracket[1])


# ---------------------------------------------------------------------------
# Dorfman two-stage baseline

_INV_E = math.exp(-1)


def lambert_w(z: float) -> float:
    """Principal-branch W: the w >= -1 with w*e^w = z, |residual| <= 1e-12."""
    if z < -_INV_E:
        raise DomainError(f"lambert_w undefined below -1/e: {z}")
    if z == 0:
        return 0.0
    if abs(z + _INV_E) < 1e-16:
        return -1.0
    if z > 0:
        lo, hi = 0.0, 1 + math.log(1 + z)
    else:
        lo, hi = -1.0, 0.0
    w = bisect(lambda w: w * math.exp(w) - z, lo, hi, tol=1e-16)
    if abs(w * math.exp(w) - z) > 1e-12:
        raise DomainError(f"lambert_w failed to converge at z={z}")
    return w


def dorfman_cost(n: int, p: float, N: int) -> float:
    if n < 1 or N < 1 or N % n != 0:
        raise DomainError(f"population {N} not a multiple of pool size {n}")
    if not 0 <= p <= 1:
        raise DomainError(f"probability out of range: {p}")
    return (N / n) * (1 + n * (1 - (1 - p) ** n))


def dorfman_opt(p: float) -> float:
    """Real-valued pool size minimizing Dorfman cost per person."""
    if not 0 < p < 1:
        raise DomainError(f"probability out of range: {p}")
    ln_q = math.log(1 - p)
    return (2 / ln_q) * lambert_w(-0.5 * math.sqrt(-ln_q))


def dorfman_opt_int(p: float) -> int:
    """Best integer pool size: the better of the two integers around the
    real optimum."""
    n_star = dorfman_opt(p)
    lo = max(1, math.floor(n_star))
    candidates = {lo, lo + 1}
    return min(candidates, key=lambda n: dorfman_cost(n, p, n) / n)


# ---------------------------------------------------------------------------
# Strategy cost helpers and CSV curves


def strategy_cost_fn(strategy) -> Callable[[float], float]:
    """Per-person cost of a strategy as a function of homogeneous risk."""
    sid = strategy.id
    if sid.kind == "A":
        return lambda z: float(closed_form_cost(sid, z))

    def numeric(z: float) -> float:
        from .risk import homogeneous
        from .treewalk import analyze
        return analyze(strategy, homogeneous(z)).tests_per_person

    return numeric


CURVE_HEADER = "strategy_id,x,cost_per_person,entropy,optimality"


def curve_rows(strategy_ids: Sequence[Union[StrategyId, str]],
               x_grid: Iterable[float]) -> List[str]:
    """CSV rows, one per (strategy, x), strategies in given order and x
    ascending within each."""
    xs = sorted(x_grid)
    rows = [CURVE_HEADER]
    for sid in strategy_ids:
        if isinstance(sid, str):
            sid = parse_id(sid)
        for x in xs:
            c = float(closed_form_cost(sid, x))
            h = entropy(x)
            rows.append(f"{sid.name},{x:.12g},{c:.12g},{h:.12g},{h / c:.12g}")
    return rows
