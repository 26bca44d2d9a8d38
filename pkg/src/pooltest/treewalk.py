"""Exact expected-cost analysis of strategies.

Walks a decision tree carrying the joint distribution of the true
statuses of live slots, exactly (Fraction arithmetic), splitting at each
pool test and solving loops as linear fixed-point equations.  Pair
compounds are analyzed by a per-level conversion of the inner strategy's
per-run statistics; the group constructions (A15, REC[k]) use direct
probability recursions mirroring their execution order.

Sub-solve steps are charged their idealized stream cost: submitting one
member at posterior risk z costs phi(z) expected tests, where phi is the
per-person cost of the solving strategy at z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Dict, List, Optional, Tuple

from .errors import AnalysisError
from .risk import RiskModel
from .strategy import (Assign, Leaf, Loop, Node, PoolTest, Strategy, Stratum,
                       SubSolve)

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass
class Acc:
    """Expected counts per run (or per unit of probability mass)."""
    tests: float = 0.0
    pos: Dict[Stratum, float] = field(default_factory=dict)
    neg: Dict[Stratum, float] = field(default_factory=dict)
    repool: Dict[Stratum, float] = field(default_factory=dict)

    def bump(self, field_name: str, stratum: Stratum, amount) -> None:
        d = getattr(self, field_name)
        d[stratum] = d.get(stratum, 0.0) + float(amount)

    def add(self, other: "Acc", weight=1.0) -> None:
        w = float(weight)
        self.tests += w * other.tests
        for fn in ("pos", "neg", "repool"):
            mine, theirs = getattr(self, fn), getattr(other, fn)
            for k, v in theirs.items():
                mine[k] = mine.get(k, 0.0) + w * v

    def total(self, field_name: str) -> float:
        return sum(getattr(self, field_name).values())


@dataclass
class AnalysisResult:
    tests_per_run: float
    resolved_per_run: float
    tests_per_person: float
    pos: Dict[Stratum, float]
    neg: Dict[Stratum, float]
    repool: Dict[Stratum, float]

    @classmethod
    def from_acc(cls, acc: Acc) -> "AnalysisResult":
        resolved = acc.total("pos") + acc.total("neg")
        if resolved <= 0:
            raise AnalysisError("strategy resolves nobody")
        return cls(acc.tests, resolved, acc.tests / resolved,
                   dict(acc.pos), dict(acc.neg), dict(acc.repool))


# ---------------------------------------------------------------------------
# Joint distribution over live undetermined slots


class Dist:
    """names: live undetermined slots; table: status-tuple -> probability;
    det: slots whose status is implied (probability 0 or 1)."""

    __slots__ = ("names", "table", "det")

    def __init__(self, names: Tuple[str, ...],
                 table: Dict[Tuple[bool, ...], Fraction],
                 det: Dict[str, bool]):
        self.names = names
        self.table = table
        self.det = det

    @classmethod
    def empty(cls) -> "Dist":
        return cls((), {(): _ONE}, {})

    def key(self):
        return (self.names, tuple(sorted(self.table.items())),
                tuple(sorted(self.det.items())))

    def bind(self, name: str, rate: Fraction) -> "Dist":
        if rate == 0 or rate == 1:
            det = dict(self.det)
            det[name] = rate == 1
            return Dist(self.names, self.table, det)
        table = {}
        for cfg, p in self.table.items():
            table[cfg + (False,)] = p * (1 - rate)
            table[cfg + (True,)] = p * rate
        return Dist(self.names + (name,), table, self.det)

    def has(self, name: str) -> bool:
        return name in self.names or name in self.det

    def marginal(self, name: str) -> Fraction:
        if name in self.det:
            return _ONE if self.det[name] else _ZERO
        i = self.names.index(name)
        return sum((p for cfg, p in self.table.items() if cfg[i]), _ZERO)

    def split_pool(self, pool: Tuple[str, ...]):
        """Condition on 'any pooled slot positive'.

        Returns (w_pos, dist_pos, w_neg, dist_neg); weights are absolute;
        a zero-weight branch carries dist None.
        """
        if any(self.det.get(n, False) for n in pool):
            return _ONE, self, _ZERO, None
        live = [self.names.index(n) for n in pool if n in self.names]
        if not live:
            return _ZERO, None, _ONE, self
        t_pos: Dict[Tuple[bool, ...], Fraction] = {}
        t_neg: Dict[Tuple[bool, ...], Fraction] = {}
        for cfg, p in self.table.items():
            (t_pos if any(cfg[i] for i in live) else t_neg)[cfg] = p
        w_pos = sum(t_pos.values(), _ZERO)
        w_neg = sum(t_neg.values(), _ZERO)
        d_pos = Dist(self.names, {c: p / w_pos for c, p in t_pos.items()},
                     self.det)._project() if w_pos else None
        d_neg = Dist(self.names, {c: p / w_neg for c, p in t_neg.items()},
                     self.det)._project() if w_neg else None
        return w_pos, d_pos, w_neg, d_neg

    def split_slot(self, name: str):
        """Condition on one slot's status and drop it from the state."""
        if name in self.det:
            det = {k: v for k, v in self.det.items() if k != name}
            d = Dist(self.names, self.table, det)
            return (_ONE, d, _ZERO, None) if self.det[name] else (_ZERO, None, _ONE, d)
        i = self.names.index(name)
        names = self.names[:i] + self.names[i + 1:]
        t_pos: Dict[Tuple[bool, ...], Fraction] = {}
        t_neg: Dict[Tuple[bool, ...], Fraction] = {}
        for cfg, p in self.table.items():
            rest = cfg[:i] + cfg[i + 1:]
            t = t_pos if cfg[i] else t_neg
            t[rest] = t.get(rest, _ZERO) + p
        w_pos = sum(t_pos.values(), _ZERO)
        w_neg = sum(t_neg.values(), _ZERO)
        d_pos = Dist(names, {c: p / w_pos for c, p in t_pos.items()},
                     self.det)._project() if w_pos else None
        d_neg = Dist(names, {c: p / w_neg for c, p in t_neg.items()},
                     self.det)._project() if w_neg else None
        return w_pos, d_pos, w_neg, d_neg

    def drop(self, names_to_drop) -> "Dist":
        det = {k: v for k, v in self.det.items() if k not in names_to_drop}
        idxs = [i for i, n in enumerate(self.names) if n not in names_to_drop]
        names = tuple(self.names[i] for i in idxs)
        table: Dict[Tuple[bool, ...], Fraction] = {}
        for cfg, p in self.table.items():
            rest = tuple(cfg[i] for i in idxs)
            table[rest] = table.get(rest, _ZERO) + p
        return Dist(names, table, det)

    def _project(self) -> "Dist":
        """Move slots whose marginal became 0 or 1 into det."""
        forced = {}
        for i, n in enumerate(self.names):
            m = sum((p for cfg, p in self.table.items() if cfg[i]), _ZERO)
            if m == 0:
                forced[n] = False
            elif m == 1:
                forced[n] = True
        if not forced:
            return self
        det = dict(self.det)
        det.update(forced)
        idxs = [i for i, n in enumerate(self.names) if n not in forced]
        names = tuple(self.names[i] for i in idxs)
        table: Dict[Tuple[bool, ...], Fraction] = {}
        for cfg, p in self.table.items():
            rest = tuple(cfg[i] for i in idxs)
            table[rest] = table.get(rest, _ZERO) + p
        return Dist(names, table, det)


# ---------------------------------------------------------------------------
# Tree walker with loop fixed point


def _collect_strata(node: Optional[Node], out: Dict[str, Stratum]) -> Dict[str, Stratum]:
    if node is None:
        return out
    if isinstance(node, PoolTest):
        for lab in node.intros:
            out[lab.name] = lab.stratum
        _collect_strata(node.neg, out)
        _collect_strata(node.pos, out)
    elif isinstance(node, SubSolve):
        _collect_strata(node.neg, out)
        _collect_strata(node.pos, out)
    elif isinstance(node, Loop):
        _collect_strata(node.abort, out)
    return out


class _TreeCtx:
    def __init__(self, strategy: Strategy, risk: RiskModel,
                 solver_cost: Callable[[float], float]):
        self.strategy = strategy
        self.risk = risk
        self.solver_cost = solver_cost
        self.strata = _collect_strata(strategy.root, {})
        self.index: Dict[str, Node] = {}
        self._index(strategy.root)

    def _index(self, node: Optional[Node]) -> None:
        if node is None:
            return
        self.index[node.id] = node
        if isinstance(node, (PoolTest, SubSolve)):
            self._index(node.neg)
            self._index(node.pos)
        elif isinstance(node, Loop):
            self._index(node.abort)

    def rate(self, name: str) -> Fraction:
        return Fraction(self.risk.rate_for(self.strata.get(name, Stratum.DEFAULT)))


def _leaf_acc(assignments: Dict[str, Assign], dist: Dist, ctx: _TreeCtx,
              acc: Acc, where: str) -> Dist:
    """Account leaf/loop assignments; returns dist with those slots dropped."""
    for name, a in assignments.items():
        st = ctx.strata.get(name, Stratum.DEFAULT)
        m = dist.marginal(name)
        if a == Assign.POS:
            if m != 1:
                raise AnalysisError(f"{where}: {name} assigned POS with P={m}")
            acc.bump("pos", st, 1)
        elif a == Assign.NEG:
            if m != 0:
                raise AnalysisError(f"{where}: {name} assigned NEG with P={m}")
            acc.bump("neg", st, 1)
        else:
            if m != ctx.rate(name):
                raise AnalysisError(
                    f"{where}: {name} re-pooled with posterior {m} != prior")
            acc.bump("repool", st, 1)
    return dist.drop(set(assignments))


def _walk(node: Node, dist: Dist, ctx: _TreeCtx, stack: List,
          memo: Dict) -> Tuple[Acc, Dict]:
    """Returns (acc per unit mass, flows: loop-key -> coefficient)."""
    if isinstance(node, Leaf):
        acc = Acc()
        _leaf_acc(node.assignments, dist, ctx, acc, f"leaf {node.id}")
        return acc, {}

    if isinstance(node, PoolTest):
        for lab in node.intros:
            if not dist.has(lab.name):
                dist = dist.bind(lab.name, ctx.rate(lab.name))
        acc = Acc()
        acc.tests += 1
        flows: Dict = {}
        w_pos, d_pos, w_neg, d_neg = dist.split_pool(node.pool)
        for w, d, child in ((w_pos, d_pos, node.pos), (w_neg, d_neg, node.neg)):
            if w == 0:
                continue
            sub_acc, sub_flows = _walk(child, d, ctx, stack, memo)
            acc.add(sub_acc, w)
            for k, c in sub_flows.items():
                flows[k] = flows.get(k, 0.0) + float(w) * c
        return acc, flows

    if isinstance(node, SubSolve):
        x = Fraction(ctx.risk.x)
        y = Fraction(ctx.risk.y) if ctx.risk.y is not None else x
        z = node.posterior(x, y)
        acc = Acc()
        acc.tests += ctx.solver_cost(float(z))
        st = ctx.strata.get(node.label, Stratum.DEFAULT)
        flows: Dict = {}
        w_pos, d_pos, w_neg, d_neg = dist.split_slot(node.label)
        acc.bump("pos", st, w_pos)
        acc.bump("neg", st, w_neg)
        for w, d, child in ((w_pos, d_pos, node.pos), (w_neg, d_neg, node.neg)):
            if w == 0:
                continue
            sub_acc, sub_flows = _walk(child, d, ctx, stack, memo)
            acc.add(sub_acc, w)
            for k, c in sub_flows.items():
                flows[k] = flows.get(k, 0.0) + float(w) * c
        return acc, flows

    if isinstance(node, Loop):
        acc = Acc()
        dist = _leaf_acc(node.assignments, dist, ctx, acc, f"loop {node.id}")
        dist = dist.drop(set(node.redraw))
        key = (node.target, dist.key())
        if key in stack:
            return acc, {key: 1.0}
        if key not in memo:
            stack.append(key)
            body_acc, body_flows = _walk(ctx.index[node.target], dist, ctx,
                                         stack, memo)
            stack.pop()
            self_c = body_flows.pop(key, 0.0)
            if self_c >= 1.0:
                raise AnalysisError(f"loop at {node.id} does not converge")
            scale = 1.0 / (1.0 - self_c)
            resolved = Acc()
            resolved.add(body_acc, scale)
            memo[key] = (resolved, {k: c * scale for k, c in body_flows.items()})
        body_acc, body_flows = memo[key]
        if body_flows:
            raise AnalysisError("nested cross-referencing loops unsupported")
        acc.add(body_acc, 1.0)
        return acc, {}

    raise AnalysisError(f"cannot analyze node {node!r}")


# ---------------------------------------------------------------------------
# Group constructions: halving, REC[k], A15


def _halve_stats(j: int, x) -> Acc:
    """Resolve 2^j fresh members known to contain a positive: j tests,
    one POS, the rest split between NEG and re-pool."""
    acc = Acc()
    if j == 0:
        acc.bump("pos", Stratum.DEFAULT, 1)
        return acc
    n, h = 2 ** j, 2 ** (j - 1)
    q = 1 - x
    pi = (1 - q ** h) / (1 - q ** n)     # P(second half holds a positive)
    acc.tests += 1
    inner = _halve_stats(j - 1, x)
    acc.add(inner, 1.0)
    acc.bump("repool", Stratum.DEFAULT, pi * h)
    acc.bump("neg", Stratum.DEFAULT, (1 - pi) * h)
    return acc


def _rec_stats(k: int, x, solver_cost) -> Acc:
    """REC[k]: pool k, solve the first member at its posterior, halve the
    rest (k-1 is a power of two)."""
    q = 1 - x
    acc = Acc()
    acc.tests += 1
    acc.bump("neg", Stratum.DEFAULT, (q ** k) * k)
    w_hit = 1 - q ** k
    z = x / w_hit
    acc.tests += w_hit * solver_cost(float(z))
    # first member positive: others re-pooled (still fresh)
    acc.bump("pos", Stratum.DEFAULT, x)
    acc.bump("repool", Stratum.DEFAULT, x * (k - 1))
    # first member negative, a positive remains among the other k-1
    w_miss = q * (1 - q ** (k - 1))
    acc.bump("neg", Stratum.DEFAULT, w_miss)
    j = (k - 1).bit_length() - 1
    acc.add(_halve_stats(j, x), w_miss)
    return acc


def _a15_stats(x, solver_cost) -> Acc:
    """15-member construction: test all, then a 6-subgroup, peeling
    members at exact posteriors before halving what remains."""
    q = 1 - x
    acc = Acc()
    acc.tests += 1                       # pool of 15
    acc.bump("neg", Stratum.DEFAULT, (q ** 15) * 15)
    w_hit = 1 - q ** 15
    acc.tests += w_hit                   # pool of first 6
    z6 = x / (1 - q ** 6)
    z5 = x / (1 - q ** 5)

    # six-branch: positive among the first 6; the other 9 re-pool fresh
    w6 = 1 - q ** 6
    acc.bump("repool", Stratum.DEFAULT, w6 * 9)
    acc.tests += w6 * solver_cost(float(z6))
    acc.bump("pos", Stratum.DEFAULT, x)                  # m1 positive
    acc.bump("repool", Stratum.DEFAULT, x * 5)
    w_m1n = q * (1 - q ** 5)                             # m1 neg, hit in next 5
    acc.bump("neg", Stratum.DEFAULT, w_m1n)
    acc.tests += w_m1n * solver_cost(float(z5))
    acc.bump("pos", Stratum.DEFAULT, q * x)              # m2 positive
    acc.bump("repool", Stratum.DEFAULT, q * x * 4)
    w_m2n = q ** 2 * (1 - q ** 4)                        # halve the last 4
    acc.bump("neg", Stratum.DEFAULT, w_m2n)
    acc.add(_halve_stats(2, x), w_m2n)

    # nine-branch: first 6 all negative, positive among the last 9
    w9 = q ** 6 * (1 - q ** 9)
    acc.bump("neg", Stratum.DEFAULT, w9 * 6)
    acc.tests += w9                      # pool of first 4 of the 9
    w4 = q ** 6 * (1 - q ** 4)
    acc.bump("repool", Stratum.DEFAULT, w4 * 5)
    acc.add(_halve_stats(2, x), w4)
    w5 = q ** 10 * (1 - q ** 5)          # the 4 were clean; 5 remain
    acc.bump("neg", Stratum.DEFAULT, w5 * 4)
    acc.tests += w5 * solver_cost(float(z5))
    acc.bump("pos", Stratum.DEFAULT, q ** 10 * x)
    acc.bump("repool", Stratum.DEFAULT, q ** 10 * x * 4)
    w_h = q ** 11 * (1 - q ** 4)
    acc.bump("neg", Stratum.DEFAULT, w_h)
    acc.add(_halve_stats(2, x), w_h)
    return acc


# ---------------------------------------------------------------------------
# Pair-compound conversion and entry point


def _convert_paired(inner: Acc, x) -> Acc:
    """Per-run statistics of PAIRED(S) from S analyzed at 2x - x^2.

    Each inner atom is a pair of this level's atoms: a positive pair costs
    one follow-up test and resolves one atom POS, the other NEG or
    re-pooled depending on which half explains the positive."""
    x2 = 2 * x - x * x
    beta = x / x2                        # P(second half + | pair +)
    out = Acc()
    p_in = inner.total("pos")
    n_in = inner.total("neg")
    r_in = inner.total("repool")
    out.tests = inner.tests + p_in
    out.bump("pos", Stratum.DEFAULT, p_in)
    out.bump("neg", Stratum.DEFAULT, 2 * n_in + p_in * (1 - beta))
    out.bump("repool", Stratum.DEFAULT, 2 * r_in + p_in * beta)
    return out


def _default_solver_cost(max_pool_size: int = 16) -> Callable[[float], float]:
    from .costs import best_family_cost
    return lambda z: best_family_cost(z, max_pool_size)


def analyze(strategy: Strategy, risk: RiskModel,
            solver_cost: Optional[Callable[[float], float]] = None,
            ) -> AnalysisResult:
    """Expected per-run statistics of a strategy under a risk model."""
    return AnalysisResult.from_acc(_analyze_acc(strategy, risk, solver_cost))


def _analyze_acc(strategy: Strategy, risk: RiskModel,
                 solver_cost: Optional[Callable[[float], float]]) -> Acc:
    if solver_cost is None:
        if strategy.subsolver is not None:
            from .costs import strategy_cost_fn
            solver_cost = strategy_cost_fn(strategy.subsolver)
        else:
            solver_cost = _default_solver_cost()
    if strategy.kind == "tree":
        ctx = _TreeCtx(strategy, risk, solver_cost)
        acc, flows = _walk(strategy.root, Dist.empty(), ctx, [], {})
        if flows:
            raise AnalysisError("unresolved loop flow at root")
        return acc
    if strategy.kind == "paired":
        x = Fraction(risk.x)
        from .risk import homogeneous
        inner = _analyze_acc(strategy.inner, homogeneous(2 * x - x * x),
                             solver_cost)
        return _convert_paired(inner, x)
    if strategy.kind == "alt":
        x = Fraction(risk.x)

        def table_cost(z: float) -> float:
            from .costs import closed_form_cost
            return min(closed_form_cost(s.id, z)
                       for s in strategy.inner_table.values())

        sc = table_cost if strategy.inner_table else solver_cost
        if strategy.alt == "A15":
            return _a15_stats(x, sc)
        return _rec_stats(strategy.id.size, x, sc)
    raise AnalysisError(f"cannot analyze strategy kind {strategy.kind!r}")
