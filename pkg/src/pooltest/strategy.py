"""Decision-tree data model and constructors for every testing strategy.

A strategy is either a concrete decision tree (pool tests, leaves, loop
edges, sub-solver hand-offs), a pair-compounding wrapper around an inner
strategy, or one of the alternative group constructions (A15, recursive
groups of 5 and of 9).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple, Union

from .errors import InvalidStrategy


class Stratum(Enum):
    DEFAULT = "default"
    HIGH_RISK_UPPER = "upper"   # rate x, uppercase labels
    LOW_RISK_LOWER = "lower"    # rate y, lowercase labels


@dataclass(frozen=True)
class Label:
    name: str
    stratum: Stratum = Stratum.DEFAULT


class Assign(Enum):
    POS = "+"
    NEG = "-"
    REPOOL = "R"


# ---------------------------------------------------------------------------
# Tree nodes


@dataclass
class PoolTest:
    """Test a mixture of the pooled labels; two children (pos/neg)."""

    id: str
    intros: Tuple[Label, ...]       # drawn fresh before the test if unbound
    pool: Tuple[str, ...]           # label names mixed for this test
    neg: "Node" = None              # bottom branch: all pooled members negative
    pos: "Node" = None              # top branch: at least one positive


@dataclass
class Leaf:
    id: str
    assignments: Dict[str, Assign]


@dataclass
class Loop:
    """Jump back to an ancestor node, disposing some labels first.

    Labels in ``assignments`` are finalized here; slots listed in ``redraw``
    become unbound so the target node re-introduces them fresh.  After
    ``cap`` traversals the ``abort`` subtree runs instead of jumping.
    """

    id: str
    assignments: Dict[str, Assign]
    target: str
    redraw: Tuple[str, ...]
    abort: "Node" = None


@dataclass
class SubSolve:
    """Resolve one label by handing it to a homogeneous sub-strategy.

    ``posterior`` maps the session risk rates to the label's a-posteriori
    positive probability at this point of the tree (used to price and route
    the sub-strategy run).  Children branch on the resolved status.
    """

    id: str
    label: str
    posterior: Callable[[float, float], float] = None
    neg: "Node" = None
    pos: "Node" = None
    form: Optional[Tuple] = None    # serializable posterior description


Node = Union[PoolTest, Leaf, Loop, SubSolve]


# ---------------------------------------------------------------------------
# Strategy identifiers

_ODD_BASES = (1, 3, 5)


@dataclass(frozen=True)
class StrategyId:
    """Canonical identifier: A-family by pool size, M1..M4(n), REC5/REC9."""

    kind: str                 # "A" | "M" | "REC"
    size: int = 0             # A-family pool size, REC group size
    m: int = 0                # mixed index 1..4
    arity: int = 0            # M4 arity n

    @property
    def name(self) -> str:
        if self.kind == "A":
            return f"A{self.size}"
        if self.kind == "M":
            if self.m == 4:
                return f"M{self.m}:{self.arity}"
            if self.m == 1 and self.arity:
                return f"M1G{self.arity}"       # M1 on 2^arity-grouped low-risk
            return f"M{self.m}"
        return f"REC{self.size}"

    def __str__(self) -> str:
        return self.name


def a_id(size: int) -> StrategyId:
    return StrategyId("A", size=size)


def parse_id(name: str) -> StrategyId:
    """Parse "A12", "A15", "M1", "M4:3", "REC5" into a StrategyId."""
    m = re.fullmatch(r"A(\d+)", name)
    if m:
        size = int(m.group(1))
        if not _is_family_size(size) and not _is_a15_size(size):
            raise InvalidStrategy(f"no A-family strategy of size {size}")
        return a_id(size)
    m = re.fullmatch(r"M([123])", name)
    if m:
        return StrategyId("M", m=int(m.group(1)))
    m = re.fullmatch(r"M1G(\d+)", name)
    if m:
        return StrategyId("M", m=1, arity=int(m.group(1)))
    m = re.fullmatch(r"M4:(\d+)", name)
    if m:
        return StrategyId("M", m=4, arity=int(m.group(1)))
    m = re.fullmatch(r"REC([59])", name)
    if m:
        return StrategyId("REC", size=int(m.group(1)))
    raise InvalidStrategy(f"unrecognized strategy name {name!r}")


def _is_family_size(size: int) -> bool:
    """True for sizes 2^n * k with k in {1, 3, 5}."""
    if size < 1:
        return False
    while size % 2 == 0:
        size //= 2
    return size in _ODD_BASES


def _is_a15_size(size: int) -> bool:
    """True for 15 * 2^n (the improved A15/A30/A60 sequence)."""
    if size < 15:
        return False
    while size % 2 == 0:
        size //= 2
    return size == 15


def enumerate_family(max_pool_size: int, improved: bool = False) -> List[StrategyId]:
    """All A-family ids with size <= max_pool_size, ascending by size.

    With ``improved`` the sizes 16*2^n are replaced by the 15*2^n sequence.
    """
    if max_pool_size < 1:
        raise InvalidStrategy("max_pool_size must be >= 1")
    sizes = set()
    for k in _ODD_BASES:
        s = k
        while s <= max_pool_size:
            sizes.add(s)
            s *= 2
    if improved:
        s = 15
        while True:
            if 16 * (s // 15) in sizes:
                sizes.discard(16 * (s // 15))
                if s <= max_pool_size:
                    sizes.add(s)
            else:
                break
            s *= 2
    return [a_id(s) for s in sorted(sizes)]


# ---------------------------------------------------------------------------
# Strategy


@dataclass
class Strategy:
    id: StrategyId
    kind: str                                   # "tree" | "paired" | "alt"
    root: Optional[Node] = None                 # tree strategies
    inner: Optional["Strategy"] = None          # paired wrapper
    alt: Optional[str] = None                   # "A15" | "REC5" | "REC9"
    inner_table: Optional[Dict[int, "Strategy"]] = None
    subsolver: Optional["Strategy"] = None      # for SubSolve nodes (M1/M4)
    loop_cap: int = 16

    @property
    def mixed(self) -> bool:
        return self.id.kind == "M"


# ---------------------------------------------------------------------------
# Basic trees (homogeneous population, one figure each)


def _lbl(*names: str) -> Tuple[Label, ...]:
    return tuple(Label(n) for n in names)


def _leaf(nid: str, **kw: str) -> Leaf:
    codes = {"P": Assign.POS, "N": Assign.NEG, "R": Assign.REPOOL}
    return Leaf(nid, {k: codes[v] for k, v in kw.items()})


def build_basic(n: int) -> Strategy:
    """The five elementary trees.

    Follows the pair-compound convention throughout: on a positive pool the
    *second* half/member is tested next, so A2 and A4 coincide exactly with
    the compounded forms of A1 and A2.
    """
    if n not in (1, 2, 3, 4, 5):
        raise InvalidStrategy(f"basic strategy index must be in 1..5, got {n}")
    builder = (_tree_a1, _tree_a2, _tree_a3, _tree_a4, _tree_a5)[n - 1]
    return Strategy(a_id(n), "tree", root=builder())


def _tree_a1() -> Node:
    return PoolTest("n0", _lbl("A"), ("A",),
                    neg=_leaf("n1", A="N"), pos=_leaf("n2", A="P"))


def _tree_a2() -> Node:
    return PoolTest(
        "n0", _lbl("A", "B"), ("A", "B"),
        neg=_leaf("n1", A="N", B="N"),
        pos=PoolTest("n2", (), ("B",),
                     neg=_leaf("n3", A="P", B="N"),
                     pos=_leaf("n4", A="R", B="P")))


def _tree_a3() -> Node:
    return PoolTest(
        "n0", _lbl("A", "B", "C"), ("A", "B", "C"),
        neg=_leaf("n1", A="N", B="N", C="N"),
        pos=PoolTest(
            "n2", _lbl("D"), ("C", "D"),
            neg=PoolTest("n3", (), ("B",),
                         neg=_leaf("n4", A="P", B="N", C="N", D="N"),
                         pos=_leaf("n5", A="R", B="P", C="N", D="N")),
            pos=PoolTest(
                "n6", _lbl("E"), ("D", "E"),
                neg=_leaf("n7", A="R", B="R", C="P", D="N", E="N"),
                pos=PoolTest(
                    "n8", (), ("C",),
                    neg=PoolTest("n9", (), ("B",),
                                 neg=_leaf("n10", A="P", B="N", C="N", D="P", E="R"),
                                 pos=_leaf("n11", A="R", B="P", C="N", D="P", E="R")),
                    pos=PoolTest("n12", (), ("D",),
                                 neg=_leaf("n13", A="R", B="R", C="P", D="N", E="P"),
                                 pos=_leaf("n14", A="R", B="R", C="P", D="P", E="R"))))))


def _tree_a4() -> Node:
    return PoolTest(
        "n0", _lbl("A", "B", "C", "D"), ("A", "B", "C", "D"),
        neg=_leaf("n1", A="N", B="N", C="N", D="N"),
        pos=PoolTest(
            "n2", (), ("C", "D"),
            neg=PoolTest("n3", (), ("B",),
                         neg=_leaf("n4", A="P", B="N", C="N", D="N"),
                         pos=_leaf("n5", A="R", B="P", C="N", D="N")),
            pos=PoolTest("n6", (), ("D",),
                         neg=_leaf("n7", A="R", B="R", C="P", D="N"),
                         pos=_leaf("n8", A="R", B="R", C="R", D="P"))))


def _tree_a5() -> Node:
    # Early-abort subtree used once the loop cap is hit: test C alone,
    # then D if needed.  A and B are known negative on this branch.
    abort = PoolTest(
        "ab0", (), ("C",),
        pos=_leaf("ab1", A="N", B="N", C="P", D="R", E="R", F="R"),
        neg=PoolTest("ab2", (), ("D",),
                     pos=_leaf("ab3", A="N", B="N", C="N", D="P", E="R", F="R"),
                     neg=_leaf("ab4", A="N", B="N", C="N", D="N", E="P", F="R")))
    return PoolTest(
        "n0", _lbl("A", "B", "C", "D", "E"), ("A", "B", "C", "D", "E"),
        neg=_leaf("n1", A="N", B="N", C="N", D="N", E="N"),
        pos=PoolTest(
            "n2", (), ("A", "B"),
            pos=PoolTest("n3", (), ("B",),
                         neg=_leaf("n4", A="P", B="N", C="R", D="R", E="R"),
                         pos=_leaf("n5", A="R", B="P", C="R", D="R", E="R")),
            neg=PoolTest(
                "n6", _lbl("F", "G"), ("E", "F", "G"),
                neg=PoolTest(
                    "n7", (), ("C",),
                    neg=_leaf("n8", A="N", B="N", C="N", D="P", E="N", F="N", G="N"),
                    pos=_leaf("n9", A="N", B="N", C="P", D="R", E="N", F="N", G="N")),
                pos=PoolTest(
                    "n10", (), ("C", "D", "G"),
                    neg=_leaf("n11", A="N", B="N", C="N", D="N", E="P", F="R", G="N"),
                    pos=PoolTest(
                        "n12", (), ("G",),
                        neg=PoolTest(
                            "n13", (), ("D",),
                            neg=PoolTest(
                                "n14", (), ("F",),
                                neg=_leaf("n15", A="N", B="N", C="P", D="N",
                                          E="P", F="N", G="N"),
                                pos=_leaf("n16", A="N", B="N", C="P", D="N",
                                          E="R", F="P", G="N")),
                            pos=PoolTest(
                                "n17", (), ("F",),
                                neg=_leaf("n18", A="N", B="N", C="R", D="P",
                                          E="P", F="N", G="N"),
                                pos=_leaf("n19", A="N", B="N", C="R", D="P",
                                          E="R", F="P", G="N"))),
                        pos=Loop("n20", {"G": Assign.POS}, target="n6",
                                 redraw=("G",), abort=abort))))))


# ---------------------------------------------------------------------------
# Compound (pair) wrapper and A-family construction


def build_compound(inner: Strategy) -> Strategy:
    """Apply ``inner`` to pair pseudo-individuals (doubles the pool size).

    A negative pair output clears both members; a positive pair output
    triggers an individual test on the second member.
    """
    if inner.mixed:
        raise InvalidStrategy("compounding requires a homogeneous inner strategy")
    return Strategy(a_id(2 * inner.id.size), "paired", inner=inner)


def build_alternative(id: str, inner_table: Dict[int, Strategy]) -> Strategy:
    """The group-of-15 strategy and the recursive groups of 5 and of 9.

    ``inner_table`` supplies the homogeneous sub-strategies used to resolve
    single members mid-run: A15 requires the size-3 entry; REC5/REC9 pick
    the cheapest entry at the member's a-posteriori risk.
    """
    if id == "A15":
        if not inner_table or 3 not in inner_table:
            raise InvalidStrategy("A15 requires a size-3 inner strategy")
        return Strategy(a_id(15), "alt", alt="A15", inner_table=dict(inner_table))
    if id in ("REC5", "REC9"):
        if not inner_table:
            raise InvalidStrategy(f"{id} requires at least one inner strategy")
        size = 5 if id == "REC5" else 9
        return Strategy(StrategyId("REC", size=size), "alt", alt=id,
                        inner_table=dict(inner_table))
    raise InvalidStrategy(f"unknown alternative id {id!r}")


def _default_inner_table(max_size: int = 5) -> Dict[int, Strategy]:
    return {s.size: get_strategy(s) for s in enumerate_family(max_size)}


def get_strategy(sid: Union[StrategyId, str], subsolver: Optional[Strategy] = None,
                 ) -> Strategy:
    """Construct the strategy for an id, recursing through compound sizes."""
    if isinstance(sid, str):
        sid = parse_id(sid)
    if sid.kind == "A":
        size = sid.size
        if size in (1, 2, 3, 4, 5):
            return build_basic(size)
        if _is_a15_size(size):
            inner = build_alternative("A15", _default_inner_table())
            while inner.id.size < size:
                inner = build_compound(inner)
            return inner
        if _is_family_size(size):
            return build_compound(get_strategy(a_id(size // 2)))
        raise InvalidStrategy(f"no A-family strategy of size {size}")
    if sid.kind == "REC":
        return build_alternative(f"REC{sid.size}", _default_inner_table())
    # mixed
    name = "M4" if sid.m == 4 else f"M{sid.m}"
    return build_mixed(name, subsolver, n=sid.arity)


# ---------------------------------------------------------------------------
# Mixed-population trees (two strata: uppercase risk x, lowercase risk y)


def _up(*names: str) -> Tuple[Label, ...]:
    return tuple(Label(n, Stratum.HIGH_RISK_UPPER) for n in names)


def _low(*names: str) -> Tuple[Label, ...]:
    return tuple(Label(n, Stratum.LOW_RISK_LOWER) for n in names)


def build_mixed(id: str, homogeneous_subsolver: Optional[Strategy] = None,
                n: int = 0) -> Strategy:
    """M1, M2, M3, or M4:n.  M1/M4 send members to a homogeneous
    sub-solver; with none given, executors choose the cheapest family
    member at the posterior risk."""
    if id == "M1":
        root = PoolTest(
            "n0", _up("A") + _low("b"), ("A", "b"),
            neg=_leaf("n1", A="N", b="N"),
            pos=SubSolve("n2", "b",
                         posterior=lambda x, y: y / (x + y - x * y),
                         neg=_leaf("n3", A="P"),
                         pos=_leaf("n4", A="R"),
                         form=("pooled-pair",)))
        return Strategy(StrategyId("M", m=1), "tree", root=root,
                        subsolver=homogeneous_subsolver)
    if id == "M2":
        root = PoolTest(
            "n0", _up("A") + _low("b"), ("A", "b"),
            neg=_leaf("n1", A="N", b="N"),
            pos=PoolTest(
                "n2", _low("c"), ("b", "c"),
                neg=_leaf("n3", A="P", b="N", c="N"),
                pos=PoolTest(
                    "n4", (), ("A",),
                    neg=_leaf("n5", A="N", b="P", c="R"),
                    pos=PoolTest("n6", (), ("b",),
                                 neg=_leaf("n7", A="P", b="N", c="P"),
                                 pos=_leaf("n8", A="P", b="P", c="R")))))
        return Strategy(StrategyId("M", m=2), "tree", root=root)
    if id == "M3":
        # The recursive chain of Fig. 9 is a loop: each iteration resolves
        # one fresh low-risk companion, the pair knowledge (A or b positive)
        # carries over unchanged.
        abort = PoolTest("ab0", (), ("b",),
                         neg=_leaf("ab1", A="P", b="N"),
                         pos=_leaf("ab2", A="R", b="P"))
        root = PoolTest(
            "n0", _up("A") + _low("b"), ("A", "b"),
            neg=_leaf("n1", A="N", b="N"),
            pos=PoolTest(
                "n2", _low("c"), ("b", "c"),
                neg=_leaf("n3", A="P", b="N", c="N"),
                pos=PoolTest(
                    "n4", (), ("c",),
                    neg=_leaf("n5", A="R", b="P", c="N"),
                    pos=Loop("n6", {"c": Assign.POS}, target="n2",
                             redraw=("c",), abort=abort))))
        return Strategy(StrategyId("M", m=3), "tree", root=root)
    m = re.fullmatch(r"M4(?::(\d+))?", id)
    if m:
        arity = int(m.group(1)) if m.group(1) else n
        if arity < 1:
            raise InvalidStrategy("M4 arity must be >= 1")
        return _build_m4(arity, homogeneous_subsolver)
    raise InvalidStrategy(f"unknown mixed id {id!r}")


def _build_m4(n: int, subsolver: Optional[Strategy]) -> Strategy:
    bs = [f"b{i}" for i in range(1, n + 1)]
    all_neg = _leaf("leaf_neg", **{lbl: "N" for lbl in ["A"] + bs})

    def posterior(i: int) -> Callable[[float, float], float]:
        # P(b_i positive | pool positive, b_{i+1}..b_n negative), exact Bayes
        return lambda x, y, i=i: y / (1 - (1 - x) * (1 - y) ** i)

    # Innermost case: all b_i negative implies A positive.
    node: Node = _leaf("leaf_allneg", A="P")
    for i in range(1, n + 1):
        repooled = {"A": "R", **{f"b{j}": "R" for j in range(1, i)}}
        node = SubSolve(f"s{i}", f"b{i}", posterior=posterior(i),
                        neg=node,
                        pos=_leaf(f"leaf_pos{i}", **repooled),
                        form=("peel", i))
    root = PoolTest("n0", _up("A") + _low(*bs), tuple(["A"] + bs),
                    neg=all_neg, pos=node)
    return Strategy(StrategyId("M", m=4, arity=n), "tree", root=root,
                    subsolver=subsolver)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class Violation:
    code: str
    path: str
    detail: str = ""


@dataclass
class ValidationReport:
    ok: bool
    violations: List[Violation] = field(default_factory=list)


def validate(strategy: Strategy) -> ValidationReport:
    """Structural checks; a passing strategy is executable everywhere."""
    issues: List[Violation] = []
    if strategy.kind == "paired":
        inner_report = validate(strategy.inner)
        for v in inner_report.violations:
            issues.append(Violation(v.code, "inner/" + v.path, v.detail))
        return ValidationReport(not issues, issues)
    if strategy.kind == "alt":
        for key, sub in (strategy.inner_table or {}).items():
            for v in validate(sub).violations:
                issues.append(Violation(v.code, f"inner[{key}]/" + v.path, v.detail))
        return ValidationReport(not issues, issues)

    def walk(node: Node, bound: Dict[str, Label], ancestors: Dict[str, Node],
             path: str, visiting_loop_target: bool) -> None:
        if node is None:
            issues.append(Violation("MISSING_CHILD", path))
            return
        if isinstance(node, Leaf):
            live = set(bound)
            assigned = set(node.assignments)
            if live - assigned:
                issues.append(Violation("LEAF_INCOMPLETE", path,
                                        f"unassigned: {sorted(live - assigned)}"))
            if assigned - live:
                issues.append(Violation("LEAF_UNKNOWN_LABEL", path,
                                        f"not live: {sorted(assigned - live)}"))
            return
        if isinstance(node, Loop):
            if node.target not in ancestors:
                issues.append(Violation("BAD_LOOP_TARGET", path, node.target))
            for name in node.assignments:
                if name not in bound:
                    issues.append(Violation("LOOP_UNKNOWN_LABEL", path, name))
            for name in node.redraw:
                if name not in node.assignments:
                    issues.append(Violation("LOOP_REDRAW_UNDISPOSED", path, name))
            if node.abort is not None:
                remaining = {k: v for k, v in bound.items()
                             if k not in node.assignments}
                walk(node.abort, remaining, dict(ancestors), path + "/abort", False)
            return
        if isinstance(node, SubSolve):
            if node.label not in bound:
                issues.append(Violation("POOL_UNBOUND_LABEL", path, node.label))
            remaining = {k: v for k, v in bound.items() if k != node.label}
            anc = dict(ancestors)
            anc[node.id] = node
            walk(node.neg, dict(remaining), anc, path + "/-", False)
            walk(node.pos, dict(remaining), anc, path + "/+", False)
            return
        # PoolTest
        new_bound = dict(bound)
        for lab in node.intros:
            if lab.name in new_bound and not visiting_loop_target:
                issues.append(Violation("DUPLICATE_LABEL", path, lab.name))
            new_bound[lab.name] = lab
        for name in node.pool:
            if name not in new_bound:
                issues.append(Violation("POOL_UNBOUND_LABEL", path, name))
        if not node.pool:
            issues.append(Violation("EMPTY_POOL", path))
        anc = dict(ancestors)
        anc[node.id] = node
        walk(node.neg, dict(new_bound), anc, path + "/-", False)
        walk(node.pos, dict(new_bound), anc, path + "/+", False)

    walk(strategy.root, {}, {}, strategy.id.name, False)
    return ValidationReport(not issues, issues)
