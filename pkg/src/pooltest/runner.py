"""Strategy execution as event-generator runs.

A *run* is one pass of a strategy from its root to completion.  Runs are
generators that yield events and receive answers, so the same traversal
code drives exact analysis checks, Monte Carlo simulation, and live
operator sessions:

    ("intro", name, stratum)                  -> member token
    ("test", names, members)                  -> bool (True = positive pool)
    ("resolve", name, member, Assign)         -> None
    ("subsolve", name, member, strategy, z)   -> bool (member's status)
    ("loop", node_id) / ("loop_abort", node_id) -> None

Member tokens are opaque to the runner.  Pair-compounded strategies build
structured pair tokens ("pair", name_a, tok_a, name_b, tok_b); pools are
flattened before the test event is emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple

from .errors import InvalidStrategy
from .risk import RiskModel, homogeneous
from .strategy import (Assign, Label, Leaf, Loop, Node, PoolTest, Strategy,
                       Stratum, SubSolve)

PAIR = "pair"


def flatten(token) -> list:
    """Real member tokens inside a possibly-nested pair token."""
    if isinstance(token, tuple) and token and token[0] == PAIR:
        return flatten(token[2]) + flatten(token[4])
    return [token]


def flat_names(name: str, token) -> List[str]:
    if isinstance(token, tuple) and token and token[0] == PAIR:
        return flat_names(token[1], token[2]) + flat_names(token[3], token[4])
    return [name]


def resolve_token(name: str, token, assign: Assign):
    """Emit resolve events for a token; pairs dissolve member-wise.

    POS pairs must not be resolved through here (they need a follow-up
    test; see ``followup_positive``).
    """
    if isinstance(token, tuple) and token and token[0] == PAIR:
        if assign == Assign.POS:
            raise InvalidStrategy("positive pair requires a follow-up test")
        yield from resolve_token(token[1], token[2], assign)
        yield from resolve_token(token[3], token[4], assign)
    else:
        yield ("resolve", name, token, assign)


def followup_positive(name: str, token):
    """Resolve a known-positive token; pairs test their second member."""
    if not (isinstance(token, tuple) and token and token[0] == PAIR):
        yield ("resolve", name, token, Assign.POS)
        return
    na, ta, nb, tb = token[1], token[2], token[3], token[4]
    out = yield ("test", tuple(flat_names(nb, tb)), tuple(flatten(tb)))
    if out:
        yield from followup_positive(nb, tb)
        yield from resolve_token(na, ta, Assign.REPOOL)
    else:
        yield from resolve_token(nb, tb, Assign.NEG)
        yield from followup_positive(na, ta)


# ---------------------------------------------------------------------------
# Tree runner


def _node_index(node: Node, out: Dict[str, Node]) -> Dict[str, Node]:
    if node is None:
        return out
    out[node.id] = node
    if isinstance(node, (PoolTest, SubSolve)):
        _node_index(node.neg, out)
        _node_index(node.pos, out)
    elif isinstance(node, Loop) and node.abort is not None:
        _node_index(node.abort, out)
    return out


def _tree_run(strategy: Strategy, risk: RiskModel, loop_cap: int):
    index = _node_index(strategy.root, {})
    bindings: Dict[str, object] = {}
    loop_counts: Dict[str, int] = {}
    node = strategy.root
    while True:
        if isinstance(node, PoolTest):
            for lab in node.intros:
                if lab.name not in bindings:
                    bindings[lab.name] = yield ("intro", lab.name, lab.stratum)
            names: List[str] = []
            members: List[object] = []
            for n in node.pool:
                names.extend(flat_names(n, bindings[n]))
                members.extend(flatten(bindings[n]))
            out = yield ("test", tuple(names), tuple(members))
            node = node.pos if out else node.neg
        elif isinstance(node, SubSolve):
            x = risk.x
            y = risk.y if risk.y is not None else risk.x
            z = node.posterior(x, y)
            member = bindings.pop(node.label)
            status = yield ("subsolve", node.label, member, strategy.subsolver, z)
            node = node.pos if status else node.neg
        elif isinstance(node, Loop):
            for nm, a in node.assignments.items():
                tok = bindings.pop(nm)
                if a == Assign.POS:
                    yield from followup_positive(nm, tok)
                else:
                    yield from resolve_token(nm, tok, a)
            count = loop_counts.get(node.id, 0) + 1
            loop_counts[node.id] = count
            if count > loop_cap:
                yield ("loop_abort", node.id)
                node = node.abort
            else:
                yield ("loop", node.id)
                node = index[node.target]
        elif isinstance(node, Leaf):
            for nm, a in node.assignments.items():
                tok = bindings.pop(nm)
                if a == Assign.POS:
                    yield from followup_positive(nm, tok)
                else:
                    yield from resolve_token(nm, tok, a)
            return
        else:
            raise InvalidStrategy(f"dangling child in tree at {node!r}")


# ---------------------------------------------------------------------------
# Pair-compound wrapper runner


def _name_seq():
    i = 0
    while True:
        yield chr(65 + i) if i < 26 else f"X{i}"
        i += 1


def _paired_run(strategy: Strategy, risk: RiskModel, loop_cap: int):
    x = risk.x
    inner_risk = homogeneous(2 * x - x * x)
    inner = start_run(strategy.inner, inner_risk, loop_cap)
    names = _name_seq()
    send = None
    while True:
        try:
            ev = inner.send(send)
        except StopIteration:
            return
        send = None
        tag = ev[0]
        if tag == "intro":
            na = next(names)
            ta = yield ("intro", na, Stratum.DEFAULT)
            nb = next(names)
            tb = yield ("intro", nb, Stratum.DEFAULT)
            send = (PAIR, na, ta, nb, tb)
        elif tag == "test":
            flat_n: List[str] = []
            flat_m: List[object] = []
            for nm, tok in zip(ev[1], ev[2]):
                flat_n.extend(flat_names(nm, tok))
                flat_m.extend(flatten(tok))
            send = yield ("test", tuple(flat_n), tuple(flat_m))
        elif tag == "resolve":
            _, nm, tok, assign = ev
            if assign == Assign.POS:
                send = yield from followup_positive(nm, tok)
            else:
                send = yield from resolve_token(nm, tok, assign)
        else:
            # subsolve / loop / loop_abort pass through unchanged
            send = yield ev


# ---------------------------------------------------------------------------
# Alternative constructions (A15, REC5, REC9)


def _pick_solver(table: Dict[int, Strategy], z) -> Strategy:
    """Cheapest available homogeneous sub-strategy at risk z."""
    from .costs import closed_form_cost
    zf = float(z)
    best, best_cost = None, None
    for size in sorted(table):
        c = closed_form_cost(table[size].id, zf)
        if best_cost is None or c < best_cost:
            best, best_cost = table[size], c
    return best


def _halve(group: List[Tuple[str, object]]):
    """Resolve a group of size 2^j known to hold at least one positive.

    Tests the second half: positive keeps it (first half re-pooled),
    negative clears it (recurse into the first half).
    """
    if len(group) == 1:
        nm, tok = group[0]
        yield from followup_positive(nm, tok)
        return
    half = len(group) // 2
    first, second = group[:half], group[half:]
    names: List[str] = []
    members: List[object] = []
    for nm, tok in second:
        names.extend(flat_names(nm, tok))
        members.extend(flatten(tok))
    out = yield ("test", tuple(names), tuple(members))
    if out:
        for nm, tok in first:
            yield from resolve_token(nm, tok, Assign.REPOOL)
        yield from _halve(second)
    else:
        for nm, tok in second:
            yield from resolve_token(nm, tok, Assign.NEG)
        yield from _halve(first)


def _group_test(group: List[Tuple[str, object]]):
    names: List[str] = []
    members: List[object] = []
    for nm, tok in group:
        names.extend(flat_names(nm, tok))
        members.extend(flatten(tok))
    return ("test", tuple(names), tuple(members))


def _resolve_group(group, assign):
    for nm, tok in group:
        yield from resolve_token(nm, tok, assign)


def _alt_run(strategy: Strategy, risk: RiskModel, loop_cap: int):
    x = risk.x
    q = 1 - x
    table = strategy.inner_table

    def subsolve(entry, solver, z):
        nm, tok = entry
        return ("subsolve", nm, tok, solver, z)

    def conclude4(group):
        # two halving steps on a group of 4 with at least one positive
        yield from _halve(group)

    if strategy.alt == "A15":
        solver3 = table[3]
        members = []
        for i in range(1, 16):
            nm = f"m{i}"
            tok = yield ("intro", nm, Stratum.DEFAULT)
            members.append((nm, tok))
        out = yield _group_test(members)
        if not out:
            yield from _resolve_group(members, Assign.NEG)
            return
        out6 = yield _group_test(members[:6])
        if not out6:
            yield from _resolve_group(members[:6], Assign.NEG)
            # nine remain, at least one positive: split off the first four
            nine = members[6:]
            out4 = yield _group_test(nine[:4])
            if out4:
                yield from _resolve_group(nine[4:], Assign.REPOOL)
                yield from conclude4(nine[:4])
            else:
                yield from _resolve_group(nine[:4], Assign.NEG)
                five = nine[4:]
                z5 = x / (1 - q ** 5)
                st = yield subsolve(five[0], solver3, z5)
                if st:
                    yield from _resolve_group(five[1:], Assign.REPOOL)
                else:
                    yield from conclude4(five[1:])
        else:
            yield from _resolve_group(members[6:], Assign.REPOOL)
            six = members[:6]
            z6 = x / (1 - q ** 6)
            st = yield subsolve(six[0], solver3, z6)
            if st:
                yield from _resolve_group(six[1:], Assign.REPOOL)
            else:
                z5 = x / (1 - q ** 5)
                st2 = yield subsolve(six[1], solver3, z5)
                if st2:
                    yield from _resolve_group(six[2:], Assign.REPOOL)
                else:
                    yield from conclude4(six[2:])
        return

    # REC5 / REC9
    size = strategy.id.size
    members = []
    for i in range(1, size + 1):
        nm = f"m{i}"
        tok = yield ("intro", nm, Stratum.DEFAULT)
        members.append((nm, tok))
    out = yield _group_test(members)
    if not out:
        yield from _resolve_group(members, Assign.NEG)
        return
    z = x / (1 - q ** size)
    solver = _pick_solver(table, z)
    st = yield subsolve(members[0], solver, z)
    if st:
        yield from _resolve_group(members[1:], Assign.REPOOL)
    else:
        rest = members[1:]
        if size == 9:
            yield from _halve(rest)          # three halving steps on 8
        else:
            yield from _halve(rest)          # two halving steps on 4


def start_run(strategy: Strategy, risk: RiskModel,
              loop_cap: Optional[int] = None):
    """One run of the strategy as an event generator."""
    cap = strategy.loop_cap if loop_cap is None else loop_cap
    if strategy.kind == "tree":
        return _tree_run(strategy, risk, cap)
    if strategy.kind == "paired":
        return _paired_run(strategy, risk, cap)
    if strategy.kind == "alt":
        return _alt_run(strategy, risk, cap)
    raise InvalidStrategy(f"unknown strategy kind {strategy.kind!r}")


# ---------------------------------------------------------------------------
# Exhaustive transcript enumeration (deterministic drive with scripted
# outcomes; used for equivalence checks, guaranteed positions, and the
# leaf-exhaustiveness property)


@dataclass
class Transcript:
    decisions: Tuple[bool, ...]
    tests: List[Tuple[Tuple[str, ...], bool]] = field(default_factory=list)
    assignments: Dict[str, Assign] = field(default_factory=dict)
    subsolved: Dict[str, bool] = field(default_factory=dict)
    loops: int = 0
    aborts: int = 0


def _run_scripted(strategy: Strategy, decisions: Tuple[bool, ...],
                  risk: RiskModel, loop_cap: int):
    """Returns (transcript, exhausted) — exhausted=True means the script
    ran out while the run still wanted another outcome."""
    run = start_run(strategy, risk, loop_cap)
    t = Transcript(decisions)
    idx = 0
    send = None
    while True:
        try:
            ev = run.send(send)
        except StopIteration:
            return t, False
        send = None
        tag = ev[0]
        if tag == "intro":
            send = ev[1]            # symbolic member: its own name
        elif tag == "test":
            if idx >= len(decisions):
                return t, True
            out = decisions[idx]
            idx += 1
            t.tests.append((ev[1], out))
            send = out
        elif tag == "subsolve":
            if idx >= len(decisions):
                return t, True
            st = decisions[idx]
            idx += 1
            t.subsolved[ev[1]] = st
            t.assignments[ev[1]] = Assign.POS if st else Assign.NEG
            send = st
        elif tag == "resolve":
            t.assignments[ev[1]] = ev[3]
        elif tag == "loop":
            t.loops += 1
        elif tag == "loop_abort":
            t.aborts += 1


def enumerate_transcripts(strategy: Strategy, risk: Optional[RiskModel] = None,
                          loop_cap: int = 2, max_decisions: int = 40,
                          ) -> Iterator[Transcript]:
    """All outcome paths of a strategy (loops truncated via the cap)."""
    if risk is None:
        risk = RiskModel("two_group", x=0.3, y=0.1)
    stack: List[Tuple[bool, ...]] = [()]
    while stack:
        prefix = stack.pop()
        if len(prefix) > max_decisions:
            raise InvalidStrategy("transcript enumeration exceeded decision cap")
        t, exhausted = _run_scripted(strategy, prefix, risk, loop_cap)
        if exhausted:
            stack.append(prefix + (True,))
            stack.append(prefix + (False,))
        else:
            yield t


def guaranteed_positions(strategy: Strategy) -> Set[str]:
    """Slot names resolved POS/NEG on every path where they appear."""
    seen: Set[str] = set()
    repooled: Set[str] = set()
    for t in enumerate_transcripts(strategy):
        for name, a in t.assignments.items():
            seen.add(name)
            if a == Assign.REPOOL:
                repooled.add(name)
    return seen - repooled
