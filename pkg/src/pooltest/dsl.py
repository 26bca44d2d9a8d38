"""Strategy serialization: a JSON document with explicit node ids.

Document shape:

    {"version": 1, "id": "A3", "kind": "tree", "population": "homogeneous",
     "root": "n0",
     "nodes": [{"id": "n0", "kind": "POOL_TEST", "introductions": [...],
                "pool": [...], "neg": "n1", "pos": "n2"},
               {"id": "n1", "kind": "LEAF", "assignments": {"A": "-"}},
               {"id": "nL", "kind": "LOOP", "assignments": {...},
                "loop_target": {"target": "n2", "redraw": ["G"]},
                "abort": "ab0"},
               {"id": "s1", "kind": "SUB_SOLVE", "label": "b",
                "posterior": {"form": "pooled-pair"}, "neg": ..., "pos": ...}]}

Pair-compound and group-construction wrappers nest inner documents under
"inner" / "inner_table"; an optional "subsolver" document names the
homogeneous solver for SUB_SOLVE nodes.  Statuses are "+", "-", "R";
in two-group strategies the stratum is the letter case of the label.
"""

from __future__ import annotations

import json
from typing import Dict, List, Optional, Tuple

from .errors import ParseError
from .strategy import (Assign, Label, Leaf, Loop, Node, PoolTest, Strategy,
                       Stratum, SubSolve, parse_id)

VERSION = 1


def _posterior_from_form(form: Tuple):
    kind = form[0]
    if kind == "pooled-pair":
        return lambda x, y: y / (x + y - x * y)
    if kind == "peel":
        i = int(form[1])
        return lambda x, y, i=i: y / (1 - (1 - x) * (1 - y) ** i)
    raise ParseError(f"unknown posterior form {form!r}", "posterior")


def _label_doc(lab: Label) -> str:
    return lab.name


def _stratum_of(name: str, population: str) -> Stratum:
    if population == "two_group":
        return Stratum.LOW_RISK_LOWER if name[0].islower() else Stratum.HIGH_RISK_UPPER
    return Stratum.DEFAULT


def _collect_nodes(node: Optional[Node], out: List[Node]) -> None:
    if node is None:
        return
    out.append(node)
    if isinstance(node, (PoolTest, SubSolve)):
        _collect_nodes(node.neg, out)
        _collect_nodes(node.pos, out)
    elif isinstance(node, Loop):
        _collect_nodes(node.abort, out)


def _node_doc(node: Node) -> dict:
    if isinstance(node, PoolTest):
        return {"id": node.id, "kind": "POOL_TEST",
                "introductions": [l.name for l in node.intros],
                "pool": list(node.pool),
                "neg": node.neg.id, "pos": node.pos.id}
    if isinstance(node, Leaf):
        return {"id": node.id, "kind": "LEAF",
                "assignments": {k: v.value for k, v in node.assignments.items()}}
    if isinstance(node, Loop):
        doc = {"id": node.id, "kind": "LOOP",
               "assignments": {k: v.value for k, v in node.assignments.items()},
               "loop_target": {"target": node.target,
                               "redraw": list(node.redraw)}}
        if node.abort is not None:
            doc["abort"] = node.abort.id
        return doc
    if node.form is None:
        raise ParseError("sub-solve node lacks a serializable posterior",
                         node.id)
    return {"id": node.id, "kind": "SUB_SOLVE", "label": node.label,
            "posterior": {"form": node.form[0],
                          **({"index": node.form[1]} if len(node.form) > 1 else {})},
            "neg": node.neg.id, "pos": node.pos.id}


def _tree_doc(strategy: Strategy) -> dict:
    nodes: List[Node] = []
    _collect_nodes(strategy.root, nodes)
    population = "homogeneous"
    for n in nodes:
        if isinstance(n, PoolTest) and any(
                l.stratum != Stratum.DEFAULT for l in n.intros):
            population = "two_group"
            break
    return {"version": VERSION, "id": strategy.id.name, "kind": "tree",
            "population": population, "root": strategy.root.id,
            "nodes": [_node_doc(n) for n in nodes]}


def _strategy_doc(strategy: Strategy) -> dict:
    if strategy.kind == "tree":
        doc = _tree_doc(strategy)
    elif strategy.kind == "paired":
        doc = {"version": VERSION, "id": strategy.id.name, "kind": "paired",
               "inner": _strategy_doc(strategy.inner)}
    else:
        doc = {"version": VERSION, "id": strategy.id.name, "kind": "alt",
               "alt": strategy.alt,
               "inner_table": {str(k): _strategy_doc(v)
                               for k, v in sorted(strategy.inner_table.items())}}
    if strategy.subsolver is not None:
        doc["subsolver"] = _strategy_doc(strategy.subsolver)
    return doc


def serialize(strategy: Strategy) -> str:
    return json.dumps(_strategy_doc(strategy), indent=2)


# ---------------------------------------------------------------------------
# Deserialization


def _req(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"missing field {key!r}", where)
    return doc[key]


def _parse_assignments(doc: dict, where: str) -> Dict[str, Assign]:
    out = {}
    for name, code in doc.items():
        try:
            out[name] = Assign(code)
        except ValueError:
            raise ParseError(f"bad status code {code!r}", f"{where}.{name}")
    return out


def _build_node(nid: str, records: Dict[str, dict], population: str,
                built: Dict[str, Node], trail: Tuple[str, ...]) -> Node:
    if nid in trail:
        raise ParseError(f"node cycle through {nid!r}", nid)
    if nid not in records:
        raise ParseError(f"unknown node id {nid!r}", nid)
    if nid in built:
        return built[nid]
    rec = records[nid]
    kind = _req(rec, "kind", nid)
    trail = trail + (nid,)
    if kind == "POOL_TEST":
        intros = tuple(Label(n, _stratum_of(n, population))
                       for n in rec.get("introductions", []))
        pool = tuple(_req(rec, "pool", nid))
        if not pool:
            raise ParseError("empty pool", nid)
        node = PoolTest(nid, intros, pool,
                        neg=_build_node(_req(rec, "neg", nid), records,
                                        population, built, trail),
                        pos=_build_node(_req(rec, "pos", nid), records,
                                        population, built, trail))
    elif kind == "LEAF":
        node = Leaf(nid, _parse_assignments(_req(rec, "assignments", nid), nid))
    elif kind == "LOOP":
        tgt = _req(rec, "loop_target", nid)
        abort = None
        if "abort" in rec:
            abort = _build_node(rec["abort"], records, population, built, trail)
        node = Loop(nid, _parse_assignments(rec.get("assignments", {}), nid),
                    target=_req(tgt, "target", nid),
                    redraw=tuple(tgt.get("redraw", [])), abort=abort)
    elif kind == "SUB_SOLVE":
        p = _req(rec, "posterior", nid)
        form = (p["form"],) if "index" not in p else (p["form"], p["index"])
        node = SubSolve(nid, _req(rec, "label", nid),
                        posterior=_posterior_from_form(form),
                        neg=_build_node(_req(rec, "neg", nid), records,
                                        population, built, trail),
                        pos=_build_node(_req(rec, "pos", nid), records,
                                        population, built, trail),
                        form=form)
    else:
        raise ParseError(f"unknown node kind {kind!r}", nid)
    built[nid] = node
    return node


def _parse_strategy(doc: dict, where: str = "$") -> Strategy:
    if not isinstance(doc, dict):
        raise ParseError("document must be an object", where)
    if doc.get("version") != VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}", where)
    sid = parse_id(_req(doc, "id", where))
    kind = _req(doc, "kind", where)
    subsolver = None
    if "subsolver" in doc:
        subsolver = _parse_strategy(doc["subsolver"], f"{where}.subsolver")
    if kind == "tree":
        population = doc.get("population", "homogeneous")
        if population not in ("homogeneous", "two_group"):
            raise ParseError(f"unknown population {population!r}", where)
        records = {}
        for rec in _req(doc, "nodes", where):
            if rec.get("id") in records:
                raise ParseError(f"duplicate node id {rec.get('id')!r}", where)
            records[rec.get("id")] = rec
        root = _build_node(_req(doc, "root", where), records, population, {}, ())
        return Strategy(sid, "tree", root=root, subsolver=subsolver)
    if kind == "paired":
        inner = _parse_strategy(_req(doc, "inner", where), f"{where}.inner")
        return Strategy(sid, "paired", inner=inner, subsolver=subsolver)
    if kind == "alt":
        table = {int(k): _parse_strategy(v, f"{where}.inner_table[{k}]")
                 for k, v in _req(doc, "inner_table", where).items()}
        return Strategy(sid, "alt", alt=_req(doc, "alt", where),
                        inner_table=table, subsolver=subsolver)
    raise ParseError(f"unknown strategy kind {kind!r}", where)


def deserialize(text: str) -> Strategy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", f"offset {e.pos}")
    strategy = _parse_strategy(doc)
    from .strategy import validate
    report = validate(strategy)
    if not report.ok:
        v = report.violations[0]
        raise ParseError(f"invalid strategy: {v.code} ({v.detail})", v.path)
    return strategy
