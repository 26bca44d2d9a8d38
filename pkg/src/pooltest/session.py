"""Live adaptive testing sessions.

A session streams a roster through a strategy, one pool instruction at a
time.  State is event-sourced: an append-only JSONL log holds the
creation record and every accepted outcome, chained with SHA-256 hashes;
replaying the log deterministically reconstructs the session, so a
process can be killed and reloaded after any acknowledged submission.

Urgent roster members are preferentially bound, in roster order, to the
strategy's guaranteed slots (those resolved on every path of a run), so
they are never re-pooled.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Set, Tuple

from .errors import (InvalidStrategy, NotFound, PersistError, RosterError,
                     SequencingError)
from .risk import RiskModel, homogeneous, two_group
from .runner import guaranteed_positions, start_run
from .strategy import Assign, Strategy, Stratum, get_strategy, validate

_RETRY_CAP = 10_000


@dataclass
class Member:
    external_id: str
    stratum: Stratum
    urgent: bool = False
    status: Optional[bool] = None      # None = PENDING
    guaranteed_slot: Optional[str] = None


class _Virtual:
    __slots__ = ()


_VIRTUAL = _Virtual()


@dataclass
class Instruction:
    seq: int
    pool: List[str]                    # external ids (virtuals excluded)
    slots: List[str]                   # slot names, aligned with the pool
    guaranteed: List[str]              # slot names guaranteed this run
    run: int
    sub: bool = False

    @property
    def step_note(self) -> str:
        kind = "sub-solver pool" if self.sub else "pool"
        return (f"run {self.run}: mix and test {kind} of slots "
                f"{', '.join(self.slots)}")

    def to_doc(self) -> dict:
        return {"instruction_id": self.seq, "pool": self.pool,
                "slots": self.slots, "guaranteed": self.guaranteed,
                "run": self.run, "sub": self.sub,
                "step_note": self.step_note}


@dataclass
class StateDelta:
    resolved: Dict[str, str] = field(default_factory=dict)
    repooled: List[str] = field(default_factory=list)
    complete: bool = False


class _Machine:
    """Deterministic session core: queues, run stack, instruction cursor."""

    def __init__(self, strategy: Strategy, risk: RiskModel,
                 roster: List[Member]):
        report = validate(strategy)
        if not report.ok:
            raise InvalidStrategy(f"strategy invalid: {report.violations}")
        self.strategy = strategy
        self.risk = risk
        self.members = {m.external_id: m for m in roster}
        if len(self.members) != len(roster):
            raise RosterError("duplicate external ids in roster")
        self.pending: Dict[Stratum, Deque[Member]] = {}
        self.repool: Dict[Stratum, Deque[Member]] = {}
        for m in roster:
            self.pending.setdefault(m.stratum, deque()).append(m)
            self.repool.setdefault(m.stratum, deque())
        self.guaranteed: Set[str] = guaranteed_positions(strategy)
        self._solver_guaranteed: Dict[str, Set[str]] = {}
        self._solver_cache: Dict[float, Strategy] = {}
        self.run_count = 0
        self.instr_seq = 0
        self.outstanding: Optional[Instruction] = None
        self._parked: Optional[Instruction] = None
        self.repool_counts: Dict[str, int] = {}
        self.tests_done = 0
        # (generator, target_member_or_None, solver_or_None, pending_send)
        self.stack: List[list] = []
        self.delta = StateDelta()

    # -- queue draws ---------------------------------------------------------

    def _draw(self, stratum: Stratum, prefer_urgent: bool):
        for q in (self.pending.get(stratum), self.repool.get(stratum)):
            if not q:
                continue
            for i, m in enumerate(q):
                if m.urgent == prefer_urgent:
                    del q[i]
                    return m
            return q.popleft()
        return _VIRTUAL

    def _queued(self) -> bool:
        strata = ([Stratum.HIGH_RISK_UPPER] if self.strategy.mixed
                  else list(self.pending))
        return any(self.pending.get(st) or self.repool.get(st)
                   for st in strata)

    # -- event pump ------------------------------------------------------------

    def _solver_for(self, solver: Optional[Strategy], z: float) -> Strategy:
        if solver is not None:
            return solver
        zr = round(z, 12)
        if zr not in self._solver_cache:
            from .costs import closed_form_cost
            best = min(range(1, 6),
                       key=lambda n: float(closed_form_cost(f"A{n}", zr)))
            self._solver_cache[zr] = get_strategy(f"A{best}")
        return self._solver_cache[zr]

    def _resolve(self, member, assign: Assign) -> None:
        if member is _VIRTUAL:
            return
        if assign == Assign.REPOOL:
            self.repool[member.stratum].append(member)
            self.delta.repooled.append(member.external_id)
            self.repool_counts[member.external_id] = (
                self.repool_counts.get(member.external_id, 0) + 1)
            member.guaranteed_slot = None
            return
        member.status = assign == Assign.POS
        self.delta.resolved[member.external_id] = (
            "POS" if member.status else "NEG")

    def _advance(self, send=None) -> Optional[Instruction]:
        """Pump events until a test needs an operator outcome, starting
        runs and inline sub-runs as necessary.  Returns the instruction,
        or None when the session is complete."""
        guard = 0
        while True:
            guard += 1
            if guard > _RETRY_CAP:
                raise SequencingError("session failed to make progress")
            if not self.stack:
                if not self._queued():
                    return None
                self.run_count += 1
                self.stack.append([start_run(self.strategy, self.risk),
                                   None, None, None])
                send = None
            frame = self.stack[-1]
            run, target = frame[0], frame[1]
            try:
                ev = run.send(send)
            except StopIteration:
                self.stack.pop()
                if target is not None and target.status is None:
                    # target re-pooled out of its own sub-run: try again
                    self._start_sub(frame[2], target, frame[3])
                    send = None
                    continue
                if target is not None and self.stack:
                    send = target.status
                else:
                    send = None
                continue
            send = None
            tag = ev[0]
            if tag == "intro":
                name, stratum = ev[1], ev[2]
                sub = len(self.stack) > 1
                if sub and target is not None and target.guaranteed_slot is None \
                        and name in self._sub_guaranteed(frame[2]):
                    target.guaranteed_slot = name
                    send = target
                elif sub:
                    send = self._draw(target.stratum if target else stratum,
                                      prefer_urgent=False)
                else:
                    prefer = name in self.guaranteed
                    send = self._draw(stratum, prefer_urgent=prefer)
                    if send is not _VIRTUAL and send.urgent and prefer:
                        send.guaranteed_slot = name
            elif tag == "test":
                self.instr_seq += 1
                members = [m for m in ev[2] if m is not _VIRTUAL]
                instr = Instruction(
                    seq=self.instr_seq,
                    pool=[m.external_id for m in members],
                    slots=list(ev[1]),
                    guaranteed=sorted(self.guaranteed) if len(self.stack) == 1
                    else sorted(self._sub_guaranteed(frame[2])),
                    run=self.run_count, sub=len(self.stack) > 1)
                if not members:
                    # every pooled member is virtual: outcome is known
                    send = False
                    continue
                self.outstanding = instr
                return instr
            elif tag == "resolve":
                self._resolve(ev[2], ev[3])
            elif tag == "subsolve":
                _, name, member, solver, z = ev
                if member is _VIRTUAL:
                    send = False
                    continue
                solver = self._solver_for(solver, float(z))
                member.guaranteed_slot = None
                self._start_sub(solver, member, float(z))
            # "loop"/"loop_abort": nothing to do

    def _start_sub(self, solver: Strategy, target: Member, z) -> None:
        self.stack.append([start_run(solver, self.risk), target, solver, z])

    def _sub_guaranteed(self, solver: Strategy) -> Set[str]:
        key = solver.id.name
        if key not in self._solver_guaranteed:
            self._solver_guaranteed[key] = guaranteed_positions(solver)
        return self._solver_guaranteed[key]

    # -- public stepping -------------------------------------------------------

    def next_instruction(self) -> Optional[Instruction]:
        if self.outstanding is not None:
            raise SequencingError("an instruction is already outstanding")
        if self._parked is not None:
            instr = self._parked
            self._parked = None
            self.outstanding = instr
            return instr
        return self._advance()

    def submit_outcome(self, instruction_seq: int, outcome: bool) -> StateDelta:
        if self.outstanding is None:
            raise SequencingError("no outstanding instruction")
        if instruction_seq != self.outstanding.seq:
            raise SequencingError(
                f"outcome for instruction {instruction_seq}, expected "
                f"{self.outstanding.seq}")
        self.outstanding = None
        self.tests_done += 1
        self.delta = StateDelta()
        nxt = self._advance(send=outcome)
        if nxt is not None:
            # surfaced on the next next_instruction() call
            self.outstanding = None
            self._parked = nxt
        delta = self.delta
        delta.complete = nxt is None and not self._queued()
        return delta

    def statuses(self) -> Dict[str, str]:
        out = {}
        for m in self.members.values():
            out[m.external_id] = ("PENDING" if m.status is None
                                  else "POS" if m.status else "NEG")
        return out

    @property
    def complete(self) -> bool:
        return (self.outstanding is None and self._parked is None
                and not self.stack and not self._queued())


# ---------------------------------------------------------------------------
# Event log persistence


def _chain_hash(prev: str, payload: dict) -> str:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256((prev + body).encode()).hexdigest()


class SessionStore:
    """One JSONL file per session; records carry a SHA-256 hash chain."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def path(self, session_id: str) -> str:
        if not session_id.replace("-", "").replace("_", "").isalnum():
            raise NotFound(f"bad session id {session_id!r}")
        return os.path.join(self.directory, f"{session_id}.jsonl")

    def append(self, session_id: str, payload: dict, prev_hash: str) -> str:
        h = _chain_hash(prev_hash, payload)
        rec = dict(payload)
        rec["hash"] = h
        with open(self.path(session_id), "a", encoding="utf-8") as f:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())
        return h

    def read(self, session_id: str) -> List[dict]:
        path = self.path(session_id)
        if not os.path.exists(path):
            raise NotFound(f"no session {session_id!r}")
        records = []
        prev = ""
        with open(path, encoding="utf-8") as f:
            for offset, line in enumerate(f):
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    raise PersistError("corrupt record", offset)
                h = rec.pop("hash", None)
                if h != _chain_hash(prev, rec):
                    raise PersistError("hash chain broken", offset)
                prev = h
                records.append(rec)
        return records

    def exists(self, session_id: str) -> bool:
        return os.path.exists(self.path(session_id))

    def list_ids(self) -> List[str]:
        return sorted(f[:-6] for f in os.listdir(self.directory)
                      if f.endswith(".jsonl"))


# ---------------------------------------------------------------------------
# Session facade


def _risk_from_doc(doc: dict) -> RiskModel:
    if "y" in doc and doc["y"] is not None:
        return two_group(doc["x"], doc["y"])
    return homogeneous(doc["x"])


def _roster_from_doc(docs: List[dict]) -> List[Member]:
    if not docs:
        raise RosterError("empty roster")
    members = []
    for d in docs:
        stratum = Stratum(d.get("stratum", "default"))
        members.append(Member(str(d["id"]), stratum,
                              urgent=bool(d.get("urgent", False))))
    return members


class Session:
    def __init__(self, session_id: str, strategy_name: str, risk_doc: dict,
                 roster_doc: List[dict], store: SessionStore,
                 _replaying: bool = False):
        self.session_id = session_id
        self.store = store
        self.strategy_name = strategy_name
        self.risk_doc = risk_doc
        self.roster_doc = roster_doc
        strategy = (get_strategy(strategy_name)
                    if not strategy_name.startswith("M")
                    else _mixed(strategy_name))
        self.machine = _Machine(strategy, _risk_from_doc(risk_doc),
                                _roster_from_doc(roster_doc))
        self.prev_hash = ""
        self.history: List[dict] = []
        if not _replaying:
            self._log({"kind": "create", "strategy": strategy_name,
                       "risk": risk_doc, "roster": roster_doc,
                       "ts": time.time()})

    def _log(self, payload: dict) -> None:
        self.prev_hash = self.store.append(self.session_id, payload,
                                           self.prev_hash)
        self.history.append(payload)

    @classmethod
    def create(cls, session_id: str, strategy_name: str, risk_doc: dict,
               roster_doc: List[dict], store: SessionStore) -> "Session":
        if store.exists(session_id):
            raise RosterError(f"session {session_id!r} already exists")
        return cls(session_id, strategy_name, risk_doc, roster_doc, store)

    @classmethod
    def load(cls, session_id: str, store: SessionStore) -> "Session":
        records = store.read(session_id)
        if not records or records[0].get("kind") != "create":
            raise PersistError("log does not start with a create record", 0)
        head = records[0]
        session = cls(session_id, head["strategy"], head["risk"],
                      head["roster"], store, _replaying=True)
        session.history = records
        prev = ""
        for rec in records:
            prev = _chain_hash(prev, rec)
        session.prev_hash = prev
        for rec in records[1:]:
            if rec.get("kind") != "outcome":
                raise PersistError(f"unexpected record kind {rec.get('kind')}",
                                   records.index(rec))
            session.machine.next_instruction()
            session.machine.submit_outcome(rec["instruction_seq"],
                                           rec["outcome"])
        return session

    def next_instruction(self) -> Optional[Instruction]:
        return self.machine.next_instruction()

    def submit_outcome(self, instruction_seq: int, outcome: bool) -> StateDelta:
        delta = self.machine.submit_outcome(instruction_seq, outcome)
        self._log({"kind": "outcome", "instruction_seq": instruction_seq,
                   "outcome": outcome, "ts": time.time()})
        return delta

    def statuses(self) -> Dict[str, str]:
        return self.machine.statuses()

    def current_or_next_instruction(self) -> Optional[Instruction]:
        """Outstanding instruction if any, else advance to the next one
        (idempotent for polling clients)."""
        if self.machine.outstanding is not None:
            return self.machine.outstanding
        return self.machine.next_instruction()

    def snapshot(self) -> dict:
        m = self.machine
        roster = []
        for mem in m.members.values():
            roster.append({
                "id": mem.external_id,
                "status": ("PENDING" if mem.status is None
                           else "POS" if mem.status else "NEG"),
                "urgent": mem.urgent,
                "guaranteed_slot": mem.guaranteed_slot,
                "repooled": m.repool_counts.get(mem.external_id, 0),
            })
        outstanding = m.outstanding or m._parked
        return {
            "session_id": self.session_id,
            "strategy": self.strategy_name,
            "risk": self.risk_doc,
            "roster": roster,
            "complete": self.complete,
            "tests_used": m.tests_done,
            "resolved_count": sum(1 for r in roster if r["status"] != "PENDING"),
            "total": len(roster),
            "instruction": outstanding.to_doc() if outstanding else None,
        }

    @property
    def complete(self) -> bool:
        return self.machine.complete


def _mixed(name: str) -> Strategy:
    from .strategy import build_mixed
    return build_mixed(name)
