"""Streaming Monte Carlo execution of strategies over ground-truth
populations.

Introductions draw from the pending queue first, then the re-pool FIFO;
an exhausted queue supplies a virtual known-negative so a run can always
finish (counted in ``introduction_failures``).  Sub-solved members wait
in per-(solver, posterior) streams: the parent run suspends, the stream
is solved by sub-runs of the homogeneous solver once enough members
accumulate (or at end of input, padded with virtual negatives), and the
parent resumes with the member's status.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .errors import InvalidStrategy
from .risk import RiskModel
from .runner import start_run
from .strategy import Assign, PoolTest, Strategy, Stratum, SubSolve, validate


@dataclass
class Individual:
    id: int
    true_status: bool
    stratum: Stratum
    times_tested: int = 0
    urgent: bool = False
    resolved: Optional[bool] = None


class _Virtual:
    """Known-negative stand-in drawn when a queue is exhausted."""

    __slots__ = ()
    true_status = False


_VIRTUAL = _Virtual()


@dataclass
class SimReport:
    total_tests: int = 0
    resolved: int = 0
    tests_per_person: float = 0.0
    std_error: float = 0.0
    misclassifications: int = 0
    repool_events: int = 0
    max_times_tested: int = 0
    loop_abort_events: int = 0
    introduction_failures: int = 0
    runs: int = 0
    leftover: int = 0
    slot_repools: Dict[str, int] = field(default_factory=dict)


def gen_population(risk: RiskModel, size: int, seed: int,
                   stratum: Stratum = Stratum.DEFAULT,
                   start_id: int = 0) -> List[Individual]:
    if size < 1:
        raise InvalidStrategy("population size must be >= 1")
    rng = np.random.default_rng(seed)
    rate = risk.rate_for(stratum)
    draws = rng.random(size) < rate
    return [Individual(start_id + i, bool(draws[i]), stratum)
            for i in range(size)]


def _intro_need(strategy: Strategy) -> int:
    """Static upper bound on members one run introduces (tree only)."""
    need = 0

    def walk(node):
        nonlocal need
        if isinstance(node, PoolTest):
            need += len(node.intros)
            walk(node.neg)
            walk(node.pos)
        elif isinstance(node, SubSolve):
            walk(node.neg)
            walk(node.pos)
    if strategy.kind == "tree":
        walk(strategy.root)
        return max(need, 1)
    if strategy.kind == "alt":
        return strategy.id.size
    return 2 * _intro_need(strategy.inner)


class _Engine:
    def __init__(self, strategy: Strategy, risk: RiskModel,
                 populations: Dict[Stratum, List[Individual]],
                 drain_strata: Optional[Set[Stratum]] = None):
        report = validate(strategy)
        if not report.ok:
            raise InvalidStrategy(f"strategy invalid: {report.violations}")
        self.strategy = strategy
        self.risk = risk
        self.pending: Dict[Stratum, Deque[Individual]] = {
            st: deque(pop) for st, pop in populations.items()}
        self.repool: Dict[Stratum, Deque[Individual]] = {
            st: deque() for st in populations}
        self.drain_strata = drain_strata or set(populations)
        self.streams: Dict[Tuple, Deque] = {}
        self.stream_parent: Dict[int, Tuple] = {}   # id(member) -> (run,)
        self.ready: Deque[Tuple] = deque()
        self.report = SimReport()
        self._solver_cache: Dict[float, Strategy] = {}

    # -- queue plumbing ----------------------------------------------------

    def _draw(self, stratum: Stratum):
        for q in (self.pending.get(stratum), self.repool.get(stratum)):
            if q:
                return q.popleft()
        self.report.introduction_failures += 1
        return _VIRTUAL

    def _queued(self, strata) -> bool:
        return any(self.pending.get(st) or self.repool.get(st)
                   for st in strata)

    # -- solver choice for sub-solve streams --------------------------------

    def _solver_for(self, solver: Optional[Strategy], z: float) -> Strategy:
        if solver is not None:
            return solver
        zr = round(z, 12)
        if zr not in self._solver_cache:
            from .costs import closed_form_cost
            from .strategy import get_strategy
            best = min(range(1, 6),
                       key=lambda n: float(closed_form_cost(f"A{n}", zr)))
            self._solver_cache[zr] = get_strategy(f"A{best}")
        return self._solver_cache[zr]

    # -- event handling ------------------------------------------------------

    def _resolve(self, name: str, member, assign: Assign, main: bool) -> None:
        if member is _VIRTUAL:
            return
        if assign == Assign.REPOOL:
            self.report.repool_events += 1
            if main:
                sr = self.report.slot_repools
                sr[name] = sr.get(name, 0) + 1
            if id(member) in self.stream_parent:
                # still owed a status: wait in its stream again
                key = self.stream_parent[id(member)][1]
                self.streams[key].append(member)
            else:
                self.repool[member.stratum].append(member)
            return
        status = assign == Assign.POS
        member.resolved = status
        self.report.resolved += 1
        if status != member.true_status:
            self.report.misclassifications += 1
        parked = self.stream_parent.pop(id(member), None)
        if parked is not None:
            self.ready.append((parked[0], status))

    def _drive(self, run, send=None, main: bool = True) -> None:
        while True:
            try:
                ev = run.send(send)
            except StopIteration:
                return
            send = None
            tag = ev[0]
            if tag == "test":
                members = ev[2]
                outcome = False
                for m in members:
                    if m is _VIRTUAL:
                        continue
                    m.times_tested += 1
                    if m.times_tested > self.report.max_times_tested:
                        self.report.max_times_tested = m.times_tested
                    outcome = outcome or m.true_status
                self.report.total_tests += 1
                send = outcome
            elif tag == "intro":
                send = self._draw(ev[2])
            elif tag == "resolve":
                self._resolve(ev[1], ev[2], ev[3], main)
            elif tag == "subsolve":
                _, name, member, solver, z = ev
                if member is _VIRTUAL:
                    send = False
                    continue
                solver = self._solver_for(solver, float(z))
                key = (solver.id.name, round(float(z), 12))
                self.streams.setdefault(key, deque()).append(member)
                self.stream_parent[id(member)] = (run, key)
                return                      # suspend until status known
            elif tag == "loop_abort":
                self.report.loop_abort_events += 1
            # "loop" events need no action

    def _run_sub(self, key: Tuple) -> None:
        solver_name = key[0]
        from .strategy import get_strategy
        solver = get_strategy(solver_name)
        queue = self.streams[key]
        run = start_run(solver, self.risk)
        send = None
        while True:
            try:
                ev = run.send(send)
            except StopIteration:
                return
            send = None
            tag = ev[0]
            if tag == "intro":
                if queue:
                    send = queue.popleft()
                else:
                    self.report.introduction_failures += 1
                    send = _VIRTUAL
            elif tag == "test":
                outcome = False
                for m in ev[2]:
                    if m is _VIRTUAL:
                        continue
                    m.times_tested += 1
                    if m.times_tested > self.report.max_times_tested:
                        self.report.max_times_tested = m.times_tested
                    outcome = outcome or m.true_status
                self.report.total_tests += 1
                send = outcome
            elif tag == "resolve":
                self._resolve(ev[1], ev[2], ev[3], main=False)
            elif tag == "subsolve":
                raise InvalidStrategy("nested sub-solve in solver strategy")
            elif tag == "loop_abort":
                self.report.loop_abort_events += 1

    def _stream_need(self, key: Tuple) -> int:
        from .strategy import get_strategy
        return _intro_need(get_strategy(key[0]))

    # -- main loop -----------------------------------------------------------

    def run_all(self) -> SimReport:
        while True:
            if self.ready:
                run, status = self.ready.popleft()
                self._drive(run, send=status)
                continue
            key = next((k for k, q in self.streams.items()
                        if len(q) >= self._stream_need(k)), None)
            if key is not None:
                self._run_sub(key)
                continue
            if self._queued(self.drain_strata):
                self.report.runs += 1
                self._drive(start_run(self.strategy, self.risk))
                continue
            key = next((k for k, q in self.streams.items() if q), None)
            if key is not None:
                self._run_sub(key)
                continue
            break
        r = self.report
        r.leftover = sum(len(q) for q in self.pending.values()) \
            + sum(len(q) for q in self.repool.values())
        if r.resolved:
            r.tests_per_person = r.total_tests / r.resolved
        return r


def run_strategy(strategy: Strategy, population: Sequence[Individual],
                 seed: int = 0) -> SimReport:
    """Resolve every individual of a homogeneous population."""
    pops: Dict[Stratum, List[Individual]] = {}
    for ind in population:
        pops.setdefault(ind.stratum, []).append(ind)
    risk = _infer_risk(strategy, pops)
    return _Engine(strategy, risk, pops).run_all()


def run_stratified(strategy: Strategy, risk: RiskModel,
                   populations: Dict[Stratum, Sequence[Individual]],
                   seed: int = 0) -> SimReport:
    """Two-group execution: runs start while the high-risk stratum has
    members; leftover low-risk individuals are reported unresolved."""
    pops = {st: list(pop) for st, pop in populations.items()}
    drain = {Stratum.HIGH_RISK_UPPER} if strategy.mixed else set(pops)
    return _Engine(strategy, risk, pops, drain_strata=drain).run_all()


def _infer_risk(strategy: Strategy, pops: Dict[Stratum, List[Individual]]) -> RiskModel:
    """Empirical rates, used only to price sub-solve posteriors."""
    from .risk import homogeneous, two_group
    rates = {}
    for st, pop in pops.items():
        rates[st] = sum(i.true_status for i in pop) / max(len(pop), 1)
    if set(rates) == {Stratum.HIGH_RISK_UPPER, Stratum.LOW_RISK_LOWER}:
        return two_group(rates[Stratum.HIGH_RISK_UPPER],
                         rates[Stratum.LOW_RISK_LOWER])
    rate = rates.get(Stratum.DEFAULT, next(iter(rates.values())))
    return homogeneous(min(max(rate, 1e-9), 1 - 1e-9))


# ---------------------------------------------------------------------------
# Replicated sweeps


SWEEP_HEADER = ("strategy_id,x,replications,persons,tests_per_person,"
                "std_error,closed_form,misclassifications,repool_events,"
                "loop_aborts,introduction_failures")


def simulate_replicated(strategy: Strategy, x: float, persons: int,
                        replications: int, seed: int,
                        ) -> Tuple[float, float, SimReport]:
    """Mean and standard error of tests-per-person over replications."""
    from .risk import homogeneous
    ss = np.random.SeedSequence(seed)
    child_seeds = ss.spawn(replications)
    per_rep = persons // replications
    values = []
    agg = SimReport()
    for rep_seed in child_seeds:
        pop = gen_population(homogeneous(x), per_rep,
                             rep_seed.generate_state(1)[0])
        rep = run_strategy(strategy, pop)
        values.append(rep.tests_per_person)
        agg.total_tests += rep.total_tests
        agg.resolved += rep.resolved
        agg.misclassifications += rep.misclassifications
        agg.repool_events += rep.repool_events
        agg.loop_abort_events += rep.loop_abort_events
        agg.introduction_failures += rep.introduction_failures
        agg.runs += rep.runs
        agg.max_times_tested = max(agg.max_times_tested, rep.max_times_tested)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) \
        if len(values) > 1 else 0.0
    agg.tests_per_person = agg.total_tests / agg.resolved
    agg.std_error = se
    return mean, se, agg


def sweep(strategy_ids: Sequence[str], x_grid: Sequence[float],
          replications: int, seed: int, persons: int = 10_000) -> List[str]:
    """CSV rows of replicated simulations vs the closed form."""
    from .costs import closed_form_cost
    from .strategy import get_strategy
    rows = [f"# seed={seed}", SWEEP_HEADER]
    for i, name in enumerate(strategy_ids):
        strategy = get_strategy(name)
        for j, x in enumerate(x_grid):
            mean, se, agg = simulate_replicated(
                strategy, x, persons, replications,
                seed + 100_003 * i + j)
            cf = float(closed_form_cost(name, x))
            rows.append(
                f"{name},{x:.12g},{replications},{persons},{mean:.12g},"
                f"{se:.12g},{cf:.12g},{agg.misclassifications},"
                f"{agg.repool_events},{agg.loop_abort_events},"
                f"{agg.introduction_failures}")
    return rows
