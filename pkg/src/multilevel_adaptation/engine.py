"""Scenario definitions, the per-period event loop and replication runners."""
from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _kernel
from ._rng import AUCTION, DECIDE, LANDSCAPE, LEARN, PERIODS, POPULATION, Stream, mix
from ._validation import check_choice, check_count, check_divisible, check_probability
from .auction import Group, run_auction
from .landscape import InterdependenceMatrix, Landscape, Structure, bits_to_int, build_matrix, generate, int_to_bits
from .metrics import ScenarioReport, aggregate
from .population import (Agent, IncentiveScheme, ResidualContext, concatenate_group_solution, decide,
                         init_population, learn_forget_step, utility_table)

DEFAULT_K = {Structure.DECOMPOSED: 3, Structure.INTERDEPENDENT: 5, Structure.ROLL: 3}
LEARNING_SCOPES = ("all", "members-only")
EVENT_ORDERS = ("decide-first", "learn-first")
_SHORT = {Structure.DECOMPOSED: "decomp", Structure.INTERDEPENDENT: "interdep",
          Structure.ROLL: "roll", Structure.CUSTOM: "custom"}


@dataclass(frozen=True)
class Scenario:
    """One point of the experiment grid; defaults give the base setting.

    ``tau=None`` forms the group once; otherwise auctions run in periods
    ``1, 1 + tau, 1 + 2 tau, ...``.  ``matrix`` overrides ``structure``/``k``.
    """

    structure: str = "decomposed"
    k: int | None = None
    learn_prob: float = 0.0
    tau: int | None = None
    alpha: float = 0.5
    beta: float = 0.5
    n_decisions: int = 12
    m_subtasks: int = 3
    p_total: int = 30
    horizon: int = 200
    replications: int = 1500
    master_seed: int = 0
    learning_scope: str = "all"
    event_order: str = "decide-first"
    matrix: InterdependenceMatrix | None = None

    def __post_init__(self):
        if self.matrix is not None:
            object.__setattr__(self, "structure", Structure.CUSTOM.value)
            object.__setattr__(self, "k", self.matrix.k)
            if (self.matrix.n_decisions, self.matrix.m_subtasks) != (self.n_decisions, self.m_subtasks):
                raise ValueError(
                    f"matrix is {self.matrix.n_decisions} decisions in {self.matrix.m_subtasks} subtasks, "
                    f"scenario expects {self.n_decisions} in {self.m_subtasks}"
                )
        structure = Structure(self.structure)
        if structure is Structure.CUSTOM and self.matrix is None:
            raise ValueError("a custom structure needs a matrix")
        object.__setattr__(self, "structure", structure.value)
        if self.k is None:
            object.__setattr__(self, "k", DEFAULT_K[structure])
        check_count("k", self.k, 0)
        check_probability("learn_prob", self.learn_prob)
        object.__setattr__(self, "learn_prob", float(self.learn_prob))
        if self.tau is not None:
            check_count("tau", self.tau, 1)
        IncentiveScheme(self.alpha, self.beta)
        check_count("n_decisions", self.n_decisions, 1)
        check_count("m_subtasks", self.m_subtasks, 1)
        check_count("p_total", self.p_total, 1)
        check_divisible("n_decisions", self.n_decisions, "m_subtasks", self.m_subtasks)
        check_divisible("p_total", self.p_total, "m_subtasks", self.m_subtasks)
        check_count("horizon", self.horizon, 1)
        check_count("replications", self.replications, 1)
        check_count("master_seed", self.master_seed, 0)
        check_choice("learning_scope", self.learning_scope, LEARNING_SCOPES)
        check_choice("event_order", self.event_order, EVENT_ORDERS)
        if self.n_decisions > 20:
            raise ValueError("n_decisions above 20 makes the exhaustive utility tables too large")

    @property
    def scheme(self) -> IncentiveScheme:
        return IncentiveScheme(self.alpha, self.beta)

    def interdependence(self) -> InterdependenceMatrix:
        if self.matrix is not None:
            return self.matrix
        return build_matrix(self.structure, self.n_decisions, self.m_subtasks, self.k)

    @property
    def label(self) -> str:
        """Directory-safe signature, e.g. ``decomp_K3_P0.25_tau10_a0.5``."""
        tau = "none" if self.tau is None else str(self.tau)
        text = f"{_SHORT[Structure(self.structure)]}_K{self.k}_P{self.learn_prob:g}_tau{tau}_a{self.alpha:g}"
        if self.matrix is not None:
            text += "_" + hashlib.sha256(self.matrix.to_text().encode()).hexdigest()[:8]
        if (self.n_decisions, self.m_subtasks, self.p_total) != (12, 3, 30):
            text += f"_N{self.n_decisions}_M{self.m_subtasks}_pop{self.p_total}"
        if self.learning_scope != "all":
            text += "_members"
        if self.event_order != "decide-first":
            text += "_learnfirst"
        return text

    @cached_property
    def behaviour_hash(self) -> int:
        """64-bit digest of everything that shapes a replication except its length and seed."""
        fields = asdict(self)
        for name in ("horizon", "replications", "master_seed", "matrix"):
            fields.pop(name)
        fields["matrix"] = None if self.matrix is None else self.matrix.to_text()
        digest = hashlib.sha256(json.dumps(fields, sort_keys=True).encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def replication_seed(self, r: int) -> int:
        return mix(self.master_seed, self.behaviour_hash, r)

    def auction_due(self, t: int) -> bool:
        return t == 1 or (self.tau is not None and (t - 1) % self.tau == 0)


@dataclass
class RunTrace:
    replication: int
    raw: np.ndarray
    normalized: np.ndarray
    landscape_seed: int
    optimum: float
    auctions: np.ndarray
    winners: np.ndarray
    winning_bids: np.ndarray
    prices: np.ndarray
    solutions: np.ndarray | None = None
    knowledge: np.ndarray | None = None

    @property
    def final(self) -> float:
        return float(self.normalized[-1])

    @property
    def horizon(self) -> int:
        return int(self.raw.size)


@dataclass
class ReplicationState:
    scenario: Scenario
    landscape: Landscape
    agents: list[Agent]
    previous: np.ndarray
    periods: Stream
    group: Group | None = None
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    solution: np.ndarray
    raw: float
    normalized: float
    auction: Group | None


def initial_state(scenario: Scenario, r: int) -> ReplicationState:
    """Fresh landscape, population and random starting solution for replication ``r``."""
    root = Stream(scenario.replication_seed(r))
    landscape = generate(scenario.interdependence(), root.child(LANDSCAPE).key)
    agents = init_population(scenario.p_total, scenario.m_subtasks, landscape, root.child(POPULATION))
    d0 = int(root.child(POPULATION, 1).generator().integers(0, 1 << scenario.n_decisions))
    return ReplicationState(scenario, landscape, agents, int_to_bits(d0, scenario.n_decisions),
                            root.child(PERIODS))


def _learning(state: ReplicationState, t: int, published: np.ndarray) -> None:
    sc = state.scenario
    if sc.learning_scope == "all":
        learners = state.agents
    elif state.group is None:
        learners = []
    else:
        learners = [state.agents[i] for i in state.group.members]
    stream = state.periods.child(t, LEARN)
    for agent in learners:
        ctx = ResidualContext(published, agent.slot)
        learn_forget_step(agent, ctx, sc.scheme, state.landscape, sc.learn_prob, stream.child(agent.id))


def run_period(state: ReplicationState, t: int, scenario: Scenario | None = None) -> PeriodRecord:
    """Advance one period using the object-level operations.

    Order: optional auction on the previous solution, members decide,
    the concatenated solution is published and scored, then learning
    (before the auction instead when ``event_order='learn-first'``).
    """
    sc = scenario or state.scenario
    scheme, landscape = sc.scheme, state.landscape
    if sc.event_order == "learn-first":
        _learning(state, t, state.previous)
    auction = None
    if sc.auction_due(t):
        auction = run_auction(state.agents, state.previous, scheme, landscape,
                              state.periods.child(t, AUCTION), period=t)
        state.group = auction
    stream = state.periods.child(t, DECIDE)
    blocks = [
        decide(state.agents[a], ResidualContext(state.previous, m), scheme, landscape, stream.child(m))
        for m, a in enumerate(state.group.members)
    ]
    solution = concatenate_group_solution(blocks, sc.m_subtasks)
    raw = float(landscape.performance_table()[bits_to_int(solution)])
    if sc.event_order == "decide-first":
        _learning(state, t, solution)
    state.previous = solution
    record = PeriodRecord(t, solution, raw, raw / landscape.optimum_value, auction)
    state.history.append(record)
    return record


def _trace_from_history(state: ReplicationState, r: int) -> RunTrace:
    hist = state.history
    M = state.scenario.m_subtasks
    winners = np.full((len(hist), M), -1, dtype=np.int64)
    bids = np.full((len(hist), M), np.nan)
    prices = np.full((len(hist), M), np.nan)
    for i, rec in enumerate(hist):
        if rec.auction is not None:
            winners[i] = rec.auction.members
            bids[i] = rec.auction.bids
            prices[i] = rec.auction.prices
    raw = np.array([rec.raw for rec in hist])
    return RunTrace(
        replication=r, raw=raw, normalized=raw / state.landscape.optimum_value,
        landscape_seed=state.landscape.seed, optimum=state.landscape.optimum_value,
        auctions=np.array([rec.auction is not None for rec in hist]),
        winners=winners, winning_bids=bids, prices=prices,
        solutions=np.array([bits_to_int(rec.solution) for rec in hist], dtype=np.int64),
    )


def run_replication(scenario: Scenario, r: int, *, backend: str = "kernel",
                    record_knowledge: bool = False) -> RunTrace:
    """Execute one seeded replication.

    ``backend='python'`` steps through :func:`run_period`; ``'kernel'`` runs the
    compiled loop.  Both yield identical traces.
    """
    check_count("r", r, 0)
    if r >= scenario.replications:
        raise ValueError(f"replication index {r} outside [0, {scenario.replications})")
    check_choice("backend", backend, ("kernel", "python"))
    if backend == "python" and record_knowledge:
        raise ValueError("knowledge snapshots are only recorded by the kernel backend")
    state = initial_state(scenario, r)
    if backend == "python":
        for t in range(1, scenario.horizon + 1):
            run_period(state, t)
        return _trace_from_history(state, r)

    landscape = state.landscape
    size = 1 << landscape.matrix.block_size
    if record_knowledge and size > 64:
        raise ValueError("knowledge snapshots need block size <= 6")
    known = np.stack([a.known_mask for a in state.agents])
    slots = np.array([a.slot for a in state.agents], dtype=np.int64)
    pools = np.arange(scenario.p_total, dtype=np.int64).reshape(scenario.m_subtasks, -1)
    raw, auctioned, winners, bids, prices, snaps = _kernel.simulate(
        utility_table(landscape, scenario.scheme), landscape.performance_table(), pools, slots, known,
        bits_to_int(state.previous), state.periods.u64, scenario.learn_prob,
        scenario.tau or 0, scenario.horizon, scenario.learning_scope == "members-only",
        scenario.event_order == "learn-first", record_knowledge,
    )
    return RunTrace(
        replication=r, raw=raw, normalized=raw / landscape.optimum_value,
        landscape_seed=landscape.seed, optimum=landscape.optimum_value, auctions=auctioned,
        winners=winners, winning_bids=bids, prices=prices,
        knowledge=snaps if record_knowledge else None,
    )


class ReplicationError(RuntimeError):
    """A replication failed; the message carries the scenario label and index."""


def _run_chunk(scenario: Scenario, start: int, stop: int, keep_traces: bool, record_knowledge: bool):
    rows = np.empty((stop - start, scenario.horizon))
    traces = []
    for i, r in enumerate(range(start, stop)):
        try:
            trace = run_replication(scenario, r, record_knowledge=record_knowledge)
        except Exception as exc:
            raise ReplicationError(f"scenario {scenario.label} replication {r}: {exc!r}") from exc
        rows[i] = trace.normalized
        if keep_traces:
            traces.append(trace)
    return rows, traces


def _chunks(n: int, size: int):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def run_grid(scenarios, workers: int | None = None, *, keep_traces: bool = False,
             record_knowledge: bool = False, chunk_size: int = 100,
             progress: bool = False) -> list[ScenarioReport]:
    """Run every scenario and aggregate each into a :class:`ScenarioReport`.

    Replications are split into chunks that may run in worker processes;
    results are reassembled by replication index, so the output does not
    depend on ``workers``.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("no scenarios to run")
    workers = (os.cpu_count() or 1) if workers is None else check_count("workers", workers, 1)
    jobs = [(i, s, e) for i, sc in enumerate(scenarios) for s, e in _chunks(sc.replications, chunk_size)]
    results: dict[tuple[int, int], tuple] = {}
    done = [0] * len(scenarios)

    def _collect(job, value):
        i, s, _ = job
        results[(i, s)] = value
        done[i] += 1
        if progress and done[i] == len(_chunks(scenarios[i].replications, chunk_size)):
            print(f"[{sum(1 for d, sc in zip(done, scenarios) if d == len(_chunks(sc.replications, chunk_size)))}"
                  f"/{len(scenarios)}] {scenarios[i].label}", file=sys.stderr, flush=True)

    if workers == 1:
        for job in jobs:
            i, s, e = job
            _collect(job, _run_chunk(scenarios[i], s, e, keep_traces, record_knowledge))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job, pool.submit(_run_chunk, scenarios[job[0]], job[1], job[2], keep_traces,
                                         record_knowledge)) for job in jobs]
            for job, fut in futures:
                _collect(job, fut.result())

    reports = []
    for i, sc in enumerate(scenarios):
        parts = [results[(i, s)] for s, _ in _chunks(sc.replications, chunk_size)]
        matrix = np.vstack([p[0] for p in parts])
        report = aggregate(matrix, label=sc.label)
        report.scenario = sc
        if keep_traces:
            report.traces = [t for p in parts for t in p[1]]
        reports.append(report)
    return reports


def run_scenario(scenario: Scenario, workers: int | None = 1, **kwargs) -> ScenarioReport:
    return run_grid([scenario], workers, **kwargs)[0]


def with_overrides(scenarios, **changes):
    """Copy each scenario with the given fields replaced."""
    return [replace(sc, **changes) for sc in scenarios]
