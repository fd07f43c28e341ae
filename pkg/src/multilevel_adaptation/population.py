"""Expert agents: knowledge sets, estimated utility, decisions and learning.

Partial solutions (one block of ``S`` decisions) are coded as integers in
``[0, 2**S)`` with the block's first decision in the most significant bit.
An agent's knowledge is a boolean membership mask over those codes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._rng import FORGET_FIRES, FORGET_PICK, LEARN_FIRES, LEARN_PICK, as_stream, below, derive, unit
from ._validation import check_count, check_divisible, check_probability
from .landscape import Landscape, as_bits, bits_to_int, int_to_bits


@dataclass(frozen=True)
class IncentiveScheme:
    """Linear weights on own-block performance and residual performance."""

    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        check_probability("alpha", self.alpha)
        check_probability("beta", self.beta)
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError(f"alpha + beta must equal 1, got {self.alpha} + {self.beta}")


INDIVIDUALISM = IncentiveScheme(0.75, 0.25)
BALANCED = IncentiveScheme(0.5, 0.5)
COLLECTIVISM = IncentiveScheme(0.25, 0.75)


def block_shift(n_decisions: int, block_size: int, slot: int) -> int:
    """Left shift that places a partial solution into block ``slot``."""
    return n_decisions - block_size * (slot + 1)


def splice(context: int, candidate: int, n_decisions: int, block_size: int, slot: int) -> int:
    shift = block_shift(n_decisions, block_size, slot)
    mask = ((1 << block_size) - 1) << shift
    return (context & ~mask) | (candidate << shift)


@dataclass
class Agent:
    id: int
    slot: int
    known_mask: np.ndarray  # bool, one entry per partial solution code

    @property
    def block_size(self) -> int:
        return int(self.known_mask.size).bit_length() - 1

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.flatnonzero(self.known_mask))

    @property
    def known(self) -> tuple[str, ...]:
        """Known partial solutions as bitstrings, ascending."""
        s = self.block_size
        return tuple(format(c, f"0{s}b") for c in self.codes)

    def __len__(self) -> int:
        return int(self.known_mask.sum())

    def knows(self, candidate) -> bool:
        return bool(self.known_mask[bits_to_int(as_bits(candidate, self.block_size))])


@dataclass(frozen=True)
class ResidualContext:
    """The last published full solution, seen from block ``slot``."""

    previous: np.ndarray
    slot: int

    def __post_init__(self):
        object.__setattr__(self, "previous", as_bits(self.previous))

    @property
    def code(self) -> int:
        return bits_to_int(self.previous)

    def residual(self, block_size: int) -> np.ndarray:
        """Other blocks' decisions; the observer's own block is masked with -1."""
        out = self.previous.astype(np.int8)
        out[self.slot * block_size:(self.slot + 1) * block_size] = -1
        return out


def init_population(p_total: int, m_subtasks: int, landscape: Landscape, rng) -> list[Agent]:
    """``p_total / m_subtasks`` agents per slot, each knowing one random partial solution.

    Agent ``i`` is an expert for slot ``i // (p_total / m_subtasks)``.
    """
    check_count("p_total", p_total, 1)
    check_count("m_subtasks", m_subtasks, 1)
    check_divisible("p_total", p_total, "m_subtasks", m_subtasks)
    if landscape.matrix.m_subtasks != m_subtasks:
        raise ValueError(
            f"landscape is split into {landscape.matrix.m_subtasks} subtasks, not {m_subtasks}"
        )
    s = landscape.matrix.block_size
    per_slot = p_total // m_subtasks
    first = as_stream(rng).generator().integers(0, 1 << s, size=p_total)
    agents = []
    for i in range(p_total):
        mask = np.zeros(1 << s, dtype=bool)
        mask[first[i]] = True
        agents.append(Agent(i, i // per_slot, mask))
    return agents


def utility_table(landscape: Landscape, scheme: IncentiveScheme) -> np.ndarray:
    """Estimated utility of every full solution from every slot's viewpoint.

    Row ``m`` holds ``alpha * own + beta * (sum(other blocks) / (M - 1))``
    where each block value is the mean of its ``S`` contributions.
    """
    key = ("utility", scheme.alpha, scheme.beta)
    cache = landscape._cache
    if key not in cache:
        if "blocks" not in cache:
            contrib = landscape.contribution_table()
            M, S = landscape.matrix.m_subtasks, landscape.matrix.block_size
            blocks = np.empty((M, contrib.shape[0]))
            for b in range(M):
                total = contrib[:, b * S].copy()
                for j in range(1, S):
                    total += contrib[:, b * S + j]
                blocks[b] = total / S
            cache["blocks"] = blocks
        blocks = cache["blocks"]
        M = blocks.shape[0]
        table = np.empty_like(blocks)
        for m in range(M):
            others = [r for r in range(M) if r != m]
            if others:
                rest = blocks[others[0]].copy()
                for r in others[1:]:
                    rest += blocks[r]
                table[m] = scheme.alpha * blocks[m] + scheme.beta * (rest / (M - 1))
            else:
                table[m] = scheme.alpha * blocks[m]
        cache[key] = table
    return cache[key]


def candidate_utilities(landscape: Landscape, scheme: IncentiveScheme, slot: int, context: int) -> np.ndarray:
    """Estimated utility of each partial solution code spliced into ``context``."""
    N, S = landscape.n_decisions, landscape.matrix.block_size
    shift = block_shift(N, S, slot)
    base = context & ~(((1 << S) - 1) << shift)
    codes = base | (np.arange(1 << S, dtype=np.int64) << shift)
    return utility_table(landscape, scheme)[slot, codes]


def _check_context(agent: Agent, ctx: ResidualContext, landscape: Landscape) -> None:
    if ctx.previous.size != landscape.n_decisions:
        raise ValueError(
            f"length mismatch: context has {ctx.previous.size} bits, expected {landscape.n_decisions}"
        )
    if ctx.slot != agent.slot:
        raise ValueError(f"context is for slot {ctx.slot} but agent {agent.id} works on slot {agent.slot}")


def estimated_utility(agent: Agent, candidate, ctx: ResidualContext, scheme: IncentiveScheme,
                      landscape: Landscape) -> float:
    _check_context(agent, ctx, landscape)
    S = landscape.matrix.block_size
    cand = bits_to_int(as_bits(candidate, S))
    code = splice(ctx.code, cand, landscape.n_decisions, S, agent.slot)
    return float(utility_table(landscape, scheme)[agent.slot, code])


@njit(cache=True)
def best_known(values, known, key):
    """Utility-maximising known code; ties resolved by ``key``.  Returns (code, value)."""
    best = -np.inf
    count = 0
    for c in range(values.size):
        if known[c]:
            if values[c] > best:
                best = values[c]
                count = 1
            elif values[c] == best:
                count += 1
    pick = below(key, count)
    for c in range(values.size):
        if known[c] and values[c] == best:
            if pick == 0:
                return c, best
            pick -= 1
    return -1, best


@njit(cache=True)
def learn_forget(known, values, prob, key):
    """One forgetting draw, then one learning draw, each firing with ``prob``.

    Forgetting removes a uniformly chosen known code whose utility is below
    the current maximum.  Learning adds the one-bit neighbour of a uniformly
    chosen (known code, bit) pair whose neighbour is not yet known.  Returns
    the (forgotten, learned) codes, -1 where nothing happened.
    """
    size = known.size
    s = 0
    while (1 << s) < size:
        s += 1
    forgotten = -1
    learned = -1
    if unit(derive(key, FORGET_FIRES)) < prob:
        best = -np.inf
        for c in range(size):
            if known[c] and values[c] > best:
                best = values[c]
        losers = 0
        for c in range(size):
            if known[c] and values[c] < best:
                losers += 1
        if losers > 0:
            pick = below(derive(key, FORGET_PICK), losers)
            for c in range(size):
                if known[c] and values[c] < best:
                    if pick == 0:
                        known[c] = False
                        forgotten = c
                        break
                    pick -= 1
    if unit(derive(key, LEARN_FIRES)) < prob:
        pairs = 0
        for c in range(size):
            if known[c]:
                for j in range(s):
                    if not known[c ^ (1 << (s - 1 - j))]:
                        pairs += 1
        if pairs > 0:
            pick = below(derive(key, LEARN_PICK), pairs)
            for c in range(size):
                if learned >= 0:
                    break
                if known[c]:
                    for j in range(s):
                        nb = c ^ (1 << (s - 1 - j))
                        if not known[nb]:
                            if pick == 0:
                                learned = nb
                                break
                            pick -= 1
            known[learned] = True
    return forgotten, learned


def decide(agent: Agent, ctx: ResidualContext, scheme: IncentiveScheme, landscape: Landscape,
           rng) -> np.ndarray:
    """The known partial solution with the highest estimated utility."""
    _check_context(agent, ctx, landscape)
    if not agent.known_mask.any():
        raise ValueError(f"agent {agent.id} knows no solution")
    values = candidate_utilities(landscape, scheme, agent.slot, ctx.code)
    code, _ = best_known(values, agent.known_mask, as_stream(rng).u64)
    return int_to_bits(int(code), landscape.matrix.block_size)


def learn_forget_step(agent: Agent, ctx: ResidualContext, scheme: IncentiveScheme, landscape: Landscape,
                      prob: float, rng) -> Agent:
    """Update ``agent``'s knowledge in place against the published solution in ``ctx``."""
    prob = check_probability("prob", prob)
    _check_context(agent, ctx, landscape)
    values = candidate_utilities(landscape, scheme, agent.slot, ctx.code)
    learn_forget(agent.known_mask, values, prob, as_stream(rng).u64)
    return agent


def concatenate_group_solution(decisions, m_subtasks: int | None = None) -> np.ndarray:
    """Join the members' partial solutions in slot order."""
    blocks = list(decisions)
    if m_subtasks is not None and len(blocks) != m_subtasks:
        raise ValueError(f"missing block: expected {m_subtasks} partial solutions, got {len(blocks)}")
    if any(b is None for b in blocks):
        raise ValueError("missing block: a slot has no partial solution")
    blocks = [as_bits(b) for b in blocks]
    if not blocks or len({b.size for b in blocks}) != 1:
        raise ValueError("partial solutions must be non-empty and of equal length")
    return np.concatenate(blocks)
