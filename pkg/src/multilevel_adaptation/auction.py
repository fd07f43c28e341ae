"""Second-price group formation.

Each slot runs its own sealed-bid auction among the agents with that
expertise.  A bid is the bidder's best estimated utility over its known
partial solutions given the last published full solution.  The highest
bidder joins the group and is charged the second-highest bid; prices are
recorded but never feed back into behaviour.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._rng import as_stream, below
from .landscape import Landscape, as_bits, bits_to_int
from .population import IncentiveScheme, candidate_utilities


@dataclass(frozen=True)
class Bid:
    agent_id: int
    slot: int
    value: float


@dataclass(frozen=True)
class Group:
    members: tuple[int, ...]
    bids: tuple[float, ...]
    prices: tuple[float, ...]
    formed_at: int = 1


@njit(cache=True)
def second_price(bids, key):
    """Winner position and price for one slot; ties for the top bid resolved by ``key``."""
    top = -np.inf
    count = 0
    for i in range(bids.size):
        if bids[i] > top:
            top = bids[i]
            count = 1
        elif bids[i] == top:
            count += 1
    pick = below(key, count)
    winner = -1
    for i in range(bids.size):
        if bids[i] == top:
            if pick == 0:
                winner = i
                break
            pick -= 1
    if count > 1 or bids.size == 1:
        return winner, top
    runner_up = -np.inf
    for i in range(bids.size):
        if i != winner and bids[i] > runner_up:
            runner_up = bids[i]
    return winner, runner_up


def _context_code(ctx, landscape: Landscape) -> int:
    if hasattr(ctx, "previous"):
        ctx = ctx.previous
    return bits_to_int(as_bits(ctx, landscape.n_decisions))


def collect_bids(candidates, ctx, scheme: IncentiveScheme, landscape: Landscape) -> list[Bid]:
    """One truthful bid per candidate.

    ``ctx`` is the previously published full solution (bits or a
    ``ResidualContext``).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate pool")
    slots = {a.slot for a in candidates}
    if len(slots) != 1:
        raise ValueError(f"candidates span several slots: {sorted(slots)}")
    slot = slots.pop()
    values = candidate_utilities(landscape, scheme, slot, _context_code(ctx, landscape))
    return [Bid(a.id, slot, float(values[a.known_mask].max())) for a in candidates]


def run_auction(all_candidates_by_slot, ctx, scheme: IncentiveScheme, landscape: Landscape, rng,
                period: int = 1) -> Group:
    """Fill every slot with its highest bidder.

    ``all_candidates_by_slot`` is either a mapping slot -> agents or a flat
    iterable of agents.  Slot ``m`` resolves ties with the sub-stream
    ``rng.child(m)``, so slots never share random draws.
    """
    if isinstance(all_candidates_by_slot, dict):
        pools = {m: list(a) for m, a in all_candidates_by_slot.items()}
    else:
        pools = defaultdict(list)
        for agent in all_candidates_by_slot:
            pools[agent.slot].append(agent)
    M = landscape.matrix.m_subtasks
    stream = as_stream(rng)
    members, bids, prices = [], [], []
    for m in range(M):
        pool = pools.get(m, [])
        if not pool:
            raise ValueError(f"empty slot: no candidates for slot {m}")
        offers = collect_bids(pool, ctx, scheme, landscape)
        values = np.array([b.value for b in offers])
        winner, price = second_price(values, stream.child(m).u64)
        members.append(offers[winner].agent_id)
        bids.append(float(values[winner]))
        prices.append(float(price))
    return Group(tuple(members), tuple(bids), tuple(prices), period)

