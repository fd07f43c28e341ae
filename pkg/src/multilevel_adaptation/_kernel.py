"""Compiled replication loop.

Mirrors ``engine.run_period`` step for step and draws every random choice
from the same addressed keys, so both paths produce identical traces.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ._rng import AUCTION, DECIDE, LEARN, derive
from .auction import second_price
from .population import best_known, learn_forget


@njit(cache=True)
def _fill_candidates(out, utility, context, n_decisions, block_size):
    size = 1 << block_size
    for m in range(out.shape[0]):
        shift = n_decisions - block_size * (m + 1)
        base = context & ~((size - 1) << shift)
        for c in range(size):
            out[m, c] = utility[m, base | (c << shift)]


@njit(cache=True)
def _learning_phase(known, slots, members, cand, prob, period_key, members_only):
    learn_key = derive(period_key, LEARN)
    for a in range(known.shape[0]):
        if members_only:
            is_member = False
            for m in range(members.size):
                if members[m] == a:
                    is_member = True
            if not is_member:
                continue
        learn_forget(known[a], cand[slots[a]], prob, derive(learn_key, a))


@njit(cache=True)
def _knowledge_masks(known, out):
    for a in range(known.shape[0]):
        mask = np.uint64(0)
        for c in range(known.shape[1]):
            if known[a, c]:
                mask |= np.uint64(1) << np.uint64(c)
        out[a] = mask


@njit(cache=True)
def simulate(utility, perf, pools, slots, known, d0, periods_key, prob, tau, horizon,
             members_only, learn_first, record_knowledge):
    """Run ``horizon`` periods; ``known`` is updated in place.

    ``tau <= 0`` means a single auction in the first period.
    """
    M, per_slot = pools.shape
    n_agents, size = known.shape
    block_size = 0
    while (1 << block_size) < size:
        block_size += 1
    n_decisions = block_size * M

    raw = np.empty(horizon)
    auctioned = np.zeros(horizon, dtype=np.bool_)
    winners = np.full((horizon, M), -1, dtype=np.int64)
    win_bids = np.full((horizon, M), np.nan)
    prices = np.full((horizon, M), np.nan)
    if record_knowledge:
        snapshots = np.zeros((horizon, n_agents), dtype=np.uint64)
    else:
        snapshots = np.zeros((0, n_agents), dtype=np.uint64)

    members = np.full(M, -1, dtype=np.int64)
    cand = np.empty((M, size))
    bids = np.empty(per_slot)
    previous = d0
    for t in range(1, horizon + 1):
        period_key = derive(periods_key, t)
        _fill_candidates(cand, utility, previous, n_decisions, block_size)
        if learn_first:
            _learning_phase(known, slots, members, cand, prob, period_key, members_only)
        if t == 1 or (tau > 0 and (t - 1) % tau == 0):
            auctioned[t - 1] = True
            auction_key = derive(period_key, AUCTION)
            for m in range(M):
                for j in range(per_slot):
                    a = pools[m, j]
                    best = -np.inf
                    for c in range(size):
                        if known[a, c] and cand[m, c] > best:
                            best = cand[m, c]
                    bids[j] = best
                w, price = second_price(bids, derive(auction_key, m))
                members[m] = pools[m, w]
                winners[t - 1, m] = pools[m, w]
                win_bids[t - 1, m] = bids[w]
                prices[t - 1, m] = price
        decide_key = derive(period_key, DECIDE)
        current = 0
        for m in range(M):
            code, _ = best_known(cand[m], known[members[m]], derive(decide_key, m))
            current |= code << (n_decisions - block_size * (m + 1))
        raw[t - 1] = perf[current]
        if not learn_first:
            _fill_candidates(cand, utility, current, n_decisions, block_size)
            _learning_phase(known, slots, members, cand, prob, period_key, members_only)
        if record_knowledge:
            _knowledge_masks(known, snapshots[t - 1])
        previous = current
    return raw, auctioned, winners, win_bids, prices, snapshots
