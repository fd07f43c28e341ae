import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import constant_landscape
from multilevel_adaptation._rng import Stream
from multilevel_adaptation.auction import collect_bids, run_auction, second_price
from multilevel_adaptation.landscape import build_matrix, generate, int_to_bits
from multilevel_adaptation.population import Agent, IncentiveScheme, ResidualContext, init_population
from oracles import splice_utility

BALANCED = IncentiveScheme(0.5, 0.5)


def agent(codes, slot, agent_id, size=16):
    mask = np.zeros(size, dtype=bool)
    mask[list(codes)] = True
    return Agent(agent_id, slot, mask)


def test_second_price_basic():
    winner, price = second_price(np.array([0.9, 0.7, 0.4]), np.uint64(1))
    assert (winner, price) == (0, 0.7)


def test_second_price_single_bidder_pays_own_bid():
    assert second_price(np.array([0.42]), np.uint64(0)) == (0, 0.42)


def test_second_price_ties_are_spread():
    bids = np.full(10, 0.6)
    winners = {second_price(bids, Stream(0).child(k).u64)[0] for k in range(400)}
    assert winners == set(range(10))
    assert second_price(bids, np.uint64(3))[1] == 0.6


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.integers(0, 2 ** 64 - 1))
def test_second_price_invariants(bids, key):
    b = np.array(bids)
    w, price = second_price(b, np.uint64(key))
    assert b[w] == b.max()
    assert b[w] >= price >= 0
    if b.size > 1:
        assert price == np.sort(b)[-2]


def test_bid_on_constant_landscape():
    land = constant_landscape(build_matrix("decomposed", 12, 3, 3))
    bids = collect_bids([agent([5], 0, 0)], int_to_bits(0, 12), IncentiveScheme(1, 0), land)
    assert bids[0].value == 0.5


def test_identical_knowledge_identical_bids(base_decomposed):
    bids = collect_bids([agent([1, 4], 2, 0), agent([1, 4], 2, 1)], int_to_bits(3000, 12), BALANCED,
                        base_decomposed)
    assert bids[0].value == bids[1].value


def test_bid_errors(base_decomposed):
    with pytest.raises(ValueError, match="empty candidate pool"):
        collect_bids([], int_to_bits(0, 12), BALANCED, base_decomposed)
    with pytest.raises(ValueError, match="empty slot"):
        run_auction({0: [agent([0], 0, 0)], 1: [], 2: [agent([0], 2, 1)]}, int_to_bits(0, 12), BALANCED,
                    base_decomposed, Stream(0))


def test_bids_match_splice_oracle():
    m = build_matrix("interdependent", 4, 2, 2)
    rng = np.random.default_rng(5)
    for seed in range(100):
        land = generate(m, seed)
        tables = land.tables.tolist()
        ctx = int_to_bits(int(rng.integers(16)), 4)
        for slot in (0, 1):
            pool = [agent(sorted(set(rng.integers(0, 4, size=int(rng.integers(1, 5))).tolist())), slot, j, size=4)
                    for j in range(5)]
            for bid, a in zip(collect_bids(pool, ResidualContext(ctx, slot), BALANCED, land), pool):
                want = max(splice_utility(tables, m.rows, ctx.tolist(), slot, int_to_bits(c, 2).tolist(),
                                          2, 2, 0.5, 0.5) for c in a.codes)
                assert bid.value == pytest.approx(want, rel=0, abs=1e-15)


def test_auction_winners_are_auditable(base_decomposed):
    land = base_decomposed
    agents = init_population(30, 3, land, Stream(4))
    ctx = int_to_bits(1111, 12)
    group = run_auction(agents, ctx, BALANCED, land, Stream(9))
    for m, (member, bid, price) in enumerate(zip(group.members, group.bids, group.prices)):
        a = agents[member]
        assert a.slot == m
        pool_bids = [b.value for b in collect_bids([x for x in agents if x.slot == m], ctx, BALANCED, land)]
        assert bid == max(pool_bids) and bid >= price
        ctx_obj = ResidualContext(ctx, m)
        from multilevel_adaptation.population import estimated_utility
        assert any(estimated_utility(a, int_to_bits(c, 4), ctx_obj, BALANCED, land) == bid for c in a.codes)


def test_slot_independence(base_decomposed):
    land = base_decomposed
    agents = init_population(30, 3, land, Stream(4))
    ctx = int_to_bits(77, 12)
    by_slot = {m: [a for a in agents if a.slot == m] for m in range(3)}
    base = run_auction(by_slot, ctx, BALANCED, land, Stream(2))
    shuffled = dict(by_slot)
    shuffled[0] = list(reversed(by_slot[0]))
    other = run_auction(shuffled, ctx, BALANCED, land, Stream(2))
    assert base.members[1:] == other.members[1:]
    assert run_auction(by_slot, ctx, BALANCED, land, Stream(2)) == base
