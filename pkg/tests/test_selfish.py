import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from powplay.errors import ValidationError
from powplay.model import AttackParams, EpochModel, Pool, PoolSet, pool_advantage
from powplay.selfish import (
    AssumptionWarning,
    is_selfish_dominant,
    largest_pool_dominates,
    selfish_dominance_threshold,
    selfish_profit,
    selfish_state_probs,
)

from oracles import (
    tie_race_advantage_mc,
    withholding_chain_profit,
    withholding_stationary_check,
)


# -- state probabilities ---------------------------------------------------------


def test_state_probs_vanishing_attacker():
    p = selfish_state_probs(1e-9)
    assert p.p00 == pytest.approx(1.0, abs=1e-8)
    assert p.p10 + p.p20 + p.p11 < 1e-8


def test_state_probs_frozen_values():
    p = selfish_state_probs(0.4)
    assert p.p00 == pytest.approx(0.52448, abs=5e-6)
    assert p.p10 == pytest.approx(0.20979, abs=5e-6)
    assert p.p20 == pytest.approx(0.13986, abs=5e-6)
    assert p.p11 == pytest.approx(0.12587, abs=5e-6)


@given(st.floats(0.01, 0.99, allow_nan=False))
def test_state_probs_sum_to_one(alpha):
    assert sum(selfish_state_probs(alpha).as_tuple()) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4, 0.47])
def test_state_probs_are_stationary_for_transition_matrix(alpha):
    pi = withholding_stationary_check(alpha)
    assert np.allclose(pi, selfish_state_probs(alpha).as_tuple(), atol=1e-12)


def test_state_probs_domain():
    with pytest.raises(ValidationError):
        selfish_state_probs(0.0)
    with pytest.raises(ValidationError):
        selfish_state_probs(1.0)


# -- profit ----------------------------------------------------------------------


def test_profit_beats_honest_below_threshold():
    # alpha 0.4, eps 0.1: threshold is ~0.674, so beta 0.3 is well inside
    assert selfish_profit(0.4, 0.3, 0.1) > 0.4


def test_profit_equals_honest_at_threshold_boundary():
    for alpha in (0.1, 0.29033, 0.4, 0.45):
        for eps in (0.0, 0.1, 0.3):
            beta = selfish_dominance_threshold(alpha, eps)
            if not 0 < beta < 1:
                continue
            assert selfish_profit(alpha, beta, eps) == pytest.approx(alpha, abs=1e-9)


def test_profit_matches_chain_accounting():
    rng = np.random.default_rng(42)
    for _ in range(200):
        alpha = rng.uniform(0.05, 0.49)
        beta = rng.uniform(0.01, 1 - alpha - 0.01)
        eps = rng.uniform(0.0, 0.4)
        closed = selfish_profit(alpha, beta, eps)
        chain = withholding_chain_profit(alpha, beta, eps)
        assert closed == pytest.approx(chain, abs=1e-12), (alpha, beta, eps)


def test_profit_scales_with_epoch_rate_and_reward():
    base = selfish_profit(0.3, 0.2, 0.0)
    scaled = selfish_profit(0.3, 0.2, 0.0, EpochModel(block_rate=2.0, block_reward=5.0))
    assert scaled == pytest.approx(10.0 * base, rel=1e-12)


def test_profit_real_world_largest_pool_beats_honest():
    assert selfish_profit(0.29033, 0.1453, 0.0) > 0.29033


@pytest.mark.parametrize("alpha", [0.2, 0.3, 0.4])
def test_profit_decreasing_in_beta_and_epsilon(alpha):
    betas = np.linspace(0.05, 0.5, 10)
    profits = [selfish_profit(alpha, b, 0.1) for b in betas]
    assert all(x > y for x, y in zip(profits, profits[1:]))
    epss = np.linspace(0.0, 0.5, 11)
    profits = [selfish_profit(alpha, 0.2, e) for e in epss]
    assert all(x > y for x, y in zip(profits, profits[1:]))


# -- dominance threshold -----------------------------------------------------------


def test_threshold_no_sweetener_reduces_to_simple_ratio():
    assert selfish_dominance_threshold(0.4, 0.0) == pytest.approx(
        0.4 / 0.6, abs=1e-12
    )


def test_threshold_worked_value():
    assert selfish_dominance_threshold(0.4, 0.1) == pytest.approx(0.6741, abs=1e-4)


def test_threshold_real_world_with_high_sweetener():
    # even paying 0.3 on ties, the largest real pool stays above its residual
    assert selfish_dominance_threshold(0.29033, 0.3) > 0.1453


def test_is_selfish_dominant_real_world(btc_pools, btc_pools_merged):
    v = is_selfish_dominant(
        btc_pools.with_adversary("Foundry USA"), AttackParams(epsilon=0.3)
    )
    assert v.dominant and v.assumptions_ok and v.margin > 0
    v = is_selfish_dominant(
        btc_pools_merged.with_adversary("AntPool"), AttackParams(epsilon=0.0)
    )
    assert v.dominant


def test_is_selfish_dominant_symmetric_split():
    for delta in (0.01, 0.1, 0.2):
        ps = PoolSet(
            (Pool("big", 0.5 + delta), Pool("small", 0.5 - delta)), adversary=0
        )
        if 0.5 - delta >= 0.4302:
            with pytest.warns(AssumptionWarning):
                v = is_selfish_dominant(ps, AttackParams())
        else:
            v = is_selfish_dominant(ps, AttackParams())
        assert v.dominant


def test_is_selfish_dominant_warns_on_large_rival():
    ps = PoolSet((Pool("a", 0.5), Pool("b", 0.5)), adversary=0)
    with pytest.warns(AssumptionWarning):
        v = is_selfish_dominant(ps, AttackParams())
    assert not v.assumptions_ok


# -- two-pool sufficient condition ---------------------------------------------------


def test_largest_always_dominates_without_sweetener():
    for a1, a2 in [(0.2, 0.1), (0.3, 0.3), (0.4, 0.25), (0.05, 0.01)]:
        assert largest_pool_dominates(a1, a2, 0.0)


def test_largest_pool_worked_examples():
    assert largest_pool_dominates(0.3, 0.25, 0.2)  # 0.4286 > 0.34
    assert not largest_pool_dominates(0.1, 0.1, 0.1)  # 0.1111 < 0.18


def test_largest_pool_ordering_enforced():
    with pytest.raises(ValidationError):
        largest_pool_dominates(0.1, 0.2, 0.0)


# -- tie-race advantage --------------------------------------------------------------


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_tie_race_mc_matches_pool_advantage(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    w = rng.uniform(0.5, 3.0, size=n)
    shares = w / w.sum()
    ps = PoolSet(tuple(Pool(f"p{i}", s) for i, s in enumerate(shares)), adversary=0)
    adv = pool_advantage(ps, 0)
    trials = 200_000
    est = tie_race_advantage_mc(shares, 0, trials=trials, seed=seed)
    sd = math.sqrt(adv * (1 - adv) / trials)
    assert abs(est - adv) <= 3 * sd + 1e-9
