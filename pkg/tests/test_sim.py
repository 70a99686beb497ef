"""Simulation engines: automata vs closed forms, difficulty retargets, trajectories."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powplay.bribery import TargetPartition, bribery_reward_share, undercut_reward_share
from powplay.distraction import DistractionParams, PowerSplit, distraction_reward_share, scenario_rates
from powplay.errors import ValidationError
from powplay.mdp import build_mdp, solve_reward_share
from powplay.model import (
    AttackParams,
    EpochModel,
    PoolSet,
    bundled_pool_file,
    load_pool_file,
    residual_centralization_factor,
)
from powplay.selfish import selfish_profit
from powplay.sim import (
    DEFAULT_SEED,
    HorizonWarning,
    SimConfig,
    SimStats,
    build_automaton,
    dam_update,
    distraction_occupancy_mc,
    reward_share_mc,
    revenue_advantage_trajectory,
    simulate,
    simulate_many,
)


@pytest.fixture(scope="module")
def merged_foundry():
    return load_pool_file(
        bundled_pool_file("bitcoin_pools_2024_merged.json"), adversary="Foundry USA"
    )


@pytest.fixture(scope="module")
def three_targets():
    """Adversary 0.3 with pools [0.2, 0.3, 0.2]; the two 0.2 pools targeted."""
    pools = PoolSet.from_shares(0.3, [0.2, 0.3, 0.2])
    return pools, (1, 3)


# -- configuration validation --------------------------------------------------------


def test_config_rejects_unknown_strategy(merged_foundry):
    with pytest.raises(ValidationError):
        SimConfig(merged_foundry, strategy="petty")


def test_config_rejects_bad_horizon(merged_foundry):
    with pytest.raises(ValidationError):
        SimConfig(merged_foundry, horizon=0)
    with pytest.raises(ValidationError):
        SimConfig(merged_foundry, horizon_unit="days")
    with pytest.raises(ValidationError):
        SimConfig(merged_foundry, dam_mode="none")


def test_config_requires_pools_except_distraction():
    with pytest.raises(ValidationError):
        SimConfig(None, strategy="pi_selfish")
    with pytest.raises(ValidationError):
        SimConfig(None, strategy="distraction")  # needs the parameter record
    dp = DistractionParams(PowerSplit(0.3, 0.2, 0.5, 0.0), 5.0, 0.03, 0.0)
    cfg = SimConfig(None, strategy="distraction", distraction=dp)
    assert cfg.pools is None


def test_config_requires_designated_adversary():
    anon = PoolSet.from_shares(0.3, [0.7]).pools
    with pytest.raises(ValidationError):
        SimConfig(PoolSet(anon, adversary=None), strategy="pi_selfish")


# -- difficulty retargets ------------------------------------------------------------


def test_dam_on_target_is_identity():
    assert dam_update(2016.0, (2016, 0)) == pytest.approx(1.0, abs=1e-12)


def test_dam_slow_epoch_halves_difficulty():
    assert dam_update(4032.0, (2016, 0)) == pytest.approx(0.5, abs=1e-12)


def test_dam_active_power_charges_orphans():
    ratio = dam_update(2016.0, (2016, 202), "active_power") / dam_update(
        2016.0, (2016, 202), "canonical_only"
    )
    assert ratio == pytest.approx((2016 + 202) / 2016, abs=1e-12)


@given(st.floats(100.0, 10_000.0), st.integers(1, 5000))
def test_dam_modes_agree_without_orphans(duration, canonical):
    a = dam_update(duration, (canonical, 0), "canonical_only")
    b = dam_update(duration, (canonical, 0), "active_power")
    assert a == pytest.approx(b, rel=1e-12)


def test_dam_rejects_degenerate_epochs():
    with pytest.raises(ValidationError):
        dam_update(2016.0, (0, 5))
    with pytest.raises(ValidationError):
        dam_update(0.0, (2016, 0))
    with pytest.raises(ValidationError):
        dam_update(2016.0, (2016, -1))
    with pytest.raises(ValidationError):
        dam_update(2016.0, (2016, 0), "hybrid")


def test_dam_respects_block_rate():
    ep = EpochModel(blocks_per_epoch=100, block_rate=2.0)
    # 100 blocks should take 50 time units at rate 2; taking 100 halves D
    assert dam_update(100.0, (100, 0), epoch=ep) == pytest.approx(0.5, abs=1e-12)


# -- lockstep engine vs the analytic routes ------------------------------------------


def test_lockstep_honest_share(merged_foundry):
    stats = reward_share_mc(SimConfig(merged_foundry, strategy="honest"), transitions=1_000_000)
    sigma = np.sqrt(0.29033 * (1 - 0.29033) / 1_000_000)
    assert stats.adversary_reward_share == pytest.approx(0.29033, abs=4 * sigma)
    assert stats.orphan_count == 0


def test_lockstep_withholding_matches_closed_form(merged_foundry):
    alpha = merged_foundry.adversary_share
    beta = residual_centralization_factor(merged_foundry, merged_foundry.adversary)
    for eps in (0.0, 0.5):
        closed = selfish_profit(alpha, beta, eps)
        stats = reward_share_mc(
            SimConfig(merged_foundry, strategy="pi_selfish", params=AttackParams(epsilon=eps)),
            transitions=2_000_000,
        )
        assert stats.adversary_reward_share == pytest.approx(closed, abs=0.004)
    assert stats.orphan_count > 0


def test_lockstep_bribery_matches_closed_form(three_targets):
    pools, targets = three_targets
    part = TargetPartition(pools, targets)
    for eps in (0.0, 0.05):
        closed = bribery_reward_share(pools, part, eps)
        stats = reward_share_mc(
            SimConfig(pools, strategy="bribery", targets=targets, params=AttackParams(epsilon=eps)),
            transitions=2_000_000,
        )
        assert stats.adversary_reward_share == pytest.approx(closed, abs=0.004)


def test_lockstep_undercut_matches_closed_form(three_targets):
    pools, targets = three_targets
    part = TargetPartition(pools, targets)
    for eps in (0.0, 0.05):
        closed = undercut_reward_share(pools, part, eps)
        stats = reward_share_mc(
            SimConfig(pools, strategy="undercut", targets=targets, params=AttackParams(epsilon=eps)),
            transitions=2_000_000,
        )
        assert stats.adversary_reward_share == pytest.approx(closed, abs=0.004)


def test_lockstep_no_targets_collapses_to_honest():
    pools = PoolSet.from_shares(0.3, [0.35, 0.35])
    cfg = SimConfig(pools, strategy="bribery", targets=())
    assert build_automaton(cfg).n_states == 1
    stats = reward_share_mc(cfg, transitions=1_000_000)
    sigma = np.sqrt(0.3 * 0.7 / 1_000_000)
    assert stats.adversary_reward_share == pytest.approx(0.3, abs=4 * sigma)


def test_lockstep_mdp_policy_matches_solver():
    pools = PoolSet.from_shares(0.35, [0.35, 0.3])
    model = build_mdp(pools, AttackParams(), fork_cap=6)
    res = solve_reward_share(model)
    stats = reward_share_mc(
        SimConfig(pools, strategy="mdp_policy", fork_cap=6, policy=res.policy),
        transitions=2_000_000,
    )
    assert stats.adversary_reward_share == pytest.approx(res.reward_share, abs=0.005)


def test_lockstep_distraction_matches_closed_form():
    split = PowerSplit(0.3, 0.2, 0.5, 0.0)
    dp = DistractionParams(split, 5.0, 0.03, 0.0)
    closed = distraction_reward_share(split, 5.0, 0.03)
    stats = reward_share_mc(
        SimConfig(None, strategy="distraction", distraction=dp), transitions=2_000_000
    )
    assert stats.adversary_reward_share == pytest.approx(closed, abs=0.004)


def test_distraction_occupancy_within_mc_error():
    split = PowerSplit(0.4, 0.1, 0.3, 0.2)
    dp = DistractionParams(split, 5.0, 0.04, 0.02)
    for choice in ("mini_pow", "bitcoin"):
        occ = distraction_occupancy_mc(dp, choice, events=1_000_000)
        want = scenario_rates(split, 5.0, choice).occupancy()
        assert np.abs(occ - want).max() < 2e-3


def test_lockstep_deterministic(three_targets):
    pools, targets = three_targets
    cfg = SimConfig(pools, strategy="undercut", targets=targets, seed=99)
    a = reward_share_mc(cfg, transitions=200_000)
    b = reward_share_mc(cfg, transitions=200_000)
    assert a.adversary_reward_share == b.adversary_reward_share
    assert a.orphan_count == b.orphan_count


# -- sequential engine ---------------------------------------------------------------


def test_sequential_honest_run(merged_foundry):
    ep = EpochModel(blocks_per_epoch=400)
    cfg = SimConfig(merged_foundry, strategy="honest", epoch=ep, horizon=5)
    stats = simulate(cfg)
    assert stats.orphan_count == 0
    assert len(stats.epoch_durations) == 5
    # every event settles exactly one block, so durations hover near L/lambda
    assert np.abs(stats.epoch_durations.mean() - 400.0) < 60.0
    assert np.all(stats.revenue_advantage[:, 1] == 0.0)
    sigma = np.sqrt(0.29033 * 0.70967 / 2000)
    assert stats.adversary_reward_share == pytest.approx(0.29033, abs=4 * sigma)
    assert stats.rng_draws > 0


def test_sequential_block_horizon(merged_foundry):
    ep = EpochModel(blocks_per_epoch=500)
    cfg = SimConfig(
        merged_foundry, strategy="honest", epoch=ep, horizon=700, horizon_unit="blocks"
    )
    stats = simulate(cfg)
    assert len(stats.epoch_durations) == 1  # one full epoch inside 700 blocks


def test_sequential_bitwise_deterministic(merged_foundry):
    ep = EpochModel(blocks_per_epoch=300)
    cfg = SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=3)
    a, b = simulate(cfg), simulate(cfg)
    assert np.array_equal(a.revenue_advantage, b.revenue_advantage)
    assert np.array_equal(a.epoch_durations, b.epoch_durations)
    assert a.adversary_reward_share == b.adversary_reward_share


def test_dam_mode_only_reshapes_time(merged_foundry):
    """Same seed, same winner draws: shares match, epoch durations diverge."""
    ep = EpochModel(blocks_per_epoch=400)
    runs = {
        mode: simulate(
            SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=8, dam_mode=mode)
        )
        for mode in ("canonical_only", "active_power")
    }
    a, b = runs["canonical_only"], runs["active_power"]
    assert a.adversary_reward_share == b.adversary_reward_share
    assert a.orphan_count == b.orphan_count
    # canonical_only retargets back to the nominal block interval; charging
    # for orphans keeps difficulty higher and epochs proportionally longer
    assert b.epoch_durations[1:].mean() > a.epoch_durations[1:].mean() * 1.08


def test_active_power_modes_identical_for_honest(merged_foundry):
    ep = EpochModel(blocks_per_epoch=300)
    a = simulate(SimConfig(merged_foundry, strategy="honest", epoch=ep, horizon=4))
    b = simulate(
        SimConfig(
            merged_foundry, strategy="honest", epoch=ep, horizon=4, dam_mode="active_power"
        )
    )
    assert np.array_equal(a.epoch_durations, b.epoch_durations)


def test_canonical_only_restores_block_rate(merged_foundry):
    """After the first retarget the canonical interval returns to target."""
    ep = EpochModel(blocks_per_epoch=400)
    cfg = SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=10)
    stats = simulate(cfg)
    assert stats.epoch_durations[0] > 440.0  # withholding slows epoch one
    assert np.abs(stats.epoch_durations[2:].mean() - 400.0) < 25.0


def test_sequential_distraction_share_and_rate():
    split = PowerSplit(0.3, 0.2, 0.5, 0.0)
    dp = DistractionParams(split, 5.0, 0.03, 0.0)
    # epoch longer than the horizon: no retarget, difficulty stays 1
    ep = EpochModel(blocks_per_epoch=50_000)
    cfg = SimConfig(
        None,
        strategy="distraction",
        distraction=dp,
        epoch=ep,
        horizon=30_000,
        horizon_unit="blocks",
    )
    stats = simulate(cfg)
    closed = distraction_reward_share(split, 5.0, 0.03)
    assert stats.adversary_reward_share == pytest.approx(closed, abs=0.01)
    # with no never-compliant power there is no race, hence no orphans
    assert stats.orphan_count == 0
    assert len(stats.epoch_durations) == 0
    # event clock: live-state events arrive rate_multiplier times faster, so
    # the run's duration matches the occupancy-weighted expectation
    sr = scenario_rates(split, 5.0, "mini_pow")
    canonical_per_event = sr.p0 * (1 - split.alpha_a) + sr.p1 * (
        sr.alpha_a_prime + sr.alpha_c_prime + sr.alpha_i_prime
    )
    time_per_event = sr.p0 + sr.p1 / sr.rate_multiplier + sr.p2
    expected_duration = 30_000 * time_per_event / canonical_per_event
    total = stats.revenue_advantage[-1, 0]
    assert total == pytest.approx(expected_duration, rel=0.03)


def test_simulate_many_thread_invariant(merged_foundry):
    ep = EpochModel(blocks_per_epoch=250)
    cfg = SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=2)
    serial = simulate_many(cfg, 4, threads=1)
    threaded = simulate_many(cfg, 4, threads=4)
    for a, b in zip(serial, threaded):
        assert a.adversary_reward_share == b.adversary_reward_share
        assert np.array_equal(a.revenue_advantage, b.revenue_advantage)


def test_simulate_many_replicas_differ(merged_foundry):
    ep = EpochModel(blocks_per_epoch=250)
    cfg = SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=2)
    runs = simulate_many(cfg, 3)
    shares = {r.adversary_reward_share for r in runs}
    assert len(shares) == 3


# -- revenue-advantage trajectories --------------------------------------------------


def test_trajectory_withholding_dips_then_recovers(merged_foundry):
    ep = EpochModel(blocks_per_epoch=500)
    cfg = SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=6)
    tr = revenue_advantage_trajectory(cfg, replicas=8)
    assert tr.first_epoch_min < -5.0
    assert tr.first_epoch_min_time <= tr.first_epoch_duration
    assert tr.zero_crossing_time is not None
    assert tr.zero_crossing_time > tr.first_epoch_min_time
    assert tr.final_advantage > 0.0


def test_trajectory_active_power_never_recovers(merged_foundry):
    ep = EpochModel(blocks_per_epoch=500)
    cfg = SimConfig(
        merged_foundry, strategy="pi_selfish", epoch=ep, horizon=6, dam_mode="active_power"
    )
    tr = revenue_advantage_trajectory(cfg, replicas=8)
    assert tr.first_epoch_min < -5.0
    assert tr.zero_crossing_time is None
    assert tr.final_advantage < 0.0


def test_trajectory_bribery_dips_then_recovers():
    pools = load_pool_file(
        bundled_pool_file("bitcoin_pools_2024_merged.json"), adversary="Unknown"
    )
    ep = EpochModel(blocks_per_epoch=500)
    tr = revenue_advantage_trajectory(
        SimConfig(pools, strategy="bribery", epoch=ep, horizon=6), replicas=8
    )
    assert tr.first_epoch_min < 0.0
    assert tr.zero_crossing_time is not None
    assert tr.final_advantage > 0.0


def test_trajectory_honest_is_identically_zero(merged_foundry):
    ep = EpochModel(blocks_per_epoch=300)
    tr = revenue_advantage_trajectory(
        SimConfig(merged_foundry, strategy="honest", epoch=ep, horizon=3), replicas=2
    )
    assert np.all(tr.points[:, 1] == 0.0)
    assert tr.first_epoch_min == 0.0
    assert tr.zero_crossing_time is None


def test_trajectory_warns_on_short_horizon(merged_foundry):
    ep = EpochModel(blocks_per_epoch=250)
    with pytest.warns(HorizonWarning):
        revenue_advantage_trajectory(
            SimConfig(merged_foundry, strategy="pi_selfish", epoch=ep, horizon=2)
        )


def test_trajectory_rejects_uncovered_strategies(three_targets):
    pools, targets = three_targets
    with pytest.raises(ValidationError):
        revenue_advantage_trajectory(
            SimConfig(pools, strategy="undercut", targets=targets)
        )


# -- stats record --------------------------------------------------------------------


def test_stats_shape_contract(merged_foundry):
    stats = reward_share_mc(SimConfig(merged_foundry, strategy="honest"), transitions=50_000)
    assert isinstance(stats, SimStats)
    assert stats.epoch_durations.shape == (0,)
    assert stats.revenue_advantage.shape == (0, 2)
    assert stats.rng_draws >= 50_000


def test_default_seed_is_pinned():
    assert DEFAULT_SEED == 0xC0FFEE
