"""Seeded Monte Carlo simulation of the attack strategies, with difficulty retargeting.

The simulator draws block winners one event at a time and feeds them through a
small per-strategy automaton: each (state, winner) pair says which state comes
next, how many canonical blocks the event settles, how many of those are the
adversary's, what bribes the adversary pays, and how many blocks get orphaned.
The automata are per-winner decompositions of the same reward chains the
closed-form modules are built on, so a simulated reward share is an
independent route to the analytic numbers, not a re-evaluation of them.

Time is modelled as exponential gaps between events.  The base event rate is
block_rate / difficulty, scaled by a per-state multiplier (the distraction
attack raises the event rate while the easier side puzzle is live).  Every
blocks_per_epoch settled canonical blocks the difficulty retargets via
dam_update; an event that settles two blocks can straddle an epoch boundary,
in which case the first block closes the old epoch and the second opens the
new one.

Two engines share the automata:

* simulate() walks a single trajectory sequentially, tracking wall-clock
  time, epoch durations and the cumulative revenue advantage over the
  expected honest counterfactual alpha_a * block_rate * t (expected value
  rather than a coupled honest run; this removes counterfactual noise from
  the advantage curve).
* reward_share_mc() runs many replicas in lockstep with vectorised draws.
  It ignores time entirely, which is legitimate because the reward share is
  a per-canonical-block ratio; it exists to pile up transition counts
  cheaply for tight cross-validation tolerances.

Determinism: every run is a pure function of its seed.  Replicated runs
spawn child seeds from numpy's SeedSequence and reduce results in list
order, so thread count never changes the numbers.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from powplay.bribery import TargetPartition
from powplay.distraction import DistractionParams, scenario_rates
from powplay.errors import ValidationError
from powplay.model import AttackParams, EpochModel, PoolSet

DEFAULT_SEED = 0xC0FFEE

STRATEGIES = (
    "honest",
    "pi_selfish",
    "bribery",
    "undercut",
    "mdp_policy",
    "distraction",
)

# sequential engine draws uniforms and exponentials in fixed-size blocks;
# the size is a constant so chunking can never change a seeded run
_CHUNK = 4096


class HorizonWarning(UserWarning):
    """The requested horizon is too short for the statistic it feeds."""


@dataclass(frozen=True)
class SimStats:
    """Summary of one simulation run.

    revenue_advantage rows are (time, cumulative advantage in block-reward
    units); empty when the run did not collect a trajectory.  rng_draws
    counts the random variates generated, over-draw from chunking included.
    """

    adversary_reward_share: float
    orphan_count: int
    epoch_durations: np.ndarray
    revenue_advantage: np.ndarray
    rng_draws: int


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs; validation happens here, engines trust it.

    pools may be None only for the distraction strategy, whose population is
    carried by the DistractionParams power split.  targets=None lets the
    bribery and undercut strategies pick targets with TargetPartition.auto.
    policy=None makes mdp_policy solve for the optimal policy first (slow;
    pass a solved policy when running several horizons on one model).
    """

    pools: PoolSet | None
    strategy: str = "honest"
    params: AttackParams = field(default_factory=AttackParams)
    epoch: EpochModel = field(default_factory=EpochModel)
    horizon: int = 10
    horizon_unit: str = "epochs"
    seed: int = DEFAULT_SEED
    dam_mode: str = "canonical_only"
    targets: tuple[int, ...] | None = None
    fork_cap: int = 8
    policy: Mapping | None = None
    distraction: DistractionParams | None = None
    puzzle_choice: str = "mini_pow"
    collect_trajectory: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ValidationError(f"horizon must be a positive int, got {self.horizon!r}")
        if self.horizon_unit not in ("epochs", "blocks"):
            raise ValidationError("horizon_unit must be 'epochs' or 'blocks'")
        if self.dam_mode not in ("canonical_only", "active_power"):
            raise ValidationError(
                f"dam_mode must be 'canonical_only' or 'active_power', got {self.dam_mode!r}"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed must be a non-negative int")
        if self.strategy == "distraction":
            if self.distraction is None:
                raise ValidationError("distraction strategy needs DistractionParams")
            if self.puzzle_choice not in ("mini_pow", "bitcoin"):
                raise ValidationError(f"unknown puzzle_choice {self.puzzle_choice!r}")
            return
        if self.pools is None:
            raise ValidationError(f"strategy {self.strategy!r} needs a pool set")
        if self.pools.adversary is None:
            raise ValidationError("the pool set must designate an adversary")
        if self.pools.adversary_share <= 0.0 and self.strategy != "honest":
            raise ValidationError("attack strategies need a positive adversary share")
        if self.strategy == "mdp_policy" and self.fork_cap < 2:
            raise ValidationError("fork_cap must be at least 2")


@dataclass(frozen=True)
class TrajectoryResult:
    """Revenue-advantage curve, averaged pointwise over replicas.

    points rows are (mean time, mean advantage) per event index.  The
    zero_crossing_time is the first time the mean curve returns to >= 0
    after its global minimum, i.e. after the drawdown trough; None when the
    curve never recovers within the horizon (or never dips below zero).
    """

    points: np.ndarray
    first_epoch_min: float
    first_epoch_min_time: float
    zero_crossing_time: float | None
    first_epoch_duration: float
    replicas: int

    @property
    def final_advantage(self) -> float:
        return float(self.points[-1, 1])


# -- difficulty adjustment -----------------------------------------------------------


def dam_update(
    epoch_duration: float,
    counts: tuple[int, int],
    dam_mode: str = "canonical_only",
    epoch: EpochModel | None = None,
    difficulty: float = 1.0,
) -> float:
    """One difficulty retarget after an epoch of (canonical, orphaned) blocks.

    canonical_only mimics Bitcoin: difficulty scales by expected over actual
    epoch duration, counting canonical blocks only.  active_power also
    charges for orphaned blocks, which pins the total block-production rate
    instead of the canonical one: a fork-heavy attacker then cannot enjoy a
    post-retarget speedup paid for by the blocks it discarded.
    """
    if epoch is None:
        epoch = EpochModel()
    canonical, orphaned = counts
    if canonical <= 0:
        raise ValidationError("an epoch must settle at least one canonical block")
    if orphaned < 0:
        raise ValidationError("orphan count cannot be negative")
    if epoch_duration <= 0.0:
        raise ValidationError(f"epoch duration must be positive, got {epoch_duration!r}")
    if difficulty <= 0.0:
        raise ValidationError("difficulty must be positive")
    if dam_mode == "canonical_only":
        produced = canonical
    elif dam_mode == "active_power":
        produced = canonical + orphaned
    else:
        raise ValidationError(f"unknown dam_mode {dam_mode!r}")
    expected_duration = produced / epoch.block_rate
    return difficulty * expected_duration / epoch_duration


# -- per-strategy automata -----------------------------------------------------------


@dataclass
class _Automaton:
    """Per-winner transition tables shared by both engines.

    Row s of winner_p gives the winner-column probabilities while in state s
    (columns: non-adversary pools in PoolSet.others() order, adversary last;
    the distraction automaton uses the four power-split categories instead).
    rate[s] multiplies the base event rate in state s.
    """

    winner_p: np.ndarray
    rate: np.ndarray
    next_state: np.ndarray
    settled: np.ndarray
    attacker: np.ndarray
    bribe: np.ndarray
    orphans: np.ndarray
    alpha_a: float

    def __post_init__(self):
        S, W = self.winner_p.shape
        assert self.next_state.shape == (S, W)
        assert np.all(self.winner_p >= -1e-15)
        assert np.allclose(self.winner_p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all((self.next_state >= 0) & (self.next_state < S))
        assert np.all(self.settled >= self.attacker)
        assert np.all(self.attacker >= 0) and np.all(self.bribe >= -1e-12)
        assert np.all(self.orphans >= 0) and np.all(self.rate > 0)

    @property
    def n_states(self) -> int:
        return self.winner_p.shape[0]


def _empty_tables(n_states: int, n_win: int):
    return (
        np.zeros((n_states, n_win), dtype=np.int64),
        np.zeros((n_states, n_win)),
        np.zeros((n_states, n_win)),
        np.zeros((n_states, n_win)),
        np.zeros((n_states, n_win)),
    )


def _honest_automaton(pools: PoolSet) -> _Automaton:
    """Single state; every block settles immediately for its miner."""
    others = pools.others()
    shares = np.array([pools.pools[j].share for j in others])
    a = pools.adversary_share
    W = len(others) + 1
    nxt, settled, attacker, bribe, orphans = _empty_tables(1, W)
    settled[0, :] = 1.0
    attacker[0, -1] = 1.0
    return _Automaton(
        winner_p=np.append(shares, a).reshape(1, W),
        rate=np.ones(1),
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=a,
    )


def _selfish_automaton(pools: PoolSet, params: AttackParams) -> _Automaton:
    """Block withholding against petty-compliant pools.

    States: 0 no fork, 1 one hidden block, 2 two-or-more hidden (the lead
    beyond two is trickle-published, settling one adversary block per win),
    and one tie state per rival pool so the owner of the public block is
    remembered: the owner keeps mining its own fork, everyone else takes the
    sweetener and mines the adversary's side.
    """
    others = pools.others()
    shares = np.array([pools.pools[j].share for j in others])
    a = pools.adversary_share
    eps = params.epsilon
    m = len(others)
    W = m + 1
    S = 3 + m
    nxt, settled, attacker, bribe, orphans = _empty_tables(S, W)

    # state 0: adversary hides its block, anyone else settles one
    nxt[0, -1] = 1
    nxt[0, :m] = 0
    settled[0, :m] = 1.0
    # state 1: adversary extends the hidden lead; rival j forces a tie it owns
    nxt[1, -1] = 2
    for j in range(m):
        nxt[1, j] = 3 + j
    # state 2: adversary trickles one block per win; a rival block is overridden
    nxt[2, -1] = 2
    settled[2, -1] = 1.0
    attacker[2, -1] = 1.0
    nxt[2, :m] = 0
    settled[2, :m] = 2.0
    attacker[2, :m] = 2.0
    orphans[2, :m] = 1.0
    # tie states: two public blocks race, the next block decides
    for j in range(m):
        s = 3 + j
        nxt[s, :] = 0
        settled[s, :] = 2.0
        orphans[s, :] = 1.0
        attacker[s, -1] = 2.0
        attacker[s, :m] = 1.0
        attacker[s, j] = 0.0
        bribe[s, :m] = eps
        bribe[s, j] = 0.0

    return _Automaton(
        winner_p=np.tile(np.append(shares, a), (S, 1)),
        rate=np.ones(S),
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=a,
    )


def _partition_for(config: SimConfig) -> TargetPartition:
    pools = config.pools
    if config.targets is not None:
        return TargetPartition(pools, tuple(config.targets))
    return TargetPartition.auto(pools, config.params.epsilon)


def _bribery_automaton(pools: PoolSet, partition: TargetPartition, params: AttackParams) -> _Automaton:
    """Bounty-funded orphaning, per-winner view of the bribery reward chain.

    States: idle, then per target t a standing-target state s1(t) and a
    rival-race state s2(t), laid out exactly like the chain so the two
    routes stay comparable state by state.
    """
    others = pools.others()
    shares = np.array([pools.pools[j].share for j in others])
    a = pools.adversary_share
    eps = params.epsilon
    m = len(others)
    W = m + 1
    n = len(partition.targets)
    col = {pool: c for c, pool in enumerate(others)}
    tcols = [col[p] for p in partition.targets]
    bs = partition.target_shares
    s1 = lambda t: 1 + t  # noqa: E731
    s2 = lambda t: 1 + n + t  # noqa: E731
    S = 1 + 2 * n
    nxt, settled, attacker, bribe, orphans = _empty_tables(S, W)

    # idle: adversary and bystanders settle one; a target block opens an attack
    settled[0, :] = 1.0
    attacker[0, -1] = 1.0
    for t, c in enumerate(tcols):
        nxt[0, c] = s1(t)
        settled[0, c] = 0.0
    for t, c in enumerate(tcols):
        bt = bs[t]
        # target standing: adversary buries it, the owner renews it, any
        # other block becomes the bounty-funded rival (bounty paid at once)
        st = s1(t)
        nxt[st, :] = s2(t)
        bribe[st, :] = bt + eps
        nxt[st, -1] = 0
        settled[st, -1] = 2.0
        attacker[st, -1] = 1.0
        bribe[st, -1] = 0.0
        nxt[st, c] = st
        settled[st, c] = 1.0
        bribe[st, c] = 0.0
        # rival standing: any non-owner block settles the race against the
        # owner (epsilon to the settler unless the adversary mined it);
        # the owner can rescue its block, which re-opens a fresh target
        sr = s2(t)
        nxt[sr, :] = 0
        settled[sr, :] = 2.0
        bribe[sr, :] = eps
        orphans[sr, :] = 1.0
        attacker[sr, -1] = 1.0
        bribe[sr, -1] = 0.0
        nxt[sr, c] = st
        settled[sr, c] = 1.0
        bribe[sr, c] = 0.0
        for u, cu in enumerate(tcols):
            if u != t:
                nxt[sr, cu] = s1(u)
                settled[sr, cu] = 1.0

    return _Automaton(
        winner_p=np.tile(np.append(shares, a), (S, 1)),
        rate=np.ones(S),
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=a,
    )


def _undercut_automaton(pools: PoolSet, partition: TargetPartition, params: AttackParams) -> _Automaton:
    """Self-mined rival racing, per-winner view of the undercut reward chain."""
    others = pools.others()
    shares = np.array([pools.pools[j].share for j in others])
    a = pools.adversary_share
    eps = params.epsilon
    m = len(others)
    W = m + 1
    n = len(partition.targets)
    col = {pool: c for c, pool in enumerate(others)}
    tcols = [col[p] for p in partition.targets]
    s1 = lambda t: 1 + t  # noqa: E731
    s2 = lambda t: 1 + n + t  # noqa: E731
    S = 1 + 2 * n
    nxt, settled, attacker, bribe, orphans = _empty_tables(S, W)

    settled[0, :] = 1.0
    attacker[0, -1] = 1.0
    for t, c in enumerate(tcols):
        nxt[0, c] = s1(t)
        settled[0, c] = 0.0
    for t, c in enumerate(tcols):
        # target standing: the adversary mines the rival itself; a bystander
        # block settles the target outright; a target block (the owner's own
        # included) settles it and opens the next target
        st = s1(t)
        nxt[st, :] = 0
        settled[st, :] = 2.0
        nxt[st, -1] = s2(t)
        settled[st, -1] = 0.0
        for u, cu in enumerate(tcols):
            nxt[st, cu] = s1(u)
            settled[st, cu] = 1.0
        # rival standing: everyone but the owner mines the sweetened rival
        # side, so the adversary's block settles unless the owner rescues
        sr = s2(t)
        nxt[sr, :] = 0
        settled[sr, :] = 2.0
        attacker[sr, :] = 1.0
        bribe[sr, :] = eps
        orphans[sr, :] = 1.0
        attacker[sr, -1] = 2.0
        bribe[sr, -1] = 0.0
        nxt[sr, c] = st
        settled[sr, c] = 1.0
        attacker[sr, c] = 0.0
        bribe[sr, c] = 0.0
        for u, cu in enumerate(tcols):
            if u != t:
                nxt[sr, cu] = s1(u)
                settled[sr, cu] = 1.0

    return _Automaton(
        winner_p=np.tile(np.append(shares, a), (S, 1)),
        rate=np.ones(S),
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=a,
    )


def _mdp_automaton(config: SimConfig) -> _Automaton:
    """Fixed-policy execution of a solved fork-race MDP.

    Builds the model for the configured pools and fork cap, then freezes the
    chosen action's edges into per-winner tables.  Solving happens here when
    no policy is supplied, which is the expensive path.
    """
    from powplay.mdp import ADVERSARY, build_mdp, solve_reward_share

    model = build_mdp(config.pools, config.params, fork_cap=config.fork_cap)
    policy = config.policy
    if policy is None:
        policy = solve_reward_share(model).policy
    n = model.state_count
    W = len(model.shares) + 1
    nxt = np.full((n, W), -1, dtype=np.int64)
    _, settled, attacker, bribe, orphans = _empty_tables(n, W)
    for s, key in enumerate(model.states):
        act = policy.get(key)
        if act is None:
            raise ValidationError(f"policy does not cover state {key}")
        row = model.actions[s]
        try:
            a_slot = int(model.state_ptr[s]) + row.index(act)
        except ValueError:
            raise ValidationError(f"action {act} infeasible in state {key}")
        e0 = int(model.action_ptr[a_slot])
        e1 = (
            int(model.action_ptr[a_slot + 1])
            if a_slot + 1 < len(model.action_ptr)
            else len(model.edge_prob)
        )
        for e in range(e0, e1):
            w = int(model.edge_winner[e])
            c = W - 1 if w == ADVERSARY else w
            nxt[s, c] = model.edge_dst[e]
            settled[s, c] = model.edge_settled[e]
            attacker[s, c] = model.edge_reward[e]
            bribe[s, c] = model.edge_bribe[e]
            orphans[s, c] = model.edge_orphans[e]
    assert np.all(nxt >= 0), "every state needs an edge for every winner"
    p = np.append(model.shares, model.alpha_a)
    p = p / p.sum()
    return _Automaton(
        winner_p=np.tile(p, (n, 1)),
        rate=np.ones(n),
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=model.alpha_a,
    )


def _distraction_automaton(dparams: DistractionParams, choice: str) -> _Automaton:
    """Hidden-block puzzle sale with per-state event rates.

    Winner columns are the power-split categories (deciding pool, compliant
    set, non-compliant set, adversary).  States: 0 quiet, 1 puzzle live
    (event rate scaled by the extra mini-puzzle hash), then one race state
    per possible owner of the defiant public block: the non-compliant set
    always, the deciding pool too when it keeps mining standard blocks.
    While racing, every non-owner mines the sweetened adversarial side; the
    owner defends its own block.
    """
    sr = scenario_rates(dparams.split, dparams.d_ratio, choice)
    split = dparams.split
    raw = np.array([split.alpha_i, split.alpha_c, split.alpha_nc, split.alpha_a])
    live = np.array(
        [sr.alpha_i_prime, sr.alpha_c_prime, sr.alpha_nc_prime, sr.alpha_a_prime]
    )
    br2, br3 = dparams.br2, dparams.br3
    race_owner_cols = [2] if choice == "mini_pow" else [2, 0]
    S = 2 + len(race_owner_cols)
    W = 4
    nxt, settled, attacker, bribe, orphans = _empty_tables(S, W)
    winner_p = np.tile(raw, (S, 1))
    winner_p[1] = live
    rate = np.ones(S)
    rate[1] = sr.rate_multiplier

    # quiet: the adversary hides its block and opens the puzzle sale
    settled[0, :] = 1.0
    nxt[0, -1] = 1
    settled[0, -1] = 0.0
    # live: adversary wins trickle-publish one hidden block and keep selling;
    # a solved puzzle anchors the hidden block (puzzle reward paid) and ends
    # the sale; a standard block elsewhere forces a race and the hidden
    # block goes public to contest it
    nxt[1, -1] = 1
    settled[1, -1] = 1.0
    attacker[1, -1] = 1.0
    for c in (0, 1):  # deciding pool and compliant set
        nxt[1, c] = 0
        settled[1, c] = 1.0
        attacker[1, c] = 1.0
        bribe[1, c] = br2
    for k, oc in enumerate(race_owner_cols):
        nxt[1, oc] = 2 + k
        settled[1, oc] = 0.0
        attacker[1, oc] = 0.0
        bribe[1, oc] = 0.0
    # races: next block anywhere resolves; the winner's fork settles both
    # of its blocks, the losing block is orphaned
    for k, oc in enumerate(race_owner_cols):
        s = 2 + k
        nxt[s, :] = 0
        settled[s, :] = 2.0
        orphans[s, :] = 1.0
        attacker[s, :] = 1.0
        bribe[s, :] = br3
        attacker[s, -1] = 2.0
        bribe[s, -1] = 0.0
        attacker[s, oc] = 0.0
        bribe[s, oc] = 0.0

    return _Automaton(
        winner_p=winner_p,
        rate=rate,
        next_state=nxt,
        settled=settled,
        attacker=attacker,
        bribe=bribe,
        orphans=orphans,
        alpha_a=split.alpha_a,
    )


def build_automaton(config: SimConfig) -> _Automaton:
    """Construct the per-winner transition tables for a validated config."""
    if config.strategy == "honest":
        return _honest_automaton(config.pools)
    if config.strategy == "pi_selfish":
        return _selfish_automaton(config.pools, config.params)
    if config.strategy == "bribery":
        return _bribery_automaton(config.pools, _partition_for(config), config.params)
    if config.strategy == "undercut":
        return _undercut_automaton(config.pools, _partition_for(config), config.params)
    if config.strategy == "mdp_policy":
        return _mdp_automaton(config)
    if config.strategy == "distraction":
        return _distraction_automaton(config.distraction, config.puzzle_choice)
    raise ValidationError(f"unknown strategy {config.strategy!r}")


# -- sequential engine ---------------------------------------------------------------


def simulate(config: SimConfig) -> SimStats:
    """Run one seeded trajectory until the canonical-block horizon is hit.

    The horizon is horizon epochs (of epoch.blocks_per_epoch canonical
    blocks each) or horizon canonical blocks.  The advantage curve compares
    cumulative adversary revenue, net of bribes, against the expected
    honest take alpha_a * block_rate * block_reward * t; for the honest
    strategy that comparison is against itself, so the curve is pinned to
    zero rather than left as martingale noise.
    """
    auto = build_automaton(config)
    ep = config.epoch
    L = ep.blocks_per_epoch
    lam = ep.block_rate
    target = config.horizon * L if config.horizon_unit == "epochs" else config.horizon

    # the inner loop runs once per event; plain lists plus bisect beat numpy
    # row indexing at this granularity, so visited-state rows are converted
    # lazily (MDP automata have too many states to convert up front)
    cdf = np.cumsum(auto.winner_p, axis=1)
    cdf[:, -1] = 1.0
    rows: dict[int, tuple] = {}

    def row(s: int) -> tuple:
        r = rows.get(s)
        if r is None:
            r = (
                cdf[s].tolist(),
                auto.next_state[s].tolist(),
                auto.settled[s].tolist(),
                auto.attacker[s].tolist(),
                auto.bribe[s].tolist(),
                auto.orphans[s].tolist(),
                float(lam * auto.rate[s]),
            )
            rows[s] = r
        return r

    rng = np.random.default_rng(config.seed)
    u = rng.random(_CHUNK)
    g = rng.standard_exponential(_CHUNK)
    pos = 0
    draws = 2 * _CHUNK

    honest_run = config.strategy == "honest"
    alpha_a = auto.alpha_a
    collect = config.collect_trajectory
    times: list[float] = []
    advs: list[float] = []
    durations: list[float] = []

    state = 0
    t = 0.0
    difficulty = 1.0
    revenue = 0.0
    canonical = 0
    canon_epoch = 0
    orphan_epoch = 0
    orphan_total = 0
    epoch_start = 0.0

    while canonical < target:
        if pos == _CHUNK:
            u = rng.random(_CHUNK)
            g = rng.standard_exponential(_CHUNK)
            pos = 0
            draws += 2 * _CHUNK
        rcdf, rnxt, rset, ratt, rbri, rorp, erate = row(state)
        w = bisect_right(rcdf, u[pos])
        t += g[pos] * difficulty / erate
        pos += 1

        nb = int(rset[w])
        orp = int(rorp[w])
        revenue += ratt[w] - rbri[w]
        orphan_epoch += orp
        orphan_total += orp
        if collect:
            times.append(t)
            advs.append(0.0 if honest_run else revenue - alpha_a * lam * t)
        for _ in range(nb):
            canonical += 1
            canon_epoch += 1
            if canon_epoch == L:
                duration = t - epoch_start
                durations.append(duration)
                difficulty = dam_update(
                    duration, (L, orphan_epoch), config.dam_mode, ep, difficulty
                )
                epoch_start = t
                canon_epoch = 0
                orphan_epoch = 0
            if canonical == target:
                break
        state = int(rnxt[w])

    if collect:
        trajectory = np.column_stack([times, advs])
    else:
        trajectory = np.empty((0, 2))
    return SimStats(
        adversary_reward_share=revenue / canonical,
        orphan_count=orphan_total,
        epoch_durations=np.array(durations),
        revenue_advantage=trajectory,
        rng_draws=draws,
    )


def simulate_many(
    config: SimConfig, replicas: int, threads: int | None = None
) -> list[SimStats]:
    """Independent replicas under spawned child seeds, in deterministic order.

    Results depend only on config.seed and replicas, never on threads: seeds
    come from SeedSequence.spawn and the output list keeps spawn order.
    """
    if replicas < 1:
        raise ValidationError("replicas must be at least 1")
    ss = np.random.SeedSequence(config.seed)
    children = ss.spawn(replicas)
    configs = [
        replace(config, seed=int(c.generate_state(1, np.uint64)[0])) for c in children
    ]
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(simulate, configs))
    return [simulate(c) for c in configs]


# -- lockstep engine -----------------------------------------------------------------


def reward_share_mc(
    config: SimConfig,
    transitions: int = 10_000_000,
    replicas: int = 1024,
    burn_in: int = 300,
) -> SimStats:
    """Reward share over many lockstep replicas; time and difficulty ignored.

    The share is a ratio per canonical block, so event times cancel out of
    it; skipping the clock lets ten million transitions run as a few
    thousand vectorised steps.  burn_in steps are walked but not counted,
    which removes the bias of always starting in the idle state.
    """
    if transitions < 1:
        raise ValidationError("transitions must be positive")
    if replicas < 1 or burn_in < 0:
        raise ValidationError("need replicas >= 1 and burn_in >= 0")
    auto = build_automaton(config)
    cdf = np.cumsum(auto.winner_p, axis=1)
    cdf[:, -1] = 1.0
    steps = max(1, math.ceil(transitions / replicas))
    rng = np.random.default_rng(config.seed)
    state = np.zeros(replicas, dtype=np.int64)
    settled = 0.0
    attacker = 0.0
    bribes = 0.0
    orphans = 0.0
    for step in range(burn_in + steps):
        u = rng.random(replicas)
        w = (cdf[state] < u[:, None]).sum(axis=1)
        if step >= burn_in:
            settled += float(auto.settled[state, w].sum())
            attacker += float(auto.attacker[state, w].sum())
            bribes += float(auto.bribe[state, w].sum())
            orphans += float(auto.orphans[state, w].sum())
        state = auto.next_state[state, w]
    if settled <= 0:
        raise ValidationError("no blocks settled; transitions too low")
    return SimStats(
        adversary_reward_share=(attacker - bribes) / settled,
        orphan_count=int(orphans),
        epoch_durations=np.array([]),
        revenue_advantage=np.empty((0, 2)),
        rng_draws=replicas * (burn_in + steps),
    )


def distraction_occupancy_mc(
    dparams: DistractionParams,
    choice: str = "mini_pow",
    events: int = 1_000_000,
    replicas: int = 1024,
    burn_in: int = 300,
    seed: int = DEFAULT_SEED,
) -> np.ndarray:
    """Per-event state occupancy (quiet, live, racing) from lockstep replicas.

    Race sub-states (one per possible defiant-block owner) are merged, so
    the result lines up with the three-state occupancy the closed forms
    report.
    """
    if events < 1:
        raise ValidationError("events must be positive")
    auto = _distraction_automaton(dparams, choice)
    cdf = np.cumsum(auto.winner_p, axis=1)
    cdf[:, -1] = 1.0
    S = auto.n_states
    steps = max(1, math.ceil(events / replicas))
    rng = np.random.default_rng(seed)
    state = np.zeros(replicas, dtype=np.int64)
    counts = np.zeros(S, dtype=np.int64)
    for step in range(burn_in + steps):
        if step >= burn_in:
            counts += np.bincount(state, minlength=S)
        u = rng.random(replicas)
        w = (cdf[state] < u[:, None]).sum(axis=1)
        state = auto.next_state[state, w]
    total = counts.sum()
    return np.array(
        [counts[0] / total, counts[1] / total, counts[2:].sum() / total]
    )


# -- profit-lag trajectories ---------------------------------------------------------

_TRAJECTORY_STRATEGIES = ("honest", "pi_selfish", "bribery", "mdp_policy")


def revenue_advantage_trajectory(
    config: SimConfig, replicas: int = 1, threads: int | None = None
) -> TrajectoryResult:
    """Mean revenue-advantage curve and its profit-lag summary statistics.

    Replica curves are averaged per event index (both coordinates), which
    keeps the early-epoch shape while shrinking path noise; single runs of
    a slowly-losing attack can end an epoch on either side of zero, the
    mean curve cannot.  The zero crossing is searched only after the
    curve's global minimum, so launch-time jitter around zero is not
    reported as recovery.
    """
    if config.strategy not in _TRAJECTORY_STRATEGIES:
        raise ValidationError(
            f"profit-lag trajectories cover {_TRAJECTORY_STRATEGIES}, "
            f"not {config.strategy!r}"
        )
    epochs = (
        config.horizon
        if config.horizon_unit == "epochs"
        else config.horizon // config.epoch.blocks_per_epoch
    )
    if epochs < 1:
        raise ValidationError("the horizon must cover at least one difficulty epoch")
    if epochs < 3:
        warnings.warn(
            "fewer than three epochs: the post-retarget recovery may not fit "
            "in the horizon",
            HorizonWarning,
            stacklevel=2,
        )
    config = replace(config, collect_trajectory=True)
    runs = simulate_many(config, replicas, threads)
    n = min(r.revenue_advantage.shape[0] for r in runs)
    if n == 0:
        raise ValidationError("no events recorded; horizon too short")
    times = np.mean([r.revenue_advantage[:n, 0] for r in runs], axis=0)
    curve = np.mean([r.revenue_advantage[:n, 1] for r in runs], axis=0)
    first_duration = float(np.mean([r.epoch_durations[0] for r in runs]))

    in_first = times <= first_duration
    if not in_first.any():
        in_first[0] = True
    k_min = int(np.argmin(np.where(in_first, curve, np.inf)))
    first_epoch_min = float(curve[k_min])
    first_epoch_min_time = float(times[k_min])

    zero_crossing = None
    if curve.min() < 0.0:
        trough = int(np.argmin(curve))
        after = np.flatnonzero(curve[trough:] >= 0.0)
        if after.size:
            zero_crossing = float(times[trough + after[0]])
    return TrajectoryResult(
        points=np.column_stack([times, curve]),
        first_epoch_min=first_epoch_min,
        first_epoch_min_time=first_epoch_min_time,
        zero_crossing_time=zero_crossing,
        first_epoch_duration=first_duration,
        replicas=replicas,
    )
