"""Closed-form analysis of one/two-block withholding against profit-tracking pools.

The strategy analysed here withholds up to two blocks: mine secretly, publish
to override once the public chain threatens to catch up, and on an exact tie
publish a matching fork carrying a small sweetener so that every pool not
owning the rival block prefers the withheld one.  Its long-run state lives in
a four-state chain indexed by (withheld blocks, rival blocks):
(0,0), (1,0), (2,0) and the tie (1,1).

All returns are per unit time with difficulty already re-adjusted to the
attack, i.e. canonical blocks arrive at the nominal rate again.  They scale
with block_rate * block_reward of the supplied epoch model.

The dominance condition compares the attacker's residual concentration
factor (how often the rival-block owner itself wins the tie race) against a
threshold in the attacker's share and the sweetener epsilon.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from powplay.errors import ValidationError
from powplay.model import (
    AttackParams,
    EpochModel,
    PoolSet,
    residual_centralization_factor,
)

__all__ = [
    "SelfishStateProbs",
    "DominanceVerdict",
    "AssumptionWarning",
    "STAY_SHARE_THRESHOLD",
    "selfish_state_probs",
    "selfish_profit",
    "selfish_dominance_threshold",
    "is_selfish_dominant",
    "largest_pool_dominates",
]

#: Share above which a pool one block behind a two-block rival keeps mining
#: its own fork (see randomwalk.abandon_threshold(2)); the profit analysis
#: assumes every non-attacking pool sits below this.
STAY_SHARE_THRESHOLD = 0.4302


class AssumptionWarning(UserWarning):
    """A result was computed outside the assumptions backing its derivation."""


@dataclass(frozen=True)
class SelfishStateProbs:
    """Stationary probabilities of the withholding chain's four states."""

    p00: float
    p10: float
    p20: float
    p11: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p00, self.p10, self.p20, self.p11)


def _check_unit(name: str, value: float, lo: float = 0.0, hi: float = 1.0) -> None:
    if not lo < value < hi:
        raise ValidationError(f"{name} must be in ({lo}, {hi}), got {value!r}")


def selfish_state_probs(alpha: float) -> SelfishStateProbs:
    """Stationary distribution of the withholding chain for attacker share alpha."""
    _check_unit("alpha", alpha)
    p00 = (1.0 - alpha) / (1.0 + (1.0 - alpha) ** 2 * alpha)
    p10 = alpha * p00
    p20 = alpha / (1.0 - alpha) * p10
    p11 = (1.0 - alpha) * p10
    return SelfishStateProbs(p00, p10, p20, p11)


def selfish_profit(
    alpha: float,
    beta: float,
    epsilon: float = 0.0,
    epoch: EpochModel | None = None,
) -> float:
    """Post-adjustment per-time profit of the withholding strategy.

    ``beta`` is the attacker's residual concentration factor: the chance the
    tie race is decided by the rival block's own miner.  The bribe term pays
    epsilon exactly when some other pool settles the tie in the attacker's
    favour, which happens with probability (1-alpha-beta) given a tie.

    Honest mining earns alpha * block_rate * block_reward; comparing against
    that is what :func:`is_selfish_dominant` does.
    """
    _check_unit("alpha", alpha)
    _check_unit("beta", beta)
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon!r}")
    epoch = epoch or EpochModel()
    a = alpha
    numer = (
        2.0 * a**4
        - 5.0 * a**3
        + 4.0 * a**2
        + a * (1.0 - a) ** 2 * (1.0 - a - beta) * (1.0 - epsilon)
    )
    return epoch.block_rate * epoch.block_reward * numer / (a**3 - a**2 + 1.0)


def selfish_dominance_threshold(alpha: float, epsilon: float = 0.0) -> float:
    """Residual-factor bound below which withholding beats honest mining.

    At beta equal to this bound the two strategies pay exactly the same;
    with epsilon = 0 it reduces to alpha/(1-alpha).
    """
    _check_unit("alpha", alpha)
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError(f"epsilon must be in [0, 1), got {epsilon!r}")
    return (alpha - epsilon * (1.0 - alpha) ** 2) / ((1.0 - alpha) * (1.0 - epsilon))


@dataclass(frozen=True)
class DominanceVerdict:
    """Outcome of the withholding-vs-honest comparison for one attacker."""

    dominant: bool
    margin: float  # threshold minus residual factor; positive iff dominant
    threshold: float
    residual_factor: float
    assumptions_ok: bool  # every rival pool below STAY_SHARE_THRESHOLD


def is_selfish_dominant(pools: PoolSet, params: AttackParams) -> DominanceVerdict:
    """Decide whether withholding beats honest mining for the designated pool.

    If some rival pool is large enough to fight for its own trailing fork
    (share >= 0.4302), the derivation's premise fails; the verdict is still
    computed but flagged and warned about.
    """
    alpha = pools.adversary_share
    beta = residual_centralization_factor(pools)
    threshold = selfish_dominance_threshold(alpha, params.epsilon)
    ok = all(pools.pools[j].share < STAY_SHARE_THRESHOLD for j in pools.others())
    if not ok:
        warnings.warn(
            "a rival pool holds >= 0.4302 of the power; the dominance "
            "condition is evaluated outside its derivation's assumptions",
            AssumptionWarning,
            stacklevel=2,
        )
    return DominanceVerdict(
        dominant=beta < threshold,
        margin=threshold - beta,
        threshold=threshold,
        residual_factor=beta,
        assumptions_ok=ok,
    )


def largest_pool_dominates(alpha1: float, alpha2: float, epsilon: float = 0.0) -> bool:
    """Whether the largest of two leading pools profits from withholding.

    In a population whose largest pool holds alpha1 and second-largest
    alpha2, the largest pool's residual factor is at most
    alpha2 + epsilon-adjusted slack, giving the sufficient condition
    alpha1/(1-alpha1) > alpha2 + epsilon*(1-alpha1-alpha2).  With epsilon 0
    this always holds, since alpha1 >= alpha2.
    """
    if alpha1 < alpha2:
        raise ValidationError("alpha1 must be the larger share")
    if alpha1 + alpha2 > 1.0 + 1e-12:
        raise ValidationError("two pools cannot hold more than all the power")
    _check_unit("alpha1", alpha1)
    if not 0.0 <= alpha2 < 1.0:
        raise ValidationError(f"alpha2 must be in [0, 1), got {alpha2!r}")
    return alpha1 / (1.0 - alpha1) > alpha2 + epsilon * (1.0 - alpha1 - alpha2)
