"""powplay: incentive analysis of proof-of-work mining-power destruction attacks.

Cross-validated implementations of block-withholding (selfish mining),
bribery, undercutting and mining-power distraction attacks on Nakamoto-style
chains.  Every headline number is reachable by at least two independent
routes: closed-form analytics, an optimal-strategy MDP solver, and a seeded
Monte Carlo simulator with a difficulty-adjustment model.
"""

from powplay.model import (
    AttackParams,
    EpochModel,
    Pool,
    PoolSet,
    ValidationError,
    bundled_pool_file,
    centralization_factor,
    load_pool_file,
    pool_advantage,
    residual_centralization_factor,
)

__version__ = "0.1.0"

__all__ = [
    "AttackParams",
    "EpochModel",
    "Pool",
    "PoolSet",
    "ValidationError",
    "bundled_pool_file",
    "centralization_factor",
    "load_pool_file",
    "pool_advantage",
    "residual_centralization_factor",
    "__version__",
]
