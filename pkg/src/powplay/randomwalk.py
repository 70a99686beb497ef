"""Biased-walk analytics for two-fork races.

A fork race between one pool with share ``alpha`` and everyone else is a
monotone lattice path: the x axis counts the pool's blocks, the y axis counts
everyone else's.  Each step moves right with probability ``alpha``.  The
quantities here answer two questions a profit-tracking pool faces when its
own fork has fallen behind:

* how likely is it ever to get ``r`` blocks ahead of the rest
  (:func:`prob_never_reach` gives the complement), and
* at what share does sticking with a fork that is one block behind a
  two-block rival beat switching (:func:`abandon_threshold`).

The generating-function sums over first-passage path counts
(:func:`g_series`, :func:`f_series`) are evaluated from their closed forms;
series summation only appears in the test suite's enumeration oracle.

Notation used throughout: paths start at (0,0); ``G_s`` counts paths to
(s, s+d) that first touch the line y = x+d there while never touching
y = x-2 earlier; ``F_s`` counts paths to (s+2, s) that first touch y = x-2
there while never touching y = x+d earlier.  Series are in powers of
x = alpha*(1-alpha).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from powplay.errors import ConvergenceError, ValidationError

__all__ = [
    "SeriesResult",
    "prob_never_reach",
    "g_series",
    "f_series",
    "f_series_weighted",
    "fork_abandon_returns",
    "abandon_threshold",
    "walk_never_reach_mc",
]


@dataclass(frozen=True)
class SeriesResult:
    """A generating-function evaluation: plain sum and s-weighted sum."""

    sum: float
    weighted_sum: float


def _check_share(share: float, upper: float = 1.0) -> None:
    if not 0.0 < share < upper:
        raise ValidationError(f"share must be in (0, {upper}), got {share!r}")


def prob_never_reach(share: float, r: int) -> float:
    """Probability a pool with ``share`` never gets ``r`` blocks ahead of the rest.

    The walk's lead changes by +1 with probability ``share`` and -1 otherwise;
    the classic ruin argument gives hit probability (share/(1-share))^r, which
    is 1 for share >= 1/2.  The result is clamped to [0, 1] so it stays a
    probability for shares above one half.
    """
    _check_share(share)
    if r < 1:
        raise ValidationError(f"r must be a positive integer, got {r!r}")
    q = share / (1.0 - share)
    return min(1.0, max(0.0, 1.0 - q**r))


def g_series(share: float, d: int) -> SeriesResult:
    """Sum and s-weighted sum of G_s x^s at x = share*(1-share).

    ``sum`` times (1-share)^d is the probability that the rest of the network
    gets d blocks ahead before the pool ever gets 2 ahead.
    """
    _check_share(share, upper=0.5)
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d!r}")
    a = share
    b = 1.0 - a
    m = d + 2
    pw = b**m - a**m
    total = (1.0 - 2.0 * a) / pw
    weighted = (
        m * a * b * (b ** (m - 1) + a ** (m - 1)) / pw**2
        - 2.0 * a * b / ((1.0 - 2.0 * a) * pw)
    )
    return SeriesResult(total, weighted)


def f_series(share: float, d: int) -> float:
    """Sum of F_s x^s at x = share*(1-share).

    Scaled by share^2 this is the probability that the pool gets 2 blocks
    ahead before the rest gets d ahead; together with the g_series mass the
    two first-passage probabilities cover every walk.
    """
    _check_share(share, upper=0.5)
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d!r}")
    a = share
    b = 1.0 - a
    q = a / b
    return (1.0 - (1.0 - 2.0 * a) / (b * b * (1.0 - q ** (d + 2)))) / (a * a)


def f_series_weighted(share: float, d: int) -> float:
    """s-weighted sum of F_s x^s at x = share*(1-share).

    Obtained as x * d/dx of the f_series closed form; with x = a(1-a) the
    chain rule turns that into a*(1-a)/(1-2a) times the alpha-derivative.
    """
    _check_share(share, upper=0.5)
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d!r}")
    a = share
    b = 1.0 - a
    m = d + 2
    q = a / b
    # f_series = 1/a^2 - B with B = (1-2a) / (a^2 b^2 (1 - q^m))
    B = (1.0 - 2.0 * a) / (a * a * b * b * (1.0 - q**m))
    dB = B * (
        -2.0 / (1.0 - 2.0 * a)
        - 2.0 / a
        + 2.0 / b
        + m * q ** (m - 1) / (b * b * (1.0 - q**m))
    )
    d_sf = -2.0 / a**3 - dB
    return a * b * d_sf / (1.0 - 2.0 * a)


def fork_abandon_returns(share: float, d: int) -> tuple[float, float]:
    """Expected race returns for a pool whose own fork trails 1-to-2.

    The pool's fork is one block long (its own block), the rival fork two.
    ``r1``: expected reward from staying until the race resolves, where the
    pool wins by pulling one ahead and loses once the rival leads by ``d``
    (at which point even a maximally loyal profit-tracking pool must follow
    the longest chain).  ``r2``: expected reward from switching to the rival
    fork immediately, counted over the same race window.  Staying pays iff
    r1 > r2.
    """
    if d < 2:
        raise ValidationError(f"d must be >= 2, got {d!r}")
    _check_share(share, upper=0.5)
    a = share
    sf = f_series(a, d - 1)
    wf = f_series_weighted(a, d - 1)
    g = g_series(a, d - 1)
    a2 = a * a
    r1 = a2 * (3.0 * sf + wf)
    r2 = a2 * (2.0 * sf + wf) + (1.0 - a) ** (d - 1) * g.weighted_sum
    return r1, r2


def abandon_threshold(d: int, tol: float = 1e-6) -> float:
    """Share above which staying on a 1-behind-2 fork beats abandoning it.

    Root of r1 - r2 in (0.01, 0.49) by bisection; below the root a
    profit-tracking pool abandons its own trailing fork.
    """
    if d < 2:
        raise ValidationError(f"d must be >= 2, got {d!r}")

    def diff(a: float) -> float:
        r1, r2 = fork_abandon_returns(a, d)
        return r1 - r2

    lo, hi = 0.01, 0.49
    flo, fhi = diff(lo), diff(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0.0) == (fhi < 0.0):
        raise ConvergenceError(
            f"no sign change of r1 - r2 on ({lo}, {hi}) for d={d}",
            residual=min(abs(flo), abs(fhi)),
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (diff(mid) < 0.0) == (flo < 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _hit_from(q: float, gap: np.ndarray) -> np.ndarray:
    """Exact probability of ever gaining ``gap`` more, clamped for q >= 1."""
    return np.minimum(1.0, q ** gap.astype(np.float64))


def walk_never_reach_mc(
    share: float,
    r: int,
    walks: int = 1_000_000,
    seed: int = 0,
    step_cap: int = 100_000,
    band: int = 30,
    threads: int = 1,
) -> float:
    """Monte Carlo estimate of prob_never_reach, exact in expectation.

    Each walk tracks the pool's lead.  It is absorbed on hitting ``r``
    (counted as a hit) or on falling ``band`` below ``r`` (counted with the
    exact analytic hit probability from there, which keeps the estimator
    unbiased while bounding runtime); walks still alive at ``step_cap`` are
    likewise closed out analytically.  Work is split into fixed chunks with
    independently spawned sub-seeds and reduced in chunk order, so the result
    depends only on (seed, walks), not on thread count.
    """
    _check_share(share)
    if r < 1:
        raise ValidationError(f"r must be a positive integer, got {r!r}")
    if walks < 1:
        raise ValidationError("walks must be positive")
    q = share / (1.0 - share)

    chunk = 1 << 16
    starts = list(range(0, walks, chunk))
    seeds = np.random.SeedSequence(seed).spawn(len(starts))

    def run_chunk(i: int) -> float:
        n = min(chunk, walks - starts[i])
        rng = np.random.default_rng(seeds[i])
        lead = np.zeros(n, dtype=np.int64)
        hit_mass = 0.0
        floor = r - band
        for _ in range(step_cap):
            lead += np.where(rng.random(lead.shape[0]) < share, 1, -1)
            hits = lead >= r
            sunk = lead <= floor
            if hits.any():
                hit_mass += float(np.count_nonzero(hits))
            if sunk.any():
                hit_mass += float(np.sum(_hit_from(q, r - lead[sunk])))
            keep = ~(hits | sunk)
            if not keep.all():
                lead = lead[keep]
            if lead.shape[0] == 0:
                break
        if lead.shape[0]:
            hit_mass += float(np.sum(_hit_from(q, r - lead)))
        return hit_mass

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            masses = list(ex.map(run_chunk, range(len(starts))))
    else:
        masses = [run_chunk(i) for i in range(len(starts))]
    return 1.0 - sum(masses) / walks
