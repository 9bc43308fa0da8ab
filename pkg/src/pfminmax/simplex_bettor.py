"""Coin-betting learner over the probability simplex.

One KT bettor per coordinate; the played distribution reweights the prior by
the positive part of each coordinate's bet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_vector, dot, norm_inf
from .errors import ScalingViolation, WealthExhausted

SCALE_TOL = 1e-9
PRIOR_TOL = 1e-12
# L1 mass below this is treated as zero (fallback to the prior)
ZERO_MASS = 1e-300
COIN_SIGNS = ("regret", "literal")


@dataclass
class SimplexBettorState:
    prior: np.ndarray
    coin_sum: np.ndarray
    wealth_gain: np.ndarray
    step: int
    current_w: np.ndarray
    coin_sign: str = "regret"
    clip_coins: bool = True

    @classmethod
    def fresh(cls, prior, coin_sign: str = "regret", clip_coins: bool = True) -> SimplexBettorState:
        prior = as_vector(prior, "prior")
        if np.any(prior <= 0.0):
            raise ValueError("prior must have strictly positive entries")
        if abs(math.fsum(prior) - 1.0) > PRIOR_TOL:
            raise ValueError("prior must sum to 1")
        if coin_sign not in COIN_SIGNS:
            raise ValueError(f"coin_sign must be one of {COIN_SIGNS}, got {coin_sign!r}")
        n = prior.shape[0]
        return cls(
            prior=prior.copy(),
            coin_sum=np.zeros(n),
            wealth_gain=np.zeros(n),
            step=0,
            current_w=np.zeros(n),
            coin_sign=coin_sign,
            clip_coins=clip_coins,
        )

    @classmethod
    def uniform(cls, n: int, **kwargs) -> SimplexBettorState:
        return cls.fresh(np.full(n, 1.0 / n), **kwargs)

    @property
    def wealth(self) -> np.ndarray:
        return 1.0 + self.wealth_gain


def simplex_play(state: SimplexBettorState) -> np.ndarray:
    """Current distribution: prior reweighted by the positive part of the bets."""
    p_hat = state.prior * np.maximum(state.current_w, 0.0)
    mass = math.fsum(p_hat)
    if mass < ZERO_MASS:
        return state.prior.copy()
    return p_hat / mass


def coins(state: SimplexBettorState, ghat_p, p) -> np.ndarray:
    """Truncated per-coordinate coins for loss vector ``ghat_p`` at play ``p``."""
    ghat_p = np.asarray(ghat_p, dtype=np.float64)
    avg = dot(ghat_p, p)
    if state.coin_sign == "regret":
        c = avg - ghat_p
    else:
        c = ghat_p - avg
    return np.where(state.current_w > 0.0, c, np.maximum(c, 0.0))


def simplex_absorb(state: SimplexBettorState, ghat_p, p=None) -> SimplexBettorState:
    """Absorb one loss vector (already divided by its inf-norm bound)."""
    ghat_p = np.asarray(ghat_p, dtype=np.float64)
    if ghat_p.shape != state.prior.shape:
        raise ValueError(f"dimension mismatch: {ghat_p.shape[0]} vs {state.prior.shape[0]}")
    gmax = norm_inf(ghat_p)
    if gmax > 1.0 + SCALE_TOL:
        raise ScalingViolation(f"scaled dual gradient has inf-norm {gmax:.12g} > 1")
    if p is None:
        p = simplex_play(state)
    c = coins(state, ghat_p, p)
    if state.clip_coins:
        c = np.clip(c, -1.0, 1.0)
    gain = state.wealth_gain + c * state.current_w
    if np.any(1.0 + gain <= 0.0):
        raise WealthExhausted("a simplex coordinate ran out of wealth")
    state.wealth_gain = gain
    state.coin_sum = state.coin_sum + c
    state.step += 1
    state.current_w = state.coin_sum / (state.step + 1) * (1.0 + state.wealth_gain)
    return state
