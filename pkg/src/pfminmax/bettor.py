"""Euclidean coin-betting learner with the constrained-set reduction.

The unconstrained learner is a Krichevsky-Trofimov bettor: after ``t``
gradients the next bet is ``-(sum g) / (t + 1) * wealth``. Feasibility is
obtained by projecting the bet and feeding the bettor a surrogate gradient
that also penalises the distance to the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeasibleSet, as_vector, dot, norm2, project
from .errors import ScalingViolation, WealthExhausted

SCALE_TOL = 1e-9
CENTERINGS = ("x0", "origin")


@dataclass
class BettorState:
    """Mutable state of one Euclidean coin bettor.

    ``anchor`` is the point bets are measured from: the start point for
    ``centering="x0"``, the origin for ``centering="origin"``.
    """

    center: np.ndarray
    epsilon_prime: float
    wealth_offset: float
    grad_sum: np.ndarray
    step: int
    current_unconstrained: np.ndarray
    centering: str = "x0"

    @classmethod
    def fresh(cls, x0, epsilon_prime: float = 1.0, centering: str = "x0") -> BettorState:
        if not epsilon_prime > 0:
            raise ValueError("epsilon_prime must be positive")
        if centering not in CENTERINGS:
            raise ValueError(f"centering must be one of {CENTERINGS}, got {centering!r}")
        x0 = as_vector(x0, "x0")
        return cls(
            center=x0.copy(),
            epsilon_prime=float(epsilon_prime),
            wealth_offset=float(epsilon_prime),
            grad_sum=np.zeros_like(x0),
            step=0,
            current_unconstrained=x0.copy(),
            centering=centering,
        )

    @property
    def anchor(self) -> np.ndarray:
        if self.centering == "x0":
            return self.center
        return np.zeros_like(self.center)


def surrogate_grad(ghat, x_tilde, x_proj) -> np.ndarray:
    """Gradient of the constrained surrogate loss at the unconstrained point.

    Returns ``(ghat + |ghat| * (x_tilde - x_proj) / |x_tilde - x_proj|) / 2``,
    with the second term dropped when ``x_tilde`` is already feasible.
    """
    ghat = np.asarray(ghat, dtype=np.float64)
    gnorm = norm2(ghat)
    if gnorm > 1.0 + SCALE_TOL:
        raise ScalingViolation(f"scaled gradient has norm {gnorm:.12g} > 1")
    diff = np.asarray(x_tilde, dtype=np.float64) - np.asarray(x_proj, dtype=np.float64)
    dnorm = norm2(diff)
    if dnorm == 0.0 or gnorm == 0.0:
        return 0.5 * ghat
    return 0.5 * (ghat + (gnorm / dnorm) * diff)


def bettor_step(state: BettorState, g) -> tuple[BettorState, np.ndarray]:
    """Absorb one gradient and compute the next unconstrained iterate.

    ``state`` is updated in place and also returned.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.grad_sum.shape:
        raise ValueError(f"dimension mismatch: {g.shape[0]} vs {state.grad_sum.shape[0]}")
    anchor = state.anchor
    bet = state.current_unconstrained - anchor
    wealth = state.wealth_offset - dot(g, bet)
    if not wealth > 0.0:
        raise WealthExhausted(f"wealth dropped to {wealth:.6g}; a gradient with norm > 1 got through")
    state.wealth_offset = wealth
    state.grad_sum = state.grad_sum + g
    state.step += 1
    beta = state.grad_sum / (state.step + 1)
    state.current_unconstrained = anchor - beta * wealth
    return state, state.current_unconstrained


def oco_round(state: BettorState, fset: FeasibleSet, ghat) -> tuple[np.ndarray, BettorState]:
    """Play ``project(fset, x_tilde)``, then absorb the surrogate of ``ghat``.

    ``ghat`` must be the (pre-scaled) gradient observed at the played point;
    use :func:`play` and :func:`absorb` separately when the gradient depends on
    the play, as it does in a game.
    """
    x_played = play(state, fset)
    absorb(state, fset, ghat, x_played)
    return x_played, state


def play(state: BettorState, fset: FeasibleSet) -> np.ndarray:
    return project(fset, state.current_unconstrained)


def absorb(state: BettorState, fset: FeasibleSet, ghat, x_played=None) -> np.ndarray:
    """Feed the surrogate gradient for this round; returns the surrogate."""
    if x_played is None:
        x_played = play(state, fset)
    g = surrogate_grad(ghat, state.current_unconstrained, x_played)
    bettor_step(state, g)
    return g


def surrogate_loss(ghat, x, fset: FeasibleSet) -> float:
    """``(<ghat, x> + |ghat| * dist(x, fset)) / 2``."""
    ghat = np.asarray(ghat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (dot(ghat, x) + norm2(ghat) * norm2(x - project(fset, x)))
