"""Duality gaps, divergences, losses and the per-iteration trace record."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Simplex, norm2, project
from .errors import InfiniteDivergence
from .problems import DroProblem, SyntheticProblem

INNER_STEPS = 500


@dataclass
class RunRecord:
    iteration: int
    elapsed_seconds: float = 0.0
    avg_x_stat: Optional[float] = None
    avg_y_stat: Optional[float] = None
    gap: Optional[float] = None
    gap_exact: Optional[bool] = None
    dist_to_opt: Optional[float] = None
    dist_to_opt_last: Optional[float] = None
    train_loss: Optional[float] = None
    test_loss: Optional[float] = None
    robust_objective: Optional[float] = None
    regret_x: Optional[float] = None
    regret_y: Optional[float] = None
    stage: Optional[int] = None


# -- synthetic closed forms ------------------------------------------------


def _clip(v: float, r: float) -> float:
    return min(max(v, -r), r)


def synthetic_best_response_y(problem: SyntheticProblem, x: float) -> float:
    # d/dy (x y - rho/4 y^4) = 0  =>  y = cbrt(x / rho)
    return _clip(float(np.cbrt(x / problem.rho)), problem.R_y)


def synthetic_best_response_x(problem: SyntheticProblem, y: float) -> float:
    return _clip(float(np.cbrt(-y / problem.rho)), problem.R_x)


def synthetic_gap(problem: SyntheticProblem, x_bar, y_bar) -> float:
    x = float(np.asarray(x_bar).reshape(-1)[0])
    y = float(np.asarray(y_bar).reshape(-1)[0])
    y_star = synthetic_best_response_y(problem, x)
    x_star = synthetic_best_response_x(problem, y)
    return problem.value(x, y_star) - problem.value(x_star, y)


# -- DRO -------------------------------------------------------------------


def dro_inner_max(problem: DroProblem, w) -> tuple[float, np.ndarray]:
    """max over the simplex of F(w, .), solved exactly.

    With a convex (or linear) p-term the maximum sits on a vertex; with the
    concave sign it is the projection of ``1/n + hinge/lam`` onto the simplex.
    """
    w = np.asarray(w, dtype=np.float64)
    n = problem.n
    losses = problem.hinge(w)
    if problem.regularizer_sign == 1 or problem.lam == 0.0:
        # |e_i - 1/n|^2 = 1 - 1/n for every vertex
        vertex_vals = losses + problem.regularizer_sign * problem.lam / 2 * (1.0 - 1.0 / n)
        i = int(np.argmax(vertex_vals))
        p = np.zeros(n)
        p[i] = 1.0
    else:
        p = project(Simplex(n), 1.0 / n + losses / problem.lam)
    return problem.value(w, p), p


def dro_inner_min(problem: DroProblem, p, start=None, steps: int = INNER_STEPS) -> float:
    """Upper estimate of min over the ball of F(., p) by projected subgradient.

    Steps are ``1/(rho k)`` (or ``2R / (G sqrt(k))`` when rho is zero); the
    best value seen, including the start, is returned.
    """
    p = np.asarray(p, dtype=np.float64)
    X = problem.X
    w = np.zeros(problem.dim) if start is None else project(X, np.asarray(start, dtype=np.float64))
    const = problem._reg_p(p)
    A, AT, rho = problem.A, problem.AT, problem.rho
    if rho == 0.0:
        G = problem.bounds()[0]

    def value_and_grad(w):
        margins = 1.0 - A @ w
        val = math.fsum(p * np.maximum(margins, 0.0)) + const + rho / 2 * math.fsum(w * w)
        grad = -(AT @ np.where(margins > 0.0, p, 0.0)) + rho * w
        return val, grad

    best, g = value_and_grad(w)
    for k in range(1, steps + 1):
        step = 1.0 / (rho * k) if rho > 0 else X.diameter / (G * math.sqrt(k))
        w = project(X, w - step * g)
        val, g = value_and_grad(w)
        best = min(best, val)
    return best


def dro_gap(problem: DroProblem, w_bar, p_bar, steps: int = INNER_STEPS) -> float:
    upper, _ = dro_inner_max(problem, w_bar)
    lower = dro_inner_min(problem, p_bar, start=w_bar, steps=steps)
    return upper - lower


def robust_objective(problem: DroProblem, w) -> float:
    return dro_inner_max(problem, w)[0]


def duality_gap(problem, x_bar, y_bar, steps: int = INNER_STEPS) -> tuple[float, bool]:
    """``max_y F(x_bar, y) - min_x F(x, y_bar)`` and whether it is exact.

    For DRO the inner minimisation is an iterative estimate, so the returned
    value under-estimates the true gap and ``exact`` is False.
    """
    if isinstance(problem, SyntheticProblem):
        return synthetic_gap(problem, x_bar, y_bar), True
    if isinstance(problem, DroProblem):
        return dro_gap(problem, x_bar, y_bar, steps), False
    raise TypeError(f"no gap routine for {type(problem).__name__}")


# -- divergences, losses, regret ------------------------------------------


def kl(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("dimension mismatch")
    terms = []
    for pi, qi in zip(p, q):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise InfiniteDivergence("p puts mass where q has none")
        terms.append(pi * math.log(pi / qi))
    return max(math.fsum(terms), 0.0)


def hinge_losses(ds, w) -> tuple[float, np.ndarray]:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ds.dimension,):
        raise ValueError(f"dimension mismatch: w has {w.shape}, dataset has {ds.dimension}")
    A = ds.matrix()
    per = np.maximum(0.0, 1.0 - np.asarray(ds.labels, dtype=np.float64) * (A @ w))
    return math.fsum(per) / len(per), per


def regret(played: Sequence, losses: Sequence[Callable], comparator) -> float:
    """``sum_t loss_t(played_t) - sum_t loss_t(u_t)``.

    ``comparator`` is either one fixed point or a sequence with one point per
    round.
    """
    if len(played) != len(losses):
        raise ValueError("need one loss per played point")
    per_round = isinstance(comparator, (list, tuple)) and len(comparator) == len(played)
    gaps = []
    for t, (x, f) in enumerate(zip(played, losses)):
        u = comparator[t] if per_round else comparator
        gaps.append(f(x) - f(u))
    return math.fsum(gaps)


# -- trace monitors --------------------------------------------------------


def synthetic_monitor(problem: SyntheticProblem):
    x_opt, y_opt = problem.optimum

    def monitor(t, x_bar, y_bar, x_t, y_t) -> dict:
        return {
            "avg_x_stat": float(x_bar[0]),
            "avg_y_stat": float(y_bar[0]),
            "gap": synthetic_gap(problem, x_bar, y_bar),
            "gap_exact": True,
            "dist_to_opt": math.hypot(norm2(x_bar - x_opt), norm2(y_bar - y_opt)),
            "dist_to_opt_last": math.hypot(norm2(x_t - x_opt), norm2(y_t - y_opt)),
        }

    return monitor


def dro_monitor(problem: DroProblem, train=None, test=None, gap_steps: Optional[int] = INNER_STEPS,
                gap_every: int = 1, T: Optional[int] = None):
    """Monitor for DRO runs.

    The gap estimate is costly, so it is computed only at iterations that are
    multiples of ``gap_every`` and at the final iteration ``T``; ``gap_steps=None``
    skips it entirely.
    """

    def monitor(t, w_bar, p_bar, w_t, p_t) -> dict:
        row = {
            "avg_x_stat": norm2(w_bar),
            "avg_y_stat": float(p_bar.max()),
            "robust_objective": robust_objective(problem, w_bar),
        }
        if gap_steps and (t % gap_every == 0 or t == T):
            row["gap"] = dro_gap(problem, w_bar, p_bar, gap_steps)
            row["gap_exact"] = False
        if train is not None:
            row["train_loss"] = hinge_losses(train, w_bar)[0]
        if test is not None:
            row["test_loss"] = hinge_losses(test, w_bar)[0]
        return row

    return monitor


def kl_gap_terms(p, q, pi) -> tuple[float, float]:
    """Both sides of the KL three-point inequality for (p, q, pi)."""
    p, q, pi = (np.asarray(a, dtype=np.float64) for a in (p, q, pi))
    lhs = kl(p, pi)
    with np.errstate(divide="ignore"):
        logs = np.where(q > 0, np.log(np.where(q > 0, q, 1.0) / pi), -np.inf)
    spread = max(float(np.max(np.maximum(logs, 0.0))), 0.0)
    rhs = kl(p, q) + spread * math.fsum(np.abs(p - q)) + kl(q, pi)
    return lhs, rhs

