"""Min-max drivers built from two coupled online learners.

All solvers query the oracle exactly once per iteration, return the uniform
averages of the played iterates, and optionally record a trace through a
``monitor`` callback ``monitor(t, x_bar, y_bar, x_t, y_t) -> dict`` whose
keys are :class:`~pfminmax.metrics.RunRecord` fields.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bettor as eb
from .core import FeasibleSet, Simplex, norm2, norm_inf, project
from .errors import NumericalError
from .metrics import RunRecord
from .problems import check_point
from .simplex_bettor import SimplexBettorState, simplex_absorb, simplex_play

Monitor = Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], dict]

SCALINGS = ("bound", "adaptive")
GEOMETRIES = ("euclidean", "entropic")
FEAS_TOL = 1e-12


@dataclass
class InvariantAudit:
    """Live counters for the invariants every run must respect."""

    feasibility_violations: int = 0
    max_infeasibility: float = 0.0
    max_scaled_norm: float = 0.0
    min_wealth: float = math.inf

    def check_play(self, fset: FeasibleSet, v: np.ndarray) -> None:
        excess = _infeasibility(fset, v)
        if excess > FEAS_TOL:
            self.feasibility_violations += 1
        self.max_infeasibility = max(self.max_infeasibility, excess)

    def merge(self, other: InvariantAudit) -> None:
        self.feasibility_violations += other.feasibility_violations
        self.max_infeasibility = max(self.max_infeasibility, other.max_infeasibility)
        self.max_scaled_norm = max(self.max_scaled_norm, other.max_scaled_norm)
        self.min_wealth = min(self.min_wealth, other.min_wealth)


def _infeasibility(fset: FeasibleSet, v: np.ndarray) -> float:
    if isinstance(fset, Simplex):
        return max(float(-v.min()), abs(math.fsum(v) - 1.0), 0.0)
    return norm2(v - project(fset, v))


@dataclass
class SolverOutput:
    x_bar: np.ndarray
    y_bar: np.ndarray
    trace: list[RunRecord]
    x_last: np.ndarray
    y_last: np.ndarray
    n_queries: int
    audit: InvariantAudit
    stage_ends: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class RestartSchedule:
    epsilon0: float
    epsilon: float
    theta: float
    C: float = 100.0

    def __post_init__(self):
        if not (self.epsilon0 > 0 and self.epsilon > 0 and self.C > 0):
            raise ValueError("epsilon0, epsilon and C must be positive")
        if not self.epsilon < self.epsilon0:
            raise ValueError("target epsilon must be below epsilon0")
        if not 0 < self.theta <= 0.5:
            raise ValueError("theta must lie in (0, 1/2]")
        if self.n_stages < 1:
            raise ValueError("schedule has no stage: need epsilon0 / epsilon >= 2")

    @property
    def n_stages(self) -> int:
        return int(math.floor(math.log2(self.epsilon0 / self.epsilon)))

    def stage_epsilons(self) -> list[float]:
        return [self.epsilon0 / 2**s for s in range(1, self.n_stages + 1)]

    def stage_lengths(self) -> list[int]:
        expo = 2.0 - 2.0 * self.theta
        return [math.ceil(self.C / eps**expo) for eps in self.stage_epsilons()]


def default_record_every(T: int) -> int:
    return max(1, T // 1000)


class _Scaler:
    """Divides raw gradients by a fixed bound, or by the running max norm."""

    def __init__(self, bound: float, mode: str, norm: Callable[[np.ndarray], float]):
        if mode not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {mode!r}")
        if mode == "bound" and not bound > 0:
            raise ValueError("gradient bound must be positive")
        self.bound = bound
        self.mode = mode
        self.norm = norm
        self.running = 0.0
        self.max_scaled = 0.0

    def __call__(self, g: np.ndarray) -> np.ndarray:
        if self.mode == "bound":
            out = g / self.bound
        else:
            self.running = max(self.running, self.norm(g))
            out = g / self.running if self.running > 0 else np.zeros_like(g)
        self.max_scaled = max(self.max_scaled, self.norm(out))
        return out


class _Recorder:
    """Running sums, trace cadence, and solver-only wall time."""

    def __init__(self, T, record_every, monitor, offset=0, stage=None, x_dim=1, y_dim=1):
        self.T = T
        self.every = record_every or default_record_every(T)
        self.monitor = monitor
        self.offset = offset
        self.stage = stage
        self.x_sum = np.zeros(x_dim)
        self.y_sum = np.zeros(y_dim)
        self.trace: list[RunRecord] = []
        self.elapsed = 0.0
        self._t0 = time.perf_counter()

    def tick(self, t: int, x: np.ndarray, y: np.ndarray) -> None:
        self.x_sum += x
        self.y_sum += y
        if self.monitor is None or (t % self.every and t != self.T):
            return
        now = time.perf_counter()
        self.elapsed += now - self._t0
        row = self.monitor(self.offset + t, self.x_sum / t, self.y_sum / t, x, y)
        self.trace.append(
            RunRecord(iteration=self.offset + t, elapsed_seconds=self.elapsed, stage=self.stage, **row)
        )
        self._t0 = time.perf_counter()

    def averages(self, T: int) -> tuple[np.ndarray, np.ndarray]:
        return self.x_sum / T, self.y_sum / T


def _fail(err: NumericalError, t: int, offset: int):
    if err.iteration is None:
        err.iteration = offset + t
    raise err


def cb_min_max(
    oracle,
    X: FeasibleSet,
    Y: FeasibleSet,
    x0,
    y0,
    T: int,
    epsilon_prime: float = 1.0,
    *,
    centering: str = "origin",
    scaling: str = "bound",
    record_every: Optional[int] = None,
    monitor: Optional[Monitor] = None,
    iteration_offset: int = 0,
    stage: Optional[int] = None,
) -> SolverOutput:
    """Parameter-free saddle-point solver: a constrained coin bettor per player.

    The x player sees ``g_x / G_x``; the y player sees the gradient of -F in y
    divided by ``G_y``; both bounds come from ``oracle.bounds()``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    x0 = check_point(X, x0, "x0")
    y0 = check_point(Y, y0, "y0")
    Gx, Gy = oracle.bounds()
    sx = _Scaler(Gx, scaling, norm2)
    sy = _Scaler(Gy, scaling, norm2)
    bx = eb.BettorState.fresh(x0, epsilon_prime, centering)
    by = eb.BettorState.fresh(y0, epsilon_prime, centering)
    audit = InvariantAudit()
    rec = _Recorder(T, record_every, monitor, iteration_offset, stage, X.dim, Y.dim)
    x = x0
    y = y0
    for t in range(1, T + 1):
        x = eb.play(bx, X)
        y = eb.play(by, Y)
        audit.check_play(X, x)
        audit.check_play(Y, y)
        gx, gy = oracle.subgrads(x, y)
        try:
            eb.absorb(bx, X, sx(gx), x)
            eb.absorb(by, Y, sy(gy), y)
        except NumericalError as err:
            _fail(err, t, iteration_offset)
        audit.min_wealth = min(audit.min_wealth, bx.wealth_offset, by.wealth_offset)
        rec.tick(t, x, y)
    audit.max_scaled_norm = max(sx.max_scaled, sy.max_scaled)
    x_bar, y_bar = rec.averages(T)
    return SolverOutput(x_bar, y_bar, rec.trace, x, y, T, audit)


def cb_min_max_simplex(
    oracle,
    X: FeasibleSet,
    x0,
    p0,
    T: int,
    epsilon_prime: float = 1.0,
    *,
    centering: str = "origin",
    scaling: str = "bound",
    coin_sign: str = "regret",
    clip_coins: bool = True,
    record_every: Optional[int] = None,
    monitor: Optional[Monitor] = None,
) -> SolverOutput:
    """Coin betting on x, coordinate-wise coin betting over the simplex on p.

    The p player receives the gradient of ``h(p) = -F(x_t, p)`` divided by
    the inf-norm bound ``G_p``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    x0 = check_point(X, x0, "x0")
    p0 = np.asarray(p0, dtype=np.float64)
    if p0.ndim != 1 or np.any(p0 <= 0.0) or abs(math.fsum(p0) - 1.0) > 1e-12:
        raise ValueError("p0 must lie in the open simplex (all entries > 0, summing to 1)")
    Y = Simplex(p0.shape[0])
    Gx, Gp = oracle.bounds()
    sx = _Scaler(Gx, scaling, norm2)
    sp_ = _Scaler(Gp, scaling, norm_inf)
    bx = eb.BettorState.fresh(x0, epsilon_prime, centering)
    bp = SimplexBettorState.fresh(p0, coin_sign=coin_sign, clip_coins=clip_coins)
    audit = InvariantAudit()
    rec = _Recorder(T, record_every, monitor, x_dim=X.dim, y_dim=Y.dim)
    x, p = x0, p0
    for t in range(1, T + 1):
        x = eb.play(bx, X)
        p = simplex_play(bp)
        audit.check_play(X, x)
        audit.check_play(Y, p)
        gx, gp = oracle.subgrads(x, p)
        try:
            eb.absorb(bx, X, sx(gx), x)
            simplex_absorb(bp, sp_(gp), p)
        except NumericalError as err:
            _fail(err, t, 0)
        audit.min_wealth = min(audit.min_wealth, bx.wealth_offset, float(bp.wealth.min()))
        rec.tick(t, x, p)
    audit.max_scaled_norm = max(sx.max_scaled, sp_.max_scaled)
    x_bar, p_bar = rec.averages(T)
    return SolverOutput(x_bar, p_bar, rec.trace, x, p, T, audit)


def restart_cb_min_max(
    oracle,
    X: FeasibleSet,
    Y: FeasibleSet,
    x0,
    y0,
    schedule: RestartSchedule,
    epsilon_prime: float = 1.0,
    *,
    record_every: Optional[int] = None,
    monitor: Optional[Monitor] = None,
    **kwargs,
) -> SolverOutput:
    """Run CB-Min-Max in stages of geometrically growing length.

    Each stage starts from the previous stage's averaged iterates. The trace
    uses a global iteration counter; ``stage_ends`` holds the last global
    iteration of every stage.
    """
    x_hat = check_point(X, x0, "x0")
    y_hat = check_point(Y, y0, "y0")
    trace: list[RunRecord] = []
    ends: list[int] = []
    audit = InvariantAudit()
    done = 0
    out = None
    for s, Ts in enumerate(schedule.stage_lengths(), start=1):
        every = record_every or default_record_every(Ts)
        out = cb_min_max(
            oracle, X, Y, x_hat, y_hat, Ts, epsilon_prime,
            record_every=every, monitor=monitor, iteration_offset=done, stage=s, **kwargs,
        )
        if trace:
            shift = trace[-1].elapsed_seconds
            for r in out.trace:
                r.elapsed_seconds += shift
        trace.extend(out.trace)
        audit.merge(out.audit)
        done += Ts
        ends.append(done)
        # averaged output of a stage is feasible up to rounding; re-project before warm-starting
        x_hat = project(X, out.x_bar)
        y_hat = project(Y, out.y_bar)
    return SolverOutput(x_hat, y_hat, trace, out.x_last, out.y_last, done, audit, ends)


def default_step_sizes(problem, T: int, dual_geometry: str = "euclidean") -> tuple[float, float]:
    """Step sizes ``D / (G sqrt(T))`` per player.

    For a simplex dual with the entropic geometry the dual step is
    ``log(n) / (G_p sqrt(T))``; the primal diameter of a centred ball is 2R.
    """
    Gx, Gy = problem.bounds()
    root = math.sqrt(T)
    eta_x = problem.X.diameter / (Gx * root)
    Y = problem.Y
    if isinstance(Y, Simplex):
        n = Y.dim
        if dual_geometry == "entropic":
            eta_y = math.log(n) / (Gy * root) if n > 1 else 1.0 / (Gy * root)
        else:
            # Gy is an inf-norm bound; sqrt(n) * Gy bounds the Euclidean norm
            eta_y = Y.diameter / (math.sqrt(n) * Gy * root) if n > 1 else 1.0 / (Gy * root)
    else:
        eta_y = Y.diameter / (Gy * root)
    return eta_x, eta_y


def primal_dual_gradient(
    oracle,
    X: FeasibleSet,
    Y: FeasibleSet,
    x0,
    y0,
    T: int,
    eta_x: float,
    eta_y: float,
    dual_geometry: str = "euclidean",
    *,
    record_every: Optional[int] = None,
    monitor: Optional[Monitor] = None,
) -> SolverOutput:
    """Simultaneous projected gradient descent in x and descent on -F in y.

    With ``dual_geometry="entropic"`` the dual lives on the simplex and takes
    multiplicative (exponentiated gradient) steps instead.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (eta_x > 0 and eta_y > 0):
        raise ValueError("step sizes must be positive")
    if dual_geometry not in GEOMETRIES:
        raise ValueError(f"dual_geometry must be one of {GEOMETRIES}, got {dual_geometry!r}")
    if dual_geometry == "entropic" and not isinstance(Y, Simplex):
        raise ValueError("entropic dual steps need a simplex dual set")
    x = check_point(X, x0, "x0")
    y = check_point(Y, y0, "y0")
    if dual_geometry == "entropic" and np.any(y <= 0.0):
        raise ValueError("entropic steps need a dual start with full support")
    audit = InvariantAudit()
    rec = _Recorder(T, record_every, monitor, x_dim=X.dim, y_dim=Y.dim)
    for t in range(1, T + 1):
        audit.check_play(X, x)
        audit.check_play(Y, y)
        gx, gy = oracle.subgrads(x, y)
        rec.tick(t, x, y)
        x_next = project(X, x - eta_x * gx)
        if dual_geometry == "euclidean":
            y_next = project(Y, y - eta_y * gy)
        else:
            z = -eta_y * gy
            w = y * np.exp(z - z.max())
            y_next = w / math.fsum(w)
        x_played, y_played = x, y
        x, y = x_next, y_next
    x_bar, y_bar = rec.averages(T)
    return SolverOutput(x_bar, y_bar, rec.trace, x_played, y_played, T, audit)
