"""Saddle-point oracles: the quartic synthetic game and hinge-loss DRO.

Every oracle exposes ``value(x, y)``, ``subgrads(x, y)`` returning the pair
``(g_x, g_y)`` with ``g_x`` a subgradient of F in x and ``g_y`` a subgradient
of -F in y, and ``bounds()`` returning the norm bounds used for pre-scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from .core import Box, L2Ball, Simplex, SparseVector, as_vector, dot


class SaddleOracle(Protocol):
    X: object
    Y: object

    def value(self, x: np.ndarray, y: np.ndarray) -> float: ...

    def subgrads(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def bounds(self) -> tuple[float, float]: ...


@dataclass(frozen=True)
class SyntheticProblem:
    """F(x, y) = rho/4 x^4 + x y - rho/4 y^4 on a box in each variable.

    The unique saddle point is the origin.
    """

    rho: float = 0.5
    R_x: float = 5.0
    R_y: float = 5.0

    def __post_init__(self):
        if not (self.rho > 0 and self.R_x > 0 and self.R_y > 0):
            raise ValueError("rho, R_x and R_y must be positive")

    @property
    def X(self) -> Box:
        return Box.symmetric(self.R_x)

    @property
    def Y(self) -> Box:
        return Box.symmetric(self.R_y)

    @property
    def optimum(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(1), np.zeros(1)

    def value(self, x, y) -> float:
        x = float(np.asarray(x).reshape(-1)[0])
        y = float(np.asarray(y).reshape(-1)[0])
        # quartic difference first so F(x, y) = -F(y, -x) holds bit-exactly
        return (self.rho / 4 * x**4 - self.rho / 4 * y**4) + x * y

    def subgrads(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = float(np.asarray(x).reshape(-1)[0])
        y = float(np.asarray(y).reshape(-1)[0])
        gx = self.rho * x**3 + y
        gy = -(x - self.rho * y**3)
        return np.array([gx]), np.array([gy])

    def bounds(self) -> tuple[float, float]:
        return (
            self.rho * self.R_x**3 + self.R_y,
            self.R_x + self.rho * self.R_y**3,
        )


def features_matrix(features: Sequence[SparseVector], dim: int) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for f in features:
        indices.extend(f.indices)
        data.extend(f.values)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(features), dim),
    )


@dataclass
class DroProblem:
    """Hinge-loss DRO over the full simplex of sample weights.

    F(w, p) = sum_i p_i hinge_i(w) + sign * lam/2 |p - 1/n|^2 + rho/2 |w|^2,
    with w restricted to the centred ball of radius R.
    """

    features: Sequence[SparseVector]
    labels: Sequence[float]
    R: float = 1e5
    lam: float = 1e-4
    rho: float = 1e-4
    regularizer_sign: int = 1
    dim: Optional[int] = None
    A: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.features) != len(self.labels) or len(self.labels) == 0:
            raise ValueError("need the same positive number of features and labels")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.lam < 0 or self.rho < 0:
            raise ValueError("lam and rho must be non-negative")
        if self.regularizer_sign not in (1, -1):
            raise ValueError("regularizer_sign must be +1 or -1")
        labels = np.asarray(self.labels, dtype=np.float64)
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be +1 or -1")
        needed = max((f.max_index for f in self.features), default=-1) + 1
        if self.dim is None:
            self.dim = needed
        elif self.dim < needed:
            raise ValueError(f"dim {self.dim} smaller than the largest feature index + 1 ({needed})")
        self.y = labels
        # rows are y_i x_i so margins are a single matvec
        self.A = sp.diags(labels) @ features_matrix(self.features, self.dim)
        self.A = sp.csr_matrix(self.A)
        self.AT = sp.csr_matrix(self.A.T)
        self._row_norms = np.array([f.norm2() for f in self.features])

    @classmethod
    def from_dataset(cls, ds, **kwargs) -> DroProblem:
        return cls(ds.features, ds.labels, dim=ds.dimension, **kwargs)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def X(self) -> L2Ball:
        return L2Ball.centered(self.R, self.dim)

    @property
    def Y(self) -> Simplex:
        return Simplex(self.n)

    def _check(self, w, p):
        w = np.asarray(w, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if w.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: w has {w.shape}, expected ({self.dim},)")
        if p.shape != (self.n,):
            raise ValueError(f"dimension mismatch: p has {p.shape}, expected ({self.n},)")
        return w, p

    def hinge(self, w) -> np.ndarray:
        return np.maximum(0.0, 1.0 - self.A @ w)

    def _reg_p(self, p) -> float:
        d = p - 1.0 / self.n
        return self.regularizer_sign * self.lam / 2 * dot(d, d)

    def value(self, w, p) -> float:
        w, p = self._check(w, p)
        return dot(p, self.hinge(w)) + self._reg_p(p) + self.rho / 2 * dot(w, w)

    def subgrad_w(self, w, p) -> np.ndarray:
        w, p = self._check(w, p)
        active = (1.0 - self.A @ w) > 0.0
        return -(self.AT @ np.where(active, p, 0.0)) + self.rho * w

    def subgrad_neg_p(self, w, p) -> np.ndarray:
        w, p = self._check(w, p)
        return -(self.hinge(w) + self.regularizer_sign * self.lam * (p - 1.0 / self.n))

    def subgrads(self, w, p) -> tuple[np.ndarray, np.ndarray]:
        w, p = self._check(w, p)
        margins = 1.0 - self.A @ w
        active = margins > 0.0
        gw = -(self.AT @ np.where(active, p, 0.0)) + self.rho * w
        gp = -(np.maximum(margins, 0.0) + self.regularizer_sign * self.lam * (p - 1.0 / self.n))
        return gw, gp

    def bounds(self) -> tuple[float, float]:
        """(Euclidean bound on g_w, inf-norm bound on g_p)."""
        xmax = float(self._row_norms.max())
        return xmax + self.rho * self.R, 1.0 + self.R * xmax + self.lam


def gradient_bounds(problem) -> tuple[float, float]:
    return problem.bounds()


def check_point(fset, v, name: str) -> np.ndarray:
    v = as_vector(v, name)
    if v.shape[0] != fset.dim:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {fset.dim}")
    if not fset.contains(v):
        raise ValueError(f"{name} is not in the feasible set")
    return v

