"""Vector helpers, feasible sets and Euclidean projections.

Dense vectors are plain 1-d float64 numpy arrays. Reductions go through
``math.fsum`` so that results are correctly rounded and therefore independent
of summation order, BLAS threading, or alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


def as_vector(values, name: str = "vector") -> np.ndarray:
    v = np.array(values, dtype=np.float64, ndmin=1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    return math.fsum(a * b)


def norm2(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return math.sqrt(math.fsum(v * v))


def norm_inf(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))


def norm1(v) -> float:
    return math.fsum(np.abs(np.asarray(v, dtype=np.float64)))


@dataclass(frozen=True)
class SparseVector:
    """Strictly increasing 0-based indices with finite nonzero values."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        prev = -1
        for i in self.indices:
            if i <= prev:
                raise ValueError("indices must be non-negative and strictly increasing")
            prev = i
        for x in self.values:
            if x == 0.0 or not math.isfinite(x):
                raise ValueError(f"sparse values must be finite and nonzero, got {x!r}")

    @classmethod
    def from_dense(cls, dense) -> SparseVector:
        dense = np.asarray(dense, dtype=np.float64)
        nz = np.flatnonzero(dense)
        return cls(tuple(int(i) for i in nz), tuple(float(dense[i]) for i in nz))

    @property
    def max_index(self) -> int:
        return self.indices[-1] if self.indices else -1

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        if self.indices:
            out[list(self.indices)] = self.values
        return out

    def norm2(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class L2Ball:
    radius: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", as_vector(self.center, "center"))

    @classmethod
    def centered(cls, radius: float, dim: int) -> L2Ball:
        return cls(radius, np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def project(self, v: np.ndarray) -> np.ndarray:
        d = v - self.center
        n = norm2(d)
        if n <= self.radius:
            return v.copy()
        scale = self.radius / n
        out = self.center + d * scale
        # rounding can leave the result a hair outside; shrink until it is inside
        while norm2(out - self.center) > self.radius:
            scale = np.nextafter(scale, 0.0)
            out = self.center + d * scale
        return out

    def contains(self, v: np.ndarray, tol: float = 1e-12) -> bool:
        return norm2(v - self.center) <= self.radius + tol


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper")
        _check_same_dim(lo, hi)
        if np.any(lo > hi):
            raise ValueError("box needs lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, radius: float, dim: int = 1) -> Box:
        return cls(np.full(dim, -float(radius)), np.full(dim, float(radius)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return norm2(self.upper - self.lower)

    def project(self, v: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(v, self.lower), self.upper)

    def contains(self, v: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))


@dataclass(frozen=True)
class Simplex:
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("simplex dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.dimension

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) if self.dimension > 1 else 0.0

    def uniform(self) -> np.ndarray:
        return np.full(self.dimension, 1.0 / self.dimension)

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.contains(v):
            return v.copy()
        u = np.sort(v)[::-1]
        css = np.cumsum(u)
        k = np.arange(1, v.shape[0] + 1)
        rho = np.nonzero(u * k > css - 1.0)[0][-1]
        theta = (css[rho] - 1.0) / (rho + 1.0)
        p = np.maximum(v - theta, 0.0)
        return p / math.fsum(p)

    def contains(self, v: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(v >= 0.0)) and abs(math.fsum(v) - 1.0) <= tol


FeasibleSet = Union[L2Ball, Box, Simplex]


def project(fset: FeasibleSet, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``fset``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != fset.dim:
        raise ValueError(f"dimension mismatch: set has {fset.dim}, vector has {v.shape}")
    return fset.project(v)
