"""LIBSVM ingestion, binary label remapping and seeded train/test splits."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .core import SparseVector
from .errors import EmptyDatasetError, FormatError, ParseError, RemapError


@dataclass(frozen=True)
class Dataset:
    samples: tuple[tuple[SparseVector, float], ...]
    dimension: int

    def __post_init__(self):
        if not self.samples:
            raise EmptyDatasetError("dataset has no samples")
        needed = max(f.max_index for f, _ in self.samples) + 1
        if self.dimension < needed:
            raise ValueError(f"dimension {self.dimension} < largest feature index + 1 ({needed})")

    @property
    def features(self) -> list[SparseVector]:
        return [f for f, _ in self.samples]

    @property
    def labels(self) -> list[float]:
        return [y for _, y in self.samples]

    def __len__(self) -> int:
        return len(self.samples)

    def with_dimension(self, dim: int) -> Dataset:
        return Dataset(self.samples, dim)

    def matrix(self):
        """CSR matrix of the features (rows = samples), built once."""
        cached = self.__dict__.get("_matrix")
        if cached is None:
            from .problems import features_matrix

            cached = features_matrix(self.features, self.dimension)
            object.__setattr__(self, "_matrix", cached)
        return cached

    def subset(self, idx: Iterable[int]) -> Dataset:
        return Dataset(tuple(self.samples[i] for i in idx), self.dimension)


def _parse_line(body: str, lineno: int) -> tuple[SparseVector, float]:
    tokens = body.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise ParseError(f"malformed label {tokens[0]!r}", lineno) from None
    if not math.isfinite(label):
        raise ParseError(f"non-finite label {tokens[0]!r}", lineno)
    indices: list[int] = []
    values: list[float] = []
    prev = 0
    for tok in tokens[1:]:
        idx_s, sep, val_s = tok.partition(":")
        if not sep:
            raise ParseError(f"expected index:value, got {tok!r}", lineno)
        try:
            idx = int(idx_s)
            val = float(val_s)
        except ValueError:
            raise ParseError(f"malformed number in {tok!r}", lineno) from None
        if not math.isfinite(val):
            raise ParseError(f"non-finite value in {tok!r}", lineno)
        if idx < 1:
            raise FormatError(f"feature index {idx} is not 1-based", lineno)
        if idx <= prev:
            raise FormatError(f"feature index {idx} does not increase (previous {prev})", lineno)
        prev = idx
        if val != 0.0:
            indices.append(idx - 1)
            values.append(val)
    return SparseVector(tuple(indices), tuple(values)), label


def parse_libsvm(source: Union[str, TextIO]) -> Dataset:
    """Parse LIBSVM text: ``label idx:val idx:val ...`` with 1-based indices.

    Blank lines and ``#`` comments are skipped; explicit zero values are
    dropped. Indices are stored 0-based.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    samples = []
    for lineno, raw in enumerate(stream, start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            samples.append(_parse_line(body, lineno))
    if not samples:
        raise EmptyDatasetError("no samples found")
    dim = max(f.max_index for f, _ in samples) + 1
    return Dataset(tuple(samples), dim)


def load_libsvm(path: Union[str, Path]) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh)


def _fmt_number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def serialize_libsvm(ds: Dataset) -> str:
    lines = []
    for feat, label in ds.samples:
        parts = [_fmt_number(label)]
        parts.extend(f"{i + 1}:{v!r}" for i, v in zip(feat.indices, feat.values))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LabelRemap:
    positive_classes: frozenset
    negative_classes: frozenset

    def __post_init__(self):
        pos = frozenset(float(v) for v in self.positive_classes)
        neg = frozenset(float(v) for v in self.negative_classes)
        if pos & neg:
            raise ValueError(f"labels {sorted(pos & neg)} are in both classes")
        object.__setattr__(self, "positive_classes", pos)
        object.__setattr__(self, "negative_classes", neg)

    @classmethod
    def of(cls, positive: Iterable[float], negative: Iterable[float]) -> LabelRemap:
        return cls(frozenset(positive), frozenset(negative))

    def __call__(self, label: float) -> float:
        if label in self.positive_classes:
            return 1.0
        if label in self.negative_classes:
            return -1.0
        raise RemapError(label)


# dataset preparations used for the DRO benchmarks
REMAPS = {
    "sensit": LabelRemap.of([1], [2, 3]),
    "dna": LabelRemap.of([1], [2, 3]),
    "protein": LabelRemap.of([1], [0, 2]),
    "letter": LabelRemap.of([26], range(1, 26)),
    "mnist": LabelRemap.of([9], range(0, 9)),
    "pendigits": LabelRemap.of([9], range(0, 9)),
    "gisette": LabelRemap.of([1], [-1]),
    "madelon": LabelRemap.of([1], [-1]),
}


def remap_labels(ds: Dataset, remap: LabelRemap) -> Dataset:
    return Dataset(tuple((f, remap(y)) for f, y in ds.samples), ds.dimension)


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty train or test set for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(ds: Dataset, test_fraction: float = 0.2, seed: int = 42) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-then-partition; both parts keep the original order."""
    train_idx, test_idx = split_indices(len(ds), test_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def make_classification(
    n: int = 200, d: int = 20, seed: int = 42, flip: float = 0.1
) -> Dataset:
    """Gaussian features labelled by a random linear teacher, with label noise."""
    rng = np.random.default_rng(seed)
    teacher = rng.standard_normal(d)
    X = rng.standard_normal((n, d))
    y = np.where(X @ teacher >= 0.0, 1.0, -1.0)
    y = np.where(rng.random(n) < flip, -y, y)
    samples = tuple((SparseVector.from_dense(x), float(t)) for x, t in zip(X, y))
    return Dataset(samples, d)


def from_arrays(X: np.ndarray, y: Sequence[float]) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    samples = tuple((SparseVector.from_dense(x), float(t)) for x, t in zip(X, y))
    return Dataset(samples, X.shape[1])
