"""Loading and preprocessing of sparse binary classification data.

Datasets are read from the LIBSVM/SVMlight text format, optionally rescaled,
and turned into augmented-and-reflected patterns ``y_k = [l_k x_k, l_k rho]``
stored row-wise in CSR arrays.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class DataFormatError(ValueError):
    """Raised for malformed LIBSVM input."""


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray  # int64, 0-based, strictly increasing
    values: np.ndarray  # float64
    dim: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise ValueError("indices must be non-negative and strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int = 0) -> "SparseVector":
        pairs = list(pairs)
        return cls(
            np.array([i for i, _ in pairs], dtype=np.int64),
            np.array([v for _, v in pairs], dtype=np.float64),
            dim,
        )

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]

    @property
    def sq_norm(self) -> float:
        return float(np.dot(self.values, self.values))

    def __len__(self):
        return self.indices.size


@dataclass(frozen=True)
class LabeledExample:
    features: SparseVector
    label: int


@dataclass(frozen=True)
class AugReflPattern:
    """One augmented-and-reflected pattern, ``index`` is its row in the dataset."""

    index: int
    indices: np.ndarray
    values: np.ndarray
    sq_norm: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of augmented-and-reflected patterns.

    Rows live in CSR arrays (``indptr``, ``indices``, ``values``) over
    ``dim = n_features + 1`` columns; column ``n_features`` is the
    augmentation coordinate and is stored only when ``rho > 0``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    sq_norms: np.ndarray
    labels: np.ndarray
    n_features: int
    rho: float
    R: float = field(init=False)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.values, self.sq_norms, self.labels):
            arr.flags.writeable = False
        if self.m < 1:
            raise ValueError("a dataset needs at least one pattern")
        object.__setattr__(self, "R", float(np.sqrt(self.sq_norms.max())))

    @property
    def m(self) -> int:
        return self.indptr.size - 1

    @property
    def dim(self) -> int:
        return self.n_features + 1

    @property
    def nnz(self) -> int:
        return self.indices.size

    def pattern(self, k: int) -> AugReflPattern:
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return AugReflPattern(int(k), self.indices[lo:hi], self.values[lo:hi], float(self.sq_norms[k]))

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """The patterns as an ``m x dim`` CSR matrix (shares memory)."""
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=(self.m, self.dim))


def _map_labels(raw: Sequence[float]) -> list[int]:
    distinct = sorted(set(raw))
    if len(distinct) > 2:
        raise DataFormatError(f"expected a binary problem, found {len(distinct)} distinct labels: {distinct[:5]}")
    if set(distinct) <= {-1.0, 1.0}:
        return [int(v) for v in raw]
    if len(distinct) == 1:
        raise DataFormatError(f"cannot infer the sign of the single label value {distinct[0]!r}")
    lo = distinct[0]
    return [-1 if v == lo else 1 for v in raw]


def parse_libsvm(stream: IO[str] | Iterable[str]) -> list[LabeledExample]:
    """Parse ``<label> <idx>:<val> ...`` lines into labeled examples.

    Indices are 1-based in the file and 0-based in the result. Blank lines and
    ``#`` comments are ignored. Labels other than +1/-1 are accepted when there
    are exactly two of them: the numerically smaller one becomes -1. Every
    returned vector carries ``dim = max index + 1`` over the whole stream.
    """
    labels: list[float] = []
    rows: list[tuple[list[int], list[float]]] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataFormatError(f"line {lineno}: bad label {tokens[0]!r}") from None
        if not math.isfinite(label):
            raise DataFormatError(f"line {lineno}: non-finite label")
        idx: list[int] = []
        val: list[float] = []
        for tok in tokens[1:]:
            i_str, sep, v_str = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                i, v = int(i_str), float(v_str)
            except ValueError:
                raise DataFormatError(f"line {lineno}: malformed feature {tok!r}") from None
            if i < 1:
                raise DataFormatError(f"line {lineno}: feature index {i} is not >= 1")
            if idx and i - 1 <= idx[-1]:
                raise DataFormatError(f"line {lineno}: feature indices not strictly increasing at {i}")
            if not math.isfinite(v):
                raise DataFormatError(f"line {lineno}: non-finite value for feature {i}")
            idx.append(i - 1)
            val.append(v)
        labels.append(label)
        rows.append((idx, val))

    dim = max((r[0][-1] + 1 for r in rows if r[0]), default=0)
    return [
        LabeledExample(SparseVector(np.array(i, dtype=np.int64), np.array(v, dtype=np.float64), dim), lab)
        for (i, v), lab in zip(rows, _map_labels(labels))
    ]


def load_libsvm(path: str | os.PathLike) -> list[LabeledExample]:
    with open(path, "r") as fh:
        return parse_libsvm(fh)


def serialize_libsvm(examples: Iterable[LabeledExample]) -> str:
    out = io.StringIO()
    for ex in examples:
        feats = " ".join(f"{i + 1}:{float(v)!r}" for i, v in zip(ex.features.indices, ex.features.values))
        out.write(f"{ex.label:+d} {feats}".rstrip() + "\n")
    return out.getvalue()


def scale_features(examples: Sequence[LabeledExample], factor: float) -> list[LabeledExample]:
    if not (math.isfinite(factor) and factor > 0):
        raise ValueError(f"scale factor must be finite and positive, got {factor}")
    return [
        LabeledExample(SparseVector(ex.features.indices, ex.features.values * factor, ex.features.dim), ex.label)
        for ex in examples
    ]


def augment_reflect(
    examples: Sequence[LabeledExample], rho: float = 0.0, n_features: int | None = None
) -> Dataset:
    """Build the augmented-and-reflected dataset.

    ``n_features`` pins the feature dimension (for instance to a model's);
    by default it is the largest dimension among the examples.
    """
    if not examples:
        raise ValueError("cannot build a dataset from zero examples")
    if not (math.isfinite(rho) and rho >= 0):
        raise ValueError(f"rho must be finite and >= 0, got {rho}")
    d = max(max(ex.features.dim, int(ex.features.indices[-1]) + 1 if len(ex.features) else 0) for ex in examples)
    if n_features is None:
        n_features = d
    elif d > n_features:
        raise ValueError(f"examples have {d} features, more than the requested {n_features}")

    extra = 1 if rho > 0 else 0
    lengths = np.array([len(ex.features) + extra for ex in examples], dtype=np.int64)
    indptr = np.zeros(len(examples) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    values = np.empty(indptr[-1], dtype=np.float64)
    labels = np.empty(len(examples), dtype=np.int64)
    for k, ex in enumerate(examples):
        if ex.label not in (1, -1):
            raise ValueError(f"example {k} has label {ex.label}, expected +1 or -1")
        lo = indptr[k]
        n = len(ex.features)
        indices[lo : lo + n] = ex.features.indices
        values[lo : lo + n] = ex.label * ex.features.values
        if extra:
            indices[lo + n] = n_features
            values[lo + n] = ex.label * rho
        labels[k] = ex.label
    rows = np.repeat(np.arange(len(examples)), lengths)
    sq_norms = np.bincount(rows, weights=values**2, minlength=len(examples))
    return Dataset(indptr, indices, values, sq_norms, labels, n_features, float(rho))


def load_dataset(path: str | os.PathLike, rho: float = 0.0, scale: float | None = None) -> Dataset:
    examples = load_libsvm(path)
    if scale is not None:
        examples = scale_features(examples, scale)
    return augment_reflect(examples, rho)


def make_synthetic(
    m: int,
    d: int,
    seed: int = 0,
    density: float = 0.3,
    noise: float = 0.1,
    separable: bool = False,
) -> list[LabeledExample]:
    """Random sparse two-class data with a planted linear separator.

    Rows are normalized to unit length. ``noise`` is the fraction of labels
    flipped; ``separable=True`` drops flips and points too close to the plane.
    """
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(d)
    out: list[LabeledExample] = []
    while len(out) < m:
        mask = rng.random(d) < density
        if not mask.any():
            mask[rng.integers(d)] = True
        idx = np.flatnonzero(mask)
        val = rng.standard_normal(idx.size)
        val /= np.linalg.norm(val)
        score = float(np.dot(w_true[idx], val))
        if separable and abs(score) < 0.1:
            continue
        label = 1 if score >= 0 else -1
        if not separable and rng.random() < noise:
            label = -label
        out.append(LabeledExample(SparseVector(idx, val, d), label))
    return out
