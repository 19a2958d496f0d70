"""Sparse samples, datasets and dense model parameters.

Indices are 0-based everywhere inside the package; the text format's
1-based indices are converted in :mod:`wpsgd.data`.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DimensionMismatchError, EmptyDatasetError, InvalidParameterError


def _check_row(indices, values, dim):
    if indices.shape != values.shape:
        raise InvalidParameterError("indices and values must have the same length")
    if indices.size:
        if indices[0] < 0 or indices[-1] >= dim:
            raise InvalidParameterError(f"index out of range for dim {dim}")
        if np.any(np.diff(indices) <= 0):
            raise InvalidParameterError("indices must be strictly increasing")
        if np.any(values == 0.0):
            raise InvalidParameterError("explicit zero values are not allowed")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("values must be finite")


class SparseVector:
    """Canonical sparse vector: strictly increasing indices, no stored zeros."""

    __slots__ = ("indices", "values", "dim")

    def __init__(self, indices, values, dim):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        dim = int(dim)
        if dim < 0:
            raise InvalidParameterError("dim must be non-negative")
        _check_row(indices, values, dim)
        indices.setflags(write=False)
        values.setflags(write=False)
        self.indices = indices
        self.values = values
        self.dim = dim

    @classmethod
    def trusted(cls, indices, values, dim):
        """Wrap arrays already known to be canonical, skipping validation."""
        x = cls.__new__(cls)
        x.indices, x.values, x.dim = indices, values, dim
        return x

    @classmethod
    def from_pairs(cls, pairs, dim):
        pairs = list(pairs)
        if not pairs:
            return cls([], [], dim)
        idx, val = zip(*pairs)
        return cls(idx, val, dim)

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.shape[0])

    @property
    def entries(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    def to_dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseVector({self.entries!r}, dim={self.dim})"


@dataclass(frozen=True)
class Sample:
    features: SparseVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InvalidParameterError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def signed_label(self):
        return 1.0 if self.label == 1 else -1.0


@dataclass
class DenseModel:
    """Dense parameter vector ``w`` plus the number of SGD updates applied."""

    weights: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)

    @classmethod
    def constant(cls, dim, value=0.0):
        return cls(np.full(dim, float(value)), 0)

    @property
    def dim(self):
        return self.weights.shape[0]

    def copy(self):
        return DenseModel(self.weights.copy(), self.iterations)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.weights)))

    def __eq__(self, other):
        if not isinstance(other, DenseModel):
            return NotImplemented
        return self.iterations == other.iterations and np.array_equal(self.weights, other.weights)


@dataclass(eq=False)
class Dataset:
    """Labelled samples stored row-wise in CSR arrays.

    ``indptr``, ``indices``, ``values`` follow the scipy CSR layout and
    ``labels`` holds the raw {0, 1} labels.
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    dim: int
    _csr: object = field(default=None, repr=False)

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int8)
        self.dim = int(self.dim)
        m = self.labels.shape[0]
        if m < 1:
            raise EmptyDatasetError("a dataset needs at least one sample")
        if self.indptr.shape[0] != m + 1 or self.indptr[0] != 0 or self.indptr[-1] != self.indices.shape[0]:
            raise InvalidParameterError("inconsistent CSR layout")
        if self.indices.shape != self.values.shape:
            raise InvalidParameterError("indices and values must have the same length")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InvalidParameterError("labels must be 0 or 1")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.dim:
                raise InvalidParameterError(f"feature index out of range for dim {self.dim}")
            # strictly increasing within each row; row starts are exempt
            inc = np.diff(self.indices) > 0
            starts = self.indptr[1:-1]
            starts = starts[(starts > 0) & (starts < self.indices.size)]
            inc[starts - 1] = True
            if not np.all(inc):
                raise InvalidParameterError("indices must be strictly increasing within a sample")
            if np.any(self.values == 0.0):
                raise InvalidParameterError("explicit zero values are not allowed")

    @classmethod
    def from_samples(cls, samples, dim=None):
        samples = list(samples)
        if not samples:
            raise EmptyDatasetError("a dataset needs at least one sample")
        if dim is None:
            dim = samples[0].features.dim
        for s in samples:
            if s.features.dim != dim:
                raise DimensionMismatchError(dim, s.features.dim, "sample")
        lengths = [s.features.nnz for s in samples]
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        indices = np.concatenate([s.features.indices for s in samples]) if indptr[-1] else np.empty(0)
        values = np.concatenate([s.features.values for s in samples]) if indptr[-1] else np.empty(0)
        labels = [s.label for s in samples]
        return cls(indptr, indices, values, labels, dim)

    def __len__(self):
        return int(self.labels.shape[0])

    def __getitem__(self, i):
        a, b = self.indptr[i], self.indptr[i + 1]
        return Sample(SparseVector(self.indices[a:b], self.values[a:b], self.dim), int(self.labels[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )

    @property
    def signed_labels(self):
        return np.where(self.labels == 1, 1.0, -1.0)

    @property
    def csr(self):
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.values, self.indices, self.indptr), shape=(len(self), self.dim)
            )
        return self._csr

    def take(self, order):
        """Rows ``order`` (in that order) as a new dataset."""
        order = np.asarray(order, dtype=np.int64)
        if order.size == 0:
            raise EmptyDatasetError("cannot take an empty selection")
        lengths = np.diff(self.indptr)[order]
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        if indptr[-1]:
            rows = [np.arange(self.indptr[i], self.indptr[i + 1]) for i in order]
            pos = np.concatenate(rows)
        else:
            pos = np.empty(0, dtype=np.int64)
        return Dataset(indptr, self.indices[pos], self.values[pos], self.labels[order], self.dim)

    def concat(self, other):
        if other.dim != self.dim:
            raise DimensionMismatchError(self.dim, other.dim, "dataset")
        indptr = np.concatenate([self.indptr, other.indptr[1:] + self.indptr[-1]])
        return Dataset(
            indptr,
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.values, other.values]),
            np.concatenate([self.labels, other.labels]),
            self.dim,
        )

    def row_norms_sq(self):
        rows = np.repeat(np.arange(len(self)), np.diff(self.indptr))
        return np.bincount(rows, weights=self.values**2, minlength=len(self))

    def beta_sq_max(self):
        """Largest squared Euclidean norm over all samples."""
        return float(self.row_norms_sq().max())

    def margins(self, w):
        w = _weights_of(w)
        if w.shape[0] != self.dim:
            raise DimensionMismatchError(self.dim, w.shape[0], "model")
        return _kernels.csr_margins(self.indptr, self.indices, self.values, w)


def _weights_of(w):
    if isinstance(w, DenseModel):
        return w.weights
    return np.asarray(w, dtype=np.float64)


def dot(x, w):
    """Inner product of a sparse vector with a dense model (or array)."""
    w = _weights_of(w)
    if x.dim != w.shape[0]:
        raise DimensionMismatchError(x.dim, w.shape[0])
    return float(_kernels.sparse_dot(x.indices, x.values, w))


def scale_add(w, a, x):
    """Return ``w + a * x`` touching only the support of ``x``."""
    if x.dim != w.dim:
        raise DimensionMismatchError(w.dim, x.dim)
    out = w.weights.copy()
    out[x.indices] += a * x.values
    return DenseModel(out, w.iterations)


def l2_norm_sq(x):
    return float(np.dot(x.values, x.values))
