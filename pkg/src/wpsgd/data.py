"""Sparse text I/O and the synthetic analog data generator.

File format, one sample per line (LF newlines)::

    label idx:val idx:val ...

with ``label`` in {0, 1} and 1-based, strictly ascending indices.
"""

from dataclasses import dataclass
import os

import numpy as np

from .errors import FormatError, InvalidParameterError
from .sparse import Dataset, DenseModel


def _parse_line(line, lineno, path):
    toks = line.split()
    try:
        label = int(toks[0])
    except ValueError:
        raise FormatError(f"bad label {toks[0]!r}", lineno, path) from None
    if label not in (0, 1):
        raise FormatError(f"label must be 0 or 1, got {label}", lineno, path)
    idx = np.empty(len(toks) - 1, dtype=np.int64)
    val = np.empty(len(toks) - 1, dtype=np.float64)
    for n, tok in enumerate(toks[1:]):
        i, sep, v = tok.partition(":")
        try:
            if not sep:
                raise ValueError
            idx[n] = int(i)
            val[n] = float(v)
        except ValueError:
            raise FormatError(f"malformed feature {tok!r}", lineno, path) from None
    if idx.size:
        if idx[0] < 1:
            raise FormatError("feature indices are 1-based", lineno, path)
        if np.any(np.diff(idx) <= 0):
            raise FormatError("feature indices must be strictly ascending", lineno, path)
        if not np.all(np.isfinite(val)):
            raise FormatError("non-finite feature value", lineno, path)
        if np.any(val == 0.0):
            raise FormatError("explicit zero feature value", lineno, path)
    return label, idx - 1, val


def parse_sparse_lines(lines, dim=None, path=None):
    labels, rows_i, rows_v = [], [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        label, idx, val = _parse_line(line, lineno, path)
        labels.append(label)
        rows_i.append(idx)
        rows_v.append(val)
    if not labels:
        raise FormatError("no samples found", None, path)
    seen = max((int(r[-1]) + 1 for r in rows_i if r.size), default=0)
    if dim is None:
        dim = seen
    elif seen > dim:
        raise FormatError(f"feature index {seen} exceeds dim {dim}", None, path)
    indptr = np.concatenate([[0], np.cumsum([r.size for r in rows_i])])
    indices = np.concatenate(rows_i) if indptr[-1] else np.empty(0, dtype=np.int64)
    values = np.concatenate(rows_v) if indptr[-1] else np.empty(0)
    return Dataset(indptr, indices, values, labels, dim)


def read_sparse_text(path, dim=None):
    """Load a dataset; ``dim`` defaults to the largest index present."""
    with open(path, encoding="ascii") as fh:
        return parse_sparse_lines(fh, dim, os.fspath(path))


def format_sparse_lines(d):
    for i in range(len(d)):
        a, b = d.indptr[i], d.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{v!r}" for j, v in zip(d.indices[a:b].tolist(), d.values[a:b].tolist()))
        yield f"{d.labels[i]} {feats}".rstrip() + "\n"


def write_sparse_text(d, path):
    # repr gives the shortest string that round-trips exactly
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.writelines(format_sparse_lines(d))


def write_model(model, path):
    """Header ``# dim=D iterations=N`` followed by 1-based ``idx:val`` nonzeros."""
    w = model.weights
    nz = np.flatnonzero(w)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# dim={model.dim} iterations={model.iterations}\n")
        fh.write(" ".join(f"{j + 1}:{v!r}" for j, v in zip(nz.tolist(), w[nz].tolist())) + "\n")


def read_model(path):
    with open(path, encoding="ascii") as fh:
        header = fh.readline()
        body = fh.read().split()
    try:
        fields = dict(kv.split("=") for kv in header.lstrip("#").split())
        dim, iterations = int(fields["dim"]), int(fields["iterations"])
    except (ValueError, KeyError):
        raise FormatError("missing or malformed model header", 1, os.fspath(path)) from None
    w = np.zeros(dim)
    for tok in body:
        i, _, v = tok.partition(":")
        try:
            w[int(i) - 1] = float(v)
        except (ValueError, IndexError):
            raise FormatError(f"malformed model entry {tok!r}", 2, os.fspath(path)) from None
    return DenseModel(w, iterations)


@dataclass(frozen=True)
class GenSpec:
    n_train: int
    n_test: int
    dim: int
    nnz_min: int = 5
    nnz_max: int = 10
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        problems = []
        if self.n_train < 1 or self.n_test < 1:
            problems.append("n_train and n_test must be >= 1")
        if not 1 <= self.nnz_min <= self.nnz_max <= self.dim:
            problems.append("need 1 <= nnz_min <= nnz_max <= dim")
        if problems:
            raise InvalidParameterError("; ".join(problems))


def label_coefficients(dim):
    """``(i % 4) * (-1)**i`` for 1-based positions ``i = 1..dim``."""
    i = np.arange(1, dim + 1)
    return (i % 4) * np.where(i % 2 == 0, 1.0, -1.0)


def analog_labels(d):
    """Labels implied by the generator's formula for the stored features."""
    y = d.csr @ label_coefficients(d.dim)
    return (y > 0).astype(np.int8)


def _generate(n, spec, rng, coef):
    nnz = rng.integers(spec.nnz_min, spec.nnz_max + 1, size=n)
    indptr = np.concatenate([[0], np.cumsum(nnz)])
    indices = np.empty(indptr[-1], dtype=np.int64)
    for r in range(n):
        pos = rng.choice(spec.dim, size=nnz[r], replace=False)
        indices[indptr[r]:indptr[r + 1]] = np.sort(pos)
    # uniform on (0, 1]
    values = 1.0 - rng.random(indptr[-1])
    rows = np.repeat(np.arange(n), nnz)
    y = np.bincount(rows, weights=values * coef[indices], minlength=n)
    labels = (y > 0).astype(np.int8)
    if spec.normalize:
        norms = np.sqrt(np.bincount(rows, weights=values**2, minlength=n))
        values = values / norms[rows]
    return Dataset(indptr, indices, values, labels, spec.dim)


def generate_analog(spec):
    """Return ``(train, test)`` drawn from one seeded stream."""
    rng = np.random.default_rng(spec.seed)
    coef = label_coefficients(spec.dim)
    train = _generate(spec.n_train, spec, rng, coef)
    test = _generate(spec.n_test, spec, rng, coef)
    return train, test
