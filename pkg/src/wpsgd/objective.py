"""Regularized hinge loss, its subgradient and the sequential SGD step.

Labels are stored as {0, 1} and mapped to -1/+1 here. At the hinge kink
(signed margin exactly 1) the loss subgradient is taken to be zero.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, EmptyDatasetError, InvalidParameterError, NonFiniteWeightsError
from .sparse import DenseModel, dot


@dataclass(frozen=True)
class LossParams:
    """Regularization weight ``lam`` and learning rate ``eta``.

    Zero values are accepted so that degenerate cases (no regularizer, frozen
    step) can be expressed; ``eta * lam`` must stay below 1.
    """

    lam: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.eta)):
            raise InvalidParameterError("lam and eta must be finite")
        if self.lam < 0 or self.eta < 0:
            raise InvalidParameterError("lam and eta must be non-negative")
        if self.eta * self.lam >= 1:
            raise InvalidParameterError(f"eta*lam must be < 1, got {self.eta * self.lam}")

    @property
    def contraction(self):
        """Per-step shrink factor ``1 - eta*lam``."""
        return 1.0 - self.eta * self.lam

    def require_contracting(self):
        if not (0 < self.eta * self.lam < 1):
            raise InvalidParameterError("need 0 < eta*lam < 1")


def _check_dim(w, x):
    if w.dim != x.dim:
        raise DimensionMismatchError(w.dim, x.dim)


def hinge(w, s):
    _check_dim(w, s.features)
    return max(0.0, 1.0 - s.signed_label * dot(s.features, w))


def sample_loss(w, s, p):
    """``lam/2 * ||w||^2 + max(0, 1 - y * w.x)`` for one sample."""
    reg = 0.5 * p.lam * float(np.dot(w.weights, w.weights))
    return reg + hinge(w, s)


def subgradient(w, s, p):
    """Dense subgradient of :func:`sample_loss` at ``w``."""
    _check_dim(w, s.features)
    g = p.lam * w.weights.copy()
    y = s.signed_label
    if y * dot(s.features, w) < 1.0:
        g[s.features.indices] -= y * s.features.values
    return g


def objective_value(w, d, p):
    """Mean regularized hinge loss over the dataset."""
    if len(d) == 0:
        raise EmptyDatasetError("objective of an empty dataset")
    if w.dim != d.dim:
        raise DimensionMismatchError(d.dim, w.dim, "model")
    margins = d.signed_labels * d.margins(w.weights)
    hinge_mean = float(np.mean(np.maximum(0.0, 1.0 - margins)))
    return 0.5 * p.lam * float(np.dot(w.weights, w.weights)) + hinge_mean


def sgd_step(w, s, p):
    """One SGD update; returns a new model with ``iterations + 1``."""
    _check_dim(w, s.features)
    out = w.weights.copy()
    ok = _kernels.step_inplace(
        out, s.features.indices, s.features.values, s.signed_label, p.contraction, p.eta
    )
    if not ok or not np.all(np.isfinite(out)):
        raise NonFiniteWeightsError(w.iterations + 1)
    return DenseModel(out, w.iterations + 1)


def error_rate(w, d):
    """Fraction of misclassified samples; a zero score predicts class 0."""
    if len(d) == 0:
        raise EmptyDatasetError("error rate of an empty dataset")
    pred = (d.margins(w.weights if isinstance(w, DenseModel) else w) > 0).astype(np.int8)
    return float(np.mean(pred != d.labels))
