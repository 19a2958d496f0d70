"""Node weights and model combination for weighted parallel SGD.

A node that lags ``T_i`` updates behind the fastest node gets weight
``rate**T_i`` normalized over the cluster. With ``rate = 1 - eta*lam`` this
compensates for the mean contraction lost to the delay; ``rate = 1`` gives
plain averaging.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import DimensionMismatchError, EmptyDatasetError, InvalidParameterError
from .sparse import DenseModel

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class DelayProfile:
    """Iteration deficit of every node relative to the fastest one."""

    delays: tuple

    def __post_init__(self):
        delays = tuple(int(T) for T in self.delays)
        if not delays:
            raise InvalidParameterError("delay profile needs at least one node")
        if min(delays) < 0:
            raise InvalidParameterError("delays must be non-negative")
        if min(delays) != 0:
            raise InvalidParameterError("the fastest node must have delay 0")
        object.__setattr__(self, "delays", delays)

    @property
    def k(self):
        return len(self.delays)

    @classmethod
    def zeros(cls, k):
        return cls((0,) * k)

    @classmethod
    def from_speeds(cls, speeds, t):
        """Delays for nodes running at relative ``speeds`` while the fastest does ``t`` steps."""
        speeds = np.asarray(speeds, dtype=np.float64)
        if np.any(speeds <= 0):
            raise InvalidParameterError("speeds must be positive")
        fmax = speeds.max()
        return cls(tuple(int(round(t * (1.0 - f / fmax))) for f in speeds))

    def as_array(self):
        return np.asarray(self.delays, dtype=np.float64)


def compute_weights(profile, rate):
    """Normalized ``rate**T_i`` weights, one per node.

    Computed from log-weights offset by the smallest delay so nothing
    overflows; weights that underflow below 1e-300 are set to exactly 0.
    """
    rate = float(rate)
    if not (0.0 < rate <= 1.0):
        raise InvalidParameterError(f"rate must lie in (0, 1], got {rate}")
    T = profile.as_array()
    k = T.shape[0]
    if rate == 1.0:
        return np.full(k, 1.0 / k)
    logs = (T - T.min()) * math.log(rate)
    raw = np.exp(logs)
    w = raw / raw.sum()
    tiny = w < UNDERFLOW
    if np.any(tiny):
        warnings.warn(
            f"weights of nodes {np.flatnonzero(tiny).tolist()} underflowed and were set to 0",
            RuntimeWarning,
            stacklevel=2,
        )
        w[tiny] = 0.0
        w /= w.sum()
    return w


def combine(models, weights):
    """``sum_i weights[i] * models[i]``, accumulated in ascending node order."""
    models = list(models)
    weights = np.asarray(weights, dtype=np.float64)
    if not models:
        raise EmptyDatasetError("nothing to combine")
    if len(models) != weights.shape[0]:
        raise DimensionMismatchError(len(models), weights.shape[0], "weight vector")
    dim = models[0].dim
    out = weights[0] * models[0].weights
    for wi, m in zip(weights[1:], models[1:]):
        if m.dim != dim:
            raise DimensionMismatchError(dim, m.dim, "model")
        out += wi * m.weights
    return DenseModel(out, max(m.iterations for m in models))


def direct_average(models):
    models = list(models)
    if not models:
        raise EmptyDatasetError("nothing to average")
    return combine(models, np.full(len(models), 1.0 / len(models)))
