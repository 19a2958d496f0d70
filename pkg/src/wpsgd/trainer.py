"""Single-node SGD training loop.

A node shuffles its local data once with a seed derived from the run seed and
its node index, then cycles through that fixed order. When the iteration
budget exceeds the local data size the same permutation is traversed again.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyDatasetError, InvalidParameterError, NonFiniteWeightsError
from .objective import LossParams
from .sparse import DenseModel

_MASK64 = (1 << 64) - 1


def derive_seed(seed, *path):
    """Mix ``seed`` with integer path components into a fresh 64-bit seed."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, *[int(p) for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrainConfig:
    loss: LossParams
    total_iterations: int
    seed: int = 0
    init_value: float = 0.0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.total_iterations < 0:
            raise InvalidParameterError("total_iterations must be >= 0")
        if self.checkpoint_every < 0:
            raise InvalidParameterError("checkpoint_every must be >= 0")


@dataclass
class Checkpoint:
    iteration: int
    model: DenseModel


def shuffle_order(m, seed):
    """The permutation :func:`shuffle` applies to ``m`` rows."""
    if m == 1:
        return np.zeros(1, dtype=np.int64)
    return np.random.default_rng(int(seed) & _MASK64).permutation(m)


def shuffle(d, seed):
    """Seeded permutation of the dataset (PCG64, platform stable)."""
    if len(d) == 1:
        return d
    return d.take(shuffle_order(len(d), seed))


class NodeTrainer:
    """Resumable SGD state for one node: weights, update count, sample cursor."""

    def __init__(self, data, loss, seed, init_value=0.0, node=0):
        if len(data) == 0:
            raise EmptyDatasetError("node has no data")
        self.node = node
        self.loss = loss
        self.data = shuffle(data, derive_seed(seed, node))
        self._ysign = self.data.signed_labels
        self.weights = np.full(data.dim, float(init_value))
        self.iterations = 0
        self.cursor = 0

    def run(self, n_steps):
        n_steps = int(n_steps)
        if n_steps <= 0:
            return
        d = self.data
        cursor, failed = _kernels.run_steps(
            self.weights, d.indptr, d.indices, d.values, self._ysign,
            self.cursor, n_steps, self.loss.contraction, self.loss.eta,
        )
        if failed:
            self.iterations += failed
            self.cursor = cursor
            raise NonFiniteWeightsError(self.iterations, self.node)
        self.cursor = cursor
        self.iterations += n_steps

    def model(self):
        return DenseModel(self.weights.copy(), self.iterations)

    def load(self, weights):
        self.weights[:] = weights


def train(d, cfg, node=0):
    """Run ``cfg.total_iterations`` SGD steps; returns ``(model, checkpoints)``."""
    trainer = NodeTrainer(d, cfg.loss, cfg.seed, cfg.init_value, node)
    checkpoints = []
    t = cfg.total_iterations
    every = cfg.checkpoint_every
    if every:
        for n in range(every, t + 1, every):
            trainer.run(n - trainer.iterations)
            checkpoints.append(Checkpoint(n, trainer.model()))
    trainer.run(t - trainer.iterations)
    return trainer.model(), checkpoints
