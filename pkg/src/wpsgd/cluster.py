"""Deterministic in-process simulation of a heterogeneous k-node cluster.

Node ``i`` of a run with fastest-node budget ``t`` and delay ``T_i`` performs
``t - T_i`` updates on its own partition. Progress is interleaved in
fastest-node time: when the fastest node has done ``n`` updates, node ``i``
has done ``floor(n * (t - T_i) / t)``. Results depend only on the inputs,
never on how many threads run the node loops.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import warnings

import numpy as np

from .aggregation import DelayProfile, combine, compute_weights, direct_average
from .errors import (
    EmptyDatasetError,
    InvalidParameterError,
    ScheduleError,
    UnbalancedWorkloadError,
)
from .trainer import NodeTrainer

__all__ = [
    "ClusterSpec",
    "ParallelRunResult",
    "partition",
    "run_simuparallel",
    "run_wpsgd",
    "run_direct_average_unbalanced",
    "run_periodic_averaging",
    "periodic_schedule",
]


@dataclass(frozen=True)
class ClusterSpec:
    k: int
    delay_profile: DelayProfile
    partition_seed: int = 0
    data_shares: tuple = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError("k must be >= 1")
        if self.delay_profile.k != self.k:
            raise InvalidParameterError(
                f"delay profile has {self.delay_profile.k} nodes, cluster has {self.k}"
            )
        shares = self.data_shares if self.data_shares is not None else (1.0,) * self.k
        shares = tuple(float(s) for s in shares)
        if len(shares) != self.k:
            raise InvalidParameterError(f"expected {self.k} data shares, got {len(shares)}")
        if any(not s > 0 for s in shares):
            raise InvalidParameterError("data shares must be positive")
        object.__setattr__(self, "data_shares", shares)

    @classmethod
    def balanced(cls, k, partition_seed=0):
        return cls(k, DelayProfile.zeros(k), partition_seed)

    @property
    def fractions(self):
        s = np.asarray(self.data_shares)
        return s / s.sum()


@dataclass
class ParallelRunResult:
    final_model: object
    per_node_models: list
    checkpoints: list = field(default_factory=list)
    rejections: list = field(default_factory=list)


def apportion(m, shares):
    """Largest-remainder split of ``m`` items proportionally to ``shares``."""
    shares = np.asarray(shares, dtype=np.float64)
    scaled, total = m * shares, shares.sum()
    sizes = np.floor_divide(scaled, total)
    # remainders scaled by the total, so integer shares tie exactly
    rem = scaled - sizes * total
    sizes = sizes.astype(np.int64)
    left = m - int(sizes.sum())
    # ties broken towards the lower node index
    order = np.argsort(-rem, kind="stable")
    sizes[order[:left]] += 1
    return sizes


def partition(d, spec):
    """Disjoint, seeded, share-proportional split of ``d`` into ``k`` datasets.

    Each node's rows keep their original relative order; the node shuffles
    its own data when it starts training.
    """
    m = len(d)
    if m < spec.k:
        raise EmptyDatasetError(f"dataset of {m} samples cannot be split over {spec.k} nodes")
    if spec.k == 1:
        return [d]
    sizes = apportion(m, spec.data_shares)
    if np.any(sizes == 0):
        raise EmptyDatasetError(f"data shares leave node {int(np.argmin(sizes))} without samples")
    perm = np.random.default_rng(int(spec.partition_seed) & ((1 << 64) - 1)).permutation(m)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [d.take(np.sort(perm[bounds[i]:bounds[i + 1]])) for i in range(spec.k)]


def _advance(nodes, steps, threads):
    pairs = [(n, s) for n, s in zip(nodes, steps) if s > 0]
    if threads and threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda p: p[0].run(p[1]), pairs))
    else:
        for n, s in pairs:
            n.run(s)


def _checkpoint_grid(t, every):
    if not every:
        return []
    return list(range(every, t + 1, every))


def _make_nodes(d, spec, cfg):
    parts = partition(d, spec)
    return [
        NodeTrainer(part, cfg.loss, cfg.seed, cfg.init_value, node=i)
        for i, part in enumerate(parts)
    ]


def _run_interleaved(d, spec, cfg, rate, threads):
    t = cfg.total_iterations
    delays = np.asarray(spec.delay_profile.delays, dtype=np.int64)
    for i, T in enumerate(delays):
        if T >= t:
            raise ScheduleError(f"node {i} has delay {T} >= t = {t} and would train no steps")
    totals = t - delays
    nodes = _make_nodes(d, spec, cfg)
    checkpoints = []
    for n in _checkpoint_grid(t, cfg.checkpoint_every):
        target = (n * totals) // t
        _advance(nodes, target - np.array([nd.iterations for nd in nodes]), threads)
        w = compute_weights(DelayProfile(tuple(n - target)), rate)
        checkpoints.append((n, combine([nd.model() for nd in nodes], w)))
    _advance(nodes, totals - np.array([nd.iterations for nd in nodes]), threads)
    models = [nd.model() for nd in nodes]
    final = combine(models, compute_weights(spec.delay_profile, rate))
    return ParallelRunResult(final, models, checkpoints)


def run_simuparallel(d, spec, cfg, threads=1):
    """Balanced parallel SGD: every node does ``t`` steps, outputs are averaged."""
    for i, T in enumerate(spec.delay_profile.delays):
        if T != 0:
            raise UnbalancedWorkloadError(i, T)
    t = cfg.total_iterations
    nodes = _make_nodes(d, spec, cfg)
    checkpoints = []
    for n in _checkpoint_grid(t, cfg.checkpoint_every):
        _advance(nodes, [n - nd.iterations for nd in nodes], threads)
        checkpoints.append((n, direct_average([nd.model() for nd in nodes])))
    _advance(nodes, [t - nd.iterations for nd in nodes], threads)
    models = [nd.model() for nd in nodes]
    return ParallelRunResult(direct_average(models), models, checkpoints)


def run_wpsgd(d, spec, cfg, rate=None, threads=1):
    """Weighted parallel SGD.

    ``rate`` defaults to ``1 - eta*lam``; pass a fitted smaller rate to use
    the overall contracting rate instead.
    """
    if rate is None:
        rate = cfg.loss.contraction
    if not (0.0 < rate <= 1.0):
        raise InvalidParameterError(f"rate must lie in (0, 1], got {rate}")
    return _run_interleaved(d, spec, cfg, rate, threads)


def run_direct_average_unbalanced(d, spec, cfg, threads=1):
    """Same training as :func:`run_wpsgd`, but the output is a plain mean."""
    return _run_interleaved(d, spec, cfg, 1.0, threads)


def periodic_schedule(t, span, delays):
    """Per-round step counts, shape ``(t // span, k)``.

    Node ``i`` gets ``floor(span * (t - T_i) / t)`` steps per round and the
    remainder is handed out one step at a time to the earliest rounds, so the
    row sums equal ``t - T_i`` exactly.
    """
    if span < 1:
        raise ScheduleError("span must be >= 1")
    if span > t:
        raise ScheduleError(f"span {span} exceeds t = {t}")
    if t % span:
        raise ScheduleError(f"span {span} does not divide t = {t}")
    rounds = t // span
    totals = t - np.asarray(delays, dtype=np.int64)
    base = totals // rounds
    extra = totals - rounds * base
    sched = np.repeat(base[None, :], rounds, axis=0)
    sched += (np.arange(rounds)[:, None] < extra[None, :]).astype(np.int64)
    for r, row in enumerate(sched):
        if np.any(row <= 0):
            node = int(np.argmin(row))
            raise ScheduleError(f"node {node} would train no steps in round {r}")
    return sched


def periodic_validity(loss, delays, span):
    """``(k / sum_j q**T_j) * q**span`` with ``q = 1 - eta*lam``; must stay below 1."""
    q = loss.contraction
    T = np.asarray(delays, dtype=np.float64)
    mass = float(np.sum(q**T))
    return len(T) / mass * q**span


def run_periodic_averaging(d, spec, cfg, span, rate=None, threads=1):
    """Average (weighted by round-local delays) every ``span`` fastest-node steps.

    With zero delays this is periodic SimuParallel averaging; otherwise each
    round is a small WP-SGD run whose output seeds every node for the next.
    """
    if rate is None:
        rate = cfg.loss.contraction
    if not (0.0 < rate <= 1.0):
        raise InvalidParameterError(f"rate must lie in (0, 1], got {rate}")
    t = cfg.total_iterations
    delays = spec.delay_profile.delays
    sched = periodic_schedule(t, span, delays)
    factor = periodic_validity(cfg.loss, delays, span)
    if factor >= 1:
        warnings.warn(
            f"periodic averaging factor {factor:.6g} >= 1; training is not guaranteed to be valid",
            RuntimeWarning,
            stacklevel=2,
        )
    nodes = _make_nodes(d, spec, cfg)
    grid = set(_checkpoint_grid(t, cfg.checkpoint_every))
    checkpoints = []
    combined = None
    for r, steps in enumerate(sched):
        start = [nd.iterations for nd in nodes]
        round_base = r * span
        for n in sorted(c for c in grid if round_base < c < round_base + span):
            off = n - round_base
            target = (off * steps) // span
            _advance(nodes, [st + tg - nd.iterations for st, tg, nd in zip(start, target, nodes)], threads)
            w = compute_weights(DelayProfile(tuple(off - target)), rate)
            checkpoints.append((n, combine([nd.model() for nd in nodes], w)))
        _advance(nodes, [st + s - nd.iterations for st, s, nd in zip(start, steps, nodes)], threads)
        w = compute_weights(DelayProfile(tuple(span - steps)), rate)
        combined = combine([nd.model() for nd in nodes], w)
        combined.iterations = round_base + span
        if round_base + span in grid:
            checkpoints.append((round_base + span, combined.copy()))
        if r < len(sched) - 1:
            for nd in nodes:
                nd.load(combined.weights)
    models = [nd.model() for nd in nodes]
    return ParallelRunResult(combined, models, checkpoints)
