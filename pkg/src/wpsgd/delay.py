"""Delay SGD servers gated by a geometric check, aggregated with WP-SGD weights.

Each simulated server keeps a short history of its accepted models. An update
at accepted iteration ``j`` uses the gradient at the stale model
``w[j-1-tau]`` and applies it to ``w[j-1]``. The check runs before the update
(on the history ending at ``w[j-1]``) and after it (on
``w[j-2], w[j-1], w[j]``); a rejected update is discarded and the server moves
on to its next sample.
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .aggregation import DelayProfile, combine, compute_weights
from .cluster import ParallelRunResult, partition
from .errors import (
    InvalidParameterError,
    NoAdmissibleSampleError,
    NonFiniteWeightsError,
    ScheduleError,
    StepSizeError,
)
from .sparse import DenseModel, SparseVector
from .trainer import derive_seed, shuffle_order


@dataclass(frozen=True)
class DelayConfig:
    """``max_delay`` is M (staleness is drawn from ``0..M-1``); ``c_star`` bounds |dL/dy|."""

    max_delay: int = 1
    c_star: float = 1.0
    history_len: int = None

    def __post_init__(self):
        if self.max_delay < 1:
            raise InvalidParameterError("max_delay must be >= 1")
        if not self.c_star > 0:
            raise InvalidParameterError("c_star must be positive")
        hl = self.history_len if self.history_len is not None else self.max_delay + 2
        if hl < self.max_delay + 2:
            raise InvalidParameterError("history_len must be >= max_delay + 2")
        object.__setattr__(self, "history_len", int(hl))


def step_size_sides(p, beta_sq_max, cfg):
    lhs = p.eta * p.lam + p.eta * beta_sq_max * cfg.c_star
    rhs = (1.0 - p.eta * p.lam) ** cfg.max_delay
    return lhs, rhs


def validate_step_size(p, beta_sq_max, cfg):
    """True iff ``eta*lam + eta*beta_max^2*c_star <= (1 - eta*lam)**M``."""
    lhs, rhs = step_size_sides(p, beta_sq_max, cfg)
    return lhs <= rhs


def check_rate(p, beta_sq, c_star, tau):
    """``(eta*lam + c_star*eta*beta^2) ** (1/tau)``; tau 0 is treated as 1."""
    base = p.lam * p.eta + c_star * p.eta * beta_sq
    return base ** (1.0 / max(int(tau), 1))


def length_min(prev, prev2, rate):
    """Nearest admissible location of the fixed point's projection."""
    if rate >= 1.0:
        raise StepSizeError(f"check rate {rate} >= 1; reduce the step size")
    return (prev - rate * prev2) / (1.0 - rate)


def perpendicular_norm(w, x):
    """Norm of the component of ``w`` orthogonal to the sparse vector ``x``."""
    w = w.weights if isinstance(w, DenseModel) else np.asarray(w)
    beta_sq = float(np.dot(x.values, x.values))
    perp = w.copy()
    if beta_sq > 0:
        perp[x.indices] -= (_kernels.sparse_dot(x.indices, x.values, w) / beta_sq) * x.values
    return float(np.linalg.norm(perp))


@dataclass
class CheckOutcome:
    accepted: bool
    length_min: float
    lengths: np.ndarray
    perp_norms: tuple = ()
    failed: str = None
    rate: float = float("nan")


def check(history, p, x, cfg, tau=None):
    """Geometric acceptance test for a delayed update.

    ``history`` lists models oldest first. Every entry with two predecessors
    in the list must have its projection on ``x`` inside the closed interval
    spanned by the previous projection and the derived ``length_min``. The
    two newest entries must also not show a growing component orthogonal to
    ``x``.
    """
    ws = [h.weights if isinstance(h, DenseModel) else np.asarray(h, dtype=np.float64) for h in history]
    if len(ws) < 3:
        raise InvalidParameterError("check needs at least three models")
    beta_sq = float(np.dot(x.values, x.values))
    if beta_sq == 0.0:
        raise InvalidParameterError("check needs a nonzero sample vector")
    if tau is None:
        tau = len(ws) - 1
    rate = check_rate(p, beta_sq, cfg.c_star, tau)
    if rate >= 1.0:
        raise StepSizeError(
            f"check rate {rate:.6g} >= 1 for tau={tau}; reduce the learning rate"
        )
    L = np.array([_kernels.sparse_dot(x.indices, x.values, w) for w in ws])
    failed = None
    lmin = float("nan")
    for q in range(2, len(L)):
        lmin = (L[q - 1] - rate * L[q - 2]) / (1.0 - rate)
        lo, hi = min(lmin, L[q - 1]), max(lmin, L[q - 1])
        if not (lo <= L[q] <= hi):
            failed = "interval"
            break
    older = perpendicular_norm(ws[-2], x)
    newer = perpendicular_norm(ws[-1], x)
    if failed is None and newer > older:
        failed = "perpendicular"
    return CheckOutcome(failed is None, float(lmin), L, (older, newer), failed, rate)


@dataclass
class RejectionRecord:
    server: int
    iteration: int
    sample_id: int
    gate: str
    predicate: str


class DelayServer:
    """One delay-SGD server with its local data, history and rejection log."""

    def __init__(self, data, loss, dcfg, seed, init_value=0.0, node=0, budget=0):
        self.node = node
        self.loss = loss
        self.cfg = dcfg
        # same order a NodeTrainer with this seed and node index would use
        self.sample_ids = shuffle_order(len(data), derive_seed(seed, node))
        self.data = data.take(self.sample_ids)
        self._ysign = self.data.signed_labels
        self._norms = self.data.row_norms_sq()
        # staleness depends only on the accepted-iteration index, so a
        # rejection never consumes randomness
        self._tau_rng = np.random.default_rng(derive_seed(seed, node, 1))
        self._taus = self._tau_rng.integers(0, dcfg.max_delay, size=max(int(budget), 1))
        self.history = deque([np.full(data.dim, float(init_value))], maxlen=dcfg.history_len + 1)
        self.iterations = 0
        self.cursor = 0
        self.rejections = []
        self._streak = []

    @property
    def weights(self):
        return self.history[-1]

    def model(self):
        return DenseModel(self.history[-1].copy(), self.iterations)

    def tau_for(self, j):
        """Staleness used for accepted iteration ``j`` (uniform on 0..M-1, capped by j-1)."""
        while j - 1 >= self._taus.shape[0]:
            more = self._tau_rng.integers(0, self.cfg.max_delay, size=self._taus.shape[0])
            self._taus = np.concatenate([self._taus, more])
        return min(int(self._taus[j - 1]), j - 1)

    def _row(self, i):
        a, b = self.data.indptr[i], self.data.indptr[i + 1]
        return self.data.indices[a:b], self.data.values[a:b]

    def _reject(self, gate, predicate):
        rec = RejectionRecord(self.node, self.iterations + 1, int(self.sample_ids[self.cursor]), gate, predicate)
        self.rejections.append(rec)
        self._streak.append(rec)

    def _advance_cursor(self):
        self.cursor += 1
        if self.cursor == len(self.data):
            self.cursor = 0

    def attempt(self, on_accept=None):
        """Try one update with the sample under the cursor; returns True if accepted."""
        j = self.iterations + 1
        tau = self.tau_for(j)
        idx, vals = self._row(self.cursor)
        x = SparseVector.trusted(idx, vals, self.data.dim)
        y = self._ysign[self.cursor]
        hist = list(self.history)
        accepted = True
        if self._norms[self.cursor] == 0.0:
            self._reject("pre", "zero_sample")
            accepted = False
        elif len(hist) >= 3:
            pre = check(hist[-(tau + 3):], self.loss, x, self.cfg, tau)
            if not pre.accepted:
                self._reject("pre", pre.failed)
                accepted = False
        if accepted:
            w_prev = hist[-1]
            w_new = w_prev.copy()
            if tau == 0:
                ok = _kernels.step_inplace(w_new, idx, vals, y, self.loss.contraction, self.loss.eta)
            else:
                stale = hist[-1 - tau]
                margin = _kernels.sparse_dot(idx, vals, stale)
                w_new -= (self.loss.eta * self.loss.lam) * stale
                if y * margin < 1.0:
                    w_new[idx] += (self.loss.eta * y) * vals
                ok = True
            if not ok or not np.all(np.isfinite(w_new)):
                raise NonFiniteWeightsError(j, self.node)
            if len(hist) >= 2:
                post = check([hist[-2], w_prev, w_new], self.loss, x, self.cfg, tau)
                if not post.accepted:
                    self._reject("post", post.failed)
                    accepted = False
        if accepted:
            self.history.append(w_new)
            self.iterations = j
            self._streak = []
            if on_accept is not None:
                on_accept(j, tau, x, w_prev, w_new)
        self._advance_cursor()
        if not accepted and len(self._streak) >= len(self.data):
            raise NoAdmissibleSampleError(self.node, j, list(self._streak))
        return accepted

    def run(self, n_accepted, on_accept=None):
        target = self.iterations + int(n_accepted)
        while self.iterations < target:
            self.attempt(on_accept)


def run_delay_wpsgd(d, spec, cfg, dcfg, rate=None, threads=1):
    """Delay-SGD servers on a simulated unbalanced cluster, then WP-SGD aggregation.

    Server ``i`` performs ``t - T_i`` accepted updates. Refuses to start when
    the step-size precondition fails on the data.
    """
    if rate is None:
        rate = cfg.loss.contraction
    if not (0.0 < rate <= 1.0):
        raise InvalidParameterError(f"rate must lie in (0, 1], got {rate}")
    beta_sq_max = d.beta_sq_max()
    if not validate_step_size(cfg.loss, beta_sq_max, dcfg):
        lhs, rhs = step_size_sides(cfg.loss, beta_sq_max, dcfg)
        raise StepSizeError(
            f"eta*lam + eta*beta_max^2*c_star = {lhs:.6g} exceeds (1-eta*lam)^M = {rhs:.6g}"
        )
    t = cfg.total_iterations
    delays = np.asarray(spec.delay_profile.delays, dtype=np.int64)
    for i, T in enumerate(delays):
        if T >= t:
            raise ScheduleError(f"server {i} has delay {T} >= t = {t} and would train no steps")
    totals = t - delays
    parts = partition(d, spec)
    servers = [
        DelayServer(part, cfg.loss, dcfg, cfg.seed, cfg.init_value, node=i, budget=totals[i])
        for i, part in enumerate(parts)
    ]

    def advance(targets):
        jobs = [(s, tg - s.iterations) for s, tg in zip(servers, targets) if tg > s.iterations]
        if threads and threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(lambda j: j[0].run(j[1]), jobs))
        else:
            for s, n in jobs:
                s.run(n)

    checkpoints = []
    every = cfg.checkpoint_every
    if every:
        for n in range(every, t + 1, every):
            target = (n * totals) // t
            advance(target)
            w = compute_weights(DelayProfile(tuple(n - target)), rate)
            checkpoints.append((n, combine([s.model() for s in servers], w)))
    advance(totals)
    models = [s.model() for s in servers]
    final = combine(models, compute_weights(spec.delay_profile, rate))
    rejections = [r for s in servers for r in s.rejections]
    return ParallelRunResult(final, models, checkpoints, rejections)
