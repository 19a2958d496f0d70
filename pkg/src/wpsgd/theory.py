"""Closed-form bounds and tolerance predicates for weighted parallel SGD.

Every bound is an upper bound on ``E[c(w)] - min c`` built from

* a mean term ``G k q^t / (lam * S)`` (how far the weighted mean still is
  from the fixed point),
* a spread term ``sqrt(k)/S * (2 G sqrt(eta/lam) + G/lam q^t)``,
* and a residual ``c(v) - min c`` supplied by the caller,

where ``q`` is the contracting rate and ``S = sum_j q^T_j``. ``G`` (Lipschitz
bound of the loss), ``grad_lip`` (Lipschitz bound of the gradient) and the
residual are never estimated here. For unit-norm hinge-loss data ``G = 1``
and ``grad_lip = lam + beta_max^2 * c_star`` are reasonable heuristics.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple, Optional

import numpy as np

from .aggregation import DelayProfile
from .errors import DegenerateConditionError, InvalidParameterError, RateFitError

_LOG_MAX = 709.0


@dataclass(frozen=True)
class TheoryParams:
    G: float
    lam: float
    eta: float
    delays: DelayProfile
    t: int
    rate: Optional[float] = None
    span: Optional[int] = None
    grad_lip: float = 1.0
    residual: float = 0.0
    wasserstein_1: Optional[float] = None
    wasserstein_2: Optional[float] = None
    sigma_star: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.delays, DelayProfile):
            object.__setattr__(self, "delays", DelayProfile(tuple(self.delays)))
        if not (0 < self.eta * self.lam < 1):
            raise InvalidParameterError("need 0 < eta*lam < 1")
        for name in ("G", "grad_lip", "residual", "wasserstein_1", "wasserstein_2", "sigma_star"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.t < 0:
            raise InvalidParameterError("t must be >= 0")
        if self.rate is not None and not (0 < self.rate <= 1):
            raise InvalidParameterError("rate must lie in (0, 1]")
        if self.span is not None and self.span < 1:
            raise InvalidParameterError("span must be >= 1")

    @property
    def k(self):
        return self.delays.k

    @property
    def q(self):
        return 1.0 - self.eta * self.lam


class Condition(NamedTuple):
    holds: bool
    lhs: float
    rhs: float


class DeductionBounds(NamedTuple):
    periodic_simuparallel: float
    periodic_weighted: float
    valid: bool
    validity_factor: float


def weighted_mass(delays, rate):
    """``sum_i rate**T_i``."""
    T = np.asarray(delays.delays if isinstance(delays, DelayProfile) else delays, dtype=np.float64)
    return float(np.sum(float(rate) ** T))


def _safe_exp(x):
    if x > _LOG_MAX:
        return math.inf
    return math.exp(x)


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _assemble(mean_term, spread_term, grad_lip, residual):
    inner = (mean_term + spread_term) * math.sqrt(2.0 * grad_lip) + math.sqrt(residual)
    if math.isinf(inner):
        return math.inf
    return inner * inner


def _stationary_spread(G, lam, eta):
    return 2.0 * G * math.sqrt(eta) / math.sqrt(lam)


def corollary_report(delays, rate):
    """``2 * sum_i rate**T_i > sqrt(k) + k`` with both sides."""
    k = delays.k
    lhs = 2.0 * weighted_mass(delays, rate)
    rhs = math.sqrt(k) + k
    return Condition(lhs > rhs, lhs, rhs)


def corollary3_holds(delays, p):
    """Tolerance condition with the framework rate ``1 - eta*lam``."""
    return corollary_report(delays, 1.0 - p.eta * p.lam).holds


def corollary4_holds(delays, r):
    """Tolerance condition with a fitted overall contracting rate ``r``."""
    if not (0 < r <= 1):
        raise InvalidParameterError("r must lie in (0, 1]")
    return corollary_report(delays, r).holds


def corollary2_report(tp):
    """Distribution-aware tolerance condition; needs the Wasserstein estimates."""
    if tp.wasserstein_1 is None or tp.wasserstein_2 is None or tp.sigma_star is None:
        raise InvalidParameterError("wasserstein_1, wasserstein_2 and sigma_star are required")
    k = tp.k
    S = weighted_mass(tp.delays, tp.q)
    denom = k - S
    if denom == 0:
        raise DegenerateConditionError("k - sum q^T_i is zero (no delays): condition is vacuous")
    lhs = (S - math.sqrt(k)) / denom
    qt = tp.q ** tp.t
    rdenom = qt * tp.wasserstein_2 + tp.sigma_star
    if tp.wasserstein_1 == 0:
        rhs = 0.0
    elif rdenom == 0:
        raise DegenerateConditionError("q^t * W2 + sigma_star is zero")
    else:
        rhs = qt * tp.wasserstein_1 / rdenom
    return Condition(lhs > rhs, lhs, rhs)


def corollary2_holds(tp):
    return corollary2_report(tp).holds


def _weighted_bound(tp, rate):
    G, lam, eta, k = tp.G, tp.lam, tp.eta, tp.k
    S = weighted_mass(tp.delays, rate)
    qt = rate ** tp.t
    mean_term = G * k * qt / (lam * S)
    spread_term = math.sqrt(k) / S * (_stationary_spread(G, lam, eta) + G / lam * qt)
    return _assemble(mean_term, spread_term, tp.grad_lip, tp.residual)


def theorem4_bound(tp):
    """Objective-gap bound of WP-SGD with rate ``1 - eta*lam``."""
    return _weighted_bound(tp, tp.q)


def theorem5_bound(tp):
    """Same bound with the overall contracting rate ``tp.rate`` in every power."""
    if tp.rate is None:
        raise InvalidParameterError("theorem5_bound needs tp.rate")
    return _weighted_bound(tp, tp.rate)


def simuparallel_bound(G, lam, eta, k, t, grad_lip=1.0, residual=0.0):
    """Balanced SimuParallel bound, written out independently of the weighted one."""
    q = 1.0 - eta * lam
    decay = G / lam * q**t
    mean_term = decay
    spread_term = (_stationary_spread(G, lam, eta) + decay) / math.sqrt(k)
    return _assemble(mean_term, spread_term, grad_lip, residual)


def variance_divisor(k, t, span):
    """``sqrt(k) ** (t / span)``: spread reduction from ``t/span`` averagings."""
    if span < 1 or t % span:
        raise InvalidParameterError("span must divide t")
    return math.sqrt(k) ** (t // span)


def deduction_bounds(tp):
    """Bounds for averaging every ``tp.span`` fastest-node iterations.

    Returns the balanced (periodic SimuParallel) bound, the weighted
    (periodic WP-SGD) bound and whether ``k/S * q**span < 1``.
    """
    if tp.span is None:
        raise InvalidParameterError("deduction_bounds needs tp.span")
    if tp.t % tp.span:
        raise InvalidParameterError(f"span {tp.span} does not divide t = {tp.t}")
    G, lam, eta, k, q = tp.G, tp.lam, tp.eta, tp.k, tp.q
    rounds = tp.t // tp.span
    S = weighted_mass(tp.delays, q)
    log_decay = _log(G / lam) + tp.t * math.log(q)
    stationary = _stationary_spread(G, lam, eta)
    log_spread = _log(stationary + G / lam * q**tp.t)

    mean1 = _safe_exp(log_decay)
    spread1 = _safe_exp(log_spread - rounds * 0.5 * math.log(k))
    d1 = _assemble(mean1, spread1, tp.grad_lip, tp.residual)

    mean2 = _safe_exp(log_decay + rounds * math.log(k / S))
    spread2 = _safe_exp(log_spread + rounds * math.log(math.sqrt(k) / S))
    d2 = _assemble(mean2, spread2, tp.grad_lip, tp.residual)

    factor = k / S * q**tp.span
    return DeductionBounds(d1, d2, factor < 1.0, factor)


class RateFit(NamedTuple):
    rate: float
    amplitude: float
    residual: float


def fit_rate(curve, floor=0.0):
    """Least-squares fit of ``log(obj - floor) = log(A) + n * log(r)``."""
    pts = np.asarray(list(curve), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise RateFitError("need at least two (iteration, objective) points")
    n, obj = pts[:, 0], pts[:, 1] - floor
    if np.any(obj <= 0):
        raise RateFitError("every objective must lie above the floor")
    y = np.log(obj)
    nc = n - n.mean()
    denom = float(np.dot(nc, nc))
    if denom == 0:
        raise RateFitError("iterations must not all be equal")
    slope = float(np.dot(nc, y - y.mean())) / denom
    intercept = float(y.mean() - slope * n.mean())
    r = math.exp(slope)
    if not r < 1.0:
        raise RateFitError(f"curve is not decreasing (fitted rate {r:.6g} >= 1)")
    resid = float(np.sqrt(np.mean((y - (intercept + slope * n)) ** 2)))
    return RateFit(r, math.exp(intercept), resid)


def fit_contracting_rate(curve, floor=0.0):
    """Empirical overall contracting rate of an objective curve."""
    return fit_rate(curve, floor).rate
