"""Weighted parallel SGD for L2-regularized hinge-loss linear models.

Nodes of a simulated cluster train for different numbers of iterations; their
models are combined with weights ``rate**T_i`` (normalized), where ``T_i`` is
how many updates node ``i`` lags behind the fastest node.
"""

from .aggregation import DelayProfile, combine, compute_weights, direct_average
from .cluster import (
    ClusterSpec,
    ParallelRunResult,
    partition,
    periodic_schedule,
    run_direct_average_unbalanced,
    run_periodic_averaging,
    run_simuparallel,
    run_wpsgd,
)
from .data import GenSpec, generate_analog, read_model, read_sparse_text, write_model, write_sparse_text
from .delay import DelayConfig, check, run_delay_wpsgd, validate_step_size
from .errors import *  # noqa: F401,F403
from .objective import LossParams, error_rate, objective_value, sgd_step, subgradient
from .sparse import Dataset, DenseModel, Sample, SparseVector, dot, l2_norm_sq, scale_add
from .theory import (
    TheoryParams,
    corollary2_holds,
    corollary3_holds,
    corollary4_holds,
    deduction_bounds,
    fit_contracting_rate,
    theorem4_bound,
    theorem5_bound,
)
from .trainer import Checkpoint, TrainConfig, shuffle, train

__version__ = "0.1.0"
