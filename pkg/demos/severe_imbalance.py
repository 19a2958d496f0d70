"""Two nodes that barely train: weighting versus plain averaging.

Both nodes hold half the data but one stops after 1% of the run. Plain
averaging lets the untrained model drag the result back toward its start.
"""

from wpsgd import (
    ClusterSpec, DelayProfile, GenSpec, LossParams, TrainConfig, direct_average,
    error_rate, generate_analog, run_simuparallel, run_wpsgd,
)
from wpsgd.errors import UnbalancedWorkloadError

t = 50_000
train_d, test_d = generate_analog(GenSpec(20_000, 2_000, 2_000, seed=11))
spec = ClusterSpec(10, DelayProfile((0,) * 8 + (int(0.99 * t),) * 2), partition_seed=0)

# eta = 1e-4 leaves every model predicting one class after 50k steps, so a
# larger step makes the comparison informative at this scale
for loss in (LossParams(0.01, 0.01), LossParams(0.01, 1e-4)):
    cfg = TrainConfig(loss, t, seed=0, init_value=4.0)
    res = run_wpsgd(train_d, spec, cfg)
    print(f"eta={loss.eta:g}: wp-sgd error {error_rate(res.final_model, test_d):.4f}, "
          f"direct average error {error_rate(direct_average(res.per_node_models), test_d):.4f}")

try:
    run_simuparallel(train_d, spec, TrainConfig(LossParams(0.01, 0.01), t))
except UnbalancedWorkloadError as exc:
    print(f"simuparallel refused: {exc}")
