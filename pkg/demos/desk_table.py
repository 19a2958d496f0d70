"""Objective curves for balanced, weighted and directly averaged training.

Ten nodes on generated data: eight fast ones and two that hold a fifth of the
data and lag 80% of the run. Prints test objective per checkpoint.
"""

import numpy as np

from wpsgd import (
    ClusterSpec, DelayProfile, GenSpec, LossParams, TrainConfig, direct_average,
    generate_analog, objective_value, run_simuparallel, run_wpsgd,
)

t = 50_000
loss = LossParams(lam=0.01, eta=1e-4)
train_d, test_d = generate_analog(GenSpec(20_000, 2_000, 2_000, seed=7))
cfg = TrainConfig(loss, t, seed=0, init_value=4.0, checkpoint_every=10_000)

slow = ClusterSpec(10, DelayProfile((0,) * 8 + (int(0.8 * t),) * 2),
                   partition_seed=0, data_shares=(1,) * 8 + (0.2, 0.2))
wp = run_wpsgd(train_d, slow, cfg, rate=0.99999)
sp = run_simuparallel(train_d, ClusterSpec.balanced(10), cfg)

print(f"{'iteration':>10} {'simuparallel':>13} {'wp-sgd':>10}")
for (n, m_sp), (_, m_wp) in zip(sp.checkpoints, wp.checkpoints):
    print(f"{n:>10} {objective_value(m_sp, test_d, loss):>13.4f} {objective_value(m_wp, test_d, loss):>10.4f}")

da = direct_average(wp.per_node_models)
print(f"final direct average: {objective_value(da, test_d, loss):.4f}")
print(f"node iterations: {np.array([m.iterations for m in wp.per_node_models])}")
