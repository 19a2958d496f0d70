"""Fit the overall contracting rate of a run and use it to size delays.

The framework rate ``1 - eta*lam`` is a loose upper bound; the fitted rate
from an objective curve is usually much smaller and tolerates less delay.
"""

from wpsgd import DelayProfile, GenSpec, LossParams, TrainConfig, generate_analog, objective_value, train
from wpsgd.theory import corollary_report, fit_rate

loss = LossParams(lam=0.01, eta=0.01)
train_d, _ = generate_analog(GenSpec(5_000, 10, 500, seed=3))
final, cps = train(train_d, TrainConfig(loss, 20_000, seed=0, init_value=4.0, checkpoint_every=1_000))

curve = [(c.iteration, objective_value(c.model, train_d, loss)) for c in cps]
floor = 0.999 * min(obj for _, obj in curve)
fit = fit_rate(curve[:8], floor)
print(f"framework rate {loss.contraction}, fitted rate {fit.rate:.6f} (log residual {fit.residual:.3g})")

for lag in (1_000, 5_000, 10_000):
    prof = DelayProfile((0, 0, lag, lag))
    print(f"lag {lag:>6}: framework {corollary_report(prof, loss.contraction).holds}, "
          f"fitted {corollary_report(prof, fit.rate).holds}")
