import numpy as np

from wpsgd import Dataset, GenSpec, Sample, SparseVector, generate_analog


def toy_dataset(m=40, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(m):
        idx = np.sort(rng.choice(dim, size=rng.integers(1, dim + 1), replace=False))
        vals = rng.uniform(0.1, 1.0, idx.size)
        vals /= np.linalg.norm(vals)
        samples.append(Sample(SparseVector(idx, vals, dim), int(rng.integers(0, 2))))
    return Dataset.from_samples(samples)


def analog(n_train=1000, n_test=100, dim=100, seed=1):
    return generate_analog(GenSpec(n_train, n_test, dim, seed=seed))


def rows_of(d):
    return [(dict(s.features.entries), s.label, d.dim) for s in d]
