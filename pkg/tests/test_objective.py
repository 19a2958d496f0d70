import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from oracles import grad_ref, loss_ref, step_ref
from wpsgd import Dataset, DenseModel, LossParams, Sample, SparseVector
from wpsgd.errors import DimensionMismatchError, InvalidParameterError, NonFiniteWeightsError
from wpsgd.objective import error_rate, objective_value, sample_loss, sgd_step, subgradient


def S(pairs, label, dim):
    return Sample(SparseVector.from_pairs(pairs, dim), label)


def test_loss_params_invariants():
    with pytest.raises(InvalidParameterError):
        LossParams(1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        LossParams(-0.1, 0.1)
    assert LossParams(0.01, 0.1).contraction == pytest.approx(0.999)


def test_sample_loss_examples():
    p = LossParams(0.3, 0.1)
    assert sample_loss(DenseModel(np.zeros(3)), S([(1, 2.0)], 0, 3), p) == 1.0
    w = DenseModel(np.array([2.0, 0.0]))
    assert sample_loss(w, S([(0, 1.0)], 1, 2), LossParams(0.0, 0.1)) == 0.0
    assert sample_loss(w, S([(0, 1.0)], 0, 2), LossParams(0.01, 0.1)) == pytest.approx(3.02, abs=1e-15)
    with pytest.raises(DimensionMismatchError):
        sample_loss(w, S([(0, 1.0)], 0, 3), p)


def test_objective_value_examples():
    p = LossParams(0.01, 0.1)
    s = S([(0, 1.0), (2, -0.5)], 1, 3)
    w = DenseModel(np.array([0.2, 1.0, 0.4]))
    d1 = Dataset.from_samples([s])
    assert objective_value(w, d1, p) == pytest.approx(sample_loss(w, s, p), rel=1e-15)
    d = Dataset.from_samples([s, S([(1, 2.0)], 0, 3)])
    assert objective_value(w, d.concat(d), p) == pytest.approx(objective_value(w, d, p), rel=1e-15)


def test_sgd_step_examples():
    w = sgd_step(DenseModel(np.zeros(1)), S([(0, 1.0)], 1, 1), LossParams(0.01, 0.1))
    np.testing.assert_allclose(w.weights, [0.1])
    assert w.iterations == 1
    p = LossParams(0.01, 0.1)
    w0 = DenseModel(np.array([5.0, 1.0]))
    w1 = sgd_step(w0, S([(0, 1.0)], 1, 2), p)
    assert np.array_equal(w1.weights, w0.weights * p.contraction)
    w2 = sgd_step(DenseModel(np.array([1.0])), S([(0, 1.0)], 0, 1), p)
    assert w2.weights[0] == pytest.approx(0.899, abs=1e-15)


def test_sgd_step_kink_is_inactive():
    p = LossParams(0.01, 0.1)
    w = DenseModel(np.array([1.0]))
    out = sgd_step(w, S([(0, 1.0)], 1, 1), p)
    assert out.weights[0] == p.contraction


def test_sgd_step_non_finite():
    with pytest.raises(NonFiniteWeightsError):
        sgd_step(DenseModel(np.array([1e308])), S([(0, -1e308)], 1, 1), LossParams(0.0, 1e10))


def test_error_rate_examples():
    d = Dataset.from_samples([S([(0, 1.0)], 1, 2), S([(1, 1.0)], 0, 2), S([(0, 1.0), (1, 1.0)], 1, 2)])
    assert error_rate(DenseModel(np.zeros(2)), d) == pytest.approx(2 / 3)
    assert error_rate(DenseModel(np.array([2.0, -1.0])), d) == 0.0
    w = np.array([0.3, -0.7])
    assert error_rate(DenseModel(w), d) + error_rate(DenseModel(-w), d) == pytest.approx(1.0)


dims = st.integers(1, 8)


@st.composite
def model_and_sample(draw):
    dim = draw(dims)
    w = np.array(draw(st.lists(st.floats(-3, 3), min_size=dim, max_size=dim)))
    idx = sorted(draw(st.sets(st.integers(0, dim - 1), min_size=1)))
    vals = draw(st.lists(st.floats(0.05, 2), min_size=len(idx), max_size=len(idx)))
    return w, Sample(SparseVector(idx, vals, dim), draw(st.integers(0, 1)))


@given(model_and_sample(), st.floats(0.001, 1.0), st.floats(0.001, 0.5))
def test_matches_oracle(ws, lam, eta):
    w, s = ws
    p = LossParams(lam, eta)
    x = dict(s.features.entries)
    m = DenseModel(w)
    assert sample_loss(m, s, p) == pytest.approx(loss_ref(list(w), x, s.label, lam), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(subgradient(m, s, p), grad_ref(list(w), x, s.label, lam), atol=1e-12)
    np.testing.assert_allclose(sgd_step(m, s, p).weights, step_ref(list(w), x, s.label, lam, eta), atol=1e-12)


@given(model_and_sample(), st.floats(0.001, 1.0))
def test_finite_difference(ws, lam):
    w, s = ws
    p = LossParams(lam, 0.1)
    m = DenseModel(w)
    from wpsgd import dot
    assume(abs(s.signed_label * dot(s.features, m) - 1.0) > 1e-3)
    g = subgradient(m, s, p)
    delta = 1e-6
    for j in range(w.shape[0]):
        e = np.zeros_like(w)
        e[j] = delta
        fd = (sample_loss(DenseModel(w + e), s, p) - sample_loss(DenseModel(w - e), s, p)) / (2 * delta)
        assert fd == pytest.approx(g[j], abs=1e-5)


@given(model_and_sample(), st.data(), st.floats(0.001, 1.0))
def test_strong_convexity(ws, data, lam):
    w, s = ws
    v = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=w.shape[0], max_size=w.shape[0])))
    p = LossParams(lam, 0.1)
    cw, cv = sample_loss(DenseModel(w), s, p), sample_loss(DenseModel(v), s, p)
    g = subgradient(DenseModel(w), s, p)
    assert cv >= cw + g @ (v - w) + 0.5 * lam * (v - w) @ (v - w) - 1e-9


@given(model_and_sample())
def test_zero_step_is_identity(ws):
    w, s = ws
    assert np.array_equal(sgd_step(DenseModel(w), s, LossParams(0.5, 0.0)).weights, w)


def test_pure_shrinkage_regularizer():
    p = LossParams(0.1, 0.05)
    s = S([(0, 1.0)], 1, 3)
    w = DenseModel(np.array([10.0, -2.0, 3.0]))
    for _ in range(20):
        reg = w.weights @ w.weights
        w = sgd_step(w, s, p)
        assert w.weights @ w.weights == pytest.approx(reg * p.contraction**2, rel=1e-13)
