import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import label_ref
from wpsgd import Dataset, DenseModel, GenSpec, Sample, SparseVector, generate_analog
from wpsgd.data import (
    analog_labels, label_coefficients, parse_sparse_lines, read_model, read_sparse_text,
    write_model, write_sparse_text,
)
from wpsgd.errors import FormatError, InvalidParameterError


def test_parse_examples():
    d = parse_sparse_lines(["1 3:1.0\n"])
    assert d[0] == Sample(SparseVector([2], [1.0], 3), 1)
    d = parse_sparse_lines(["0\n", "1 2:0.5\n"])
    assert d[0].label == 0 and d[0].features.nnz == 0
    assert parse_sparse_lines(["1 1:2"], dim=10).dim == 10


@pytest.mark.parametrize("line, msg", [
    ("2 1:1.0", "label"),
    ("x 1:1.0", "label"),
    ("1 3:1.0 2:1.0", "ascending"),
    ("1 3:1.0 3:2.0", "ascending"),
    ("1 0:1.0", "1-based"),
    ("1 3-1.0", "malformed"),
    ("1 3:abc", "malformed"),
    ("1 3:0", "zero"),
])
def test_parse_errors_carry_line_numbers(line, msg):
    with pytest.raises(FormatError, match=msg) as exc:
        parse_sparse_lines(["1 1:1.0", line], path="f.txt")
    assert exc.value.line == 2
    assert "f.txt:2:" in str(exc.value)


def test_dim_override_too_small():
    with pytest.raises(FormatError):
        parse_sparse_lines(["1 5:1.0"], dim=3)


@st.composite
def datasets(draw):
    dim = draw(st.integers(1, 12))
    samples = []
    for _ in range(draw(st.integers(1, 10))):
        idx = sorted(draw(st.sets(st.integers(0, dim - 1))))
        vals = draw(st.lists(
            st.floats(allow_nan=False, allow_infinity=False).filter(lambda v: v != 0),
            min_size=len(idx), max_size=len(idx),
        ))
        samples.append(Sample(SparseVector(idx, vals, dim), draw(st.integers(0, 1))))
    return Dataset.from_samples(samples, dim)


@given(datasets())
def test_round_trip(tmp_path_factory, d):
    path = tmp_path_factory.mktemp("rt") / "d.txt"
    write_sparse_text(d, path)
    assert read_sparse_text(path, d.dim) == d
    assert b"\r" not in path.read_bytes()


def test_model_round_trip(tmp_path):
    m = DenseModel(np.array([0.0, 1 / 3, -2e-300, 0.0]), 17)
    write_model(m, tmp_path / "m.txt")
    assert read_model(tmp_path / "m.txt") == m
    (tmp_path / "bad.txt").write_text("nothing\n")
    with pytest.raises(FormatError):
        read_model(tmp_path / "bad.txt")


def test_label_formula_examples():
    coef = label_coefficients(8)
    assert coef.tolist() == [-1, 2, -3, 0, -1, 2, -3, 0]
    assert label_ref({2: 1.0}) == 0
    assert label_ref({3: 1.0}) == 0
    assert label_ref({1: 1.0}) == 1


def test_gen_spec_invariants():
    with pytest.raises(InvalidParameterError):
        GenSpec(10, 10, 5, nnz_min=3, nnz_max=6)
    with pytest.raises(InvalidParameterError):
        GenSpec(10, 10, 5, nnz_min=0, nnz_max=2)


@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(0, 4), st.booleans())
def test_generator_properties(seed, lo, extra, normalize):
    spec = GenSpec(60, 20, 40, lo, lo + extra, seed, normalize)
    tr, te = generate_analog(spec)
    for d in (tr, te):
        nnz = np.diff(d.indptr)
        assert nnz.min() >= lo and nnz.max() <= lo + extra
        assert np.all(d.values > 0)
        if normalize:
            np.testing.assert_allclose(d.row_norms_sq(), 1.0, atol=1e-9)
        assert np.array_equal(analog_labels(d), d.labels)
        for s in list(d)[:5]:
            assert label_ref(dict(s.features.entries)) == s.label


def test_generator_is_byte_deterministic(tmp_path):
    spec = GenSpec(300, 30, 100, seed=5)
    for name in ("a", "b"):
        tr, te = generate_analog(spec)
        write_sparse_text(tr, tmp_path / f"{name}_train.txt")
        write_sparse_text(te, tmp_path / f"{name}_test.txt")
    assert (tmp_path / "a_train.txt").read_bytes() == (tmp_path / "b_train.txt").read_bytes()
    assert (tmp_path / "a_test.txt").read_bytes() == (tmp_path / "b_test.txt").read_bytes()
    other, _ = generate_analog(GenSpec(300, 30, 100, seed=6))
    assert other != generate_analog(spec)[0]


def test_full_scale_generation_shape():
    tr, te = generate_analog(GenSpec(460_000, 40_000, 100_000, seed=0))
    assert (len(tr), len(te), tr.dim) == (460_000, 40_000, 100_000)
    assert np.array_equal(analog_labels(tr), tr.labels)
