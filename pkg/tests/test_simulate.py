import numpy as np
import pytest

from bartree.errors import DomainError, ValidationError
from bartree.model import BarParams
from bartree.noise import GAUSSIAN, NoiseSpec, sample_pairs, standard_normals
from bartree.seeding import make_rng
from bartree.simulate import (
    InitSpec,
    MissingNodeError,
    TreeFormatError,
    TreeSample,
    read_tree_csv,
    regression_vector,
    simulate_tree,
    write_tree_csv,
)

SPEC = NoiseSpec(GAUSSIAN, 1.0, 0.5)


def test_zero_noise_fixed_point():
    params = BarParams(1, (1.0, 0.5), (1.0, 0.5))
    sample = simulate_tree(params, SPEC, InitSpec.explicit([2.0]), 5, seed=1, zero_noise=True)
    assert np.all(sample.values == 2.0)


def test_pure_noise_values_are_the_draws():
    params = BarParams(1, (0.0, 0.0), (0.0, 0.0))
    n, seed = 5, 99
    sample = simulate_tree(params, SPEC, InitSpec(), n, seed)
    rng = make_rng(seed)
    root = standard_normals(rng, 1)
    expected = [root[0]]
    for g in range(n):
        expected.extend(sample_pairs(SPEC, rng, 2**g).ravel())  # even, odd daughters in id order
    assert np.array_equal(sample.values, expected)


def test_iid_structure_law_of_large_numbers():
    params = BarParams(2, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    sample = simulate_tree(params, NoiseSpec(GAUSSIAN, 1.0, 0.0), InitSpec(), 12, seed=3)
    last = sample.values[2**12 - 1 :]
    assert last.size == 2**12
    assert abs(last.mean()) <= 0.02
    assert abs(last.var() - 1.0) <= 0.05


def test_recursion_holds_node_by_node(ref_params):
    sample = simulate_tree(ref_params, SPEC, InitSpec(), 4, seed=8, zero_noise=True)
    for k in range(2, 32):
        mother = sample.x(k // 2)
        coeffs = ref_params.a if k % 2 == 0 else ref_params.b
        assert sample.x(k) == pytest.approx(coeffs[0] + coeffs[1] * mother, rel=1e-14)


def test_regression_vector():
    sample = TreeSample(3, 4, np.arange(1.0, 32.0))
    assert regression_vector(sample, 12).tolist() == [12.0, 6.0, 3.0]
    assert regression_vector(TreeSample(2, 3, np.arange(1.0, 16.0)), 5).tolist() == [5.0, 2.0]
    assert regression_vector(TreeSample(1, 2, np.arange(1.0, 8.0)), 6).tolist() == [6.0]
    with pytest.raises(DomainError):
        regression_vector(sample, 2)


def test_n_below_p_rejected():
    params = BarParams(3, (0.0, 0.1, 0.1, 0.1), (0.0, 0.1, 0.1, 0.1))
    with pytest.raises(DomainError):
        simulate_tree(params, SPEC, InitSpec(), 2, seed=1)


def test_explicit_init_length_checked():
    params = BarParams(2, (0.0, 0.1, 0.1), (0.0, 0.1, 0.1))
    with pytest.raises(ValidationError):
        simulate_tree(params, SPEC, InitSpec.explicit([1.0]), 4, seed=1)


def test_unstable_needs_override():
    params = BarParams(1, (0.0, 1.1), (0.0, 0.3))
    with pytest.raises(DomainError):
        simulate_tree(params, SPEC, InitSpec(), 4, seed=1)
    sample = simulate_tree(params, SPEC, InitSpec(), 4, seed=1, allow_unstable=True)
    assert sample.values.size == 31


def test_same_seed_same_tree(ref_params):
    one = simulate_tree(ref_params, SPEC, InitSpec(), 6, seed=21)
    two = simulate_tree(ref_params, SPEC, InitSpec(), 6, seed=21)
    three = simulate_tree(ref_params, SPEC, InitSpec(), 6, seed=22)
    assert np.array_equal(one.values, two.values)
    assert not np.array_equal(one.values, three.values)


def test_csv_roundtrip(tmp_path, ref_params):
    sample = simulate_tree(ref_params, SPEC, InitSpec(), 3, seed=4)
    path = tmp_path / "tree.csv"
    write_tree_csv(sample, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "node_id,x" and len(lines) == 16
    back = read_tree_csv(path, 1)
    assert back.n_generations == 3
    assert np.array_equal(back.values, sample.values)


@pytest.mark.parametrize(
    "body, error, message",
    [
        ("node_id,x\n1,1\n2,2\n", MissingNodeError, "missing node id 3"),
        ("node_id,x\n1,1\n2,2\n4,1\n", MissingNodeError, "missing node id 3"),
        ("node_id,x\n1,1\n2,oops\n3,1\n", TreeFormatError, "row 3"),
        ("node_id,x\n1,1\n2,2,9\n3,1\n", TreeFormatError, "row 3"),
        ("id,value\n1,1\n", TreeFormatError, "header"),
        ("", TreeFormatError, "header"),
    ],
)
def test_csv_errors(tmp_path, body, error, message):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(error, match=message):
        read_tree_csv(path, 1)
