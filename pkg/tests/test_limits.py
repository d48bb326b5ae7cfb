import numpy as np
import pytest

from bartree import treeindex
from bartree.errors import DomainError
from bartree.estimate import normal_matrix
from bartree.limits import (
    assemble,
    closed_form_p1,
    ell_direct,
    ell_fixed_point,
    ell_series,
    ell_series_enumerated,
    ell_solve,
    fixed_point_residual,
    lambda_limit,
    source_term,
)
from bartree.model import BarParams, companion_matrices
from bartree.noise import GAUSSIAN, NoiseSpec, theoretical_moments
from bartree.simulate import InitSpec, simulate_tree

from conftest import random_stable_params

ZERO_P2 = BarParams(2, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_reference_lambda_and_ell(ref_params):
    # independent first-order arithmetic: a_bar=1.5, b_bar=0.4, a2=2.5, ab=0.55, b2=0.17
    lam = 1.5 / (1 - 0.4)
    ell = (2.5 + 1.0 + 2 * lam * 0.55) / (1 - 0.17)
    assert lam == pytest.approx(2.5)
    assert ell == pytest.approx(6.25 / 0.83)
    assert lambda_limit(ref_params) == pytest.approx([lam], rel=1e-14)
    _, got = ell_solve(ref_params, 1.0)
    assert got[0, 0] == pytest.approx(ell, rel=1e-12)
    assert closed_form_p1(ref_params, 1.0) == pytest.approx((lam, ell), rel=1e-14)


def test_reference_assembly(ref_params, ref_spec):
    lt = assemble(ref_params, theoretical_moments(ref_spec))
    ell = 6.25 / 0.83
    assert np.allclose(lt.L, [[1.0, 2.5], [2.5, ell]], rtol=1e-12)
    assert np.linalg.det(lt.L) == pytest.approx(ell - 6.25, rel=1e-10)
    assert np.linalg.det(lt.L) == pytest.approx(1.2801204819277, rel=1e-12)
    assert lt.sigma2_clt_var == pytest.approx(1.25)
    assert lt.rho_clt_var == pytest.approx(1.25)
    gamma = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert np.allclose(lt.theta_cov, np.kron(gamma, np.linalg.inv(lt.L)))
    assert np.allclose(lt.Lambda, np.kron(np.eye(2), lt.L))


def test_zero_intercepts_give_zero_lambda():
    params = BarParams(2, (0.0, 0.3, -0.2), (0.0, 0.1, 0.4))
    assert np.all(lambda_limit(params) == 0.0)
    assert np.all(lambda_limit(ZERO_P2) == 0.0)


def test_zero_p2_hand_fixed_point():
    # T = e1 e1^t; A ell A^t moves ell_11 into the (2,2) slot, so ell_22 = ell_11 = 1
    T, ell = ell_solve(ZERO_P2, 1.0)
    assert np.array_equal(T, [[1.0, 0.0], [0.0, 0.0]])
    assert np.allclose(ell, np.eye(2), atol=1e-14)
    lt = assemble(ZERO_P2, theoretical_moments(NoiseSpec(GAUSSIAN, 1.0, 0.2)))
    assert np.allclose(lt.L, np.eye(3))
    assert np.allclose(lt.theta_cov, np.kron([[1.0, 0.2], [0.2, 1.0]], np.eye(3)))


def test_zero_source_gives_zero_ell():
    params = BarParams(1, (0.0, 0.5), (0.0, 0.3))
    T = source_term(params, 0.0, lambda_limit(params))
    assert np.all(T == 0.0)
    assert np.all(ell_direct(companion_matrices(params), T) == 0.0)


def test_uncorrelated_noise_decouples_blocks(ref_params):
    lt = assemble(ref_params, theoretical_moments(NoiseSpec(GAUSSIAN, 2.0, 0.0)))
    assert np.all(lt.theta_cov[:2, 2:] == 0.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_direct_iterative_and_series_agree(p):
    rng = np.random.default_rng(40 + p)
    for _ in range(5):
        params = random_stable_params(rng, p)
        pair = companion_matrices(params)
        T = source_term(params, 1.3, lambda_limit(params))
        direct = ell_direct(pair, T)
        iterated, _ = ell_fixed_point(pair, T)
        assert np.allclose(direct, iterated, rtol=1e-9)
        assert fixed_point_residual(pair, T, direct) <= 1e-10 * max(1.0, np.linalg.norm(direct))
        assert np.allclose(ell_series(pair, T, 200), direct, rtol=1e-9)
        for depth in (0, 3, 8):
            assert np.allclose(ell_series(pair, T, depth), ell_series_enumerated(pair, T, depth), rtol=1e-12)


def test_series_at_depth_30_close_to_solution(ref_params):
    pair = companion_matrices(ref_params)
    T = source_term(ref_params, 1.0, lambda_limit(ref_params))
    # averaged contraction here is (0.25 + 0.09)/2 = 0.17, so the tail after 30 terms is negligible
    assert ell_series(pair, T, 30)[0, 0] == pytest.approx(6.25 / 0.83, rel=1e-12)


def test_unit_mean_eigenvalue_rejected():
    params = BarParams(1, (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(DomainError, match="eigenvalue"):
        lambda_limit(params)


def test_p2_simulation_bridge():
    params = BarParams(2, (0.5, 0.4, 0.2), (-0.3, 0.1, 0.5))
    spec = NoiseSpec(GAUSSIAN, 1.0, 0.4)
    L = assemble(params, theoretical_moments(spec)).L
    n = 14
    mean = np.zeros_like(L)
    for seed in range(10):
        sample = simulate_tree(params, spec, InitSpec(), n + 1, seed)
        mean += normal_matrix(sample, n) / 10
    # S_n covers generations p-1..n: |T_n| minus the first p-1 generations
    mean /= treeindex.tree_size(n) - treeindex.tree_size(params.p - 2)
    assert np.allclose(mean, L, rtol=0.03, atol=0.03 * np.sqrt(np.outer(np.diag(L), np.diag(L))))
