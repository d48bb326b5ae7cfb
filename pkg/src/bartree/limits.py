"""Almost-sure limits of the normalised design and the asymptotic covariances.

With ``a_bar = (a0 + b0) / 2`` and ``A_bar = (A + B) / 2``:

* ``lambda = a_bar (I - A_bar)^{-1} e1`` is the limit of the mean regression vector;
* ``ell`` solves ``ell = T + (A ell A^t + B ell B^t) / 2`` and is the limit of the mean
  of ``X X^t``;
* the normal matrix divided by the tree size tends to ``L = [[1, lambda^t], [lambda, ell]]``
  because its blocks are the counts, the sums of ``X_k`` and the sums of ``X_k X_k^t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegeneracyError, DomainError, InstabilityError
from .model import BarParams, CompanionPair, companion_matrices
from .noise import NoiseMoments

FIXED_POINT_STEP_TOL = 1e-12
FIXED_POINT_MAX_ITER = 1_000_000
CROSS_CHECK_RTOL = 1e-9


def lambda_limit(params: BarParams) -> np.ndarray:
    pair = companion_matrices(params)
    p = params.p
    M = np.eye(p) - pair.mean
    if np.linalg.cond(M) > 1e14:
        eig = np.linalg.eigvals(pair.mean)
        closest = eig[np.argmin(np.abs(eig - 1.0))]
        raise DomainError(
            f"I - mean companion matrix is singular: the mean companion has eigenvalue {closest:.6g} at 1"
        )
    e1 = np.zeros(p)
    e1[0] = 1.0
    return params.a_bar * np.linalg.solve(M, e1)


def source_term(params: BarParams, sigma2: float, lam: np.ndarray) -> np.ndarray:
    """``T = (sigma2 + a2_bar) e1 e1^t + (a0 (A lam e1^t + e1 lam^t A^t) + b0 (...B...)) / 2``."""
    pair = companion_matrices(params)
    p = params.p
    e1 = np.zeros(p)
    e1[0] = 1.0
    T = (sigma2 + params.a2_bar) * np.outer(e1, e1)
    for coef, C in ((params.a[0], pair.A), (params.b[0], pair.B)):
        u = C @ lam
        T += 0.5 * coef * (np.outer(u, e1) + np.outer(e1, u))
    return T


def averaged_map(pair: CompanionPair, X: np.ndarray) -> np.ndarray:
    return 0.5 * (pair.A @ X @ pair.A.T + pair.B @ X @ pair.B.T)


def ell_direct(pair: CompanionPair, T: np.ndarray) -> np.ndarray:
    """Solve the fixed-point equation through its Kronecker (vectorised) form."""
    p = T.shape[0]
    K = np.eye(p * p) - 0.5 * (np.kron(pair.A, pair.A) + np.kron(pair.B, pair.B))
    if np.linalg.cond(K) > 1e14:
        raise InstabilityError("the averaged Kronecker operator has an eigenvalue at 1")
    # row-major vec: vec(A X A^t) = (A kron A) vec(X)
    ell = np.linalg.solve(K, T.ravel()).reshape(p, p)
    return 0.5 * (ell + ell.T)


def ell_fixed_point(
    pair: CompanionPair, T: np.ndarray, tol: float = FIXED_POINT_STEP_TOL, max_iter: int = FIXED_POINT_MAX_ITER
) -> tuple[np.ndarray, int]:
    """Iterate ``ell <- T + averaged_map(ell)`` from zero.

    Stops when the Frobenius step falls below ``tol * max(1, ||ell||_F)``.
    """
    ell = np.zeros_like(T)
    for it in range(1, max_iter + 1):
        new = T + averaged_map(pair, ell)
        step = np.linalg.norm(new - ell)
        ell = new
        if step < tol * max(1.0, np.linalg.norm(ell)):
            return ell, it
        if not np.isfinite(step):
            break
    raise ConsistencyError(f"fixed-point iteration for ell did not converge in {max_iter} steps")


def ell_series(pair: CompanionPair, T: np.ndarray, depth: int) -> np.ndarray:
    """Partial sum of ``sum_k 2^-k sum_{C in {A;B}^k} C T C^t`` for ``k = 0..depth``.

    The inner sum over the ``2**k`` words equals ``2**k`` times the k-fold averaged map,
    which is how each level is evaluated here.
    """
    total = T.copy()
    level = T.copy()
    for _ in range(depth):
        level = averaged_map(pair, level)
        total += level
    return total


def ell_series_enumerated(pair: CompanionPair, T: np.ndarray, depth: int) -> np.ndarray:
    """Same partial sum by explicit enumeration of every word; only for small depths."""
    total = T.copy()
    words = [np.eye(T.shape[0])]
    for k in range(1, depth + 1):
        words = [W @ C for W in words for C in (pair.A, pair.B)]
        total += sum(W @ T @ W.T for W in words) / 2**k
    return total


def fixed_point_residual(pair: CompanionPair, T: np.ndarray, ell: np.ndarray) -> float:
    return float(np.linalg.norm(ell - T - averaged_map(pair, ell)))


def ell_solve(params: BarParams, sigma2: float, lam: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(T, ell)`` by direct Kronecker solve, cross-checked against fixed-point iteration."""
    if lam is None:
        lam = lambda_limit(params)
    pair = companion_matrices(params)
    T = source_term(params, sigma2, lam)
    ell = ell_direct(pair, T)
    ell_iter, _ = ell_fixed_point(pair, T)
    scale = max(np.linalg.norm(ell), np.finfo(float).tiny)
    if np.linalg.norm(ell - ell_iter) > CROSS_CHECK_RTOL * scale:
        raise ConsistencyError(
            "direct and iterative solutions for ell disagree: relative gap "
            f"{np.linalg.norm(ell - ell_iter) / scale:.3e}"
        )
    return T, ell


def closed_form_p1(params: BarParams, sigma2: float) -> tuple[float, float]:
    """Scalar ``(lambda, ell)`` for ``p = 1`` from the explicit first-order formulas."""
    if params.p != 1:
        raise DomainError("closed forms exist only for p = 1")
    a0, a1 = params.a
    b0, b1 = params.b
    a_bar = (a0 + b0) / 2
    slope_bar = (a1 + b1) / 2
    a2_bar = (a0**2 + b0**2) / 2
    ab_bar = (a0 * a1 + b0 * b1) / 2
    slope2_bar = (a1**2 + b1**2) / 2
    lam = a_bar / (1 - slope_bar)
    return lam, (a2_bar + sigma2 + 2 * lam * ab_bar) / (1 - slope2_bar)


@dataclass
class LimitTheory:
    lambda_: np.ndarray
    T: np.ndarray
    ell: np.ndarray
    L: np.ndarray
    Lambda: np.ndarray
    theta_cov: np.ndarray
    sigma2_clt_var: float
    rho_clt_var: float

    def to_dict(self) -> dict:
        def mat(M):
            return [[float(v) for v in row] for row in np.atleast_2d(M)]

        return {
            "lambda": [float(v) for v in self.lambda_],
            "T": mat(self.T),
            "ell": mat(self.ell),
            "L": mat(self.L),
            "Lambda": mat(self.Lambda),
            "theta_cov": mat(self.theta_cov),
            "sigma2_clt_var": float(self.sigma2_clt_var),
            "rho_clt_var": float(self.rho_clt_var),
        }


def assemble(params: BarParams, moments: NoiseMoments) -> LimitTheory:
    lam = lambda_limit(params)
    T, ell = ell_solve(params, moments.sigma2, lam)
    p = params.p
    L = np.empty((p + 1, p + 1))
    L[0, 0] = 1.0
    L[0, 1:] = lam
    L[1:, 0] = lam
    L[1:, 1:] = ell
    try:
        chol = np.linalg.cholesky(L)
    except np.linalg.LinAlgError:
        raise DegeneracyError("limit matrix L is not positive definite") from None
    L_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(p + 1)))
    L_inv = 0.5 * (L_inv + L_inv.T)
    return LimitTheory(
        lambda_=lam,
        T=T,
        ell=ell,
        L=L,
        Lambda=np.kron(np.eye(2), L),
        theta_cov=np.kron(moments.gamma, L_inv),
        sigma2_clt_var=(moments.tau4 - 2 * moments.sigma2**2 + moments.nu2) / 2,
        rho_clt_var=moments.nu2 - moments.rho**2,
    )
