"""Least-squares estimation of the BAR(p) coefficients and noise moments.

The estimator built from the tree up to generation ``n`` regresses each daughter pair
``Z_k = (X_2k, X_2k+1)`` on ``Y_k = (1, X_k, ..., X_{k//2**(p-1)})`` over the mothers
``k`` returned by :func:`bartree.treeindex.mother_ids`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import treeindex
from .errors import DomainError
from .model import BarParams, check_stable
from .noise import NoiseMoments
from .simulate import TreeSample, regressors

SINGULAR_CONDITION = 1e12
# The streaming inverse is seeded only once S is this well conditioned: rounding error
# in the seed inverse is carried unchanged through every later rank-one update.
INVERSE_SEED_CONDITION = 1e4


def regressor_rows(sample: TreeSample, nodes: np.ndarray, x: np.ndarray | None = None) -> np.ndarray:
    """Rows ``Y_k = (1, X_k, ..., X_{k//2**(p-1)})``."""
    x = sample.padded() if x is None else x
    return np.column_stack([np.ones(nodes.size), regressors(x, nodes, sample.p)])


def design(sample: TreeSample, mothers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Regressor rows ``Y`` and daughter pairs ``Z = (X_2k, X_2k+1)`` for the given mothers."""
    x = sample.padded()
    Z = np.column_stack([x[2 * mothers], x[2 * mothers + 1]])
    return regressor_rows(sample, mothers, x), Z


def is_singular(S: np.ndarray, limit: float = SINGULAR_CONDITION) -> bool:
    s = np.linalg.svd(S, compute_uv=False)
    return not s[0] > 0 or s[-1] * limit < s[0]


def solve_normal(S: np.ndarray, cross: np.ndarray) -> tuple[np.ndarray, bool]:
    """``S^{-1} cross``, adding the identity to ``S`` when it is numerically singular."""
    ridge = is_singular(S)
    if ridge:
        S = S + np.eye(S.shape[0])
    return np.linalg.solve(S, cross), ridge


def normal_matrix(sample: TreeSample, m: int) -> np.ndarray:
    """``S_m``: sum of ``Y_k Y_k^t`` over nodes of generations ``p-1..m``."""
    if m > sample.n_generations:
        raise DomainError(f"sample covers {sample.n_generations} generations, asked for S_{m}")
    Y = regressor_rows(sample, treeindex.node_range(sample.p - 1, m))
    return Y.T @ Y


def _check_n(sample: TreeSample, n: int) -> None:
    if n < sample.p:
        raise DomainError(f"need n >= p, got n={n}, p={sample.p}")
    if n > sample.n_generations:
        raise DomainError(f"sample covers {sample.n_generations} generations, asked for n={n}")


@dataclass
class EstimationResult:
    p: int
    n_generations: int
    theta_hat: np.ndarray
    ridge_applied: bool
    sigma2_hat: float | None = None
    rho_hat: float | None = None

    @property
    def theta_matrix(self) -> np.ndarray:
        return self.theta_hat.reshape(2, self.p + 1).T

    @property
    def params(self) -> BarParams:
        return BarParams.from_vec(self.p, self.theta_hat)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "theta_hat": [float(v) for v in self.theta_hat],
            "sigma2_hat": None if self.sigma2_hat is None else float(self.sigma2_hat),
            "rho_hat": None if self.rho_hat is None else float(self.rho_hat),
            "ridge_applied": bool(self.ridge_applied),
            "n_generations": self.n_generations,
        }


def ls_estimate(sample: TreeSample, n: int) -> EstimationResult:
    """Least-squares estimate from generations ``0..n``, in the stacked ``(a, b)`` layout."""
    _check_n(sample, n)
    Y, Z = design(sample, treeindex.mother_ids(n, sample.p))
    theta, ridge = solve_normal(Y.T @ Y, Y.T @ Z)
    return EstimationResult(sample.p, n, theta.T.ravel(), ridge)


def sequential_estimates(sample: TreeSample, n: int) -> list[tuple[np.ndarray, bool]]:
    """Estimates ``theta_l`` for ``l = p-1 .. n`` as ``(p+1) x 2`` matrices with ridge flags.

    ``theta_l`` only uses mothers up to generation ``l - 1``; for ``l = p - 1`` the
    design is empty and the identity fallback returns zero.
    """
    _check_n(sample, n)
    p = sample.p
    S = np.zeros((p + 1, p + 1))
    cross = np.zeros((p + 1, 2))
    out = [solve_normal(S, cross)]
    for g in range(p - 1, n):
        Y, Z = design(sample, treeindex.node_range(g, g))
        S += Y.T @ Y
        cross += Y.T @ Z
        out.append(solve_normal(S, cross))
    return out


def residual_moments(
    sample: TreeSample, result: EstimationResult, n: int | None = None, *, sequential: bool = False
) -> tuple[float, float]:
    """Noise variance and sister covariance estimated from residuals.

    Both sums range over the same mothers as the estimator and are normalised by
    ``2 |T_{n-1}|`` and ``|T_{n-1}|``. By default every residual uses ``result``'s
    coefficients. With ``sequential=True`` the residuals of mothers in generation ``l``
    use the estimate built from generations up to ``l`` only.
    """
    n = result.n_generations if n is None else n
    _check_n(sample, n)
    p = sample.p
    size = treeindex.tree_size(n - 1)
    if not sequential:
        Y, Z = design(sample, treeindex.mother_ids(n, p))
        resid = Z - Y @ result.theta_matrix
    else:
        estimates = sequential_estimates(sample, n)
        blocks = []
        for offset, g in enumerate(range(p - 1, n)):
            Y, Z = design(sample, treeindex.node_range(g, g))
            blocks.append(Z - Y @ estimates[offset][0])
        resid = np.concatenate(blocks)
    sigma2 = float(np.sum(resid**2) / (2 * size))
    rho = float(np.sum(resid[:, 0] * resid[:, 1]) / size)
    return sigma2, rho


def estimate(sample: TreeSample, n: int | None = None, *, sequential: bool = False) -> EstimationResult:
    """:func:`ls_estimate` followed by :func:`residual_moments`."""
    n = sample.n_generations if n is None else n
    result = ls_estimate(sample, n)
    result.sigma2_hat, result.rho_hat = residual_moments(sample, result, n, sequential=sequential)
    return result


@dataclass
class DesignState:
    """Running normal matrix, its inverse and the cross sums for streaming estimation.

    Rows are accumulated directly until ``S`` is well conditioned (condition number at
    most ``INVERSE_SEED_CONDITION``), then ``S_inv`` is formed once and maintained by
    rank-one updates.
    """

    S: np.ndarray
    cross: np.ndarray
    S_inv: np.ndarray | None = None
    count: int = 0

    @classmethod
    def empty(cls, p: int) -> "DesignState":
        return cls(np.zeros((p + 1, p + 1)), np.zeros((p + 1, 2)))

    @classmethod
    def ridge_seeded(cls, p: int) -> "DesignState":
        return cls(np.eye(p + 1), np.zeros((p + 1, 2)), np.eye(p + 1))

    @property
    def inverse_valid(self) -> bool:
        return self.S_inv is not None

    def copy(self) -> "DesignState":
        return DesignState(
            self.S.copy(),
            self.cross.copy(),
            None if self.S_inv is None else self.S_inv.copy(),
            self.count,
        )

    def absorb(self, y, z=None) -> None:
        """Add one mother in place; ``z`` is its daughter pair (optional)."""
        y = np.asarray(y, dtype=float)
        if self.S_inv is not None:
            Sy = self.S_inv @ y
            self.S_inv = self.S_inv - np.outer(Sy, Sy) / (1.0 + y @ Sy)
        self.S += np.outer(y, y)
        if z is not None:
            self.cross += np.outer(y, z)
        self.count += 1
        if (
            self.S_inv is None
            and self.count >= self.S.shape[0]
            and not is_singular(self.S, INVERSE_SEED_CONDITION)
        ):
            self.S_inv = np.linalg.inv(self.S)

    def theta(self) -> tuple[np.ndarray, bool]:
        if self.S_inv is not None:
            return self.S_inv @ self.cross, False
        return solve_normal(self.S, self.cross)


def rank1_update(state: DesignState, y, z=None) -> DesignState:
    """New state with ``y y^t`` absorbed; the inverse follows the Sherman-Morrison formula

        S_inv' = S_inv - (S_inv y)(S_inv y)^t / (1 + y^t S_inv y)
    """
    new = state.copy()
    new.absorb(y, z)
    return new


def block_riccati_update(S_inv: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    """Inverse of ``S + Phi Phi^t`` from ``S_inv`` for a whole block of columns ``Phi``."""
    SP = S_inv @ Phi
    inner = np.eye(Phi.shape[1]) + Phi.T @ SP
    return S_inv - SP @ np.linalg.solve(inner, SP.T)


def streaming_estimate(sample: TreeSample, n: int) -> tuple[EstimationResult, DesignState]:
    """Same estimate as :func:`ls_estimate`, absorbing mothers one at a time in id order."""
    _check_n(sample, n)
    Y, Z = design(sample, treeindex.mother_ids(n, sample.p))
    state = DesignState.empty(sample.p)
    for y, z in zip(Y, Z):
        state.absorb(y, z)
    theta, ridge = state.theta()
    return EstimationResult(sample.p, n, theta.T.ravel(), ridge), state


@dataclass
class MartingaleDiagnostics:
    """Per-generation quantities for ``g = p .. n`` (index ``g - p`` in every array).

    ``V`` is ``M_g^t Sigma_{g-1}^{-1} M_g``; ``qsl_running`` and ``theta_qsl`` are its
    Cesaro means and the ``Lambda``-weighted error analogue, both divided by ``g``.
    The residual-gap sums use the sequential residuals over mothers of generations
    ``p .. g-1``; the ``_full`` variants also include generation ``p-1``.
    """

    p: int
    generations: np.ndarray
    V: np.ndarray
    qsl_running: np.ndarray
    theta_qsl: np.ndarray
    resid_gap_sq: np.ndarray
    resid_gap_cross: np.ndarray
    resid_gap_sq_full: np.ndarray
    resid_gap_cross_full: np.ndarray
    sigma2_true: np.ndarray
    rho_true: np.ndarray
    sigma2_gap_scaled: np.ndarray
    rho_gap_scaled: np.ndarray
    ridge: np.ndarray = field(repr=False)
    burn_in: int = 0

    def at(self, g: int) -> dict:
        i = g - self.p
        return {
            "V": float(self.V[i]),
            "qsl_running": float(self.qsl_running[i]),
            "theta_qsl": float(self.theta_qsl[i]),
            "resid_gap_sq": float(self.resid_gap_sq[i]),
            "resid_gap_cross": float(self.resid_gap_cross[i]),
        }


def martingale_diagnostics(
    sample: TreeSample,
    params: BarParams,
    moments: NoiseMoments,
    n: int | None = None,
    L: np.ndarray | None = None,
    burn_in: int | None = None,
) -> MartingaleDiagnostics:
    """Rebuild the true noise from known ``params`` and track the martingale quantities.

    ``burn_in`` is the first estimator index whose terms enter the running sums (the
    terms of ``theta_k`` and ``V_k`` for ``k >= burn_in``, residual gaps of mothers in
    generations ``>= burn_in``). It defaults to ``p``, i.e. every defined term. Sums are
    still divided by ``g``, so the limits are unaffected.
    """
    n = sample.n_generations if n is None else n
    _check_n(sample, n)
    burn_in = sample.p if burn_in is None else max(int(burn_in), sample.p)
    full_start = sample.p - 1 if burn_in == sample.p else burn_in
    check_stable(params)
    if L is None:
        from .limits import assemble

        L = assemble(params, moments).L
    p = sample.p
    theta = params.theta
    S = np.zeros((p + 1, p + 1))
    cross = np.zeros((p + 1, 2))
    M = np.zeros((p + 1, 2))
    theta_hat, _ = solve_normal(S, cross)

    gens = np.arange(p, n + 1)
    m = gens.size
    V = np.zeros(m)
    V_raw = np.zeros(m)
    theta_term = np.zeros(m)
    ridge = np.zeros(m, dtype=bool)
    gap_sq = np.zeros(m)
    gap_cross = np.zeros(m)
    gap_sq_full = np.zeros(m)
    gap_cross_full = np.zeros(m)
    noise_sq = np.zeros(m)
    noise_cross = np.zeros(m)
    hat_sq = np.zeros(m)
    hat_cross = np.zeros(m)

    run = dict.fromkeys(("gsq", "gcr", "gsq_f", "gcr_f", "nsq", "ncr", "hsq", "hcr"), 0.0)
    for i, g in enumerate(gens):
        l = g - 1
        # mothers of generation l, residuals use theta_hat_l (built from generations < l)
        Y, Z = design(sample, treeindex.node_range(l, l))
        eps = Z - Y @ theta
        gap = Y @ (theta - theta_hat)
        gsq = float(np.sum(gap**2))
        gcr = float(np.sum(gap[:, 0] * gap[:, 1]))
        if l >= full_start:
            run["gsq_f"] += gsq
            run["gcr_f"] += gcr
        if l >= p and l >= burn_in:
            run["gsq"] += gsq
            run["gcr"] += gcr
            run["nsq"] += float(np.sum(eps**2))
            run["ncr"] += float(np.sum(eps[:, 0] * eps[:, 1]))
            resid = eps - gap
            run["hsq"] += float(np.sum(resid**2))
            run["hcr"] += float(np.sum(resid[:, 0] * resid[:, 1]))
        gap_sq[i], gap_cross[i] = run["gsq"], run["gcr"]
        gap_sq_full[i], gap_cross_full[i] = run["gsq_f"], run["gcr_f"]
        noise_sq[i], noise_cross[i] = run["nsq"], run["ncr"]
        hat_sq[i], hat_cross[i] = run["hsq"], run["hcr"]

        S += Y.T @ Y
        cross += Y.T @ Z
        M += Y.T @ eps
        # S is now S_{g-1} and M is M_g
        S_eff = S + np.eye(p + 1) if is_singular(S) else S
        ridge[i] = S_eff is not S
        V[i] = float(np.sum(M * np.linalg.solve(S_eff, M)))
        V_raw[i] = V[i]
        theta_hat = np.linalg.solve(S_eff, cross)
        d = theta_hat - theta
        theta_term[i] = treeindex.tree_size(l) * float(np.sum(d * (L @ d)))
        if g < burn_in:
            V[i] = theta_term[i] = 0.0

    sizes = np.array([treeindex.tree_size(g - 1) for g in gens], dtype=float)
    next_sizes = np.array([treeindex.tree_size(g) for g in gens], dtype=float)
    return MartingaleDiagnostics(
        p=p,
        generations=gens,
        V=V_raw,
        qsl_running=np.cumsum(V) / gens,
        theta_qsl=np.cumsum(theta_term) / gens,
        resid_gap_sq=gap_sq,
        resid_gap_cross=gap_cross,
        resid_gap_sq_full=gap_sq_full,
        resid_gap_cross_full=gap_cross_full,
        sigma2_true=noise_sq / (2 * sizes),
        rho_true=noise_cross / sizes,
        sigma2_gap_scaled=next_sizes / gens * (hat_sq - noise_sq) / (2 * sizes),
        rho_gap_scaled=next_sizes / gens * (hat_cross - noise_cross) / sizes,
        ridge=ridge,
        burn_in=burn_in,
    )
