"""Seeded replicate experiments turning the asymptotic results into pass/fail checks.

Each replicate ``i`` simulates one tree from ``derive_seed(master_seed, i)`` and reduces
it to a flat row of statistics. Rows are aggregated in replicate order, so a report
does not depend on how many worker processes produced the rows.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import treeindex
from .errors import BarError, ValidationError
from .estimate import estimate, ls_estimate, martingale_diagnostics, normal_matrix
from .limits import LimitTheory, assemble
from .model import BarParams, check_stable
from .noise import GAUSSIAN, NoiseSpec
from .seeding import derive_seed
from .simulate import InitSpec, simulate_tree

CHECKS = ("rate", "qsl", "clt_theta", "clt_sigma", "clt_rho", "limit_bridge", "diagnostics")
DISTRIBUTIONAL = ("clt_theta", "clt_sigma", "clt_rho")
MIN_DISTRIBUTIONAL_REPLICATES = 2

DEFAULT_TOLERANCES = {
    "rate_constant": 50.0,
    "qsl_rel": 0.15,
    "ks_max": 0.08,
    "cov_frobenius_rel": 0.10,
    "clt_var_rel": 0.15,
    "bridge_rel": 0.02,
    "martingale_qsl_rel": 0.15,
    "resid_gap_rel": 0.20,
    "v_growth_factor": 10.0,
    "v_growth_fraction": 0.95,
}

PASS = "pass"
FAIL = "fail"
INSUFFICIENT = "insufficient replicates"


def normal_cdf(x):
    """Standard normal distribution function ``0.5 * erfc(-x / sqrt(2))``.

    erfc keeps full double precision in both tails (absolute error far below 1e-7).
    Accepts scalars or arrays.
    """
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def ks_distance(sample, cdf=normal_cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_n - F|``."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise ValidationError("KS distance needs at least one observation")
    F = cdf(x)
    upper = np.arange(1, m + 1) / m - F
    lower = F - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True)
class ExperimentConfig:
    params: BarParams
    spec: NoiseSpec
    init: InitSpec
    n_generations: int
    replicates: int
    master_seed: int
    checks: tuple[str, ...] = CHECKS
    tolerances: dict = field(default_factory=dict)
    max_depth: int = 8
    burn_in: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("replicates must be at least 1")
        if self.n_generations < self.params.p:
            raise ValidationError(
                f"n_generations={self.n_generations} is below the order p={self.params.p}"
            )
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ValidationError(f"unknown checks {sorted(unknown)}; expected a subset of {CHECKS}")
        if "rate" in self.checks and self.n_generations < 2:
            raise ValidationError("the rate check needs n_generations >= 2")
        bad = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if bad:
            raise ValidationError(f"unknown tolerances {sorted(bad)}")
        object.__setattr__(self, "checks", tuple(c for c in CHECKS if c in self.checks))

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def rate_window(self) -> list[int]:
        n = self.n_generations
        return list(range(max(n - 4, self.params.p, 2), n + 1))

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "spec": self.spec.to_dict(),
            "init": self.init.to_dict(),
            "n_generations": self.n_generations,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "checks": list(self.checks),
            "tolerances": {k: self.tolerance(k) for k in DEFAULT_TOLERANCES},
            "max_depth": self.max_depth,
            "burn_in": self.burn_in,
        }


def reference_config(**overrides) -> ExperimentConfig:
    """p = 1, a = (1, 0.5), b = (2, 0.3), gaussian pairs with sigma2 = 1, rho = 0.5."""
    base = ExperimentConfig(
        params=BarParams(1, (1.0, 0.5), (2.0, 0.3)),
        spec=NoiseSpec(GAUSSIAN, 1.0, 0.5),
        init=InitSpec(),
        n_generations=12,
        replicates=500,
        master_seed=42,
    )
    return replace(base, **overrides)


class ReplicateError(BarError):
    def __init__(self, index: int, seed: int, cause: Exception):
        super().__init__(f"replicate {index} (seed {seed}) failed: {cause}")
        self.index = index
        self.seed = seed


def run_replicate(config: ExperimentConfig, index: int, L: np.ndarray, theta_chol: np.ndarray) -> dict:
    """Simulate replicate ``index`` and reduce it to a flat dict of statistics."""
    seed = derive_seed(config.master_seed, index)
    p = config.params.p
    n = config.n_generations
    checks = set(config.checks)
    row: dict = {"replicate": index, "seed": seed}
    try:
        sample = simulate_tree(config.params, config.spec, config.init, n, seed, allow_unstable=True)
        if checks & {"clt_theta", "clt_sigma", "clt_rho"}:
            result = estimate(sample, n)
            size = treeindex.tree_size(n - 1)
            root = math.sqrt(size)
            w = np.linalg.solve(theta_chol, root * (result.theta_hat - config.params.vec))
            for j, v in enumerate(w):
                row[f"w_{j}"] = float(v)
            for j, v in enumerate(result.theta_hat):
                row[f"theta_hat_{j}"] = float(v)
            row["sigma2_hat"] = result.sigma2_hat
            row["rho_hat"] = result.rho_hat
            row["z_sigma2"] = root * (result.sigma2_hat - config.spec.sigma2)
            row["z_rho"] = root * (result.rho_hat - config.spec.rho)
        if "rate" in checks:
            theta = config.params.vec
            for m in config.rate_window():
                size = treeindex.tree_size(m - 1)
                err = ls_estimate(sample, m).theta_hat - theta
                row[f"rate_{m}"] = float(err @ err) * size / math.log(size)
        if "limit_bridge" in checks:
            Sn = normal_matrix(sample, n) / treeindex.tree_size(n)
            for i in range(p + 1):
                for j in range(i, p + 1):
                    row[f"S_{i}_{j}"] = float(Sn[i, j])
        if checks & {"qsl", "diagnostics"}:
            diag = martingale_diagnostics(
                sample, config.params, config.spec.moments, n, L, burn_in=config.burn_in
            )
            row["qsl_running"] = float(diag.qsl_running[-1])
            row["theta_qsl"] = float(diag.theta_qsl[-1])
            row["resid_gap_sq_over_n"] = float(diag.resid_gap_sq[-1]) / n
            row["resid_gap_cross_over_n"] = float(diag.resid_gap_cross[-1]) / n
            row["max_V_over_g"] = float(np.max(diag.V / diag.generations))
    except BarError as exc:
        raise ReplicateError(index, seed, exc) from exc
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ReplicateError(index, seed, exc) from exc
    return row


def _replicate_job(args):
    return run_replicate(*args)


def run_replicates(config: ExperimentConfig, limits: LimitTheory, jobs: int = 1) -> list[dict]:
    theta_chol = np.linalg.cholesky(limits.theta_cov)
    tasks = [(config, i, limits.L, theta_chol) for i in range(config.replicates)]
    if jobs <= 1 or config.replicates == 1:
        return [_replicate_job(t) for t in tasks]
    chunk = max(1, config.replicates // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate_job, tasks, chunksize=chunk))


@dataclass
class CheckResult:
    name: str
    verdict: str
    statistics: dict
    target: object
    tolerance: object
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "statistics": self.statistics,
            "target": self.target,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    config: ExperimentConfig
    checks: list[CheckResult]
    seeds: list[int]
    runtime_seconds: float
    rows: list[dict] = field(default_factory=list, repr=False)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.verdict != FAIL for c in self.checks)

    def to_dict(self, include_runtime: bool = True) -> dict:
        out = {
            "config": self.config.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
            "seeds": list(self.seeds),
        }
        if len(self.rows) < MIN_DISTRIBUTIONAL_REPLICATES:
            out["point_estimates"] = [dict(r) for r in self.rows]
        if include_runtime:
            out["runtime_seconds"] = self.runtime_seconds
        return out

    def replicate_csv(self) -> str:
        if not self.rows:
            return ""
        columns = list(self.rows[0])
        lines = [",".join(columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in columns))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _column(rows: list[dict], key: str) -> np.ndarray:
    return np.array([r[key] for r in rows], dtype=float)


def _within(value: float, target: float, rel: float, scale: float | None = None) -> bool:
    """``|value - target| <= rel * |target|``; zero targets use ``rel * scale`` instead."""
    ref = abs(target) if target != 0 else (scale if scale is not None else 1.0)
    return bool(abs(value - target) <= rel * ref)


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _check_rate(config, rows) -> CheckResult:
    bound = config.tolerance("rate_constant")
    window = config.rate_window()
    medians = {str(m): float(np.median(_column(rows, f"rate_{m}"))) for m in window}
    values = list(medians.values())
    increasing = bool(len(values) > 1 and all(b > a for a, b in zip(values, values[1:])))
    ok = max(values) <= bound and not increasing
    return CheckResult(
        "rate",
        _verdict(ok),
        {"median_scaled_error_by_n": medians, "monotone_increasing": increasing},
        target="bounded",
        tolerance=bound,
        detail="median of ||theta_hat - theta||^2 |T_{n-1}| / log|T_{n-1}|",
    )


def _check_qsl(config, rows) -> CheckResult:
    target = 2 * (config.params.p + 1) * config.spec.sigma2
    rel = config.tolerance("qsl_rel")
    mean = float(np.mean(_column(rows, "theta_qsl")))
    return CheckResult(
        "qsl",
        _verdict(_within(mean, target, rel)),
        {"mean_theta_qsl": mean, "median_theta_qsl": float(np.median(_column(rows, "theta_qsl")))},
        target=target,
        tolerance=rel,
    )


def _check_clt_theta(config, rows) -> CheckResult:
    dim = 2 * (config.params.p + 1)
    W = np.column_stack([_column(rows, f"w_{j}") for j in range(dim)])
    ks = [ks_distance(W[:, j]) for j in range(dim)]
    second = W.T @ W / W.shape[0]
    frob = float(np.linalg.norm(second - np.eye(dim)) / np.linalg.norm(np.eye(dim)))
    ks_max = config.tolerance("ks_max")
    frob_max = config.tolerance("cov_frobenius_rel")
    return CheckResult(
        "clt_theta",
        _verdict(bool(max(ks) < ks_max and frob <= frob_max)),
        {"ks_by_coordinate": ks, "covariance_frobenius_rel": frob},
        target={"ks": 0.0, "covariance": "identity"},
        tolerance={"ks_max": ks_max, "covariance_frobenius_rel": frob_max},
    )


def _check_clt_var(name, key, target, config, rows) -> CheckResult:
    z = _column(rows, key)
    var = float(np.var(z, ddof=1))
    rel = config.tolerance("clt_var_rel")
    return CheckResult(
        name,
        _verdict(_within(var, target, rel)),
        {"empirical_variance": var, "empirical_mean": float(np.mean(z))},
        target=float(target),
        tolerance=rel,
    )


def _check_bridge(config, rows, limits) -> CheckResult:
    p = config.params.p
    rel = config.tolerance("bridge_rel")
    L = limits.L
    entries = {}
    ok = True
    for i in range(p + 1):
        for j in range(i, p + 1):
            mean = float(np.mean(_column(rows, f"S_{i}_{j}")))
            good = _within(mean, L[i, j], rel, math.sqrt(L[i, i] * L[j, j]))
            entries[f"{i},{j}"] = {"mean": mean, "limit": float(L[i, j]), "pass": good}
            ok &= good
    return CheckResult("limit_bridge", _verdict(ok), {"entries": entries}, target="L", tolerance=rel)


def _check_diagnostics(config, rows) -> CheckResult:
    p = config.params.p
    s2, rho = config.spec.sigma2, config.spec.rho
    qsl_target = 2 * (p + 1) * s2
    cross_target = (p + 1) * rho
    qsl_rel = config.tolerance("martingale_qsl_rel")
    gap_rel = config.tolerance("resid_gap_rel")
    factor = config.tolerance("v_growth_factor")
    frac_min = config.tolerance("v_growth_fraction")

    qsl = float(np.mean(_column(rows, "qsl_running")))
    gap_sq = float(np.mean(_column(rows, "resid_gap_sq_over_n")))
    gap_cross = float(np.mean(_column(rows, "resid_gap_cross_over_n")))
    frac = float(np.mean(_column(rows, "max_V_over_g") <= factor * (p + 1) * s2))
    parts = {
        "martingale_qsl": {
            "value": qsl, "target": qsl_target, "tolerance": qsl_rel,
            "pass": _within(qsl, qsl_target, qsl_rel),
        },
        "resid_gap_sq": {
            "value": gap_sq, "target": qsl_target, "tolerance": gap_rel,
            "pass": _within(gap_sq, qsl_target, gap_rel),
        },
        "resid_gap_cross": {
            "value": gap_cross, "target": cross_target, "tolerance": gap_rel,
            "pass": _within(gap_cross, cross_target, gap_rel, (p + 1) * s2),
        },
        "V_growth": {
            "value": frac, "target": frac_min, "bound": factor * (p + 1) * s2,
            "pass": bool(frac >= frac_min),
        },
    }
    ok = all(part["pass"] for part in parts.values())
    return CheckResult("diagnostics", _verdict(ok), parts, target="see statistics", tolerance="see statistics")


def evaluate_checks(config: ExperimentConfig, rows: list[dict], limits: LimitTheory) -> list[CheckResult]:
    out = []
    for name in config.checks:
        if name in DISTRIBUTIONAL and len(rows) < MIN_DISTRIBUTIONAL_REPLICATES:
            out.append(
                CheckResult(name, INSUFFICIENT, {"replicates": len(rows)}, None, None,
                            f"needs at least {MIN_DISTRIBUTIONAL_REPLICATES} replicates")
            )
        elif name == "rate":
            out.append(_check_rate(config, rows))
        elif name == "qsl":
            out.append(_check_qsl(config, rows))
        elif name == "clt_theta":
            out.append(_check_clt_theta(config, rows))
        elif name == "clt_sigma":
            out.append(_check_clt_var("clt_sigma", "z_sigma2", limits.sigma2_clt_var, config, rows))
        elif name == "clt_rho":
            out.append(_check_clt_var("clt_rho", "z_rho", limits.rho_clt_var, config, rows))
        elif name == "limit_bridge":
            out.append(_check_bridge(config, rows, limits))
        elif name == "diagnostics":
            out.append(_check_diagnostics(config, rows))
    return out


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> VerificationReport:
    start = time.perf_counter()
    check_stable(config.params, config.max_depth)
    limits = assemble(config.params, config.spec.moments)
    rows = run_replicates(config, limits, jobs)
    checks = evaluate_checks(config, rows, limits)
    return VerificationReport(
        config=config,
        checks=checks,
        seeds=[r["seed"] for r in rows],
        runtime_seconds=time.perf_counter() - start,
        rows=rows,
    )
