"""Parameters of the asymmetric BAR(p) model, companion matrices and stability checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InstabilityError, ValidationError

MAX_STABILITY_DEPTH = 20


@dataclass(frozen=True)
class BarParams:
    """Coefficients ``a = (a0..ap)`` of even daughters and ``b = (b0..bp)`` of odd daughters."""

    p: int
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValidationError(f"order p must be a positive integer, got {self.p!r}")
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if len(a) != self.p + 1 or len(b) != self.p + 1:
            raise ValidationError(
                f"expected {self.p + 1} coefficients per daughter type, got {len(a)} and {len(b)}"
            )
        if not all(np.isfinite(a + b)):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_vec(cls, p: int, theta) -> "BarParams":
        theta = np.asarray(theta, dtype=float)
        return cls(p, tuple(theta[: p + 1]), tuple(theta[p + 1 :]))

    @property
    def theta(self) -> np.ndarray:
        """The ``(p+1) x 2`` parameter matrix with columns ``a`` and ``b``."""
        return np.column_stack([self.a, self.b])

    @property
    def vec(self) -> np.ndarray:
        """Stacked form ``(a0..ap, b0..bp)``."""
        return np.array(self.a + self.b)

    @property
    def a_bar(self) -> float:
        return 0.5 * (self.a[0] + self.b[0])

    @property
    def a2_bar(self) -> float:
        return 0.5 * (self.a[0] ** 2 + self.b[0] ** 2)

    def to_dict(self) -> dict:
        return {"p": self.p, "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class CompanionPair:
    A: np.ndarray
    B: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * (self.A + self.B)


def _companion(first_row) -> np.ndarray:
    p = len(first_row)
    C = np.zeros((p, p))
    C[0, :] = first_row
    if p > 1:
        C[np.arange(1, p), np.arange(p - 1)] = 1.0
    return C


def companion_matrices(params: BarParams) -> CompanionPair:
    return CompanionPair(_companion(params.a[1:]), _companion(params.b[1:]))


def spectral_norm(C: np.ndarray) -> float:
    """Largest singular value, from the symmetric eigenproblem of ``C^t C``."""
    C = np.asarray(C, dtype=float)
    return float(np.sqrt(max(np.linalg.eigvalsh(C.T @ C)[-1], 0.0)))


def spectral_radius(C: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(C, dtype=float)))))


def product_bounds(A: np.ndarray, B: np.ndarray, max_depth: int) -> list[float]:
    """``max_{C in {A;B}^k} ||C||^(1/k)`` for ``k = 1..max_depth``, by exhaustive enumeration."""
    if max_depth < 1:
        raise DomainError("max_depth must be at least 1")
    if max_depth > MAX_STABILITY_DEPTH:
        raise DomainError(
            f"max_depth={max_depth} rejected: enumeration of 2**k words is capped at depth "
            f"{MAX_STABILITY_DEPTH}"
        )
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    words = np.stack([A, B])
    bounds = []
    for k in range(1, max_depth + 1):
        if k > 1:
            words = np.concatenate([words @ A, words @ B])
        gram = np.swapaxes(words, 1, 2) @ words
        top = np.linalg.eigvalsh(gram)[:, -1].max()
        bounds.append(float(np.sqrt(max(top, 0.0)) ** (1.0 / k)))
    return bounds


@dataclass(frozen=True)
class StabilityReport:
    spectral_norm_A: float
    spectral_norm_B: float
    spectral_radius_A: float
    spectral_radius_B: float
    product_bounds: list[float]
    # running minimum of product_bounds: every entry is a valid joint-spectral-radius bound
    jsr_upper_by_depth: list[tuple[int, float]] = field(default_factory=list)
    stable: bool = False

    @property
    def beta(self) -> float:
        """``max(||A||, ||B||)``, the literal one-step contraction constant."""
        return max(self.spectral_norm_A, self.spectral_norm_B)

    @property
    def best_bound(self) -> float:
        return self.jsr_upper_by_depth[-1][1]

    def to_dict(self) -> dict:
        return {
            "spectral_norm_A": self.spectral_norm_A,
            "spectral_norm_B": self.spectral_norm_B,
            "spectral_radius_A": self.spectral_radius_A,
            "spectral_radius_B": self.spectral_radius_B,
            "product_bounds": list(self.product_bounds),
            "jsr_upper_by_depth": [[k, v] for k, v in self.jsr_upper_by_depth],
            "stable": self.stable,
        }


def stability_report(pair: CompanionPair, max_depth: int = 8) -> StabilityReport:
    """Norms, spectral radii and product bounds of the companion pair.

    The pair is declared stable when some depth-k product bound is below one. The
    literal condition ``max(||A||, ||B||) < 1`` can never hold for ``p >= 2`` because of
    the sub-diagonal ones, so the weaker joint bound is the one applied.
    """
    raw = product_bounds(pair.A, pair.B, max_depth)
    envelope = np.minimum.accumulate(raw)
    return StabilityReport(
        spectral_norm_A=spectral_norm(pair.A),
        spectral_norm_B=spectral_norm(pair.B),
        spectral_radius_A=spectral_radius(pair.A),
        spectral_radius_B=spectral_radius(pair.B),
        product_bounds=raw,
        jsr_upper_by_depth=[(k + 1, float(v)) for k, v in enumerate(envelope)],
        stable=bool(envelope[-1] < 1.0),
    )


def check_stable(params: BarParams, max_depth: int = 8) -> StabilityReport:
    """Return the stability report or raise :class:`InstabilityError`."""
    report = stability_report(companion_matrices(params), max_depth)
    if not report.stable:
        raise InstabilityError(
            "contraction condition fails: best product bound "
            f"{report.best_bound:.6g} >= 1 up to depth {max_depth}",
            report,
        )
    return report
