"""Sister-pair noise laws for the driven noise ``(eps_2k, eps_2k+1)``.

Two families are available. ``gaussian-pair`` is a bivariate normal with variance
``sigma2`` and covariance ``rho``. ``rademacher-mixture-pair`` is bounded: with
``c = rho / sigma2`` and independent random signs ``U, V, W``,

    eps_even = sigma * (sqrt(1 - c) * U + sqrt(c) * W)
    eps_odd  = sigma * (sqrt(1 - c) * V + sqrt(c) * W)

Pairs are independent across mothers. Draws consume uniforms from a numpy generator in
ascending mother order: two per gaussian pair (Box-Muller), three per mixture pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GAUSSIAN = "gaussian-pair"
MIXTURE = "rademacher-mixture-pair"
FAMILIES = (GAUSSIAN, MIXTURE)

UNIFORMS_PER_PAIR = {GAUSSIAN: 2, MIXTURE: 3}


@dataclass(frozen=True)
class NoiseMoments:
    sigma2: float
    rho: float
    tau4: float
    nu2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        if not abs(self.rho) < self.sigma2:
            raise ValidationError(f"need |rho| < sigma2, got rho={self.rho}, sigma2={self.sigma2}")
        # for tiny sigma2 both fourth-order moments may underflow to zero
        if not (self.nu2 < self.tau4 or self.tau4 == self.nu2 == 0.0):
            raise ValidationError(f"need nu2 < tau4, got nu2={self.nu2}, tau4={self.tau4}")
        if self.tau4 < self.sigma2**2 * (1 - 1e-12):
            raise ValidationError("fourth moment below squared variance")

    @property
    def gamma(self) -> np.ndarray:
        """Covariance matrix of the sister pair."""
        return np.array([[self.sigma2, self.rho], [self.rho, self.sigma2]])

    def to_dict(self) -> dict:
        return {"sigma2": self.sigma2, "rho": self.rho, "tau4": self.tau4, "nu2": self.nu2}


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    sigma2: float
    rho: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown noise family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "rho", float(self.rho))
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be a positive finite number, got {self.sigma2}")
        if not abs(self.rho) < self.sigma2:
            raise ValidationError(f"need |rho| < sigma2, got rho={self.rho}, sigma2={self.sigma2}")
        if self.family == MIXTURE and not self.rho > 0:
            # at rho = 0 the mixture has nu2 == tau4
            raise ValidationError("rademacher-mixture-pair requires 0 < rho < sigma2")
        theoretical_moments(self)

    @property
    def moments(self) -> NoiseMoments:
        return theoretical_moments(self)

    def to_dict(self) -> dict:
        return {"family": self.family, "sigma2": self.sigma2, "rho": self.rho}


def theoretical_moments(spec: NoiseSpec) -> NoiseMoments:
    s2, rho = spec.sigma2, spec.rho
    if spec.family == GAUSSIAN:
        return NoiseMoments(s2, rho, 3.0 * s2**2, s2**2 + 2.0 * rho**2)
    c = rho / s2
    return NoiseMoments(s2, rho, s2**2 * (1.0 + 4.0 * c * (1.0 - c)), s2**2)


def _box_muller(u: np.ndarray) -> np.ndarray:
    # u has shape (m, 2); 1 - u keeps the log argument in (0, 1]
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    return np.column_stack([r * np.cos(angle), r * np.sin(angle)])


def standard_normals(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent N(0, 1) draws from Box-Muller pairs (two uniforms per pair)."""
    pairs = (count + 1) // 2
    return _box_muller(rng.random((pairs, 2))).ravel()[:count]


def sample_pairs(spec: NoiseSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent sister pairs as an array of shape ``(count, 2)``.

    Equivalent, draw for draw, to ``count`` successive calls of :func:`sample_pair`.
    """
    sigma = math.sqrt(spec.sigma2)
    c = spec.rho / spec.sigma2
    if spec.family == GAUSSIAN:
        z = _box_muller(rng.random((count, 2)))
        even = z[:, 0]
        odd = c * z[:, 0] + math.sqrt(1.0 - c * c) * z[:, 1]
    else:
        signs = np.where(rng.random((count, 3)) < 0.5, -1.0, 1.0)
        w = math.sqrt(c) * signs[:, 2]
        even = math.sqrt(1.0 - c) * signs[:, 0] + w
        odd = math.sqrt(1.0 - c) * signs[:, 1] + w
    return sigma * np.column_stack([even, odd])


def sample_pair(spec: NoiseSpec, rng: np.random.Generator) -> tuple[float, float]:
    even, odd = sample_pairs(spec, rng, 1)[0]
    return float(even), float(odd)
