"""Asymmetric bifurcating autoregressive processes of order p on binary trees.

Simulation, least-squares estimation of the coefficients and noise moments, the
almost-sure limits of the normalised design, and Monte Carlo checks of the
asymptotic behaviour of the estimators.
"""

from .errors import (
    BarError,
    ConsistencyError,
    DegeneracyError,
    DomainError,
    InstabilityError,
    ValidationError,
)
from .estimate import (
    DesignState,
    EstimationResult,
    MartingaleDiagnostics,
    estimate,
    ls_estimate,
    martingale_diagnostics,
    rank1_update,
    residual_moments,
    streaming_estimate,
)
from .limits import LimitTheory, assemble, ell_solve, lambda_limit
from .model import BarParams, CompanionPair, StabilityReport, companion_matrices, stability_report
from .montecarlo import ExperimentConfig, VerificationReport, normal_cdf, reference_config, run_experiment
from .noise import NoiseMoments, NoiseSpec, sample_pair, theoretical_moments
from .seeding import derive_seed
from .simulate import InitSpec, TreeSample, read_tree_csv, regression_vector, simulate_tree, write_tree_csv

__version__ = "0.1.0"
