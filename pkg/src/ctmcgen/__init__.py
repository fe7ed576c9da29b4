"""Generator estimation for discretely observed rating transition data.

The package estimates the intensity matrix of a continuous-time Markov
chain with an absorbing default state from one or more observed transition
probability matrices, via an EM algorithm with closed-form E-step and
Hessian, deterministic log-matrix repairs, and MCMC alternatives, plus the
simulation benchmark and portfolio risk-charge machinery used to compare
them.
"""

__version__ = "0.1.0"

from .core import (
    GeneratorMatrix,
    IdentifiabilityReport,
    ObservationSet,
    TransitionMatrix,
    identifiability_check,
    pd_curve,
    transition_matrix,
    validate_generator,
    validate_tpm,
)
from .em import (
    EmConfig,
    EmReport,
    ExpectedStats,
    em_step,
    estimate_em,
    expected_statistics,
    initial_generator,
    observed_loglik,
)
from .hessian import AllowedPairs, HessianReport, confidence_intervals, hessian_at, second_deriv_R
from .linalg import expm, logm, vanloan_integral
from .mcmc import (
    GammaPrior,
    McmcChain,
    McmcConfig,
    gibbs_estimate,
    importance_estimate,
    mode_estimate,
    sample_conditioned_path,
)
from .regularize import diagonal_adjustment, qog, weighted_adjustment
from .risk import MigrationModel, Portfolio, RiskSpec, build_migration_model, risk_charge, risk_error
from .simulate import (
    BenchmarkRecord,
    SimSpec,
    relative_pd_error,
    run_benchmark,
    simulate_tpm_series,
    summarize_benchmark,
)

__all__ = [name for name in dir() if not name.startswith("_")]
