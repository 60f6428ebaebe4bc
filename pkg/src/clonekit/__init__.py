"""Asymptotic cloning of classical state families.

Numerical verification toolkit for the theory of (n, rn)-cloning: the
Gaussian-shift amplifier and its closed-form loss constant, the LAN-based
cloning pipeline that achieves it for smooth one-parameter families, and an
independent linear-programming oracle for the deficiency of discretized
experiments.
"""

from .amplifier import (
    AmplifierLossReport,
    AmplifierSpec,
    RotationMatrix,
    amplifier_loss_mc,
    amplify,
    build_rotation,
    expand_to_clones,
    gaussian_clone,
    optimal_amplifier,
)
from .cloner import (
    CloneLossReport,
    ClonerConfig,
    CloneRunRecord,
    Estimate,
    MinimaxProbeReport,
    clone,
    clone_loss_discrete,
    estimate_theta,
    local_minimax_probe,
)
from .deficiency import (
    ConfigurationError,
    DeficiencyResult,
    FiniteExperiment,
    GridSpec,
    MarkovKernel,
    NumericalError,
    discretize_gaussian_pair,
    gaussian_cell_masses,
    identity_objective,
    kernel_objective,
    lp_deficiency,
)
from .families import (
    Bernoulli,
    Family,
    FamilyPoint,
    GaussianLocation,
    Poisson,
    ScoreReport,
    get_family,
)
from .gaussian import (
    GaussianShift,
    TvResult,
    chi2_cdf,
    crossing_radius_sq,
    tv_ball_indicator,
    tv_isotropic,
    tv_numeric,
    whiten,
)
from .lan import (
    CouplingReport,
    DqmReport,
    ExceedanceReport,
    LanResidualReport,
    ScoreProcessValue,
    SmoothedScore,
    dqm_residual,
    lan_residual_rate,
    loglik_ratio,
    quantile_coupling,
    score_process,
    smoothed_score,
    wilson_interval,
)
from .lawdist import EmpiricalLaw, as_tv, empirical_pmf, mixture_pmf, pmf_l1
from .streams import stream, stream_key

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
