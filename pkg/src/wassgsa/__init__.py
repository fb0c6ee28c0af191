"""Global sensitivity analysis for codes with distribution-valued outputs."""

__version__ = "0.1.0"

from .distributions import (
    ContrastFunction,
    EmpiricalDistribution,
    QuantileGrid,
    quantile,
    wasserstein,
    wasserstein_cost,
)
from .errors import (
    CalibrationInfeasibleError,
    DegenerateOutputError,
    DesignFormatError,
    DomainError,
    GSAError,
    InsufficientSampleError,
    SimulatorError,
    UnsupportedFeatureError,
)
from .estimators import (
    PickFreezeDesign,
    RankDesign,
    chatterjee_xi,
    pick_freeze_estimate,
    rank_estimate,
    ustat_estimate,
)
from .frechet import DistributionEnsemble, frechet_feature, frechet_mean, frechet_median, wasserstein_variance
from .indices import (
    IndexEstimate,
    OutputSample,
    TestFunctionFamily,
    family_cvm,
    family_quantile_eval,
    family_sobol,
    family_wasserstein_ball,
)
from .models import gremaud_code, toy_cdf_code, toy_frechet_indices, toy_wball_indices
from .second_level import (
    ParametricFamily,
    SecondLevelProblem,
    second_level_gsa,
    uniform_interval_family,
)
from .stochastic import (
    IndependentInputs,
    StochasticCode,
    calibrate_n,
    direct_gsa,
    empirical_output_measure,
    stochastic_gsa,
)
