"""Bounds on marginal expected shortfall under dependence uncertainty."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    DomainError,
    EmpiricalLaw,
    Exponential,
    Gamma,
    InfiniteMeanError,
    Lognormal,
    Lomax,
    Normal,
    Uniform,
    make_law,
)
from .bounds_core import (  # noqa: E402
    BoundChainError,
    BoundsReport,
    MCEstimate,
    TailConvention,
    check_chain,
    mes_estimate,
    mes_from_samples,
    mes_mc,
    spread_delta,
    unconstrained_lower,
    unconstrained_upper,
)
from .coupling import AntimonotoneAt, Comonotone, Independent, Mix3Uniform, couple  # noqa: E402
from .factor_bounds import (  # noqa: E402
    AdditiveModel,
    IdioCoupling,
    MinimumModel,
    MultiplicativeModel,
    abrm_normal_closed,
    constrained_lower_candidate_mc,
    constrained_lower_certified_mc,
    constrained_upper_mc,
    factor_bounds_report,
    mbrm_lomax_closed,
    minbrm_expo_bounds,
)
from .linear_bounds import (  # noqa: E402
    BivariateNormalSpec,
    bivariate_normal_bounds,
    bivariate_normal_mes,
    nonnegative_bounds,
    uniform3_verify,
    wipm_mes,
)
from .empirical_pipeline import (  # noqa: E402
    DataError,
    empirical_bounds,
    ffm_fit,
    load_factor_csv,
    load_loss_csv,
    srci,
    synth_panel,
)
