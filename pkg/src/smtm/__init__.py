"""Stereographic multiple-try Metropolis sampling and scaling-limit tools."""

from .errors import NorthPoleSingularity
from .diagnostics import (
    ChainTrace,
    EsjdAccumulator,
    acceptance_rate,
    burnin_curve,
    esjd,
    ks_distance,
    reversibility_stat,
)
from .geometry import (
    NORTH_POLE_GAP,
    SpherePoint,
    StereoChart,
    log_sphere_density,
    sp_forward,
    sp_inverse,
    tangent_rw_propose,
)
from .kernels import (
    KernelConfig,
    StepResult,
    ideal_step,
    mtm_step,
    rwm_step,
    select_candidate,
    smtm_step,
    srwm_step,
    step,
)
from .scaling import (
    ScalingParams,
    acceptance_curve,
    big_a,
    ell_to_h,
    h_to_ell,
    limit_gaussian,
    mc_limit_esjd,
    mc_limit_total_acceptance,
    n1_total_acceptance,
    optimize_ell,
    phi1,
    phi2,
)
from .targets import (
    ExpTail,
    Gaussian,
    PolyTail,
    ProductIID,
    StudentT,
    component_cdf,
    fisher_moment,
    log_density,
    parse_target,
)

__version__ = "0.1.0"

__all__ = [
    "ChainTrace",
    "EsjdAccumulator",
    "ExpTail",
    "Gaussian",
    "KernelConfig",
    "NORTH_POLE_GAP",
    "NorthPoleSingularity",
    "PolyTail",
    "ProductIID",
    "ScalingParams",
    "SpherePoint",
    "StepResult",
    "StereoChart",
    "StudentT",
    "acceptance_curve",
    "acceptance_rate",
    "big_a",
    "burnin_curve",
    "component_cdf",
    "ell_to_h",
    "esjd",
    "fisher_moment",
    "h_to_ell",
    "ideal_step",
    "ks_distance",
    "limit_gaussian",
    "log_density",
    "log_sphere_density",
    "mc_limit_esjd",
    "mc_limit_total_acceptance",
    "mtm_step",
    "n1_total_acceptance",
    "optimize_ell",
    "parse_target",
    "phi1",
    "phi2",
    "reversibility_stat",
    "rwm_step",
    "select_candidate",
    "smtm_step",
    "sp_forward",
    "sp_inverse",
    "srwm_step",
    "step",
    "tangent_rw_propose",
    "__version__",
]
