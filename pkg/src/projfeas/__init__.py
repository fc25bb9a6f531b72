"""Projection methods for set feasibility, with regularity diagnostics.

The package solves feasibility problems ``find x in S_1 ∩ ... ∩ S_m`` for
closed, possibly nonconvex sets by alternating, averaged, and relaxed
(inexact) projection iterations, analyzes the local regularity of the set
system to predict linear convergence rates, and ships an experiment
driver for a compressed-sensing-style matrix-design instance.
"""

from .algorithms import (
    InexactnessError,
    PerturbedResult,
    RunConfig,
    Trace,
    inexact_candidate,
    run_alternating,
    run_averaged,
    run_averaged_via_product,
    run_cyclic,
    run_inexact_alternating,
    run_perturbed,
)
from .diagnostics import (
    EstimationError,
    RateFit,
    check_sandwich,
    fit_rlinear_rate,
    msd,
    msd_gradient,
    msd_terms,
    qlinear_ratios,
)
from .linalg import (
    DecompositionError,
    fd_gradient,
    gaussian_matrix,
    gram_min_eig,
    orthonormal_basis,
    pseudo_inverse,
    sphere_lattice,
    svd,
)
from .regularity import (
    CbarEstimate,
    CondEstimate,
    RegularityReport,
    cbar_avg,
    cbar_pair,
    cond_modulus,
    predicted_rates,
    reg_modulus_pair,
)
from .sets import (
    AffineSubspace,
    DegenerateProjectionWarning,
    DiagonalLift,
    LinfBall,
    MembershipError,
    OrthonormalRows,
    ProductSet,
    ProjectableSet,
    ProjectionTieBreakError,
    RowSpace,
    Sphere,
    Translate,
    normal_cone_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "CbarEstimate",
    "CondEstimate",
    "DecompositionError",
    "DegenerateProjectionWarning",
    "DiagonalLift",
    "EstimationError",
    "InexactnessError",
    "LinfBall",
    "MembershipError",
    "OrthonormalRows",
    "PerturbedResult",
    "ProductSet",
    "ProjectableSet",
    "ProjectionTieBreakError",
    "RateFit",
    "RegularityReport",
    "RowSpace",
    "RunConfig",
    "Sphere",
    "Trace",
    "Translate",
    "cbar_avg",
    "cbar_pair",
    "check_sandwich",
    "cond_modulus",
    "fd_gradient",
    "fit_rlinear_rate",
    "gaussian_matrix",
    "gram_min_eig",
    "inexact_candidate",
    "msd",
    "msd_gradient",
    "msd_terms",
    "normal_cone_distance",
    "orthonormal_basis",
    "predicted_rates",
    "pseudo_inverse",
    "qlinear_ratios",
    "reg_modulus_pair",
    "run_alternating",
    "run_averaged",
    "run_averaged_via_product",
    "run_cyclic",
    "run_inexact_alternating",
    "run_perturbed",
    "sphere_lattice",
    "svd",
]
