"""Bootstrap inference for M-estimators on matrix manifolds.

Riemannian Newton estimation on retraction charts, a two-step Newton
bootstrap, and Wald / t regions and location tests built from sandwich
covariances.
"""

from .core import Flag, ortho_complement
from .errors import (
    AnchorMismatch,
    AntipodalSample,
    ChartError,
    DomainEscape,
    EmptyGrid,
    EmptyInput,
    ManifoldInferError,
    NoConvergence,
    NonFinite,
    OutOfChart,
    RankDeficient,
    ShapeMismatch,
    ZeroVariance,
)
from .estimator import BootstrapBundle, NewtonConfig, NewtonResult, fit, fit_and_bootstrap, newton_iterate, newton_step
from .inference import (
    ConfidenceRegion,
    LocationTestResult,
    SandwichCovariance,
    bootstrap_with_statistics,
    empirical_quantile,
    extrinsic_t,
    extrinsic_t_interval,
    intrinsic_t,
    intrinsic_t_interval,
    location_test,
    sandwich,
    wald,
    wald_region,
)
from .losses import GaussianLocation, LossModel, SphereBarycenter, make_loss
from .manifolds import FixedRank, Manifold, RankOneTensor, Sphere, Stiefel, parse_manifold

__version__ = "0.1.0"
