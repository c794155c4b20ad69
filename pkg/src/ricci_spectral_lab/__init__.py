"""Numerical laboratory for Laplacian eigenvalues under the Ricci-Hamilton flow."""

from .errors import (
    AmbiguousTracking,
    BlowUp,
    ClusterSkipped,
    ConfigError,
    EmptyInterior,
    HypothesisNotMet,
    NoConvergence,
    NumericalFailure,
    StabilityViolation,
    TimeOutOfRange,
    UnknownSpectrum,
)
from .flow import FlowControls, Trajectory, advance_model, evolve, model_trajectory, step_conformal
from .geometry import (
    ConformalGrid,
    DomainMask,
    Topology,
    dirichlet_energy,
    full_mask,
    laplace_beltrami_apply,
    rectangle_mask,
    scalar_curvature,
    volume_weights,
)
from .models import FlatTorus, HyperbolicScaled, RoundSphere, SphereCircleProduct
from .monotonicity import (
    check_main_theorem,
    check_proposition1,
    check_rate_identity,
    observed_rate,
    predicted_rate_2d,
    predicted_rate_general,
)
from .spectral import EigenPair, assemble, smallest_eigenpairs, solve_grid, track_mode

__version__ = "0.1.0"
