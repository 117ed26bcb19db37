"""Numerical tractor calculus for curves in almost pseudo-Riemannian structures."""

from .conformal import AlmostPRStructure, Scale, ae_residual, rebase_background, weighted_kinematics
from .curves import (
    CurveState,
    CurveTrace,
    boundary_incidence,
    geodesic_wedge_residual,
    integrate_conformal_circle,
    integrate_geodesic,
    sigma_norm2,
    sigma_parallel_residual,
    trace_generalized_geodesic,
)
from .errors import TractorCurvesError
from .geometry import MetricField, curvature_at
from .integrals import TwoFormField, conservation_report, first_integral_value
from .integrators import IntegratorConfig
from .models import make_model
from .tractor import scale_tractor

__version__ = "0.1.0"

__all__ = [
    "AlmostPRStructure",
    "CurveState",
    "CurveTrace",
    "IntegratorConfig",
    "MetricField",
    "Scale",
    "TractorCurvesError",
    "TwoFormField",
    "ae_residual",
    "boundary_incidence",
    "conservation_report",
    "curvature_at",
    "first_integral_value",
    "geodesic_wedge_residual",
    "integrate_conformal_circle",
    "integrate_geodesic",
    "make_model",
    "rebase_background",
    "scale_tractor",
    "sigma_norm2",
    "sigma_parallel_residual",
    "trace_generalized_geodesic",
    "weighted_kinematics",
]
