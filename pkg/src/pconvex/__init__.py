"""Ratio estimates, localizations at infinity and cone convexity verdicts for polynomial symbols."""

from .cones import Cone, ComplementOfDual, DualCone, cone_around, generated_cone, sample_rays
from .convexity import (
    AnalysisReport,
    KeyInequalityChain,
    Verdict,
    check_principal_nonvanishing,
    key_inequality_report,
    p_convex_supports_verdict,
    pplus_singsupp_verdict,
    surjectivity_report,
)
from .hfunc import (
    ProbeConfig,
    SigmaEstimate,
    Subspace,
    ball_sup,
    derivative_norm,
    estimate_sigma,
    estimate_sigma0,
    is_hypoelliptic_numeric,
    sigma_ratio,
)
from .localize import localization_upper_bound, simple_characteristic_localization, verify_localization
from .pipeline import PipelineError, PipelineSpec, build_paper_example
from .polycore import DimensionMismatch, ParseError, Polynomial, parse

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "ComplementOfDual",
    "Cone",
    "DimensionMismatch",
    "DualCone",
    "KeyInequalityChain",
    "ParseError",
    "PipelineError",
    "PipelineSpec",
    "Polynomial",
    "ProbeConfig",
    "SigmaEstimate",
    "Subspace",
    "Verdict",
    "ball_sup",
    "build_paper_example",
    "check_principal_nonvanishing",
    "cone_around",
    "derivative_norm",
    "estimate_sigma",
    "estimate_sigma0",
    "generated_cone",
    "is_hypoelliptic_numeric",
    "key_inequality_report",
    "localization_upper_bound",
    "p_convex_supports_verdict",
    "parse",
    "pplus_singsupp_verdict",
    "sample_rays",
    "sigma_ratio",
    "simple_characteristic_localization",
    "surjectivity_report",
    "verify_localization",
]
