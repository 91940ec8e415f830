"""Robust capture-point balance analysis for legged robots.

Stability regions, invariant error tubes, uncertainty amplification ratios,
optimal gains and sampling-period thresholds for the linear inverted
pendulum under sampled CoP feedback, plus closed-loop simulation.
"""
from .core_model import StateMatrices, StateVec, SystemParams, capture_point, cp_step, discretize, step
from .errors import (
    ConfigError,
    CpBalanceError,
    DegenerateRegionError,
    InvalidParameterError,
    SingularSystemError,
    UnstableGainsError,
    UnsupportedGainStructureError,
)
from .gain_design import (
    DesignPoint,
    UncertaintyBudget,
    combined_span,
    optimal_gain,
    sweep_tau,
    tau_threshold,
    tau_threshold_seconds,
)
from .intervals import EMPTY, Interval, minkowski_sum, pontryagin_diff
from .robust_tube import (
    AlphaCoeffs,
    Zonotope2D,
    alpha_coeffs,
    cop_error_interval,
    feasibility_check,
    gray_region_ratio,
    h_vector,
    invariant_tube,
    ratio_closed_form,
    ratio_series,
    support,
)
from .stability import Gains, PolePair, StabilityRegion, closed_loop, in_gray_region, is_stable, poles, stability_region

__version__ = "0.1.0"
