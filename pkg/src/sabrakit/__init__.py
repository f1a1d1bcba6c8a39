"""Spectral shell-model simulation and invariant-measure verification toolkit."""

from .spectral import (
    ShellState,
    SobolevIndex,
    SpectralParams,
    apply_power,
    hilbert_schmidt_sum,
    project,
    sobolev_norm,
)
from .sabra import (
    SabraCoefficients,
    beta_from_coefficients,
    bilinear_kernel,
    conservation_residuals,
    evaluate_B,
    evaluate_B_galerkin,
    tail_difference,
    trilinear_form,
)
from .measure import (
    MeasureParams,
    apply_kolmogorov,
    b_component_poly,
    closed_form_B_square,
    component_variance,
    expected_B_component_square,
    expected_tail_norm,
    kolmogorov_split_polys,
    mc_expectation,
    sample,
    sample_batch,
)
from .wick import GaussPoly
from .dynamics import (
    SimConfig,
    Trajectory,
    energy,
    evolve_ensemble,
    inviscid_step,
    ou_exact_step,
    quadratic_invariant,
    sde_step,
    simulate,
)
from .statistics import (
    AutocorrEstimate,
    MomentAccumulator,
    Report,
    autocorrelation,
    effective_sample_size,
    holder_quotient,
    integrated_autocorr_time,
    invariance_test,
    semigroup_decay_check,
    tail_decay_report,
)

__version__ = "0.1.0"
