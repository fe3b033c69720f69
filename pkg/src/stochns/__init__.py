"""Spectral Galerkin simulation and verification harness for stochastic
incompressible flow on the torus with linear multiplicative noise."""

from .dynamics import (
    CutoffConfig,
    PathRecord,
    SolverConfig,
    coupled_evolve,
    detect_sigma,
    evolve,
    heat_flow,
    smooth_cutoff,
    step,
)
from .ensemble import (
    BoundParameters,
    SurvivalEstimate,
    bound_value,
    check_probability_bound,
    check_supermartingale,
    delta_for_epsilon,
    derive_bound_params,
    run_ensemble,
    wilson_interval,
)
from .noise import NoiseModel, WienerIncrement, apply_G, hs_norm, path_rng, sample_increment, verify_hypotheses
from .nonlinear import bilinear_B, bilinear_B_oracle, empirical_constants, probe_estimate
from .spectral import (
    NormReport,
    SpectralField,
    TorusGrid,
    apply_A,
    apply_A_power,
    galerkin_project,
    leray_project,
    make_grid,
    norms,
    pairing,
    random_field,
)

__version__ = "0.1.0"
