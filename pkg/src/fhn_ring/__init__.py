"""Simulation and verification tools for a FitzHugh-Nagumo ring lattice with boundary feedback."""

from .diagnostics import (
    DiagnosticsSeries,
    DifferenceState,
    SyncVerdict,
    boundary_gap,
    check_dissipative_bound,
    check_sync_inequality,
    classify_sync,
    diagnostics_series,
    difference_energy,
    difference_state,
    dissipative_bound,
    feedback_sum_identity_residual,
    fit_decay_rate,
    weighted_energy,
)
from .integrate import (
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    convergence_order,
    integrate,
    integrate_adaptive,
    integrate_fixed,
    rk4_step,
)
from .model import (
    AssumptionEnvelope,
    CubicNonlinearity,
    DerivedConstants,
    ModelParams,
    NetworkState,
    ParameterError,
    absorbing_entry_time,
    derived_constants,
    divergence_residual,
    envelope_for_cubic,
    f_eval,
    f_prime,
    feedback_controls,
    laplacian_periodic,
    rhs,
    verify_envelope,
)
from .sweep import SweepGrid, SweepRecord, random_initial, run_case, run_sweep

__version__ = "0.1.0"
