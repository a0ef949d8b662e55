//! Numerical laboratory for the reduced Maxwell-Bloch family and its
//! hyperbolic variant.

pub mod derivative;
pub mod error;
pub mod kink;
pub mod lax;
pub mod model;
pub mod ode;
pub mod pde;
pub mod poly;
pub mod soliton;
pub mod stability;

pub use num_complex::Complex64;
pub use derivative::{DerivativeScheme, Differentiator};
pub use error::{Result, RmbError};
pub use model::{
    bloch_quantity, hamiltonian, hamiltonian_paper_compat, make_params, Boundary, FieldState,
    Grid1D, ModelParams, Sign,
};
pub use pde::{integrate, rhs, sinh_gordon_residual, MonitorRecord, StepControl, Trajectory};
pub use kink::{solve_kink, KinkProblem, KinkSolution};
pub use lax::{
    default_lambdas, fit_pole_order, lax_l, lax_l_form, lax_m, lax_m_form, pde_residuals, poles,
    residual_correspondence, zcr_norm, zcr_residual, Correspondence, CorrespondenceReport, LaxForm, Patch,
};
pub use ode::{
    bloch_integrate, conserved_hc, eigenvalues3, fixed_points, integrate_ode, ode_bloch_quantity, ode_jacobian,
    ode_rhs, poincare_return, BlochSample, BlochState, BlochVariant, FixedPoint, FixedPointKind, OdeState,
    ReturnReport,
};
pub use soliton::{
    build_collision, complete_fields, find_peaks, sech_profile, track_and_phase_shift, Peak, PeakRecord,
    SechProfile, SolitonSpec, SolitonTrack, TrackConfig, TrackReport, TravellingWave, DEFAULT_N_INF,
};
pub use stability::{
    classify_regime, dispersion_coefficients, dispersion_roots, gain_curve, jacobian_oracle, linspace,
    stationary_state, BackgroundState, Formulation, GainCurve, Regime, RegimeReport,
};
